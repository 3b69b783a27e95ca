#pragma once

#include <string>

#include "critmc/config.hpp"

namespace critmc {

struct RunOutcome {
    int exit_code = 0;        ///< 0 ok, 1 runtime estimator failure
    std::string results_path;
    std::string manifest_path;
    Json results;
};

/// Execute the experiment and write results.json, CSV tables, manifest.json
/// (resolved config + content hash + seed) and the plotting script into
/// output_dir. Runtime estimator failures still write flagged partial
/// results and return exit code 1.
RunOutcome run_experiment(const ExperimentConfig& cfg, int workers = 0);

}  // namespace critmc
