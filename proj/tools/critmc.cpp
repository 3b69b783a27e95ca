#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "critmc/config.hpp"
#include "critmc/runner.hpp"

using namespace critmc;

namespace {

int cmd_run(const std::string& config_path, int workers, long seed_override,
            const std::string& output_override) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (!output_override.empty()) cfg.output_dir = output_override;

    const auto outcome = run_experiment(cfg, workers);
    if (outcome.exit_code != 0) {
        std::fprintf(stderr, "runtime failure: %s (partial results in %s)\n",
                     outcome.results.value("error", std::string("unknown")).c_str(),
                     outcome.results_path.c_str());
    } else {
        std::printf("wrote %s\n", outcome.results_path.c_str());
    }
    return outcome.exit_code;
}

int cmd_validate(const std::string& config_path) {
    const auto diags = validate_config_file(config_path);
    bool has_error = false;
    for (const auto& d : diags) {
        const char* level = "info";
        if (d.level == Diagnostic::Level::Error) {
            level = "error";
            has_error = true;
        } else if (d.level == Diagnostic::Level::Warning) {
            level = "warning";
        }
        if (d.field.empty()) {
            std::printf("%s: %s\n", level, d.message.c_str());
        } else {
            std::printf("%s: %s: %s\n", level, d.field.c_str(), d.message.c_str());
        }
    }
    if (diags.empty()) std::printf("ok\n");
    return has_error ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte-Carlo laboratory for particle systems with critical singular interactions"};
    app.require_subcommand(1);
    app.fallthrough();

    int workers = 0;
    long seed = -1;
    std::string output;
    app.add_option("--workers", workers, "worker threads (default: logical cores)");
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--output", output, "override the output directory");

    std::string run_config, validate_config;
    auto* run = app.add_subcommand("run", "execute an experiment config");
    run->add_option("config", run_config, "path to the config file")->required();
    auto* validate = app.add_subcommand("validate", "check a config and report diagnostics");
    validate->add_option("config", validate_config, "path to the config file")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(run_config, workers, seed, output);
    if (validate->parsed()) return cmd_validate(validate_config);
    return 0;
}
