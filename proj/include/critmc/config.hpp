#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "critmc/analysis.hpp"
#include "critmc/kernels.hpp"
#include "critmc/sde.hpp"

namespace critmc {

using Json = nlohmann::ordered_json;

enum class ExperimentKind {
    PhaseScan,
    HardyEstimate,
    MultiparticleHardy,
    PsiTest,
    LyapunovAudit,
    HeatKernelCheck,
    FeynmanKac,
    Krylov,
    RawEnsemble,
};

std::string to_string(ExperimentKind kind);

struct Diagnostic {
    enum class Level { Error, Warning, Info } level;
    std::string field;
    std::string message;
};

/// Declarative experiment description; strict schema (unknown keys reject).
struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::RawEnsemble;
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    std::optional<KernelSpec> kernel;
    int n_particles = 2;
    int dim = 3;
    std::vector<double> x0;  ///< flat N*d; empty = axis-separated default
    double pair_distance = 1.0;
    double dt = 1e-3;
    double horizon = 1.0;
    Scheme scheme = Scheme::EulerMaruyama;
    double collision_radius = 1e-3;
    int max_substeps = 64;
    long ensemble = 1000;
    std::vector<double> epsilon_schedule;
    std::vector<double> snapshot_times;
    int record_stride = 0;

    // per-experiment analysis parameters
    double kappa = 1.0;
    std::vector<double> kappa_grid;
    std::string flavor = "F";
    std::string trial_family = "radial_power";
    long budget = 100000;
    bool w21_variant = false;
    int audit_points = 100;
    std::vector<double> t_grid;
    std::vector<double> lambda_grid;
    double lambda = 1.0;
    double q_exponent = 6.0;
    double f_center = 1.5;
    double f_width = 0.15;
    double f_amplitude = 1.0;
    double fk_r0 = 1.5;
    double fk_tolerance = 0.05;

    Json resolved() const;

    /// Build the SimPlan implied by the sim section (drift from `kernel`).
    SimPlan make_plan() const;
};

/// Parse and strictly validate; throws Error with a field diagnostic.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::string& path);

/// Schema plus cross-field diagnostics; never throws.
std::vector<Diagnostic> validate_config_json(const Json& j);
std::vector<Diagnostic> validate_config_file(const std::string& path);

KernelSpec kernel_from_json(const Json& j);
Json kernel_to_json(const KernelSpec& spec);

/// Configuration I/O of particle configurations: flat array of length N*d
/// with {n_particles, dim} metadata.
Json configuration_to_json(const ParticleConfiguration& x);
ParticleConfiguration configuration_from_json(const Json& j);

}  // namespace critmc
