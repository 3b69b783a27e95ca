#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "critmc/lift.hpp"

namespace critmc {

enum class Scheme { EulerMaruyama, TamedEuler };

/// Accumulator int_0^T e^{-lambda s} f(omega_s) ds, left-endpoint quadrature.
struct PathFunctional {
    std::string name;
    double lambda = 0.0;
    bool drift_norm = false;  ///< integrand |b(omega_s)| instead of f
    std::function<double(const ParticleConfiguration&)> observable;
};

struct SimPlan {
    LiftedDrift drift;
    ParticleConfiguration x0;
    double dt = 1e-3;
    double horizon = 1.0;
    Scheme scheme = Scheme::EulerMaruyama;
    std::vector<double> epsilon_schedule;  ///< mollification radii for eps -> 0 studies
    double collision_radius = 1e-3;
    int max_substeps = 64;  ///< substep budget per base step (amortized over the horizon)
    std::uint64_t seed = 0;
    long ensemble = 1;
    std::vector<PathFunctional> functionals;
    std::vector<double> snapshot_times;  ///< exact-time marginals, strictly increasing
    int record_stride = 0;               ///< >0: store (t, positions) every k-th step

    void validate() const;
};

struct TrajectoryOutcome {
    bool collided = false;
    std::optional<double> collision_time;
    ParticleConfiguration terminal;
    std::vector<double> functional_values;
    double min_pair_distance_seen = 0.0;
    std::vector<ParticleConfiguration> snapshots;
    std::vector<std::pair<double, std::vector<double>>> path;  // when record_stride > 0
    bool flagged = false;
    std::string flag_reason;
};

struct FunctionalStat {
    std::string name;
    double mean = 0.0;
    double stderr_ = 0.0;
};

struct EnsembleResult {
    std::vector<TrajectoryOutcome> outcomes;
    double collision_probability = 0.0;
    double collision_stderr = 0.0;
    std::vector<FunctionalStat> functional_means;
    long flagged_count = 0;
};

/// One explicit update x' = x - b dt + sqrt(2 dt) xi (or the tamed variant).
ParticleConfiguration step(const LiftedDrift& drift, const ParticleConfiguration& x, double dt,
                           std::span<const double> gaussian_increment,
                           Scheme scheme = Scheme::EulerMaruyama);

/// Integrate one trajectory. The stream is derived from (plan.seed, index),
/// so the outcome is independent of scheduling.
TrajectoryOutcome simulate(const SimPlan& plan, std::uint64_t trajectory_index);

/// Work-stealing parallel ensemble; result is bitwise independent of workers.
EnsembleResult run_ensemble(const SimPlan& plan, int workers = 0);

/// Replace every singular raw pair kernel with its mollification (eps > 0).
LiftedDrift mollify_drift(const LiftedDrift& drift, double epsilon);

/// run_ensemble once per entry of plan.epsilon_schedule (0 entries = raw kernel).
std::vector<EnsembleResult> run_epsilon_sweep(const SimPlan& plan, int workers = 0);

}  // namespace critmc
