#include "critmc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace critmc {

namespace {

void reject_unknown_keys(const Json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw Error("unknown field '" + where + key + "'");
        }
    }
}

double get_number(const Json& j, const std::string& key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

std::vector<double> get_array(const Json& j, const std::string& key) {
    std::vector<double> out;
    if (j.contains(key))
        for (const auto& v : j.at(key)) out.push_back(v.get<double>());
    return out;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::PhaseScan: return "phase_scan";
        case ExperimentKind::HardyEstimate: return "hardy_estimate";
        case ExperimentKind::MultiparticleHardy: return "multiparticle_hardy";
        case ExperimentKind::PsiTest: return "psi_test";
        case ExperimentKind::LyapunovAudit: return "lyapunov_audit";
        case ExperimentKind::HeatKernelCheck: return "heat_kernel_check";
        case ExperimentKind::FeynmanKac: return "feynman_kac";
        case ExperimentKind::Krylov: return "krylov";
        case ExperimentKind::RawEnsemble: return "raw_ensemble";
    }
    return "unknown";
}

namespace {

ExperimentKind experiment_from_string(const std::string& s) {
    for (auto kind :
         {ExperimentKind::PhaseScan, ExperimentKind::HardyEstimate,
          ExperimentKind::MultiparticleHardy, ExperimentKind::PsiTest,
          ExperimentKind::LyapunovAudit, ExperimentKind::HeatKernelCheck,
          ExperimentKind::FeynmanKac, ExperimentKind::Krylov, ExperimentKind::RawEnsemble}) {
        if (to_string(kind) == s) return kind;
    }
    throw Error("unknown experiment '" + s + "'");
}

}  // namespace

KernelSpec kernel_from_json(const Json& j) {
    reject_unknown_keys(j, {"kind", "kappa", "dim", "params"}, "kernel.");
    const std::string kind = j.at("kind").get<std::string>();
    const Json params = j.contains("params") ? j.at("params") : Json::object();
    const double kappa = get_number(j, "kappa", 0.0);
    const int dim = j.contains("dim") ? j.at("dim").get<int>() : 3;

    if (kind == "hardy_attracting") {
        reject_unknown_keys(params, {}, "kernel.params.");
        return KernelSpec::hardy_attracting(kappa, dim);
    }
    if (kind == "hardy_repulsing") {
        reject_unknown_keys(params, {}, "kernel.params.");
        return KernelSpec::hardy_repulsing(kappa, dim);
    }
    if (kind == "weighted_hardy") {
        reject_unknown_keys(params, {"cap_fraction"}, "kernel.params.");
        return KernelSpec::weighted_hardy(kappa, dim, get_number(params, "cap_fraction", 1.0));
    }
    if (kind == "hypersurface") {
        reject_unknown_keys(params, {"beta"}, "kernel.params.");
        return KernelSpec::hypersurface(get_number(params, "beta", 2.0), dim);
    }
    if (kind == "bounded_smooth") {
        reject_unknown_keys(params, {"value"}, "kernel.params.");
        std::vector<double> value = get_array(params, "value");
        if (value.empty()) value.assign(dim, 0.0);
        return KernelSpec::bounded_smooth(std::move(value));
    }
    if (kind == "sum") {
        reject_unknown_keys(params, {"components"}, "kernel.params.");
        std::vector<KernelSpec> components;
        for (const auto& c : params.at("components")) components.push_back(kernel_from_json(c));
        return KernelSpec::sum(std::move(components));
    }
    if (kind == "scaled") {
        reject_unknown_keys(params, {"factor", "child"}, "kernel.params.");
        return KernelSpec::scaled(get_number(params, "factor", 1.0),
                                  kernel_from_json(params.at("child")));
    }
    throw Error("unknown kernel kind '" + kind + "'");
}

Json kernel_to_json(const KernelSpec& spec) {
    Json j;
    j["kind"] = to_string(spec.kind);
    j["kappa"] = spec.kappa;
    j["dim"] = spec.dim;
    Json params = Json::object();
    switch (spec.kind) {
        case KernelKind::WeightedHardy:
            params["cap_fraction"] = spec.cap_fraction;
            break;
        case KernelKind::Hypersurface:
            params["beta"] = spec.beta;
            break;
        case KernelKind::BoundedSmooth:
            params["value"] = spec.value;
            break;
        case KernelKind::Sum: {
            Json comps = Json::array();
            for (const auto& c : spec.children) comps.push_back(kernel_to_json(c));
            params["components"] = std::move(comps);
            break;
        }
        case KernelKind::Scaled:
            params["factor"] = spec.factor;
            params["child"] = kernel_to_json(spec.children.front());
            break;
        default:
            break;
    }
    if (!params.empty()) j["params"] = std::move(params);
    return j;
}

Json configuration_to_json(const ParticleConfiguration& x) {
    Json j;
    j["n_particles"] = x.n_particles;
    j["dim"] = x.dim;
    j["positions"] = x.positions;
    return j;
}

ParticleConfiguration configuration_from_json(const Json& j) {
    reject_unknown_keys(j, {"n_particles", "dim", "positions"}, "configuration.");
    ParticleConfiguration x(j.at("n_particles").get<int>(), j.at("dim").get<int>());
    x.positions = j.at("positions").get<std::vector<double>>();
    x.validate();
    return x;
}

namespace {

const std::set<std::string> kTopKeys{"experiment", "seed", "output_dir", "kernel", "sim",
                                     "analysis"};
const std::set<std::string> kSimKeys{
    "n_particles",     "dim",          "x0",           "pair_distance", "dt",
    "horizon",         "scheme",       "collision_radius", "max_substeps",
    "ensemble",        "epsilon_schedule", "snapshot_times", "record_stride"};
const std::set<std::string> kAnalysisKeys{
    "kappa",     "kappa_grid", "flavor",      "trial_family", "budget",
    "w21",       "points",     "t_grid",      "lambda",       "lambda_grid",
    "q",         "f_center",   "f_width",     "f_amplitude",  "r0",
    "tolerance"};

}  // namespace

ExperimentConfig parse_config(const Json& j) {
    reject_unknown_keys(j, kTopKeys, "");
    ExperimentConfig cfg;
    if (!j.contains("experiment")) throw Error("missing required field 'experiment'");
    cfg.experiment = experiment_from_string(j.at("experiment").get<std::string>());
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("kernel")) cfg.kernel = kernel_from_json(j.at("kernel"));

    if (j.contains("sim")) {
        const Json& sim = j.at("sim");
        reject_unknown_keys(sim, kSimKeys, "sim.");
        cfg.n_particles = sim.contains("n_particles") ? sim.at("n_particles").get<int>() : 2;
        cfg.dim = sim.contains("dim") ? sim.at("dim").get<int>() : 3;
        cfg.x0 = get_array(sim, "x0");
        cfg.pair_distance = get_number(sim, "pair_distance", 1.0);
        cfg.dt = get_number(sim, "dt", 1e-3);
        cfg.horizon = get_number(sim, "horizon", 1.0);
        if (sim.contains("scheme")) {
            const std::string s = sim.at("scheme").get<std::string>();
            if (s == "euler_maruyama") {
                cfg.scheme = Scheme::EulerMaruyama;
            } else if (s == "tamed_euler") {
                cfg.scheme = Scheme::TamedEuler;
            } else {
                throw Error("unknown scheme '" + s + "'");
            }
        }
        cfg.collision_radius = get_number(sim, "collision_radius", 1e-3);
        cfg.max_substeps =
            sim.contains("max_substeps") ? sim.at("max_substeps").get<int>() : 64;
        cfg.ensemble = sim.contains("ensemble") ? sim.at("ensemble").get<long>() : 1000;
        cfg.epsilon_schedule = get_array(sim, "epsilon_schedule");
        cfg.snapshot_times = get_array(sim, "snapshot_times");
        cfg.record_stride =
            sim.contains("record_stride") ? sim.at("record_stride").get<int>() : 0;
    }

    if (j.contains("analysis")) {
        const Json& an = j.at("analysis");
        reject_unknown_keys(an, kAnalysisKeys, "analysis.");
        cfg.kappa = get_number(an, "kappa", 1.0);
        cfg.kappa_grid = get_array(an, "kappa_grid");
        if (an.contains("flavor")) cfg.flavor = an.at("flavor").get<std::string>();
        if (an.contains("trial_family"))
            cfg.trial_family = an.at("trial_family").get<std::string>();
        if (an.contains("budget")) cfg.budget = an.at("budget").get<long>();
        if (an.contains("w21")) cfg.w21_variant = an.at("w21").get<bool>();
        if (an.contains("points")) cfg.audit_points = an.at("points").get<int>();
        cfg.t_grid = get_array(an, "t_grid");
        cfg.lambda_grid = get_array(an, "lambda_grid");
        cfg.lambda = get_number(an, "lambda", 1.0);
        cfg.q_exponent = get_number(an, "q", 6.0);
        cfg.f_center = get_number(an, "f_center", 1.5);
        cfg.f_width = get_number(an, "f_width", 0.15);
        cfg.f_amplitude = get_number(an, "f_amplitude", 1.0);
        cfg.fk_r0 = get_number(an, "r0", 1.5);
        cfg.fk_tolerance = get_number(an, "tolerance", 0.05);
    }

    if (cfg.dim < 3)
        throw Error("sim.dim = " + std::to_string(cfg.dim) +
                    " unsupported: the model requires d >= 3");
    if (cfg.n_particles < 2) throw Error("sim.n_particles must be >= 2");
    if (!cfg.x0.empty() &&
        static_cast<int>(cfg.x0.size()) != cfg.n_particles * cfg.dim)
        throw Error("sim.x0 must be a flat array of length N*d");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw Error(std::string("config parse error: ") + e.what());
    }
    return parse_config(j);
}

Json ExperimentConfig::resolved() const {
    Json j;
    j["experiment"] = to_string(experiment);
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    if (kernel) j["kernel"] = kernel_to_json(*kernel);
    Json sim;
    sim["n_particles"] = n_particles;
    sim["dim"] = dim;
    if (!x0.empty()) sim["x0"] = x0;
    sim["pair_distance"] = pair_distance;
    sim["dt"] = dt;
    sim["horizon"] = horizon;
    sim["scheme"] = (scheme == Scheme::EulerMaruyama) ? "euler_maruyama" : "tamed_euler";
    sim["collision_radius"] = collision_radius;
    sim["max_substeps"] = max_substeps;
    sim["ensemble"] = ensemble;
    if (!epsilon_schedule.empty()) sim["epsilon_schedule"] = epsilon_schedule;
    if (!snapshot_times.empty()) sim["snapshot_times"] = snapshot_times;
    if (record_stride > 0) sim["record_stride"] = record_stride;
    j["sim"] = std::move(sim);
    Json an;
    an["kappa"] = kappa;
    if (!kappa_grid.empty()) an["kappa_grid"] = kappa_grid;
    an["flavor"] = flavor;
    an["trial_family"] = trial_family;
    an["budget"] = budget;
    an["w21"] = w21_variant;
    an["points"] = audit_points;
    if (!t_grid.empty()) an["t_grid"] = t_grid;
    if (!lambda_grid.empty()) an["lambda_grid"] = lambda_grid;
    an["lambda"] = lambda;
    an["q"] = q_exponent;
    an["f_center"] = f_center;
    an["f_width"] = f_width;
    an["f_amplitude"] = f_amplitude;
    an["r0"] = fk_r0;
    an["tolerance"] = fk_tolerance;
    j["analysis"] = std::move(an);
    return j;
}

SimPlan ExperimentConfig::make_plan() const {
    SimPlan plan;
    KernelSpec k = kernel ? *kernel
                          : KernelSpec::bounded_smooth(std::vector<double>(dim, 0.0));
    plan.drift = LiftedDrift::uniform(k, n_particles);
    plan.x0 = ParticleConfiguration(n_particles, dim);
    if (!x0.empty()) {
        plan.x0.positions = x0;
    } else if (n_particles == 2) {
        plan.x0.block(0)[0] = 0.5 * pair_distance;
        plan.x0.block(1)[0] = -0.5 * pair_distance;
    } else {
        // regular polygon in the first two coordinates
        for (int i = 0; i < n_particles; ++i) {
            const double angle = 2.0 * std::numbers::pi * i / n_particles;
            plan.x0.block(i)[0] = pair_distance * std::cos(angle);
            plan.x0.block(i)[1] = pair_distance * std::sin(angle);
        }
    }
    plan.dt = dt;
    plan.horizon = horizon;
    plan.scheme = scheme;
    plan.collision_radius = collision_radius;
    plan.max_substeps = max_substeps;
    plan.seed = seed;
    plan.ensemble = ensemble;
    plan.epsilon_schedule = epsilon_schedule;
    plan.snapshot_times = snapshot_times;
    plan.record_stride = record_stride;
    return plan;
}

std::vector<Diagnostic> validate_config_json(const Json& j) {
    std::vector<Diagnostic> out;
    ExperimentConfig cfg;
    try {
        cfg = parse_config(j);
    } catch (const std::exception& e) {
        out.push_back({Diagnostic::Level::Error, "", e.what()});
        return out;
    }
    if (!cfg.epsilon_schedule.empty()) {
        for (double eps : cfg.epsilon_schedule) {
            if (eps > cfg.collision_radius) {
                std::ostringstream oss;
                oss << "mollification radius " << eps << " exceeds collision_radius "
                    << cfg.collision_radius;
                out.push_back({Diagnostic::Level::Warning, "sim.epsilon_schedule", oss.str()});
            } else if (eps > 0.25 * cfg.collision_radius) {
                out.push_back({Diagnostic::Level::Warning, "sim.epsilon_schedule",
                               "radius above collision_radius/4: oracle comparisons degrade"});
            }
        }
    }
    const auto near = [](double a, double b) { return std::abs(a - b) <= 0.05 * b; };
    std::vector<double> kappas = cfg.kappa_grid;
    kappas.push_back(cfg.kappa);
    if (cfg.kernel) kappas.push_back(cfg.kernel->kappa);
    const double d = cfg.dim;
    const double summability = 16.0 * d * d / ((d - 2.0) * (d - 2.0));
    for (double kp : kappas) {
        if (near(kp, 16.0))
            out.push_back({Diagnostic::Level::Info, "analysis.kappa",
                           "strength near the collision threshold kappa = 16"});
        if (near(kp, summability))
            out.push_back({Diagnostic::Level::Info, "analysis.kappa",
                           "strength near the summability threshold 16 (d/(d-2))^2"});
    }
    if (cfg.dt > cfg.horizon)
        out.push_back({Diagnostic::Level::Error, "sim.dt", "dt exceeds the horizon"});
    return out;
}

std::vector<Diagnostic> validate_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) return {{Diagnostic::Level::Error, "", "cannot open config file '" + path + "'"}};
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        return {{Diagnostic::Level::Error, "", std::string("config parse error: ") + e.what()}};
    }
    return validate_config_json(j);
}

}  // namespace critmc
