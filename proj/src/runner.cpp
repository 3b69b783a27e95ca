#include "critmc/runner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "critmc/sha1.hpp"
#include "critmc/vecops.hpp"

namespace critmc {

namespace {

namespace fs = std::filesystem;

std::string format_number(double v) {
    std::ostringstream oss;
    oss << std::setprecision(17) << v;
    return oss.str();
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << content;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ostringstream oss;
    for (std::size_t c = 0; c < header.size(); ++c)
        oss << header[c] << (c + 1 < header.size() ? ',' : '\n');
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            oss << format_number(row[c]) << (c + 1 < row.size() ? ',' : '\n');
    }
    write_text(path, oss.str());
}

std::string verdict_name(IntegrabilityVerdict v) {
    switch (v) {
        case IntegrabilityVerdict::Converges: return "converges";
        case IntegrabilityVerdict::Diverges: return "diverges";
        case IntegrabilityVerdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

BoundFlavor flavor_from_string(const std::string& s) {
    if (s == "F" || s == "f") return BoundFlavor::F;
    if (s == "div_plus" || s == "DivPlus") return BoundFlavor::DivPlus;
    if (s == "MF" || s == "mf") return BoundFlavor::MF;
    throw Error("unknown form-bound flavor '" + s + "'");
}

struct Emitter {
    fs::path dir;
    Json manifest_columns = Json::object();
    std::vector<std::string> outputs;

    void csv(const std::string& name, const std::vector<std::string>& header,
             const std::vector<std::vector<double>>& rows, const Json& units) {
        write_csv(dir / name, header, rows);
        manifest_columns[name] = units;
        outputs.push_back(name);
    }
    void script(const std::string& name, const std::string& body) {
        write_text(dir / name, body);
        outputs.push_back(name);
    }
};

std::string plot_preamble() {
    return "#!/usr/bin/env python3\n"
           "import csv, sys, os\n"
           "import matplotlib\n"
           "matplotlib.use(\"Agg\")\n"
           "import matplotlib.pyplot as plt\n\n"
           "here = os.path.dirname(os.path.abspath(__file__))\n"
           "def load(name):\n"
           "    with open(os.path.join(here, name)) as fh:\n"
           "        rows = list(csv.DictReader(fh))\n"
           "    return rows\n\n";
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg, int workers) {
    RunOutcome outcome;
    fs::create_directories(cfg.output_dir);
    Emitter em{fs::path(cfg.output_dir)};

    Json results;
    results["experiment"] = to_string(cfg.experiment);
    results["seed"] = cfg.seed;
    int exit_code = 0;

    try {
        switch (cfg.experiment) {
            case ExperimentKind::PhaseScan: {
                if (cfg.kappa_grid.empty())
                    throw Error("phase_scan requires analysis.kappa_grid");
                const auto rows =
                    collision_phase_scan(cfg.kappa_grid, cfg.make_plan(), workers);
                Json jrows = Json::array();
                std::vector<std::vector<double>> csv_rows;
                for (const auto& r : rows) {
                    Json jr;
                    jr["kappa"] = r.kappa;
                    jr["p"] = r.probability;
                    jr["stderr"] = r.stderr_;
                    jr["oracle_p"] = r.oracle_probability;
                    jrows.push_back(std::move(jr));
                    csv_rows.push_back(
                        {r.kappa, r.probability, r.stderr_, r.oracle_probability});
                }
                results["rows"] = std::move(jrows);
                em.csv("phase_scan.csv", {"kappa", "p", "stderr", "oracle_p"}, csv_rows,
                       {{"kappa", "dimensionless interaction strength"},
                        {"p", "collision probability"},
                        {"stderr", "binomial standard error"},
                        {"oracle_p", "Bessel first-passage probability (-1: none)"}});
                em.script("plot_phase_scan.py",
                          plot_preamble() +
                              "rows = load(\"phase_scan.csv\")\n"
                              "k = [float(r[\"kappa\"]) for r in rows]\n"
                              "p = [float(r[\"p\"]) for r in rows]\n"
                              "e = [float(r[\"stderr\"]) for r in rows]\n"
                              "o = [float(r[\"oracle_p\"]) for r in rows]\n"
                              "plt.errorbar(k, p, yerr=[3*x for x in e], fmt=\"o-\", "
                              "label=\"ensemble\", capsize=3)\n"
                              "if all(v >= 0 for v in o):\n"
                              "    plt.plot(k, o, \"s--\", label=\"Bessel oracle\")\n"
                              "plt.xlabel(\"kappa\")\n"
                              "plt.ylabel(\"collision probability by T\")\n"
                              "plt.legend()\n"
                              "plt.savefig(os.path.join(here, \"phase_scan.png\"), dpi=150)\n");
                break;
            }
            case ExperimentKind::HardyEstimate: {
                if (!cfg.kernel) throw Error("hardy_estimate requires a kernel");
                TrialFamilySpec family;
                family.family = (cfg.trial_family == "gaussian_bump")
                                    ? TrialFamily::GaussianBump
                                    : TrialFamily::RadialPower;
                const auto est =
                    estimate_form_bound(*cfg.kernel, flavor_from_string(cfg.flavor), family);
                results["flavor"] = cfg.flavor;
                results["estimate"] = est.value;
                results["direction"] = "lower_bound_of_sup";
                results["trial"] = est.trial_meta;
                try {
                    for (const auto& rec : nominal_form_bounds(*cfg.kernel)) {
                        if (rec.flavor == flavor_from_string(cfg.flavor)) {
                            results["analytic"] = rec.kappa;
                            results["fraction_of_analytic"] =
                                rec.kappa > 0.0 ? est.value / rec.kappa : 0.0;
                        }
                    }
                } catch (const NoAnalyticBound&) {
                    results["analytic"] = nullptr;
                }
                em.csv("hardy_estimate.csv", {"estimate"}, {{est.value}},
                       {{"estimate", "form-bound lower estimate"}});
                em.script("plot_hardy_estimate.py",
                          plot_preamble() +
                              "rows = load(\"hardy_estimate.csv\")\n"
                              "v = float(rows[0][\"estimate\"])\n"
                              "plt.bar([\"estimate\"], [v])\n"
                              "plt.ylabel(\"form-bound lower estimate\")\n"
                              "plt.savefig(os.path.join(here, \"hardy_estimate.png\"), dpi=150)\n");
                break;
            }
            case ExperimentKind::MultiparticleHardy: {
                const auto est =
                    estimate_multiparticle_hardy(cfg.dim, cfg.n_particles, cfg.budget, cfg.seed);
                results["ratio"] = est.value;
                results["mc_error"] = est.mc_error;
                results["upper_bound_for_constant"] = 1.0 / est.value;
                results["paper_constant"] = est.paper_floor;
                results["bracket"] = Json::array({est.paper_floor, 1.0 / est.value});
                results["trial"] = est.trial_meta;
                results["budget_exhausted"] = est.budget_exhausted;
                em.csv("multiparticle_hardy.csv",
                       {"ratio", "mc_error", "upper_bound", "paper_constant"},
                       {{est.value, est.mc_error, 1.0 / est.value, est.paper_floor}},
                       {{"ratio", "max of the Hardy quotient over trials"},
                        {"upper_bound", "1/ratio, candidate upper bound"},
                        {"paper_constant", "explicit lower bound C_{d,N}"}});
                em.script("plot_multiparticle_hardy.py",
                          plot_preamble() +
                              "rows = load(\"multiparticle_hardy.csv\")\n"
                              "up = float(rows[0][\"upper_bound\"])\n"
                              "lo = float(rows[0][\"paper_constant\"])\n"
                              "plt.bar([\"paper constant\", \"estimated upper bound\"], [lo, up])\n"
                              "plt.ylabel(\"many-particle Hardy constant bracket\")\n"
                              "plt.savefig(os.path.join(here, \"multiparticle_hardy.png\"), dpi=150)\n");
                break;
            }
            case ExperimentKind::PsiTest: {
                std::vector<double> grid = cfg.kappa_grid;
                if (grid.empty()) grid.push_back(cfg.kappa);
                Json jrows = Json::array();
                std::vector<std::vector<double>> csv_rows;
                for (double kp : grid) {
                    const auto rep = psi_integrability(kp, cfg.dim, cfg.w21_variant);
                    Json jr;
                    jr["kappa"] = kp;
                    jr["verdict"] = verdict_name(rep.verdict);
                    jr["fitted_rate"] = rep.fitted_rate;
                    jrows.push_back(std::move(jr));
                    csv_rows.push_back({kp, static_cast<double>(rep.verdict ==
                                                               IntegrabilityVerdict::Diverges),
                                        rep.fitted_rate});
                }
                results["w21_variant"] = cfg.w21_variant;
                results["rows"] = std::move(jrows);
                em.csv("psi_test.csv", {"kappa", "diverges", "fitted_rate"}, csv_rows,
                       {{"kappa", "strength"},
                        {"diverges", "1 when the inner integral diverges"},
                        {"fitted_rate", "estimate of -(alpha+1)"}});
                em.script("plot_psi_test.py",
                          plot_preamble() +
                              "rows = load(\"psi_test.csv\")\n"
                              "k = [float(r[\"kappa\"]) for r in rows]\n"
                              "rate = [float(r[\"fitted_rate\"]) for r in rows]\n"
                              "plt.axhline(0, color=\"k\", lw=0.5)\n"
                              "plt.plot(k, rate, \"o-\")\n"
                              "plt.xlabel(\"kappa\")\n"
                              "plt.ylabel(\"fitted divergence rate\")\n"
                              "plt.savefig(os.path.join(here, \"psi_test.png\"), dpi=150)\n");
                break;
            }
            case ExperimentKind::LyapunovAudit: {
                RandomStream rng(cfg.seed, 424242);
                double max_rel = 0.0;
                std::vector<std::vector<double>> csv_rows;
                int produced = 0;
                while (produced < cfg.audit_points) {
                    ParticleConfiguration x(cfg.n_particles, cfg.dim);
                    for (auto& c : x.positions) c = 2.0 * rng.next_gaussian();
                    if (x.min_pair_distance() < 1e-3) continue;
                    const auto terms = lyapunov_residual(cfg.kappa, x);
                    max_rel = std::max(max_rel, std::abs(terms.relative));
                    csv_rows.push_back({static_cast<double>(produced), terms.relative});
                    ++produced;
                }
                results["kappa"] = cfg.kappa;
                results["points"] = cfg.audit_points;
                results["max_relative_residual"] = max_rel;
                em.csv("lyapunov_audit.csv", {"point", "relative_residual"}, csv_rows,
                       {{"point", "sample index"},
                        {"relative_residual", "residual / max constituent term"}});
                em.script("plot_lyapunov_audit.py",
                          plot_preamble() +
                              "rows = load(\"lyapunov_audit.csv\")\n"
                              "r = [abs(float(x[\"relative_residual\"])) for x in rows]\n"
                              "plt.semilogy(r, \".\")\n"
                              "plt.xlabel(\"sample\"); plt.ylabel(\"|relative residual|\")\n"
                              "plt.savefig(os.path.join(here, \"lyapunov_audit.png\"), dpi=150)\n");
                break;
            }
            case ExperimentKind::HeatKernelCheck: {
                if (cfg.t_grid.empty()) throw Error("heat_kernel_check requires analysis.t_grid");
                const auto rep = heat_kernel_envelope_check(
                    cfg.kappa, cfg.dim, cfg.n_particles, cfg.t_grid, cfg.make_plan(), workers);
                Json jrows = Json::array();
                std::vector<std::vector<double>> csv_rows;
                for (const auto& r : rep.rows) {
                    Json jr;
                    jr["t"] = r.t;
                    jr["slope"] = r.slope;
                    jr["slope_coarse"] = r.slope_coarse;
                    jr["envelope_constant"] = r.envelope_constant;
                    jr["samples"] = r.samples;
                    jrows.push_back(std::move(jr));
                    csv_rows.push_back({r.t, r.slope, r.slope_coarse, r.envelope_constant,
                                        static_cast<double>(r.samples)});
                }
                results["expected_slope"] = rep.expected_slope;
                results["rows"] = std::move(jrows);
                em.csv("heat_kernel.csv",
                       {"t", "slope", "slope_coarse", "envelope_constant", "samples"},
                       csv_rows,
                       {{"t", "time"},
                        {"slope", "near-coincidence log-log density slope"},
                        {"envelope_constant", "fitted C with density <= C envelope"}});
                em.script(
                    "plot_heat_kernel.py",
                    plot_preamble() +
                        "rows = load(\"heat_kernel.csv\")\n"
                        "t = [float(r[\"t\"]) for r in rows]\n"
                        "s = [float(r[\"slope\"]) for r in rows]\n"
                        "c = [float(r[\"envelope_constant\"]) for r in rows]\n"
                        "fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 4))\n"
                        "a1.plot(t, s, \"o-\")\n"
                        "a1.set_xlabel(\"t\"); a1.set_ylabel(\"density slope\")\n"
                        "a2.plot(t, c, \"s-\")\n"
                        "a2.set_xlabel(\"t\"); a2.set_ylabel(\"envelope constant\")\n"
                        "fig.tight_layout()\n"
                        "fig.savefig(os.path.join(here, \"heat_kernel.png\"), dpi=150)\n");
                break;
            }
            case ExperimentKind::FeynmanKac: {
                FeynmanKacParams params;
                params.r0 = cfg.fk_r0;
                params.f_center = cfg.f_center;
                params.f_width = cfg.f_width;
                params.dt = cfg.dt;
                params.ensemble = cfg.ensemble;
                params.collision_radius = cfg.collision_radius;
                params.seed = cfg.seed;
                params.tolerance = cfg.fk_tolerance;
                const auto rep =
                    feynman_kac_check(cfg.kappa, cfg.dim, cfg.lambda, params, workers);
                results["kappa"] = cfg.kappa;
                results["lambda"] = cfg.lambda;
                results["mc_value"] = rep.mc_value;
                results["mc_stderr"] = rep.mc_stderr;
                results["bvp_value"] = rep.bvp_value;
                results["rel_error"] = rep.rel_error;
                results["tail_bound"] = rep.tail_bound;
                em.csv("feynman_kac.csv", {"mc_value", "mc_stderr", "bvp_value", "rel_error"},
                       {{rep.mc_value, rep.mc_stderr, rep.bvp_value, rep.rel_error}},
                       {{"mc_value", "Monte-Carlo resolvent"},
                        {"bvp_value", "radial two-point BVP resolvent"},
                        {"rel_error", "relative discrepancy"}});
                em.script("plot_feynman_kac.py",
                          plot_preamble() +
                              "rows = load(\"feynman_kac.csv\")\n"
                              "mc = float(rows[0][\"mc_value\"]); se = float(rows[0][\"mc_stderr\"])\n"
                              "bvp = float(rows[0][\"bvp_value\"])\n"
                              "plt.errorbar([0], [mc], yerr=[3*se], fmt=\"o\", capsize=4, label=\"Monte-Carlo\")\n"
                              "plt.axhline(bvp, color=\"C1\", label=\"radial BVP\")\n"
                              "plt.xticks([]); plt.ylabel(\"resolvent value\"); plt.legend()\n"
                              "plt.savefig(os.path.join(here, \"feynman_kac.png\"), dpi=150)\n");
                break;
            }
            case ExperimentKind::Krylov: {
                if (!cfg.kernel) throw Error("krylov requires a kernel (field g)");
                std::vector<double> lambdas = cfg.lambda_grid;
                if (lambdas.empty()) lambdas.push_back(cfg.lambda);
                KrylovParams params;
                params.f_amplitude = cfg.f_amplitude;
                params.f_rel_center = cfg.f_center;
                params.f_rel_width = cfg.f_width;
                params.horizon = cfg.horizon;
                params.dt = cfg.dt;
                params.ensemble = cfg.ensemble;
                params.seed = cfg.seed;
                Json jrows = Json::array();
                std::vector<std::vector<double>> csv_rows;
                for (double lam : lambdas) {
                    const auto rep = krylov_functional(cfg.make_plan(), *cfg.kernel, lam,
                                                       cfg.q_exponent, params, workers);
                    Json jr;
                    jr["lambda"] = lam;
                    jr["lhs"] = rep.lhs;
                    jr["lhs_stderr"] = rep.lhs_stderr;
                    jr["rhs"] = rep.rhs;
                    jr["ratio"] = rep.ratio;
                    jrows.push_back(std::move(jr));
                    csv_rows.push_back({lam, rep.lhs, rep.lhs_stderr, rep.rhs, rep.ratio});
                }
                results["q"] = cfg.q_exponent;
                results["rows"] = std::move(jrows);
                em.csv("krylov.csv", {"lambda", "lhs", "lhs_stderr", "rhs", "ratio"}, csv_rows,
                       {{"lambda", "resolvent discount"},
                        {"lhs", "expected discounted |g f| occupation"},
                        {"rhs", "||g |f|^{q/2}||_2^{2/q}"},
                        {"ratio", "lhs / rhs"}});
                em.script("plot_krylov.py",
                          plot_preamble() +
                              "rows = load(\"krylov.csv\")\n"
                              "lam = [float(r[\"lambda\"]) for r in rows]\n"
                              "ratio = [float(r[\"ratio\"]) for r in rows]\n"
                              "plt.semilogx(lam, ratio, \"o-\")\n"
                              "plt.xlabel(\"lambda\"); plt.ylabel(\"lhs / rhs\")\n"
                              "plt.savefig(os.path.join(here, \"krylov.png\"), dpi=150)\n");
                break;
            }
            case ExperimentKind::RawEnsemble: {
                const SimPlan plan = cfg.make_plan();
                const auto res = run_ensemble(plan, workers);
                results["collision_probability"] = res.collision_probability;
                results["collision_stderr"] = res.collision_stderr;
                results["flagged"] = res.flagged_count;
                Json fm = Json::array();
                for (const auto& f : res.functional_means) {
                    Json jf;
                    jf["name"] = f.name;
                    jf["mean"] = f.mean;
                    jf["stderr"] = f.stderr_;
                    fm.push_back(std::move(jf));
                }
                results["functional_means"] = std::move(fm);
                std::vector<std::vector<double>> csv_rows;
                for (std::size_t i = 0; i < res.outcomes.size(); ++i) {
                    const auto& o = res.outcomes[i];
                    csv_rows.push_back({static_cast<double>(i),
                                        o.collided ? 1.0 : 0.0,
                                        o.collision_time.value_or(-1.0),
                                        o.min_pair_distance_seen});
                }
                em.csv("ensemble.csv",
                       {"trajectory", "collided", "collision_time", "min_pair_distance"},
                       csv_rows,
                       {{"trajectory", "index"},
                        {"collided", "1 when min pair distance fell below collision_radius"},
                        {"collision_time", "first such time (-1: none)"},
                        {"min_pair_distance", "minimum over the path"}});
                if (plan.record_stride > 0) {
                    std::ostringstream oss;
                    oss << "trajectory,t";
                    for (int c = 0; c < plan.x0.n_particles * plan.x0.dim; ++c)
                        oss << ",x" << c;
                    oss << '\n';
                    for (std::size_t i = 0; i < res.outcomes.size(); ++i) {
                        for (const auto& [t, pos] : res.outcomes[i].path) {
                            oss << i << ',' << format_number(t);
                            for (double v : pos) oss << ',' << format_number(v);
                            oss << '\n';
                        }
                    }
                    write_text(em.dir / "trajectories.csv", oss.str());
                    em.manifest_columns["trajectories.csv"] = {
                        {"t", "time"}, {"x*", "flat configuration coordinates"}};
                    em.outputs.push_back("trajectories.csv");
                }
                em.script("plot_raw_ensemble.py",
                          plot_preamble() +
                              "rows = load(\"ensemble.csv\")\n"
                              "m = [float(r[\"min_pair_distance\"]) for r in rows]\n"
                              "plt.hist(m, bins=50)\n"
                              "plt.xlabel(\"min pair distance over the path\")\n"
                              "plt.ylabel(\"count\")\n"
                              "plt.savefig(os.path.join(here, \"raw_ensemble.png\"), dpi=150)\n");
                break;
            }
        }
    } catch (const Error& e) {
        results["error"] = e.what();
        exit_code = 1;
    }

    // results.json is timestamp-free and byte-stable for a fixed config+seed.
    std::ostringstream res_text;
    res_text << std::setprecision(17) << results.dump(2) << '\n';
    const fs::path results_path = em.dir / "results.json";
    write_text(results_path, res_text.str());
    em.outputs.push_back("results.json");

    Json manifest;
    manifest["experiment"] = to_string(cfg.experiment);
    manifest["resolved_config"] = cfg.resolved();
    const std::string cfg_dump = cfg.resolved().dump(2);
    manifest["config_hash"] = git_blob_hash(cfg_dump);
    manifest["seed"] = cfg.seed;
    const auto now = std::chrono::system_clock::now();
    manifest["timestamp_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    manifest["outputs"] = em.outputs;
    manifest["columns"] = em.manifest_columns;
    const fs::path manifest_path = em.dir / "manifest.json";
    write_text(manifest_path, manifest.dump(2) + "\n");

    outcome.exit_code = exit_code;
    outcome.results_path = results_path.string();
    outcome.manifest_path = manifest_path.string();
    outcome.results = std::move(results);
    return outcome;
}

}  // namespace critmc
