#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "critmc/analysis.hpp"
#include "critmc/config.hpp"
#include "critmc/runner.hpp"

namespace py = pybind11;
using namespace critmc;

namespace {

ParticleConfiguration config_from_flat(int n, int d, std::vector<double> positions) {
    return ParticleConfiguration(n, d, std::move(positions));
}

py::dict ensemble_to_dict(const EnsembleResult& res) {
    py::dict out;
    out["collision_probability"] = res.collision_probability;
    out["collision_stderr"] = res.collision_stderr;
    out["flagged"] = res.flagged_count;
    py::list means;
    for (const auto& f : res.functional_means) {
        py::dict m;
        m["name"] = f.name;
        m["mean"] = f.mean;
        m["stderr"] = f.stderr_;
        means.append(m);
    }
    out["functional_means"] = means;
    py::list terminals, collided, min_dist;
    for (const auto& o : res.outcomes) {
        terminals.append(o.terminal.positions);
        collided.append(o.collided);
        min_dist.append(o.min_pair_distance_seen);
    }
    out["terminal_positions"] = terminals;
    out["collided"] = collided;
    out["min_pair_distance"] = min_dist;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Monte-Carlo laboratory for particle systems with critical singular interactions";

    py::register_exception<Error>(m, "CritmcError");

    py::enum_<BoundFlavor>(m, "BoundFlavor")
        .value("F", BoundFlavor::F)
        .value("MF", BoundFlavor::MF)
        .value("DivPlus", BoundFlavor::DivPlus);

    py::class_<KernelSpec>(m, "KernelSpec")
        .def_static("hardy_attracting", &KernelSpec::hardy_attracting, py::arg("kappa"),
                    py::arg("dim"))
        .def_static("hardy_repulsing", &KernelSpec::hardy_repulsing, py::arg("kappa"),
                    py::arg("dim"))
        .def_static("weighted_hardy", &KernelSpec::weighted_hardy, py::arg("kappa"),
                    py::arg("dim"), py::arg("cap_fraction"))
        .def_static("hypersurface", &KernelSpec::hypersurface, py::arg("beta"), py::arg("dim"))
        .def_static("bounded_smooth", &KernelSpec::bounded_smooth, py::arg("value"))
        .def_static("sum", &KernelSpec::sum, py::arg("components"))
        .def_static("scaled", &KernelSpec::scaled, py::arg("factor"), py::arg("child"))
        .def_property_readonly("kappa", [](const KernelSpec& k) { return k.kappa; })
        .def_property_readonly("dim", [](const KernelSpec& k) { return k.dim; })
        .def("eval",
             [](const KernelSpec& k, std::vector<double> y) {
                 return eval_kernel(k, y);
             },
             py::arg("y"))
        .def("divergence",
             [](const KernelSpec& k, std::vector<double> y) { return divergence(k, y); },
             py::arg("y"))
        .def("nominal_form_bounds", [](const KernelSpec& k) {
            py::list out;
            for (const auto& rec : nominal_form_bounds(k)) {
                py::dict d;
                d["kappa"] = rec.kappa;
                d["c_kappa"] = rec.c_kappa;
                d["flavor"] = rec.flavor;
                out.append(d);
            }
            return out;
        });

    py::class_<MollifiedKernel>(m, "MollifiedKernel")
        .def(py::init<KernelSpec, double, int, int, int>(), py::arg("base"),
             py::arg("epsilon"), py::arg("radial_nodes") = 32, py::arg("polar_nodes") = 12,
             py::arg("azimuth_nodes") = 24)
        .def_property_readonly("epsilon", &MollifiedKernel::epsilon)
        .def("eval", [](const MollifiedKernel& k, std::vector<double> y) {
            return k.eval(y);
        });

    m.def("mollify", &mollify, py::arg("base"), py::arg("epsilon"));

    // lifted drift and invariant-density operations
    m.def(
        "eval_drift",
        [](const KernelSpec& kernel, int n, int d, std::vector<double> positions) {
            const auto drift = LiftedDrift::uniform(kernel, n);
            return eval_drift(drift, config_from_flat(n, d, std::move(positions)));
        },
        py::arg("kernel"), py::arg("n_particles"), py::arg("dim"), py::arg("positions"),
        "b(x) with b_i = (1/N) sum_{j != i} K(x_i - x_j)");

    m.def("lifted_form_bound",
          [](double kappa, double c, int n) {
              const auto b = lifted_form_bound(kappa, c, n);
              return py::make_tuple(b.delta, b.c_delta);
          });
    m.def("lifted_div_bound", [](double kappa, double c, int n) {
        const auto b = lifted_div_bound(kappa, c, n);
        return py::make_tuple(b.delta, b.c_delta);
    });
    m.def("lifted_mf_bound", [](double kappa, double c, int n) {
        const auto b = lifted_mf_bound(kappa, c, n);
        return py::make_tuple(b.delta, b.c_delta);
    });
    m.def("lifted_power_bound", [](double sigma, double c, int n, double alpha) {
        const auto b = lifted_power_bound(sigma, c, n, alpha);
        return py::make_tuple(b.delta, b.c_delta);
    });

    m.def(
        "invariant_density",
        [](double kappa, int n, int d, std::vector<double> positions) {
            return invariant_density(kappa, config_from_flat(n, d, std::move(positions)));
        },
        py::arg("kappa"), py::arg("n_particles"), py::arg("dim"), py::arg("positions"));

    m.def(
        "lyapunov_residual",
        [](double kappa, int n, int d, std::vector<double> positions) {
            const auto t =
                lyapunov_residual(kappa, config_from_flat(n, d, std::move(positions)));
            py::dict out;
            out["residual"] = t.residual;
            out["relative"] = t.relative;
            out["psi"] = t.psi;
            return out;
        },
        py::arg("kappa"), py::arg("n_particles"), py::arg("dim"), py::arg("positions"));

    py::class_<EtaProfile>(m, "EtaProfile")
        .def(py::init<double, int, int>(), py::arg("kappa"), py::arg("dim"),
             py::arg("n_particles"))
        .def_property_readonly("exponent", &EtaProfile::exponent)
        .def_property_readonly("blend_min", &EtaProfile::blend_min)
        .def("__call__", &EtaProfile::value, py::arg("r"));

    m.def(
        "heat_kernel_envelope",
        [](const EtaProfile& eta, double t, int n, int d, std::vector<double> positions) {
            return heat_kernel_envelope(eta, t, config_from_flat(n, d, std::move(positions)));
        },
        py::arg("profile"), py::arg("t"), py::arg("n_particles"), py::arg("dim"),
        py::arg("positions"));

    m.def("paper_hardy_constant", &paper_hardy_constant, py::arg("dim"),
          py::arg("n_particles"));
    m.def("bessel_dimension", &bessel_dimension, py::arg("kappa"), py::arg("dim"));
    m.def("bessel_hit_probability", &bessel_hit_probability, py::arg("nu"), py::arg("r0"),
          py::arg("threshold"), py::arg("horizon"), py::arg("grid_nodes") = 2000);

    m.def(
        "estimate_form_bound",
        [](const KernelSpec& kernel, BoundFlavor flavor) {
            const auto est = estimate_form_bound(kernel, flavor);
            py::dict out;
            out["value"] = est.value;
            out["trial"] = est.trial_meta;
            return out;
        },
        py::arg("kernel"), py::arg("flavor"));

    m.def(
        "estimate_multiparticle_hardy",
        [](int dim, int n, long budget, std::uint64_t seed) {
            const auto est = estimate_multiparticle_hardy(dim, n, budget, seed);
            py::dict out;
            out["ratio"] = est.value;
            out["mc_error"] = est.mc_error;
            out["upper_bound_for_constant"] = 1.0 / est.value;
            out["paper_constant"] = est.paper_floor;
            out["trial"] = est.trial_meta;
            return out;
        },
        py::arg("dim"), py::arg("n_particles"), py::arg("budget") = 100000,
        py::arg("seed") = 7);

    m.def(
        "psi_integrability",
        [](double kappa, int dim, bool w21) {
            const auto rep = psi_integrability(kappa, dim, w21);
            py::dict out;
            const char* verdict = "inconclusive";
            if (rep.verdict == IntegrabilityVerdict::Converges) verdict = "converges";
            if (rep.verdict == IntegrabilityVerdict::Diverges) verdict = "diverges";
            out["verdict"] = verdict;
            out["fitted_rate"] = rep.fitted_rate;
            return out;
        },
        py::arg("kappa"), py::arg("dim"), py::arg("w21") = false);

    m.def(
        "run_pair_ensemble",
        [](const KernelSpec& kernel, double pair_distance, double dt, double horizon,
           double collision_radius, long ensemble, std::uint64_t seed, int workers) {
            SimPlan plan;
            plan.drift = LiftedDrift::uniform(kernel, 2);
            plan.x0 = ParticleConfiguration(2, kernel.dim);
            plan.x0.block(0)[0] = 0.5 * pair_distance;
            plan.x0.block(1)[0] = -0.5 * pair_distance;
            plan.dt = dt;
            plan.horizon = horizon;
            plan.collision_radius = collision_radius;
            plan.seed = seed;
            plan.ensemble = ensemble;
            return ensemble_to_dict(run_ensemble(plan, workers));
        },
        py::arg("kernel"), py::arg("pair_distance") = 1.0, py::arg("dt") = 1e-3,
        py::arg("horizon") = 1.0, py::arg("collision_radius") = 1e-3,
        py::arg("ensemble") = 1000, py::arg("seed") = 0, py::arg("workers") = 0,
        "Seeded two-particle ensemble with collision detection");

    m.def(
        "run_experiment",
        [](const std::string& config_json, int workers) {
            const auto cfg = parse_config(Json::parse(config_json));
            const auto outcome = run_experiment(cfg, workers);
            py::dict out;
            out["exit_code"] = outcome.exit_code;
            out["results_path"] = outcome.results_path;
            out["results_json"] = outcome.results.dump();
            return out;
        },
        py::arg("config_json"), py::arg("workers") = 0,
        "Run a declarative experiment config (JSON string); writes artifacts to its output_dir");
}
