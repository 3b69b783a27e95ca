#include "critmc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "critmc/vecops.hpp"

namespace critmc {

double bessel_dimension(double kappa, int dim) {
    if (dim < 3) throw UnsupportedDim("bessel_dimension requires d >= 3");
    if (kappa < 0.0) throw Error("bessel_dimension requires kappa >= 0");
    return dim - std::sqrt(kappa) * (dim - 2) / 4.0;
}

BesselOracle make_bessel_oracle(double kappa, int dim) {
    return {bessel_dimension(kappa, dim), kappa, dim};
}

namespace {

/// One Crank-Nicolson solve of the first-passage problem on a log grid.
double bessel_hit_once(double nu, double r0, double threshold, double horizon, int n,
                       int nt) {
    const double r_in = (threshold > 0.0) ? threshold : r0 * 1e-8;
    const double r_max = std::max(4.0 * r0, r0 + 12.0 * std::sqrt(horizon));
    const double s0 = std::log(r_in), s1 = std::log(r_max);
    const double h = (s1 - s0) / (n - 1);

    std::vector<double> alpha(n), beta(n);
    for (int i = 0; i < n; ++i) {
        const double r = std::exp(s0 + i * h);
        alpha[i] = 0.5 / (r * r);            // u_ss coefficient
        beta[i] = 0.5 * (nu - 2.0) / (r * r);  // u_s coefficient
    }

    // Generator stencil A: alpha (u_{i+1} - 2u_i + u_{i-1})/h^2 + beta (u_{i+1}-u_{i-1})/(2h)
    std::vector<double> al(n), ad(n), au(n);
    for (int i = 1; i + 1 < n; ++i) {
        al[i] = alpha[i] / (h * h) - beta[i] / (2.0 * h);
        ad[i] = -2.0 * alpha[i] / (h * h);
        au[i] = alpha[i] / (h * h) + beta[i] / (2.0 * h);
    }
    // inner Dirichlet u = 1 (absorbed), outer no-flux (ghost u_n = u_{n-2}).
    al[n - 1] = 2.0 * alpha[n - 1] / (h * h);
    ad[n - 1] = -2.0 * alpha[n - 1] / (h * h);
    au[n - 1] = 0.0;

    std::vector<double> u(n, 0.0);
    u[0] = 1.0;

    auto do_step = [&](double dt_step, double theta) {
        std::vector<double> lower(n), diag(n), upper(n), rhs(n);
        lower[0] = 0.0;
        diag[0] = 1.0;
        upper[0] = 0.0;
        rhs[0] = 1.0;
        for (int i = 1; i < n; ++i) {
            lower[i] = -theta * dt_step * al[i];
            diag[i] = 1.0 - theta * dt_step * ad[i];
            upper[i] = -theta * dt_step * au[i];
            const double expl = (1.0 - theta) * dt_step;
            const double up1 = (i + 1 < n) ? u[i + 1] : u[i - 1];  // ghost for i=n-1
            rhs[i] = u[i] + expl * (al[i] * u[i - 1] + ad[i] * u[i] +
                                    au[i] * ((i + 1 < n) ? up1 : 0.0));
            if (i + 1 == n) rhs[i] = u[i] + expl * (al[i] * u[i - 1] + ad[i] * u[i]);
        }
        solve_tridiagonal(lower, diag, upper, rhs);
        u = std::move(rhs);
    };

    const double dt = horizon / nt;
    // Rannacher start-up: the initial data is discontinuous at the absorbing
    // boundary, so damp the CN oscillations with a few implicit Euler steps.
    for (int k = 0; k < 4; ++k) do_step(0.5 * dt, 1.0);
    for (int k = 2; k < nt; ++k) do_step(dt, 0.5);

    const double sq = std::log(r0);
    const double pos = (sq - s0) / h;
    const int i0 = std::clamp(static_cast<int>(pos), 0, n - 2);
    const double w = pos - i0;
    return std::clamp((1.0 - w) * u[i0] + w * u[i0 + 1], 0.0, 1.0);
}

}  // namespace

double bessel_hit_probability(double nu, double r0, double threshold, double horizon,
                              int grid_nodes) {
    if (!(r0 > threshold) || threshold < 0.0)
        throw Error("bessel_hit_probability requires r0 > threshold >= 0");
    if (!(horizon > 0.0)) throw Error("bessel_hit_probability requires horizon > 0");
    // the origin is polar for nu >= 2; the inner-cutoff approximation of the
    // absorbing boundary converges only logarithmically there
    if (threshold == 0.0 && nu >= 2.0) return 0.0;
    const int nt = 1200;
    const double coarse = bessel_hit_once(nu, r0, threshold, horizon, grid_nodes, nt);
    const double fine =
        bessel_hit_once(nu, r0, threshold, horizon, 2 * grid_nodes - 1, 2 * nt);
    if (std::abs(fine - coarse) > 1e-3)
        throw GridUnderresolved("bessel_hit_probability: grids disagree beyond 1e-3");
    return std::clamp(fine + (fine - coarse) / 3.0, 0.0, 1.0);
}

// ---------------------------------------------------------------------------

namespace {

bool contains_hypersurface(const KernelSpec& spec) {
    if (spec.kind == KernelKind::Hypersurface) return true;
    for (const auto& c : spec.children)
        if (contains_hypersurface(c)) return true;
    return false;
}

/// Numerator <w phi^2> with log w(r) an integrable profile that may carry the
/// hypersurface head 1/(x (-ln x)^beta) at r = 1: the head over |r-1| < h is
/// added in closed form with the smooth part frozen at r = 1. Assembled in
/// log space: the sharpened trials spread mass over hundreds of log-scales
/// where the individual factors leave the double range.
double weighted_trial_integral(const std::function<double(double)>& log_w,
                               const TrialFunction& phi, int dim, bool hypersurface_head,
                               double beta) {
    std::vector<double> breaks = phi.radial_breaks();
    const double head_h = 1e-6;
    double head = 0.0;
    if (hypersurface_head) {
        breaks.push_back(0.5);
        breaks.push_back(1.0 - head_h);
        breaks.push_back(1.0 + head_h);
        breaks.push_back(1.5);
        const double v1 = phi.radial_value(1.0);
        // int_{|r-1|<h} dx / (x (-ln x)^beta) = 2 (-ln h)^{1-beta} / (beta - 1)
        head = v1 * v1 * 2.0 * std::pow(-std::log(head_h), 1.0 - beta) / (beta - 1.0);
    }
    const auto log_f = [&](double r) {
        if (hypersurface_head && std::abs(r - 1.0) < head_h)
            return -std::numeric_limits<double>::infinity();
        return log_w(r) + 2.0 * phi.log_radial_value(r);
    };
    return integrate_radial_log(log_f, dim, breaks) + head;
}

double dirichlet_integral(const TrialFunction& phi, int dim) {
    return integrate_radial_log(
        [&](double r) { return 2.0 * phi.log_radial_derivative(r); }, dim,
        phi.radial_breaks());
}

double mass_integral(const TrialFunction& phi, int dim) {
    return integrate_radial_log(
        [&](double r) { return 2.0 * phi.log_radial_value(r); }, dim,
        phi.radial_breaks());
}

}  // namespace

RayleighEstimate estimate_form_bound(const KernelSpec& kernel, BoundFlavor flavor,
                                     const TrialFamilySpec& family) {
    kernel.validate();
    const int d = kernel.dim;
    const RadialKernelProfile prof = kernel_radial_profile(kernel);
    const bool hyp = contains_hypersurface(kernel);
    const double hyp_beta = hyp ? kernel.beta : 2.0;

    // (div K)_+ profile: analytic when available, radial finite differences
    // otherwise (the caller-side recipe for the hypersurface kind).
    std::function<double(double)> log_div_plus = prof.log_div_plus;
    if (flavor == BoundFlavor::DivPlus && !log_div_plus) {
        const auto mag = prof.magnitude;
        log_div_plus = [mag, d](double r) {
            const double h = 1e-6 * std::max(r, 1.0);
            const double dm = (mag(r + h) - mag(r - h)) / (2.0 * h);
            const double v = std::max(dm + (d - 1) * mag(r) / r, 0.0);
            return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
        };
    }

    std::vector<TrialFunction> trials;
    std::vector<std::string> metas;
    if (family.family == TrialFamily::RadialPower) {
        for (double eps : family.eps_schedule) {
            trials.push_back(TrialFunction::radial_power(d, eps, -0.5 * (d - 2),
                                                         family.cutoff_radius));
            std::ostringstream oss;
            oss << "radial_power eps=" << eps;
            metas.push_back(oss.str());
        }
    } else {
        for (double w : family.width_schedule) {
            trials.push_back(TrialFunction::gaussian_bump(d, family.center, w));
            std::ostringstream oss;
            oss << "gaussian_bump width=" << w;
            metas.push_back(oss.str());
        }
    }

    RayleighEstimate best;
    best.direction = EstimateDirection::LowerBoundOfSup;
    for (std::size_t k = 0; k < trials.size(); ++k) {
        const TrialFunction& phi = trials[k];
        const double dir_energy = dirichlet_integral(phi, d);
        double ratio = 0.0;
        switch (flavor) {
            case BoundFlavor::F: {
                const auto log_w = [&](double r) { return 2.0 * prof.log_magnitude(r); };
                const double num = prof.angular_mass_fraction *
                                   weighted_trial_integral(log_w, phi, d, hyp, hyp_beta);
                ratio = num / dir_energy;
                break;
            }
            case BoundFlavor::DivPlus: {
                const double num =
                    prof.angular_mass_fraction *
                    weighted_trial_integral(log_div_plus, phi, d, hyp, hyp_beta);
                ratio = num / dir_energy;
                break;
            }
            case BoundFlavor::MF: {
                const double mass = mass_integral(phi, d);
                if (!std::isfinite(mass)) {
                    ratio = 0.0;
                    break;
                }
                const double num = prof.angular_mass_fraction *
                                   weighted_trial_integral(prof.log_magnitude, phi, d, hyp,
                                                           hyp_beta);
                ratio = num / std::sqrt(dir_energy * mass);
                break;
            }
        }
        if (ratio > best.value) {
            best.value = ratio;
            best.trial_meta = metas[k];
        }
    }
    return best;
}

// ---------------------------------------------------------------------------

RayleighEstimate estimate_multiparticle_hardy(int dim, int n_particles, long budget,
                                              std::uint64_t seed) {
    if (dim < 3) throw UnsupportedDim("estimate_multiparticle_hardy requires d >= 3");
    if (n_particles < 2) throw Error("estimate_multiparticle_hardy requires N >= 2");
    RayleighEstimate best;
    best.direction = EstimateDirection::LowerBoundOfSup;
    best.paper_floor = paper_hardy_constant(dim, n_particles);

    if (n_particles == 2) {
        // Deterministic separable route: the soft power (r^2+s^2)^{a/2}
        // spreads the Hardy mass over log(W/s) scales.
        const double a = -0.5 * (dim - 2);
        for (double s : {1e-6, 1e-9, 1e-12}) {
            for (double w : {30.0, 100.0}) {
                const auto trial = HardyTrial::two_body_sharp(dim, a, s, w, 30.0 * w);
                const auto r = multiparticle_hardy_ratio(trial, 2, dim);
                if (r.ratio > best.value) {
                    std::ostringstream oss;
                    oss << "two_body_sharp a=" << a << " s=" << s << " W=" << w;
                    best.value = r.ratio;
                    best.trial_meta = oss.str();
                }
            }
        }
        return best;
    }

    // Stochastic coordinate ascent on (pair exponent, regularization, width).
    // The exponent floor keeps the importance-sampled numerator variance
    // finite (the sampled integrand carries 1/r^4 near pair coincidence).
    const double a_floor = std::max(0.3, 0.3 - 0.25 * (dim - 3));
    double params[3] = {0.8, 0.8, 1.5};  // a, s, W
    const int sweeps = 16;
    const long per_eval = std::max<long>(budget / (sweeps + 1), 1000);
    long used = 0;

    const auto evaluate = [&](const double p[3]) {
        const auto trial = HardyTrial::pair_product(n_particles, dim, p[0], p[1], p[2]);
        const auto r = multiparticle_hardy_ratio(trial, n_particles, dim, per_eval, seed);
        used += r.evaluations;
        return r;
    };

    HardyRatio cur = evaluate(params);
    best.value = cur.ratio;
    best.mc_error = cur.mc_error;
    RandomStream rng(seed, 999);
    for (int it = 0; it < sweeps && used + per_eval <= budget; ++it) {
        const int coord = static_cast<int>(rng.next_double() * 3.0) % 3;
        const double factor = (rng.next_double() < 0.5) ? 0.75 : 1.3;
        double cand[3] = {params[0], params[1], params[2]};
        cand[coord] *= factor;
        cand[0] = std::max(cand[0], a_floor);
        cand[1] = std::clamp(cand[1], 0.05, 5.0);
        cand[2] = std::clamp(cand[2], 0.3, 8.0);
        const HardyRatio trial_r = evaluate(cand);
        if (trial_r.ratio > cur.ratio) {
            cur = trial_r;
            std::copy(cand, cand + 3, params);
        }
    }
    best.value = cur.ratio;
    best.mc_error = cur.mc_error;
    best.budget_exhausted = (used + per_eval > budget);
    std::ostringstream oss;
    oss << "pair_product a=" << params[0] << " s=" << params[1] << " W=" << params[2]
        << " evals=" << used;
    best.trial_meta = oss.str();
    return best;
}

// ---------------------------------------------------------------------------

std::vector<PhaseScanRow> collision_phase_scan(const std::vector<double>& kappa_grid,
                                               const SimPlan& plan_template, int workers) {
    std::vector<PhaseScanRow> rows;
    const int n = plan_template.x0.n_particles;
    const int d = plan_template.x0.dim;
    for (double kappa : kappa_grid) {
        SimPlan plan = plan_template;
        if (kappa > 0.0) {
            plan.drift = LiftedDrift::uniform(KernelSpec::hardy_attracting(kappa, d), n);
        } else {
            plan.drift =
                LiftedDrift::uniform(KernelSpec::bounded_smooth(std::vector<double>(d, 0.0)), n);
        }
        const EnsembleResult res = run_ensemble(plan, workers);
        PhaseScanRow row;
        row.kappa = kappa;
        row.probability = res.collision_probability;
        row.stderr_ = res.collision_stderr;
        if (n == 2) {
            const double nu = bessel_dimension(kappa, d);
            const double r0 = plan.x0.pair_distance(0, 1);
            row.oracle_probability = bessel_hit_probability(
                nu, 0.5 * r0, 0.5 * plan.collision_radius, plan.horizon);
        }
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------

IntegrabilityReport psi_integrability(double kappa, int dim, bool w21_variant,
                                      std::vector<double> probe) {
    if (dim < 3) throw UnsupportedDim("psi_integrability requires d >= 3");
    if (probe.empty())
        for (int k = 1; k <= 8; ++k) probe.push_back(std::pow(10.0, -k));
    std::sort(probe.begin(), probe.end(), std::greater<>());

    // N=2 radial reduction: integrand r^{d-1} r^{-sqrt(kappa)(d-2)/4}, with the
    // |Delta psi| ~ r^{-2} extra factor in the W^{2,1} variant.
    const double alpha =
        (dim - 1) - std::sqrt(kappa) * (dim - 2) / 4.0 - (w21_variant ? 2.0 : 0.0);

    IntegrabilityReport rep;
    rep.w21_variant = w21_variant;
    rep.cutoffs = probe;
    for (double a : probe) {
        double val;
        if (std::abs(alpha + 1.0) < 1e-14) {
            val = -std::log(a);
        } else {
            val = (1.0 - std::pow(a, alpha + 1.0)) / (alpha + 1.0);
        }
        rep.values.push_back(val);
    }

    const std::size_t m = rep.values.size();
    std::vector<double> incr, logs, logcut;
    for (std::size_t k = 0; k + 1 < m; ++k) {
        const double del = rep.values[k + 1] - rep.values[k];
        if (del > 0.0) {
            incr.push_back(del);
            logs.push_back(std::log(del));
            logcut.push_back(std::log(1.0 / probe[k]));
        }
    }
    if (incr.empty() || incr.back() < 1e-8) {
        rep.verdict = IntegrabilityVerdict::Converges;
        rep.fitted_rate = incr.empty() ? -1.0 : 0.0;
        if (!incr.empty()) rep.fitted_rate = fit_slope(logcut, logs);
        return rep;
    }
    rep.fitted_rate = fit_slope(logcut, logs);  // estimates -(alpha+1)
    if (rep.fitted_rate > 1e-3) {
        rep.verdict = IntegrabilityVerdict::Diverges;
    } else if (rep.fitted_rate < -1e-3) {
        rep.verdict = IntegrabilityVerdict::Converges;
    } else {
        rep.verdict = IntegrabilityVerdict::Inconclusive;
    }
    return rep;
}

// ---------------------------------------------------------------------------

double silverman_bandwidth(std::vector<double> samples) {
    const std::size_t n = samples.size();
    if (n < 8) throw Error("silverman_bandwidth: too few samples");
    std::sort(samples.begin(), samples.end());
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= n;
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= (n - 1);
    const double iqr = samples[(3 * n) / 4] - samples[n / 4];
    const double scale = std::min(std::sqrt(var), iqr / 1.34);
    return 0.9 * scale * std::pow(static_cast<double>(n), -0.2);
}

Kde1D::Kde1D(std::vector<double> samples, double bandwidth)
    : samples_(std::move(samples)), bw_(bandwidth) {
    if (bw_ <= 0.0) throw BandwidthUnderresolved("Kde1D: nonpositive bandwidth");
    std::sort(samples_.begin(), samples_.end());
}

double Kde1D::operator()(double x) const {
    const double window = 8.0 * bw_;
    const auto lo = std::lower_bound(samples_.begin(), samples_.end(), x - window);
    const auto hi = std::upper_bound(samples_.begin(), samples_.end(), x + window);
    double acc = 0.0;
    for (auto it = lo; it != hi; ++it) {
        const double z = (x - *it) / bw_;
        acc += std::exp(-0.5 * z * z);
    }
    return acc / (samples_.size() * bw_ * std::sqrt(2.0 * std::numbers::pi));
}

HeatKernelReport heat_kernel_envelope_check(double kappa, int dim, int n_particles,
                                            const std::vector<double>& t_grid,
                                            const SimPlan& plan, int workers) {
    HeatKernelReport rep;
    rep.expected_slope = bessel_dimension(kappa, dim) - dim;

    SimPlan p = plan;
    if (kappa > 0.0) {
        p.drift = LiftedDrift::uniform(KernelSpec::hardy_attracting(kappa, dim), n_particles);
    } else {
        p.drift = LiftedDrift::uniform(
            KernelSpec::bounded_smooth(std::vector<double>(dim, 0.0)), n_particles);
    }
    p.snapshot_times = t_grid;
    std::sort(p.snapshot_times.begin(), p.snapshot_times.end());
    p.horizon = p.snapshot_times.back();
    const EnsembleResult res = run_ensemble(p, workers);

    const EtaProfile eta(kappa, dim, n_particles);
    const double area = sphere_area(dim);

    for (std::size_t k = 0; k < p.snapshot_times.size(); ++k) {
        const double t = p.snapshot_times[k];
        std::vector<double> r_samples;
        for (const auto& o : res.outcomes) {
            if (o.flagged || o.snapshots.size() <= k) continue;
            r_samples.push_back(o.snapshots[k].pair_distance(0, 1));
        }
        if (r_samples.size() < 100)
            throw Error("heat_kernel_envelope_check: too few surviving samples");

        std::vector<double> logs(r_samples.size());
        for (std::size_t i = 0; i < r_samples.size(); ++i) logs[i] = std::log(r_samples[i]);
        const double bw0 = silverman_bandwidth(logs);
        const Kde1D kde_coarse(logs, bw0);
        const Kde1D kde(logs, 0.5 * bw0);

        std::vector<double> sorted_r = r_samples;
        std::sort(sorted_r.begin(), sorted_r.end());
        const double r5 = sorted_r[sorted_r.size() / 20];

        // density of the pair difference in R^d from the log-radius KDE:
        // p_Z(r) = p_{log r}(log r) / (area r^d)
        const auto log_density = [&](const Kde1D& est, double r) {
            return std::log(std::max(est(std::log(r)), 1e-300)) - std::log(area) -
                   dim * std::log(r);
        };
        // Weighted least squares across the decade: Poisson noise of the KDE
        // at the thin near-coincidence end would otherwise dominate the fit,
        // while plain count-weights over-emphasise the curved dense top.
        const auto slope_of = [&](const Kde1D& est) {
            std::vector<double> xs, ys, ws;
            for (int i = 0; i < 25; ++i) {
                const double r = r5 / 10.0 * std::pow(10.0, i / 24.0);
                xs.push_back(std::log(r));
                ys.push_back(log_density(est, r));
                ws.push_back(std::sqrt(std::max(est(std::log(r)), 0.0)));
            }
            double sw = 0.0, mx = 0.0, my = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                sw += ws[i];
                mx += ws[i] * xs[i];
                my += ws[i] * ys[i];
            }
            mx /= sw;
            my /= sw;
            double sxx = 0.0, sxy = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                sxx += ws[i] * (xs[i] - mx) * (xs[i] - mx);
                sxy += ws[i] * (xs[i] - mx) * (ys[i] - my);
            }
            return sxy / sxx;
        };

        HeatKernelRow row;
        row.t = t;
        row.samples = static_cast<long>(r_samples.size());
        row.slope = slope_of(kde);
        row.slope_coarse = slope_of(kde_coarse);
        if (std::abs(row.slope - row.slope_coarse) > 0.1) {
            std::ostringstream oss;
            oss << "heat_kernel_envelope_check: slope unstable under bandwidth halving"
                << " (t=" << t << ", " << row.slope << " vs " << row.slope_coarse << ")";
            throw BandwidthUnderresolved(oss.str());
        }

        const double r_lo = sorted_r[sorted_r.size() / 100];
        const double r_hi = sorted_r[(99 * sorted_r.size()) / 100];
        double c_fit = 0.0;
        for (int i = 0; i < 200; ++i) {
            const double r = r_lo * std::pow(r_hi / r_lo, i / 199.0);
            const double dens = std::exp(log_density(kde, r));
            const double env = std::pow(t, -0.5 * dim) * eta.value(r / std::sqrt(t));
            c_fit = std::max(c_fit, dens / env);
        }
        row.envelope_constant = c_fit;
        rep.rows.push_back(row);
    }
    return rep;
}

// ---------------------------------------------------------------------------

namespace {

/// Resolvent BVP (lambda - G) u = f for the pair-distance generator
/// G = 2 d^2/dr^2 + (2(nu-1)/r) d/dr on (r_in, r_max), log grid.
double radial_resolvent_once(double nu, double lambda,
                             const std::function<double(double)>& f, double r_in,
                             double r_max, bool absorb_inner, double r_query, int n) {
    const double s0 = std::log(r_in), s1 = std::log(r_max);
    const double h = (s1 - s0) / (n - 1);
    std::vector<double> lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
    for (int i = 1; i + 1 < n; ++i) {
        const double r = std::exp(s0 + i * h);
        const double a2 = -2.0 / (r * r);               // u_ss
        const double a1 = 2.0 * (2.0 - nu) / (r * r);   // u_s
        lower[i] = a2 / (h * h) - a1 / (2.0 * h);
        diag[i] = -2.0 * a2 / (h * h) + lambda;
        upper[i] = a2 / (h * h) + a1 / (2.0 * h);
        rhs[i] = f(r);
    }
    if (absorb_inner) {
        diag[0] = 1.0;
        rhs[0] = 0.0;
    } else {
        // no-flux: u_0 = u_1
        diag[0] = 1.0;
        upper[0] = -1.0;
        rhs[0] = 0.0;
    }
    diag[n - 1] = 1.0;
    rhs[n - 1] = 0.0;
    solve_tridiagonal(lower, diag, upper, rhs);
    const double pos = (std::log(r_query) - s0) / h;
    const int i0 = std::clamp(static_cast<int>(pos), 0, n - 2);
    const double w = pos - i0;
    return (1.0 - w) * rhs[i0] + w * rhs[i0 + 1];
}

}  // namespace

FeynmanKacReport feynman_kac_check(double kappa, int dim, double lambda,
                                   const FeynmanKacParams& params, int workers) {
    if (lambda < 1.0) throw Error("feynman_kac_check requires lambda >= 1");
    FeynmanKacReport rep;
    const double nu = bessel_dimension(kappa, dim);

    const double f_max = 1.0;
    rep.horizon = std::max(6.0, 14.0 / lambda);
    rep.tail_bound = f_max * std::exp(-lambda * rep.horizon) / lambda;

    const double c = params.f_center, w = params.f_width;
    const auto f_rad = [c, w](double r) {
        const double z = (r - c) / w;
        return std::exp(-0.5 * z * z);
    };

    // Monte-Carlo side: the full two-particle system.
    SimPlan plan;
    if (kappa > 0.0) {
        plan.drift = LiftedDrift::uniform(KernelSpec::hardy_attracting(kappa, dim), 2);
    } else {
        plan.drift =
            LiftedDrift::uniform(KernelSpec::bounded_smooth(std::vector<double>(dim, 0.0)), 2);
    }
    plan.x0 = ParticleConfiguration(2, dim);
    plan.x0.block(0)[0] = 0.5 * params.r0;
    plan.x0.block(1)[0] = -0.5 * params.r0;
    plan.dt = params.dt;
    plan.horizon = rep.horizon;
    plan.collision_radius = params.collision_radius;
    plan.seed = params.seed;
    plan.ensemble = params.ensemble;
    PathFunctional pf;
    pf.name = "feynman_kac";
    pf.lambda = lambda;
    pf.observable = [f_rad](const ParticleConfiguration& x) {
        return f_rad(x.pair_distance(0, 1));
    };
    plan.functionals.push_back(pf);
    const EnsembleResult res = run_ensemble(plan, workers);
    rep.mc_value = res.functional_means[0].mean;
    rep.mc_stderr = res.functional_means[0].stderr_;

    // Radial BVP side.
    const bool absorb = nu < 2.0;
    const double r_in = absorb ? params.collision_radius : std::min(1e-3, 1e-3 * params.r0);
    const double r_max =
        std::max(4.0 * params.r0, c + 10.0 * w + 15.0 * std::sqrt(2.0 / lambda));
    const int n = 3000;
    const double coarse =
        radial_resolvent_once(nu, lambda, f_rad, r_in, r_max, absorb, params.r0, n);
    const double fine =
        radial_resolvent_once(nu, lambda, f_rad, r_in, r_max, absorb, params.r0, 2 * n - 1);
    if (std::abs(fine - coarse) > 1e-3 * std::max(std::abs(fine), 1e-12))
        throw GridUnderresolved("feynman_kac_check: BVP grids disagree");
    rep.bvp_value = fine;

    if (rep.tail_bound > 0.5 * params.tolerance * std::abs(rep.bvp_value))
        throw TailBoundTooLarge("feynman_kac_check: horizon truncation too coarse");

    rep.rel_error = std::abs(rep.mc_value - rep.bvp_value) /
                    std::max(std::abs(rep.bvp_value), 1e-300);
    return rep;
}

// ---------------------------------------------------------------------------

KrylovReport krylov_functional(const SimPlan& plan, const KernelSpec& g, double lambda,
                               double q, const KrylovParams& params, int workers) {
    const int n = plan.x0.n_particles, d = plan.x0.dim;
    if (q <= std::max(static_cast<double>(d * n - 2), 2.0))
        throw Error("krylov_functional requires q > (dN-2) v 2");

    const LiftedDrift drift_g = LiftedDrift::uniform(g, n);
    const double rc = params.f_rel_center, rw = params.f_rel_width, cw = params.f_com_width;
    const double amp = params.f_amplitude;
    const auto f_rel = [rc, rw, amp](double r) {
        const double z = (r - rc) / rw;
        return amp * std::exp(-0.5 * z * z);
    };
    const auto f_com = [cw](double r) { return std::exp(-0.5 * r * r / (cw * cw)); };

    const auto f_obs = [f_rel, f_com, n, d](const ParticleConfiguration& x) {
        double min_r = x.min_pair_distance();
        std::vector<double> com(d, 0.0);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < d; ++c) com[c] += x.positions[i * d + c] / n;
        return f_rel(min_r) * f_com(norm(com));
    };

    SimPlan p = plan;
    p.horizon = params.horizon;
    p.dt = params.dt;
    p.ensemble = params.ensemble;
    p.seed = params.seed;
    PathFunctional pf;
    pf.name = "krylov_lhs";
    pf.lambda = lambda;
    pf.observable = [drift_g, f_obs](const ParticleConfiguration& x) {
        std::vector<double> b(x.positions.size());
        eval_drift(drift_g, x, b);
        return norm(std::span<const double>(b)) * f_obs(x);
    };
    p.functionals.push_back(pf);
    const EnsembleResult res = run_ensemble(p, workers);

    KrylovReport rep;
    rep.lhs = res.functional_means[0].mean;
    rep.lhs_stderr = res.functional_means[0].stderr_;

    if (n == 2) {
        // ||g |f|^{q/2}||_2^2 = (1/2) int |K_g(y)|^2 f_rel^q(|y|) dy x int f_com^q(|c|) dc
        // The compact f confines the kernel factor to a window clear of the
        // singularity guard.
        const RadialKernelProfile prof = kernel_radial_profile(g);
        const double area = sphere_area(d);
        const double r_lo = std::max(1e-6, rc - 12.0 * rw);
        const double r_hi = rc + 12.0 * rw;
        const double rel = area * integrate_radial_pieces(
                                      [&](double r) {
                                          const double m = prof.magnitude(r);
                                          return m * m * std::pow(f_rel(r), q);
                                      },
                                      d, {rc}, r_lo, r_hi);
        const double com = area * integrate_radial_pieces(
                                      [&](double r) { return std::pow(f_com(r), q); }, d, {cw});
        rep.rhs = std::pow(0.5 * prof.angular_mass_fraction * rel * com, 1.0 / q);
    } else {
        // Gaussian importance quadrature of the lifted integrand.
        RandomStream rng(params.seed, 12345);
        const int nd = n * d;
        const double width = std::max(cw, rc + 3.0 * rw);
        const double log_norm = 0.5 * nd * std::log(2.0 * std::numbers::pi * width * width);
        double acc = 0.0;
        const long m = 200000;
        std::vector<double> x(nd), b(nd);
        for (long s = 0; s < m; ++s) {
            double z2 = 0.0;
            for (int k2 = 0; k2 < nd; ++k2) {
                const double z = rng.next_gaussian();
                x[k2] = width * z;
                z2 += z * z;
            }
            ParticleConfiguration cfg(n, d, x);
            double integrand = 0.0;
            try {
                eval_drift(drift_g, cfg, b);
                integrand = norm2(std::span<const double>(b)) * std::pow(f_obs(cfg), q);
            } catch (const CollisionState&) {
                integrand = 0.0;
            }
            acc += integrand * std::exp(log_norm + 0.5 * z2);
        }
        rep.rhs = std::pow(acc / m, 1.0 / q);
    }
    rep.ratio = (rep.rhs > 0.0) ? rep.lhs / rep.rhs : 0.0;
    return rep;
}

// ---------------------------------------------------------------------------

double gaussian_cross_moment(double sy2, double sz2, double c, int dim) {
    // E[(Y.Z)/(|Y|^2 |Z|^2)] via the double Feynman parametrization
    //   E = d c int int det(I + 2 D Sigma)^{-d/2 - 1} ds dt,
    // where det = (1+2s sy2)(1+2t sz2) - 4 s t c^2 and M12 = c/det. After
    // x = 2 s sy2, y = 2 t sz2 the inner integral is elementary, leaving
    //   E = c/(2 sy2 sz2) int_0^inf (1+x)^{-d/2} / (1 + (1-rho^2) x) dx.
    const double det_sigma = sy2 * sz2 - c * c;
    if (det_sigma <= 0.0) throw Error("gaussian_cross_moment: covariance not positive");
    if (c == 0.0) return 0.0;
    const double rho2 = c * c / (sy2 * sz2);
    const double one_m = 1.0 - rho2;
    const auto integrand = [&](double t) {
        // x = t/(1-t)
        const double x = t / (1.0 - t);
        const double jac = 1.0 / ((1.0 - t) * (1.0 - t));
        return jac * std::pow(1.0 + x, -0.5 * dim) / (1.0 + one_m * x);
    };
    const double j = integrate(integrand, 0.0, 1.0 - 1e-14, 1e-12);
    return c / (2.0 * sy2 * sz2) * j;
}

RayleighCheckResult rayleigh_lift_check(double kappa, int dim,
                                        const std::vector<double>& widths) {
    const int n = static_cast<int>(widths.size());
    if (n < 2) throw Error("rayleigh_lift_check needs N >= 2 widths");
    const double ck = std::sqrt(kappa) * 0.5 * (dim - 2);

    // phi = prod_i exp(-|x_i|^2 / (2 a_i^2)); X_i ~ N(0, a_i^2/2) under phi^2.
    // All quantities are normalized by ||phi||^2.
    double grad_over_mass = 0.0;
    for (double a : widths) grad_over_mass += 0.5 * dim / (a * a);

    double lhs_over_mass = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double sig2_ij = 0.5 * (widths[i] * widths[i] + widths[j] * widths[j]);
            // E |K(Y)|^2 = kappa (d-2)^2/4 E[1/|Y|^2], E[1/|Y|^2] = 1/(sigma^2 (d-2))
            lhs_over_mass += ck * ck / (sig2_ij * (dim - 2));
            for (int k = 0; k < n; ++k) {
                if (k == i || k == j || k <= j) continue;
                // cross term K(X_i-X_j) . K(X_i-X_k), counted once per {j,k}
                const double sig2_ik = 0.5 * (widths[i] * widths[i] + widths[k] * widths[k]);
                const double cov = 0.5 * widths[i] * widths[i];
                lhs_over_mass +=
                    2.0 * ck * ck * gaussian_cross_moment(sig2_ij, sig2_ik, cov, dim);
            }
        }
    }
    lhs_over_mass /= (n * n);

    const LiftedBound lb = lifted_form_bound(kappa, 0.0, n);
    RayleighCheckResult out;
    out.lhs = lhs_over_mass;
    out.rhs = lb.delta * grad_over_mass + lb.c_delta;
    out.slack = out.rhs - out.lhs;
    out.holds = out.lhs <= out.rhs + 1e-6 * std::max(1.0, std::abs(out.rhs));
    return out;
}

}  // namespace critmc
