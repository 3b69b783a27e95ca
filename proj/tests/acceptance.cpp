// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "critmc/analysis.hpp"
#include "critmc/config.hpp"
#include "critmc/runner.hpp"
#include "critmc/vecops.hpp"

using namespace critmc;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %2d. %-34s %s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

SimPlan pair_plan(double dt, double r_coll, long ensemble, std::uint64_t seed) {
    SimPlan plan;
    plan.drift = LiftedDrift::uniform(KernelSpec::bounded_smooth({0.0, 0.0, 0.0}), 2);
    plan.x0 = ParticleConfiguration(2, 3);
    plan.x0.block(0)[0] = 0.5;
    plan.x0.block(1)[0] = -0.5;
    plan.dt = dt;
    plan.horizon = 1.0;
    plan.collision_radius = r_coll;
    plan.seed = seed;
    plan.ensemble = ensemble;
    return plan;
}

// 1. Threshold reproduction: phase scan vs the Bessel oracle.
void criterion_1() {
    const double t0 = now_seconds();
    const std::vector<double> grid{4.0, 9.0, 16.0, 25.0, 36.0};
    SimPlan plan = pair_plan(1e-4, 1e-3, 10000, 2026);
    const auto rows = collision_phase_scan(grid, plan, 0);
    bool pass = true;
    std::string detail;
    double p4 = 0.0, p36 = 0.0;
    for (const auto& r : rows) {
        const double sigma =
            std::sqrt(r.stderr_ * r.stderr_ + 1e-3 * 1e-3);  // oracle certified to 1e-3
        const double gap = std::abs(r.probability - r.oracle_probability);
        if (gap > 3.0 * sigma) pass = false;
        if (r.kappa == 4.0) p4 = r.probability;
        if (r.kappa == 36.0) p36 = r.probability;
        char buf[96];
        std::snprintf(buf, sizeof(buf), " k=%g:%.4f vs %.4f (%.1fs.e.)", r.kappa,
                      r.probability, r.oracle_probability, gap / sigma);
        detail += buf;
    }
    if (!(p4 < 0.05)) pass = false;
    if (!(p36 > 0.3)) pass = false;
    char buf[64];
    std::snprintf(buf, sizeof(buf), " [%.0fs]", now_seconds() - t0);
    report(1, "threshold reproduction", pass, detail + buf);
}

// 2. Exact algebra of the Bessel dimension.
void criterion_2() {
    bool pass = true;
    for (int d : {3, 4, 5, 6}) {
        if (bessel_dimension(16.0, d) != 2.0) pass = false;
        const double crit = 16.0 * d * d / double((d - 2) * (d - 2));
        if (std::abs(bessel_dimension(crit, d)) > 1e-12) pass = false;
    }
    report(2, "bessel dimension exact algebra", pass, "d in {3,4,5,6}");
}

// 3. Hardy constants from Rayleigh sharpening.
void criterion_3() {
    const double t0 = now_seconds();
    bool pass = true;
    std::string detail;
    const struct {
        int d;
        double kappa;
    } cases[] = {{3, 4.0}, {4, 9.0}};
    for (const auto& cs : cases) {
        const auto kernel = KernelSpec::hardy_attracting(cs.kappa, cs.d);
        const auto f = estimate_form_bound(kernel, BoundFlavor::F);
        const auto dv = estimate_form_bound(kernel, BoundFlavor::DivPlus);
        const double sharp_div = 2.0 * std::sqrt(cs.kappa);
        if (!(f.value >= 0.98 * cs.kappa) || !(f.value <= cs.kappa * (1.0 + 1e-9)))
            pass = false;
        if (!(dv.value >= 0.98 * sharp_div) || !(dv.value <= sharp_div * (1.0 + 1e-9)))
            pass = false;
        char buf[96];
        std::snprintf(buf, sizeof(buf), " (d=%d,k=%g): F=%.4f div=%.4f", cs.d, cs.kappa,
                      f.value, dv.value);
        detail += buf;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), " [%.1fs]", now_seconds() - t0);
    report(3, "hardy form-bound constants", pass, detail + buf);
}

// 4. Lifting formulas and the sampled Rayleigh check.
void criterion_4() {
    bool pass = true;
    std::string detail;
    // closed forms, exact
    for (const auto& [kappa, c, n] :
         std::vector<std::tuple<double, double, int>>{{4.0, 0.0, 2}, {9.0, 2.0, 3},
                                                      {1.0, 0.5, 7}}) {
        const auto fb = lifted_form_bound(kappa, c, n);
        const double nn = n;
        if (fb.delta != (nn - 1.0) * (nn - 1.0) / (nn * nn) * kappa) pass = false;
        if (fb.c_delta != (nn - 1.0) * (nn - 1.0) / nn * c) pass = false;
        const auto db = lifted_div_bound(kappa, c, n);
        if (db.delta != (nn - 1.0) / nn * kappa) pass = false;
        if (db.c_delta != (nn - 1.0) * c) pass = false;
    }
    // sampled Rayleigh check on separable Gaussian trials
    RandomStream rng(99, 0);
    double worst = 1e9;
    for (int n : {2, 3}) {
        for (int s = 0; s < 5; ++s) {
            std::vector<double> widths;
            for (int i = 0; i < n; ++i) widths.push_back(0.6 + 1.8 * rng.next_double());
            const auto check = rayleigh_lift_check(4.0, 3, widths);
            worst = std::min(worst, check.slack / std::max(1.0, check.rhs));
            if (!check.holds) pass = false;
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "closed forms exact; min slack/rhs=%.3g (tol -1e-6)",
                  worst);
    detail = buf;
    report(4, "lifting formulas", pass, detail);
}

// 5. Lyapunov identity at random configurations.
void criterion_5() {
    const double t0 = now_seconds();
    bool pass = true;
    double max_rel = 0.0;
    const struct {
        int n, d;
        double kappa;
    } cases[] = {{2, 3, 4.0}, {3, 3, 4.0}, {3, 4, 1.0}};
    for (const auto& cs : cases) {
        RandomStream rng(7 + cs.n + cs.d, 0);
        int produced = 0;
        while (produced < 1000) {
            ParticleConfiguration x(cs.n, cs.d);
            for (auto& c : x.positions) c = 2.0 * rng.next_gaussian();
            if (x.min_pair_distance() < 1e-3) continue;
            const auto terms = lyapunov_residual(cs.kappa, x);
            max_rel = std::max(max_rel, std::abs(terms.relative));
            ++produced;
        }
    }
    if (!(max_rel <= 1e-8)) pass = false;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max |relative residual| = %.3g over 3000 points [%.1fs]",
                  max_rel, now_seconds() - t0);
    report(5, "lyapunov identity", pass, buf);
}

// 6. psi integrability thresholds with a narrow inconclusive band.
void criterion_6() {
    bool pass = true;
    std::string detail;
    const auto run_band = [&](double threshold, bool w21) {
        const double lo = threshold * 0.99, hi = threshold * 1.01;
        const auto v_lo = psi_integrability(lo, 3, w21).verdict;
        const auto v_hi = psi_integrability(hi, 3, w21).verdict;
        if (v_lo != IntegrabilityVerdict::Converges) pass = false;
        if (v_hi != IntegrabilityVerdict::Diverges) pass = false;
        // single flip across a fine sweep
        int flips = 0;
        IntegrabilityVerdict prev = IntegrabilityVerdict::Converges;
        bool seen = false;
        for (double f = 0.9; f <= 1.1; f += 0.005) {
            const auto v = psi_integrability(threshold * f, 3, w21).verdict;
            if (v == IntegrabilityVerdict::Inconclusive) {
                if (!(threshold * f >= lo && threshold * f <= hi)) pass = false;
                continue;
            }
            if (seen && v != prev) ++flips;
            prev = v;
            seen = true;
        }
        if (flips != 1) pass = false;
    };
    run_band(144.0, false);  // local summability, d = 3
    run_band(16.0, true);    // W^{2,1} variant
    report(6, "psi integrability thresholds", pass,
           "flip at 144 (summability) and 16 (W21), band within +-1%");
}

// 7. Heat-kernel envelope shape.
void criterion_7() {
    const double t0 = now_seconds();
    SimPlan plan = pair_plan(1e-3, 1e-4, 100000, 4096);
    const std::vector<double> t_grid{0.25, 0.5, 1.0};
    bool pass = true;
    std::string detail;
    try {
        const auto rep = heat_kernel_envelope_check(4.0, 3, 2, t_grid, plan, 0);
        double c_min = 1e300, c_max = 0.0;
        for (const auto& row : rep.rows) {
            if (!(std::abs(row.slope - (-0.5)) <= 0.1)) pass = false;
            if (!std::isfinite(row.envelope_constant)) pass = false;
            c_min = std::min(c_min, row.envelope_constant);
            c_max = std::max(c_max, row.envelope_constant);
            char buf[64];
            std::snprintf(buf, sizeof(buf), " t=%g: slope=%.3f C=%.3g", row.t, row.slope,
                          row.envelope_constant);
            detail += buf;
        }
        const double c_mid = 0.5 * (c_min + c_max);
        if (!(c_max <= 1.2 * c_mid && c_min >= 0.8 * c_mid)) pass = false;
    } catch (const Error& e) {
        pass = false;
        detail = e.what();
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), " [%.0fs]", now_seconds() - t0);
    report(7, "heat-kernel envelope", pass, detail + buf);
}

// 8. Feynman-Kac cross-check.
void criterion_8() {
    const double t0 = now_seconds();
    bool pass = true;
    std::string detail;
    FeynmanKacParams params;
    params.ensemble = 8000;
    params.dt = 2e-3;
    params.seed = 515;
    for (double kappa : {0.0, 4.0}) {
        try {
            const auto rep = feynman_kac_check(kappa, 3, 1.0, params, 0);
            if (!(rep.rel_error <= 0.05)) pass = false;
            char buf[96];
            std::snprintf(buf, sizeof(buf), " k=%g: mc=%.4g bvp=%.4g err=%.2f%%", kappa,
                          rep.mc_value, rep.bvp_value, 100.0 * rep.rel_error);
            detail += buf;
        } catch (const Error& e) {
            pass = false;
            detail += std::string(" ") + e.what();
        }
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), " [%.0fs]", now_seconds() - t0);
    report(8, "feynman-kac cross-check", pass, detail + buf);
}

// 9. Many-particle Hardy floor.
void criterion_9() {
    const double t0 = now_seconds();
    bool pass = true;
    std::string detail;
    if (paper_hardy_constant(3, 2) != 0.5) pass = false;
    for (int n : {2, 3}) {
        const auto est = estimate_multiparticle_hardy(3, n, 100000, 31);
        const double upper = 1.0 / est.value;
        if (!(upper >= est.paper_floor)) pass = false;
        char buf[96];
        std::snprintf(buf, sizeof(buf), " N=%d: 1/ratio=%.4f >= C=%.4f", n, upper,
                      est.paper_floor);
        detail += buf;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), " [%.1fs]", now_seconds() - t0);
    report(9, "many-particle hardy floor", pass, detail + buf);
}

// 10. Engine determinism and diffusion normalization.
void criterion_10() {
    const double t0 = now_seconds();
    bool pass = true;
    std::string detail;

    SimPlan plan = pair_plan(1e-3, 1e-3, 256, 64);
    plan.drift = LiftedDrift::uniform(KernelSpec::hardy_attracting(9.0, 3), 2);
    const auto r1 = run_ensemble(plan, 1);
    const auto r2 = run_ensemble(plan, 2);
    const auto r4 = run_ensemble(plan, 4);
    for (std::size_t i = 0; i < r1.outcomes.size(); ++i) {
        if (r1.outcomes[i].collided != r2.outcomes[i].collided ||
            r1.outcomes[i].collided != r4.outcomes[i].collided)
            pass = false;
        for (std::size_t c = 0; c < r1.outcomes[i].terminal.positions.size(); ++c) {
            if (r1.outcomes[i].terminal.positions[c] != r2.outcomes[i].terminal.positions[c])
                pass = false;
            if (r1.outcomes[i].terminal.positions[c] != r4.outcomes[i].terminal.positions[c])
                pass = false;
        }
    }
    detail += pass ? "bitwise identical across 1/2/4 workers;" : "worker mismatch;";

    SimPlan zero = pair_plan(2e-3, 1e-6, 10000, 123);
    zero.horizon = 0.5;
    const auto res = run_ensemble(zero, 0);
    const double sigma = std::sqrt(2.0 * zero.horizon);
    double min_p = 1.0;
    for (int c = 0; c < 6; ++c) {
        std::vector<double> samples;
        samples.reserve(res.outcomes.size());
        for (const auto& o : res.outcomes)
            samples.push_back(o.terminal.positions[c] - zero.x0.positions[c]);
        const double p =
            ks_test_pvalue(samples, [sigma](double x) { return normal_cdf(x / sigma); });
        min_p = std::min(min_p, p);
    }
    if (!(min_p > 0.01)) pass = false;
    char buf[64];
    std::snprintf(buf, sizeof(buf), " KS min p-value=%.3f (1%% level) [%.0fs]", min_p,
                  now_seconds() - t0);
    report(10, "determinism and diffusion", pass, detail + buf);
}

}  // namespace

int main() {
    const double t0 = now_seconds();
    criterion_2();
    criterion_4();
    criterion_6();
    criterion_5();
    criterion_3();
    criterion_9();
    criterion_10();
    criterion_8();
    criterion_1();
    criterion_7();
    std::printf("acceptance: %d/10 passed [%.0fs total]\n", 10 - g_failures,
                now_seconds() - t0);
    return g_failures == 0 ? 0 : 1;
}
