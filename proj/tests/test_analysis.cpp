#include <doctest.h>

#include <cmath>
#include <vector>

#include "critmc/analysis.hpp"
#include "critmc/vecops.hpp"

using namespace critmc;

namespace {

/// Regularized upper incomplete gamma Q(a, x), series for the lower part.
double gamma_q(double a, double x) {
    double sum = 0.0, term = 1.0 / a;
    for (int k = 0; k < 500; ++k) {
        sum += term;
        term *= x / (a + k + 1);
        if (term < 1e-16 * sum) break;
    }
    return 1.0 - std::pow(x, a) * std::exp(-x) * sum / std::tgamma(a);
}

/// Independent 1D Euler-Maruyama of dR = ((nu-1)/(2R)) dt + dW, absorbing at
/// the threshold.
double bessel_hit_mc(double nu, double r0, double threshold, double horizon, long m,
                     std::uint64_t seed, double dt = 1e-4) {
    long hits = 0;
    for (long i = 0; i < m; ++i) {
        RandomStream rng(seed, i);
        double r = r0, t = 0.0;
        while (t < horizon) {
            if (r <= threshold) {
                ++hits;
                break;
            }
            double h = std::min(dt, horizon - t);
            // resolve drift and diffusion near the boundary
            const double gap = r - threshold;
            h = std::min(h, std::max(1e-10, 2.5e-3 * gap * gap));
            r += (nu - 1.0) / (2.0 * r) * h + std::sqrt(h) * rng.next_gaussian();
            t += h;
        }
        if (r <= threshold && t >= horizon) ++hits;
    }
    return static_cast<double>(hits) / m;
}

SimPlan pair_plan(double kappa, double dt, double r_coll, long ensemble,
                  std::uint64_t seed) {
    SimPlan plan;
    if (kappa > 0.0) {
        plan.drift = LiftedDrift::uniform(KernelSpec::hardy_attracting(kappa, 3), 2);
    } else {
        plan.drift = LiftedDrift::uniform(KernelSpec::bounded_smooth({0.0, 0.0, 0.0}), 2);
    }
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

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("slope identity: nu - d equals minus the pair exponent at N=2") {
    for (double kappa : {1.0, 4.0, 9.0, 12.5}) {
        for (int d : {3, 4, 5}) {
            CHECK(bessel_dimension(kappa, d) - d ==
                  doctest::Approx(-invariant_exponent(kappa, d, 2)).epsilon(1e-15));
        }
    }
}

TEST_CASE("bessel dimension thresholds are exact") {
    for (int d : {3, 4, 5, 6}) {
        CHECK(bessel_dimension(16.0, d) == 2.0);
        const double kappa_crit = 16.0 * d * d / double((d - 2) * (d - 2));
        CHECK(std::abs(bessel_dimension(kappa_crit, d)) <= 1e-12);
        CHECK(bessel_dimension(0.0, d) == static_cast<double>(d));
    }
    CHECK(make_bessel_oracle(16.1, 3).hits_zero());
    CHECK_FALSE(make_bessel_oracle(15.9, 3).hits_zero());
    CHECK_FALSE(make_bessel_oracle(16.0, 3).hits_zero());  // nu = 2 exactly
}

TEST_CASE("first-passage solver matches the closed-form tau_0 law") {
    // P(tau_0 <= T) = Q(1 - nu/2, r0^2/(2T)) for nu < 2
    for (double nu : {1.75, 1.5, 0.5}) {
        const double analytic = gamma_q(1.0 - 0.5 * nu, 0.5 * 0.5 * 0.5);
        const double cn = bessel_hit_probability(nu, 0.5, 0.0, 1.0);
        CHECK(cn == doctest::Approx(analytic).epsilon(0.01));
    }
}

TEST_CASE("first-passage of a positive level vs independent MC") {
    const double p_cn = bessel_hit_probability(3.0, 1.0, 0.05, 1.0);
    const double p_mc = bessel_hit_mc(3.0, 1.0, 0.05, 1.0, 4000, 77);
    const double se = std::sqrt(p_mc * (1.0 - p_mc) / 4000.0);
    CHECK(std::abs(p_cn - p_mc) <= 3.0 * se + 1e-3);
}

TEST_CASE("nu >= 2 never hits the origin") {
    CHECK(bessel_hit_probability(2.0, 0.5, 0.0, 1.0) <= 2e-3);
    CHECK(bessel_hit_probability(2.5, 0.5, 0.0, 1.0) <= 1e-3);
    CHECK(bessel_hit_probability(3.0, 0.5, 1e-6, 1.0) <= 1e-3);
}

TEST_CASE("nu < 2 hitting probability is stable under threshold halving") {
    const double p1 = bessel_hit_probability(1.5, 0.5, 1e-6, 1.0);
    const double p2 = bessel_hit_probability(1.5, 0.5, 5e-7, 1.0);
    const double p0 = bessel_hit_probability(1.5, 0.5, 0.0, 1.0);
    CHECK(p1 > 0.3);
    CHECK(std::abs(p1 - p2) < 5e-3);
    CHECK(std::abs(p1 - p0) < 5e-3);
}

TEST_CASE("form bound estimates reach the sharp Hardy constants from below") {
    const struct {
        int d;
        double kappa;
    } cases[] = {{3, 4.0}, {4, 9.0}};
    for (const auto& cs : cases) {
        const auto kernel = KernelSpec::hardy_attracting(cs.kappa, cs.d);
        const auto est_f = estimate_form_bound(kernel, BoundFlavor::F);
        CHECK(est_f.value >= 0.98 * cs.kappa);
        CHECK(est_f.value <= cs.kappa * (1.0 + 1e-9));

        const auto est_div = estimate_form_bound(kernel, BoundFlavor::DivPlus);
        const double sharp = 2.0 * std::sqrt(cs.kappa);
        CHECK(est_div.value >= 0.98 * sharp);
        CHECK(est_div.value <= sharp * (1.0 + 1e-9));
    }
}

TEST_CASE("bounded kernels have vanishing form bound (concentrated trials)") {
    const auto kernel = KernelSpec::bounded_smooth({1.0, 0.0, 0.0});
    TrialFamilySpec family;
    family.family = TrialFamily::GaussianBump;
    family.width_schedule = {0.05, 0.02, 0.01};
    const auto est = estimate_form_bound(kernel, BoundFlavor::F, family);
    CHECK(est.value < 0.02);
}

TEST_CASE("repulsing kernel has zero divergence bound") {
    const auto kernel = KernelSpec::hardy_repulsing(4.0, 3);
    const auto est = estimate_form_bound(kernel, BoundFlavor::DivPlus);
    CHECK(est.value == 0.0);
}

TEST_CASE("MF flavor estimate stays below sqrt(kappa)") {
    const auto kernel = KernelSpec::hardy_attracting(4.0, 3);
    TrialFamilySpec family;
    family.family = TrialFamily::GaussianBump;
    const auto est = estimate_form_bound(kernel, BoundFlavor::MF, family);
    CHECK(est.value > 0.0);
    CHECK(est.value <= std::sqrt(4.0) * (1.0 + 1e-9));
}

TEST_CASE("hypersurface kernel admits a finite numerical form bound") {
    const auto kernel = KernelSpec::hypersurface(2.0, 3);
    TrialFamilySpec family;
    family.family = TrialFamily::GaussianBump;
    family.center = 1.0;
    const auto est = estimate_form_bound(kernel, BoundFlavor::F, family);
    CHECK(std::isfinite(est.value));
    CHECK(est.value > 0.0);
}

TEST_CASE("multiparticle hardy estimate respects the paper floor") {
    const auto est2 = estimate_multiparticle_hardy(3, 2, 100000);
    CHECK(est2.paper_floor == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(1.0 / est2.value >= est2.paper_floor);
    CHECK(est2.value > 1.5);  // meaningfully sharp
    CHECK(est2.value < 2.0);

    const auto est3 = estimate_multiparticle_hardy(3, 3, 60000);
    CHECK(1.0 / est3.value >= est3.paper_floor - 3.0 * est3.mc_error);
    CHECK(est3.value > 0.3);
    CHECK(est3.value <= 1.0 / est3.paper_floor + 3.0 * est3.mc_error);
}

TEST_CASE("psi integrability verdicts around both thresholds (d=3)") {
    CHECK(psi_integrability(100.0, 3).verdict == IntegrabilityVerdict::Converges);
    CHECK(psi_integrability(143.0, 3).verdict == IntegrabilityVerdict::Converges);
    CHECK(psi_integrability(145.0, 3).verdict == IntegrabilityVerdict::Diverges);
    CHECK(psi_integrability(200.0, 3).verdict == IntegrabilityVerdict::Diverges);
    CHECK(psi_integrability(144.0, 3).verdict == IntegrabilityVerdict::Inconclusive);

    // W^{2,1} variant flips at kappa = 16
    CHECK(psi_integrability(9.0, 3, true).verdict == IntegrabilityVerdict::Converges);
    CHECK(psi_integrability(25.0, 3, true).verdict == IntegrabilityVerdict::Diverges);
    CHECK(psi_integrability(16.0, 3, true).verdict == IntegrabilityVerdict::Inconclusive);
}

TEST_CASE("gaussian cross moment: zero at independence, matches MC otherwise") {
    CHECK(gaussian_cross_moment(1.0, 1.0, 0.0, 3) == doctest::Approx(0.0).epsilon(1e-12));

    const double sy2 = 1.0, sz2 = 1.3, c = 0.5;
    const double analytic = gaussian_cross_moment(sy2, sz2, c, 3);
    // MC cross-check: Z = rho-split of correlated gaussian 3-vectors
    RandomStream rng(2025, 0);
    double acc = 0.0;
    const long m = 400000;
    std::vector<double> batch;
    double bacc = 0.0;
    for (long i = 0; i < m; ++i) {
        double y[3], z[3];
        for (int k = 0; k < 3; ++k) {
            const double g1 = rng.next_gaussian();
            const double g2 = rng.next_gaussian();
            y[k] = std::sqrt(sy2) * g1;
            z[k] = c / std::sqrt(sy2) * g1 +
                   std::sqrt(sz2 - c * c / sy2) * g2;
        }
        const double y2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        const double z2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        const double v = (y[0] * z[0] + y[1] * z[1] + y[2] * z[2]) / (y2 * z2);
        acc += v;
        bacc += v;
        if ((i + 1) % 20000 == 0) {
            batch.push_back(bacc / 20000.0);
            bacc = 0.0;
        }
    }
    const auto ms = mean_stderr(batch);
    CHECK(std::abs(analytic - ms.mean) <= 4.0 * ms.stderr_);
}

TEST_CASE("sampled Rayleigh check of the lifting lemma") {
    const auto r2 = rayleigh_lift_check(4.0, 3, {1.0, 1.0});
    CHECK(r2.holds);
    // N=2 closed form: lhs/||phi||^2 = kappa (d-2) / (8 sigma^2), sigma^2 = a^2
    CHECK(r2.lhs == doctest::Approx(4.0 * 1.0 / 8.0).epsilon(1e-10));
    CHECK(r2.rhs == doctest::Approx(1.0 * 0.5 * 3.0 * 2.0).epsilon(1e-9));  // delta=1, grad=3

    const auto r3 = rayleigh_lift_check(4.0, 3, {0.8, 1.3, 2.0});
    CHECK(r3.holds);
    CHECK(r3.lhs > 0.0);
    CHECK(r3.lhs < r3.rhs);

    const auto r3b = rayleigh_lift_check(9.0, 3, {1.0, 1.0, 1.0});
    CHECK(r3b.holds);
}

TEST_CASE("collision phase scan matches the bessel oracle (reduced size)") {
    auto plan = pair_plan(4.0, 2e-4, 2e-3, 1200, 5);
    const auto rows = collision_phase_scan({4.0, 9.0}, plan, 2);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        CHECK(row.oracle_probability >= 0.0);
        const double sigma = std::max(row.stderr_, 1e-3);
        CHECK(std::abs(row.probability - row.oracle_probability) <= 3.0 * sigma + 0.01);
    }
    CHECK(rows[1].probability > rows[0].probability);  // increasing in kappa
}

TEST_CASE("epsilon sweep converges to the raw-kernel collision probability") {
    auto plan = pair_plan(4.0, 5e-4, 4e-3, 1200, 3);
    plan.epsilon_schedule = {0.064, 0.004, 0.001};
    const auto sweep = run_epsilon_sweep(plan, 2);
    const auto raw = run_ensemble(plan, 2);
    const double oracle =
        bessel_hit_probability(bessel_dimension(4.0, 3), 0.5, 2e-3, 1.0);
    double prev = -1.0;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const double p = sweep[i].collision_probability;
        const double se = std::max(sweep[i].collision_stderr, 1e-3);
        // mollification weakens the near-core attraction: p never
        // significantly exceeds the singular limit, and grows along eps -> 0
        CHECK(p <= raw.collision_probability + 3.0 * se);
        CHECK(p >= prev - 3.0 * se);
        prev = p;
    }
    // finest radius (eps <= r_coll/4) agrees with the oracle
    const double p_fine = sweep.back().collision_probability;
    const double se_fine = std::max(sweep.back().collision_stderr, 1e-3);
    CHECK(std::abs(p_fine - oracle) <= 3.0 * se_fine);
}

TEST_CASE("feynman-kac: MC agrees with the radial BVP") {
    FeynmanKacParams params;
    params.ensemble = 1500;
    params.dt = 2e-3;
    const auto rep0 = feynman_kac_check(0.0, 3, 1.0, params, 2);
    CHECK(rep0.rel_error <= 0.08);

    const auto rep4 = feynman_kac_check(4.0, 3, 1.0, params, 2);
    CHECK(rep4.rel_error <= 0.08);
}

TEST_CASE("coarse first-passage grids fail the Richardson certificate") {
    CHECK_THROWS_AS(bessel_hit_probability(0.5, 0.5, 0.0, 1.0, 16), GridUnderresolved);
}

TEST_CASE("tail budget guard") {
    FeynmanKacParams params;
    params.ensemble = 16;
    params.dt = 5e-3;
    params.tolerance = 1e-12;  // horizon truncation can never satisfy this
    CHECK_THROWS_AS(feynman_kac_check(0.0, 3, 1.0, params, 1), TailBoundTooLarge);
}

TEST_CASE("degenerate trials are rejected at construction") {
    CHECK_THROWS_AS(TrialFunction::gaussian_bump(3, 1.0, 0.0), DegenerateTrial);
    CHECK_THROWS_AS(TrialFunction::radial_power(3, 0.0, -0.5, 1.0), DegenerateTrial);
    CHECK_THROWS_AS(HardyTrial::pair_product(2, 3, -0.6, 0.5, 1.0), DegenerateTrial);
}

TEST_CASE("feynman-kac: zero observable gives zero") {
    // amplitude-zero bump: both routes must return exactly zero
    FeynmanKacParams params;
    params.ensemble = 16;
    params.dt = 5e-3;
    auto rep = feynman_kac_check(0.0, 3, 2.0, params, 1);
    // rel_error is w.r.t. bvp; instead check both values directly on a
    // krylov-style zero function by scaling: the observable is a fixed bump,
    // so exercise the zero case through krylov_functional below.
    CHECK(rep.bvp_value > 0.0);
}

TEST_CASE("krylov functional: zero f, exact homogeneity, bounded ratio") {
    auto plan = pair_plan(1.0, 2e-3, 1e-4, 400, 9);
    plan.horizon = 4.0;
    const auto g = KernelSpec::hardy_attracting(1.0, 3);

    KrylovParams params;
    params.ensemble = 400;
    params.horizon = 4.0;

    KrylovParams zero = params;
    zero.f_amplitude = 0.0;
    const auto rep0 = krylov_functional(plan, g, 5.0, 6.0, zero, 2);
    CHECK(rep0.lhs == 0.0);
    CHECK(rep0.rhs == 0.0);

    const auto rep1 = krylov_functional(plan, g, 5.0, 6.0, params, 2);
    KrylovParams twice = params;
    twice.f_amplitude = 2.0;
    const auto rep2 = krylov_functional(plan, g, 5.0, 6.0, twice, 2);
    CHECK(rep2.lhs == doctest::Approx(2.0 * rep1.lhs).epsilon(1e-12));
    CHECK(rep2.rhs == doctest::Approx(2.0 * rep1.rhs).epsilon(1e-9));

    // ratio stable across lambda within a generous band
    const auto rep_l10 = krylov_functional(plan, g, 10.0, 6.0, params, 2);
    CHECK(rep1.ratio > 0.0);
    CHECK(rep_l10.ratio > 0.0);
    CHECK(rep_l10.ratio <= rep1.ratio);  // larger discount, smaller lhs
}

TEST_CASE("krylov requires q above the lifted exponent") {
    auto plan = pair_plan(1.0, 2e-3, 1e-4, 16, 9);
    const auto g = KernelSpec::hardy_attracting(1.0, 3);
    CHECK_THROWS_AS(krylov_functional(plan, g, 5.0, 3.0, {}, 1), Error);  // q <= dN-2 = 4
}

TEST_CASE("heat kernel slope matches nu - d (reduced size)") {
    auto plan = pair_plan(4.0, 2e-3, 1e-4, 100000, 21);
    const auto rep = heat_kernel_envelope_check(4.0, 3, 2, {0.5}, plan, 2);
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.expected_slope == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(std::abs(rep.rows[0].slope - rep.expected_slope) < 0.15);
    CHECK(std::isfinite(rep.rows[0].envelope_constant));
    CHECK(rep.rows[0].envelope_constant > 0.0);

    // the near-empty tail of a small ensemble cannot support the fit
    auto tiny = pair_plan(4.0, 2e-3, 1e-4, 500, 22);
    CHECK_THROWS_AS(heat_kernel_envelope_check(4.0, 3, 2, {0.5}, tiny, 2),
                    BandwidthUnderresolved);
}

}  // TEST_SUITE
