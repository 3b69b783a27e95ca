#include <doctest.h>

#include <cmath>
#include <vector>

#include "critmc/analysis.hpp"
#include "critmc/sde.hpp"
#include "critmc/vecops.hpp"

using namespace critmc;

namespace {

SimPlan zero_drift_plan(int n, int d) {
    SimPlan plan;
    plan.drift = LiftedDrift::uniform(KernelSpec::bounded_smooth(std::vector<double>(d, 0.0)), n);
    plan.x0 = ParticleConfiguration(n, d);
    for (int i = 0; i < n; ++i) plan.x0.block(i)[0] = 2.0 * i;  // spread out
    plan.dt = 1e-2;
    plan.horizon = 0.4;
    plan.collision_radius = 1e-6;
    plan.seed = 31;
    plan.ensemble = 1;
    return plan;
}

SimPlan hardy_pair_plan(double kappa, bool attract) {
    SimPlan plan;
    const auto k = attract ? KernelSpec::hardy_attracting(kappa, 3)
                           : KernelSpec::hardy_repulsing(kappa, 3);
    plan.drift = LiftedDrift::uniform(k, 2);
    plan.x0 = ParticleConfiguration(2, 3);
    plan.x0.block(0)[0] = 0.5;
    plan.x0.block(1)[0] = -0.5;
    plan.dt = 1e-4;
    plan.horizon = 1.0;
    plan.collision_radius = 1e-3;
    plan.seed = 17;
    return plan;
}

}  // namespace

TEST_SUITE("sde") {

TEST_CASE("zero drift, zero increment leaves the state fixed") {
    const auto plan = zero_drift_plan(2, 3);
    std::vector<double> xi(6, 0.0);
    const auto next = step(plan.drift, plan.x0, 0.01, xi);
    for (std::size_t c = 0; c < next.positions.size(); ++c)
        CHECK(next.positions[c] == plan.x0.positions[c]);
}

TEST_CASE("single-step displacement has covariance 2 dt I") {
    const auto plan = zero_drift_plan(2, 3);
    const double dt = 0.05;
    const int n_samples = 10000;
    RandomStream rng(1, 0);
    std::vector<double> xi(6);
    double sum_sq = 0.0;   // over all coordinates
    double cross = 0.0;    // one off-diagonal pair
    for (int s = 0; s < n_samples; ++s) {
        for (auto& z : xi) z = rng.next_gaussian();
        const auto next = step(plan.drift, plan.x0, dt, xi);
        for (int c = 0; c < 6; ++c) {
            const double disp = next.positions[c] - plan.x0.positions[c];
            sum_sq += disp * disp;
        }
        cross += (next.positions[0] - plan.x0.positions[0]) *
                 (next.positions[1] - plan.x0.positions[1]);
    }
    // chi^2 with k = 6 n dof, normal approximation at the 1% level
    const double k = 6.0 * n_samples;
    const double z = (sum_sq / (2.0 * dt) - k) / std::sqrt(2.0 * k);
    CHECK(std::abs(z) < 2.576);
    CHECK(std::abs(cross / n_samples) < 3.0 * 2.0 * dt / std::sqrt(n_samples));
}

TEST_CASE("repulsion increases the pair distance in expectation") {
    const auto plan = hardy_pair_plan(4.0, false);
    std::vector<double> xi(6, 0.0);  // isolate the drift
    const auto next = step(plan.drift, plan.x0, 1e-3, xi);
    CHECK(next.pair_distance(0, 1) > plan.x0.pair_distance(0, 1));

    const auto attract = hardy_pair_plan(4.0, true);
    const auto next2 = step(attract.drift, attract.x0, 1e-3, xi);
    CHECK(next2.pair_distance(0, 1) < attract.x0.pair_distance(0, 1));
}

TEST_CASE("tamed euler damps large drift steps") {
    const auto plan = hardy_pair_plan(25.0, true);
    ParticleConfiguration close(2, 3);
    close.block(0)[0] = 0.05;
    close.block(1)[0] = -0.05;
    std::vector<double> xi(6, 0.0);
    const auto em = step(plan.drift, close, 0.5, xi, Scheme::EulerMaruyama);
    const auto tamed = step(plan.drift, close, 0.5, xi, Scheme::TamedEuler);
    const auto b = eval_drift(plan.drift, close);
    const double move_em = dist(em.positions, close.positions);
    const double move_tamed = dist(tamed.positions, close.positions);
    CHECK(move_em == doctest::Approx(0.5 * norm(b)).epsilon(1e-12));
    CHECK(move_tamed < move_em);
    CHECK(move_tamed < 1.0);  // |b| dt / (1 + dt |b|) < 1/dt contribution is bounded
}

TEST_CASE("simulate is deterministic given (seed, index)") {
    auto plan = hardy_pair_plan(9.0, true);
    plan.dt = 1e-3;
    plan.functionals.push_back(
        {"decay", 1.0, false, [](const ParticleConfiguration& x) {
             return x.pair_distance(0, 1);
         }});
    const auto a = simulate(plan, 3);
    const auto b = simulate(plan, 3);
    CHECK(a.collided == b.collided);
    CHECK(a.functional_values[0] == b.functional_values[0]);
    for (std::size_t c = 0; c < a.terminal.positions.size(); ++c)
        CHECK(a.terminal.positions[c] == b.terminal.positions[c]);

    const auto other = simulate(plan, 4);
    bool any_diff = false;
    for (std::size_t c = 0; c < a.terminal.positions.size(); ++c)
        if (a.terminal.positions[c] != other.terminal.positions[c]) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("ensemble results are bitwise independent of the worker count") {
    auto plan = hardy_pair_plan(16.0, true);
    plan.dt = 1e-3;
    plan.ensemble = 64;
    plan.functionals.push_back(
        {"drift_norm", 0.0, true, nullptr});
    const auto r1 = run_ensemble(plan, 1);
    const auto r2 = run_ensemble(plan, 2);
    const auto r8 = run_ensemble(plan, 8);
    REQUIRE(r1.outcomes.size() == r2.outcomes.size());
    CHECK(r1.collision_probability == r2.collision_probability);
    CHECK(r1.collision_probability == r8.collision_probability);
    for (std::size_t i = 0; i < r1.outcomes.size(); ++i) {
        CHECK(r1.outcomes[i].collided == r2.outcomes[i].collided);
        CHECK(r1.outcomes[i].functional_values[0] == r2.outcomes[i].functional_values[0]);
        for (std::size_t c = 0; c < r1.outcomes[i].terminal.positions.size(); ++c) {
            CHECK(r1.outcomes[i].terminal.positions[c] ==
                  r2.outcomes[i].terminal.positions[c]);
            CHECK(r1.outcomes[i].terminal.positions[c] ==
                  r8.outcomes[i].terminal.positions[c]);
        }
    }
}

TEST_CASE("zero-drift terminal law is N(x0, 2T I) per coordinate") {
    auto plan = zero_drift_plan(2, 3);
    plan.dt = 2e-3;
    plan.horizon = 0.4;
    plan.ensemble = 10000;
    const auto res = run_ensemble(plan, 2);
    const double sigma = std::sqrt(2.0 * plan.horizon);
    for (int c = 0; c < 6; ++c) {
        std::vector<double> samples;
        samples.reserve(res.outcomes.size());
        for (const auto& o : res.outcomes)
            samples.push_back(o.terminal.positions[c] - plan.x0.positions[c]);
        const double p =
            ks_test_pvalue(samples, [sigma](double x) { return normal_cdf(x / sigma); });
        CHECK(p > 0.01);
    }
}

TEST_CASE("discounted constant functional integrates to one") {
    auto plan = zero_drift_plan(2, 3);
    plan.dt = 1e-3;
    plan.horizon = 20.0;
    plan.ensemble = 4;
    plan.functionals.push_back(
        {"unit", 1.0, false, [](const ParticleConfiguration&) { return 1.0; }});
    const auto res = run_ensemble(plan, 2);
    CHECK(res.functional_means[0].mean == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("collision stderr follows binomial statistics") {
    auto plan = hardy_pair_plan(36.0, true);
    plan.dt = 1e-3;
    plan.ensemble = 400;
    const auto res = run_ensemble(plan, 2);
    const double p = res.collision_probability;
    CHECK(res.collision_stderr ==
          doctest::Approx(std::sqrt(p * (1.0 - p) / plan.ensemble)).epsilon(1e-12));
    CHECK(p > 0.2);  // strongly attracting regime collides often
}

TEST_CASE("strong attraction collides, repulsion does not") {
    auto attract = hardy_pair_plan(36.0, true);
    attract.dt = 1e-4;
    attract.ensemble = 300;
    const auto res_a = run_ensemble(attract, 2);
    CHECK(res_a.collision_probability >= 0.3);

    auto repel = hardy_pair_plan(36.0, false);
    repel.dt = 1e-4;
    repel.ensemble = 300;
    const auto res_r = run_ensemble(repel, 2);
    CHECK(res_r.collision_probability <= 0.01);
}

TEST_CASE("drift-norm path functional is finite on surviving trajectories") {
    auto plan = hardy_pair_plan(4.0, true);
    plan.dt = 1e-3;
    plan.ensemble = 100;
    plan.functionals.push_back({"bnorm", 0.0, true, nullptr});
    const auto res = run_ensemble(plan, 2);
    for (const auto& o : res.outcomes) {
        if (!o.collided) {
            CHECK(std::isfinite(o.functional_values[0]));
            CHECK(o.functional_values[0] > 0.0);
        }
    }
}

TEST_CASE("snapshots are recorded at exact times") {
    auto plan = zero_drift_plan(2, 3);
    plan.dt = 7e-3;  // deliberately not dividing the snapshot times
    plan.snapshot_times = {0.1, 0.25, 0.4};
    plan.ensemble = 3;
    const auto res = run_ensemble(plan, 1);
    for (const auto& o : res.outcomes) REQUIRE(o.snapshots.size() == 3);
}

TEST_CASE("mollified drift remains usable through a collision approach") {
    auto plan = hardy_pair_plan(25.0, true);
    plan.dt = 1e-3;
    plan.ensemble = 32;
    plan.collision_radius = 5e-3;
    plan.epsilon_schedule = {0.2, 0.1};
    const auto sweep = run_epsilon_sweep(plan, 2);
    REQUIRE(sweep.size() == 2);
    for (const auto& res : sweep) {
        CHECK(res.outcomes.size() == 32);
        for (const auto& o : res.outcomes) CHECK(std::isfinite(o.min_pair_distance_seen));
    }
}

TEST_CASE("substep budget exhaustion counts as collision and is flagged") {
    SimPlan plan;
    plan.drift = LiftedDrift::uniform(KernelSpec::hardy_attracting(36.0, 3), 2);
    plan.x0 = ParticleConfiguration(2, 3);
    plan.x0.block(0)[0] = 0.05;
    plan.x0.block(1)[0] = -0.05;
    plan.dt = 1e-2;
    plan.horizon = 1.0;
    plan.collision_radius = 1e-3;
    plan.seed = 5;
    plan.ensemble = 8;
    plan.max_substeps = 1;  // starve the near-collision resolution
    const auto res = run_ensemble(plan, 1);
    for (const auto& o : res.outcomes) {
        CHECK(o.collided);
        if (o.flagged) CHECK(o.flag_reason == "SubstepBudgetExhausted");
    }
    CHECK(res.flagged_count > 0);
}

TEST_CASE("plan validation") {
    auto plan = zero_drift_plan(2, 3);
    plan.dt = 0.0;
    CHECK_THROWS_AS(plan.validate(), Error);
    plan = zero_drift_plan(2, 3);
    plan.collision_radius = 0.0;
    CHECK_THROWS_AS(plan.validate(), Error);
    plan = zero_drift_plan(2, 3);
    plan.ensemble = 0;
    CHECK_THROWS_AS(plan.validate(), Error);
}

}  // TEST_SUITE
