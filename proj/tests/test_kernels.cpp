#include <doctest.h>

#include <cmath>
#include <vector>

#include "critmc/kernels.hpp"
#include "critmc/vecops.hpp"

using namespace critmc;

namespace {

/// Central finite-difference divergence of a kernel, h = 1e-5.
double fd_divergence(const KernelSpec& spec, std::vector<double> y, double h = 1e-5) {
    double acc = 0.0;
    for (std::size_t c = 0; c < y.size(); ++c) {
        y[c] += h;
        const double up = eval_kernel(spec, y)[c];
        y[c] -= 2.0 * h;
        const double dn = eval_kernel(spec, y)[c];
        y[c] += h;
        acc += (up - dn) / (2.0 * h);
    }
    return acc;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("hardy kernel closed form") {
    const auto k = KernelSpec::hardy_attracting(4.0, 3);
    const std::vector<double> y1{1.0, 0.0, 0.0};
    const auto v1 = eval_kernel(k, y1);
    CHECK(v1[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(v1[1] == 0.0);
    CHECK(v1[2] == 0.0);

    const std::vector<double> y2{2.0, 0.0, 0.0};
    const auto v2 = eval_kernel(k, y2);
    CHECK(v2[0] == doctest::Approx(0.5).epsilon(1e-14));

    const auto rep = KernelSpec::hardy_repulsing(4.0, 3);
    const auto vr = eval_kernel(rep, y1);
    CHECK(vr[0] == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("hardy scaling identity |K(y)||y| on a log grid") {
    for (double kappa : {1.0, 4.0, 9.0}) {
        for (int d : {3, 4, 5}) {
            const auto k = KernelSpec::hardy_attracting(kappa, d);
            const double expected = std::sqrt(kappa) * 0.5 * (d - 2);
            for (int i = 0; i <= 12; ++i) {
                const double r = std::pow(10.0, -3.0 + 3.0 * i / 12.0);  // 1e-3 .. 1
                std::vector<double> y(d, 0.0);
                y[0] = r / std::sqrt(2.0);
                y[1] = r / std::sqrt(2.0);
                const double mag = norm(eval_kernel(k, y));
                CHECK(mag * r == doctest::Approx(expected).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("hypersurface magnitude") {
    const auto k = KernelSpec::hypersurface(2.0, 3);
    std::vector<double> y{1.25, 0.0, 0.0};
    const auto v = eval_kernel(k, y);
    const double mag2 = norm2(std::span<const double>(v));
    const double expected = 1.0 / (0.25 * std::pow(-std::log(0.25), 2.0));
    CHECK(mag2 == doctest::Approx(expected).epsilon(1e-12));
    // direction is radial
    CHECK(v[1] == 0.0);
    // outside the support shell
    std::vector<double> far{3.0, 0.0, 0.0};
    CHECK(norm(eval_kernel(k, far)) == 0.0);
}

TEST_CASE("weighted hardy cap") {
    const double p = 0.25;
    const auto k = KernelSpec::weighted_hardy(4.0, 3, p);
    const double q = (3.0 - 2.0) * (3.0 - 2.0) / (3.0 - 1.0) + 1.0;  // (d-2)^2/(d-1)+1
    std::vector<double> inside{1.0, 0.0, 0.0};  // on the cap axis
    const auto vi = eval_kernel(k, inside);
    CHECK(norm(vi) == doctest::Approx(1.0 * std::pow(p, -0.5 / q)).epsilon(1e-10));
    std::vector<double> outside{-1.0, 0.0, 0.0};  // antipodal
    CHECK(norm(eval_kernel(k, outside)) == 0.0);
}

TEST_CASE("singularity guard and dimension guard") {
    const auto k = KernelSpec::hardy_attracting(1.0, 3);
    std::vector<double> z{0.0, 0.0, 0.0};
    CHECK_THROWS_AS(eval_kernel(k, z), SingularPoint);
    std::vector<double> tiny{1e-13, 0.0, 0.0};
    CHECK_THROWS_AS(eval_kernel(k, tiny), SingularPoint);
    CHECK_THROWS_AS(KernelSpec::hardy_attracting(1.0, 2), UnsupportedDim);

    const auto hyp = KernelSpec::hypersurface(2.0, 3);
    std::vector<double> on_sphere{1.0, 0.0, 0.0};
    CHECK_THROWS_AS(eval_kernel(hyp, on_sphere), SingularPoint);
}

TEST_CASE("divergence closed forms") {
    std::vector<double> y{1.0, 0.0, 0.0};
    CHECK(divergence(KernelSpec::hardy_attracting(1.0, 3), y) ==
          doctest::Approx(0.5).epsilon(1e-14));
    CHECK(divergence(KernelSpec::hardy_repulsing(1.0, 3), y) ==
          doctest::Approx(-0.5).epsilon(1e-14));

    std::vector<double> y4{2.0, 0.0, 0.0, 0.0};
    CHECK(divergence(KernelSpec::hardy_attracting(4.0, 4), y4) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fd_divergence(KernelSpec::hardy_attracting(4.0, 4), y4) ==
          doctest::Approx(1.0).epsilon(1e-6));

    std::vector<double> off_sphere{1.2, 0.0, 0.0};
    CHECK_THROWS_AS(divergence(KernelSpec::hypersurface(2.0, 3), off_sphere),
                    NoAnalyticDivergence);
    CHECK_THROWS_AS(divergence(KernelSpec::weighted_hardy(1.0, 3, 0.5), off_sphere),
                    NoAnalyticDivergence);
}

TEST_CASE("divergence matches finite differences on generic points") {
    const auto sum = KernelSpec::sum({KernelSpec::hardy_attracting(2.0, 3),
                                      KernelSpec::scaled(-0.7, KernelSpec::hardy_attracting(1.0, 3))});
    for (double r : {0.5, 0.9, 1.4, 2.0}) {
        std::vector<double> y{r * 0.6, r * 0.64, -r * 0.48};
        const double frac = norm(y) / r;  // make |y| = r exactly up to rounding
        for (auto& c : y) c /= frac;
        const double analytic = divergence(sum, y);
        const double fd = fd_divergence(sum, y);
        CHECK(fd == doctest::Approx(analytic).epsilon(1e-4));
    }
}

TEST_CASE("nominal form bounds") {
    const auto rec_a = nominal_form_bounds(KernelSpec::hardy_attracting(4.0, 3));
    REQUIRE(rec_a.size() == 2);
    CHECK(rec_a[0].flavor == BoundFlavor::F);
    CHECK(rec_a[0].kappa == doctest::Approx(4.0));
    CHECK(rec_a[0].c_kappa == 0.0);
    CHECK(rec_a[1].flavor == BoundFlavor::DivPlus);
    CHECK(rec_a[1].kappa == doctest::Approx(4.0));  // 2 sqrt(4)

    const auto rec_r = nominal_form_bounds(KernelSpec::hardy_repulsing(9.0, 3));
    REQUIRE(rec_r.size() == 2);
    CHECK(rec_r[0].kappa == doctest::Approx(9.0));
    CHECK(rec_r[1].kappa == 0.0);
    CHECK(rec_r[1].c_kappa == 0.0);

    const auto rec_s = nominal_form_bounds(KernelSpec::sum(
        {KernelSpec::hardy_attracting(1.0, 3), KernelSpec::hardy_attracting(1.0, 3)}));
    CHECK(rec_s[0].kappa == doctest::Approx(4.0));  // (sqrt 1 + sqrt 1)^2

    CHECK_THROWS_AS(nominal_form_bounds(KernelSpec::hypersurface(2.0, 3)), NoAnalyticBound);
    CHECK_THROWS_AS(nominal_form_bounds(KernelSpec::weighted_hardy(1.0, 3, 0.5)),
                    NoAnalyticBound);
}

TEST_CASE("mollifier preserves constants exactly") {
    const auto v = KernelSpec::bounded_smooth({0.3, -1.2, 2.5});
    const MollifiedKernel m(v, 0.37);
    std::vector<double> x{0.1, 0.2, -0.05};
    const auto out = m.eval(x);
    CHECK(out[0] == doctest::Approx(0.3).epsilon(1e-13));
    CHECK(out[1] == doctest::Approx(-1.2).epsilon(1e-13));
    CHECK(out[2] == doctest::Approx(2.5).epsilon(1e-13));
}

TEST_CASE("mollified hardy approximates the kernel away from the singularity") {
    const auto k = KernelSpec::hardy_attracting(4.0, 3);
    const MollifiedKernel m(k, 0.1);
    std::vector<double> x{1.0, 0.0, 0.0};
    const auto out = m.eval(x);
    CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(out[1]) < 1e-9);
}

TEST_CASE("mollified kernel is finite everywhere including the singular ball") {
    const auto k = KernelSpec::hardy_attracting(4.0, 3);
    const MollifiedKernel m(k, 0.1);
    for (double r : {0.0, 1e-6, 0.02, 0.05, 0.1, 0.5}) {
        std::vector<double> x{r, 0.0, 0.0};
        const auto out = m.eval(x);
        CHECK(std::isfinite(out[0]));
        CHECK(norm(out) < 1e4);
    }
    std::vector<double> zero{0.0, 0.0, 0.0};
    CHECK(norm(m.eval(zero)) == 0.0);  // odd kernel
}

TEST_CASE("mollification converges with order >= 1 as eps halves") {
    const auto k = KernelSpec::hardy_attracting(4.0, 3);
    std::vector<double> y{0.8, 0.3, -0.2};
    const auto exact = eval_kernel(k, y);
    std::vector<double> errs;
    for (double eps : {0.2, 0.1, 0.05, 0.025}) {
        const MollifiedKernel m(k, eps);
        const auto v = m.eval(y);
        double e = 0.0;
        for (int c = 0; c < 3; ++c) e += (v[c] - exact[c]) * (v[c] - exact[c]);
        errs.push_back(std::sqrt(e));
    }
    for (std::size_t i = 1; i < errs.size(); ++i) {
        CHECK(errs[i] < errs[i - 1]);
        CHECK(errs[i] <= 0.55 * errs[i - 1]);  // observed order >= 1
    }
}

TEST_CASE("mollified sup-norm scales like 1/eps") {
    const auto k = KernelSpec::hardy_attracting(4.0, 3);
    std::vector<double> sups;
    for (double eps : {0.2, 0.1, 0.05, 0.025}) {
        const MollifiedKernel m(k, eps);
        double sup = 0.0;
        for (int i = 1; i <= 400; ++i) {
            const double r = 3.0 * eps * i / 400.0;
            std::vector<double> x{r, 0.0, 0.0};
            sup = std::max(sup, norm(m.eval(x)));
        }
        sups.push_back(sup);
        CHECK(sup <= 4.0 / eps);  // no faster than c / eps
    }
    for (std::size_t i = 1; i < sups.size(); ++i) {
        const double ratio = sups[i] / sups[i - 1];
        CHECK(ratio > 1.5);
        CHECK(ratio < 2.6);
    }
}

TEST_CASE("mollifier certificate rejects hopeless node counts") {
    const auto k = KernelSpec::hardy_attracting(1.0, 3);
    CHECK_THROWS_AS(MollifiedKernel(k, 0.1, /*radial_nodes=*/4), QuadratureUnderresolved);
}

TEST_CASE("radial profile matches direct quadrature") {
    const auto k = KernelSpec::hardy_attracting(2.0, 3);
    const MollifiedKernel m(k, 0.15);
    for (double r : {0.05, 0.2, 1.0, 3.0}) {
        std::vector<double> x{0.0, r, 0.0};  // off-axis to exercise the direction logic
        const auto fast = m.eval(x);
        // reference via an independent direction: radial symmetry
        std::vector<double> xr{r, 0.0, 0.0};
        const auto ref = m.eval(xr);
        CHECK(fast[1] == doctest::Approx(ref[0]).epsilon(1e-10));
    }
}

TEST_CASE("spec validation") {
    CHECK_THROWS(KernelSpec::hypersurface(1.0, 3));   // beta > 1 required
    CHECK_THROWS(KernelSpec::weighted_hardy(1.0, 3, 0.0));
    CHECK_THROWS(KernelSpec::hardy_attracting(-1.0, 3));
    CHECK_NOTHROW(KernelSpec::sum({KernelSpec::hardy_attracting(1.0, 3)}));
    CHECK_THROWS(KernelSpec::sum({}));
}

}  // TEST_SUITE
