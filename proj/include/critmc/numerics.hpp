#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "critmc/errors.hpp"

namespace critmc {

/// Surface area of the unit sphere S^{d-1} in R^d.
inline double sphere_area(int dim) {
    // |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)
    return 2.0 * std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim);
}

struct Quadrature1D {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1]; Newton iteration on P_n.
inline Quadrature1D gauss_legendre(int n) {
    Quadrature1D q;
    q.nodes.resize(n);
    q.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Chebyshev-based initial guess.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        q.nodes[i] = -x;
        q.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        q.weights[i] = w;
        q.weights[n - 1 - i] = w;
    }
    return q;
}

/// Gauss-Legendre rule mapped to [a, b].
inline Quadrature1D gauss_legendre(int n, double a, double b) {
    Quadrature1D q = gauss_legendre(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < n; ++i) {
        q.nodes[i] = mid + half * q.nodes[i];
        q.weights[i] *= half;
    }
    return q;
}

namespace detail {

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double h = b - a;
    const double left = h / 12.0 * (fa + 4.0 * flm + fm);
    const double right = h / 12.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) return left + right + delta / 15.0;
    // absolute target, with a relative floor so plateaus of large integrands
    // do not drive the recursion into rounding noise
    if (std::abs(delta) <= 15.0 * tol ||
        std::abs(delta) <= 1e-11 * (std::abs(left) + std::abs(right)))
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-10, int max_depth = 48) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Thomas algorithm for a tridiagonal system; diagonals are modified in place.
/// lower[0] and upper[n-1] are unused.
inline void solve_tridiagonal(std::vector<double>& lower, std::vector<double>& diag,
                              std::vector<double>& upper, std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

/// Natural cubic spline through (x_i, y_i); x strictly increasing.
class CubicSpline {
public:
    CubicSpline() = default;

    CubicSpline(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 3 || y_.size() != n) throw std::invalid_argument("CubicSpline: need n >= 3");
        std::vector<double> lower(n, 0.0), diag(n, 1.0), upper(n, 0.0), rhs(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double hi = x_[i] - x_[i - 1];
            const double hi1 = x_[i + 1] - x_[i];
            lower[i] = hi / 6.0;
            diag[i] = (hi + hi1) / 3.0;
            upper[i] = hi1 / 6.0;
            rhs[i] = (y_[i + 1] - y_[i]) / hi1 - (y_[i] - y_[i - 1]) / hi;
        }
        solve_tridiagonal(lower, diag, upper, rhs);
        m_ = std::move(rhs);  // second derivatives, natural BC: m_0 = m_{n-1} = 0
    }

    double operator()(double xq) const {
        if (xq <= x_.front()) return y_.front() + slope_front() * (xq - x_.front());
        if (xq >= x_.back()) return y_.back() + slope_back() * (xq - x_.back());
        const auto it = std::upper_bound(x_.begin(), x_.end(), xq);
        const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double A = (x_[i + 1] - xq) / h, B = (xq - x_[i]) / h;
        return A * y_[i] + B * y_[i + 1] +
               ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
    }

    double min_x() const { return x_.front(); }
    double max_x() const { return x_.back(); }

private:
    double slope_front() const {
        const double h = x_[1] - x_[0];
        return (y_[1] - y_[0]) / h - h / 6.0 * (2.0 * m_[0] + m_[1]);
    }
    double slope_back() const {
        const std::size_t n = x_.size();
        const double h = x_[n - 1] - x_[n - 2];
        return (y_[n - 1] - y_[n - 2]) / h + h / 6.0 * (m_[n - 2] + 2.0 * m_[n - 1]);
    }

    std::vector<double> x_, y_, m_;
};

/// Least-squares slope of y against x.
inline double fit_slope(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

inline MeanStderr mean_stderr(std::span<const double> v) {
    const std::size_t n = v.size();
    MeanStderr out;
    if (n == 0) return out;
    for (double e : v) out.mean += e;
    out.mean /= static_cast<double>(n);
    if (n < 2) return out;
    double s2 = 0.0;
    for (double e : v) s2 += (e - out.mean) * (e - out.mean);
    s2 /= static_cast<double>(n - 1);
    out.stderr_ = std::sqrt(s2 / static_cast<double>(n));
    return out;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Asymptotic Kolmogorov distribution: P(sqrt(n) D_n > lambda).
inline double kolmogorov_pvalue(double lambda) {
    if (lambda < 1e-8) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 == 1 ? term : -term);
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

/// One-sample KS test p-value of samples against a CDF.
inline double ks_test_pvalue(std::vector<double> samples,
                             const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = cdf(samples[i]);
        d = std::max(d, std::abs(c - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - c));
    }
    const double sn = std::sqrt(static_cast<double>(n));
    // Stephens' small-sample correction.
    return kolmogorov_pvalue(d * (sn + 0.12 + 0.11 / sn));
}

}  // namespace critmc
