#include "critmc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "critmc/vecops.hpp"

namespace critmc {

namespace {

double bump(double r) {
    if (r >= 1.0) return 0.0;
    return std::exp(1.0 / (r * r - 1.0));
}

/// Hardy magnitude coefficient sqrt(kappa) (d-2)/2.
double hardy_coeff(double kappa, int dim) {
    return std::sqrt(kappa) * 0.5 * (dim - 2);
}

/// Weighted-Hardy angular exponent q from Example ex1(2): q >= (d-2)^2/(d-1) + 1.
double weighted_hardy_q(int dim) {
    return static_cast<double>(dim - 2) * (dim - 2) / (dim - 1) + 1.0;
}

/// Fraction of S^{d-1} with omega_1 >= c.
double cap_fraction_of_cos(double c, int dim) {
    const auto f = [dim](double t) { return std::pow(1.0 - t * t, 0.5 * (dim - 3)); };
    const double total = integrate(f, -1.0, 1.0, 1e-12);
    if (c >= 1.0) return 0.0;
    return integrate(f, c, 1.0, 1e-12) / total;
}

double cos_threshold_for_fraction(double p, int dim) {
    if (p >= 1.0) return -1.0;
    // Memoized: the bisection sits on an adaptive quadrature and the kernel
    // may be evaluated inside estimator integrals.
    thread_local std::vector<std::pair<std::pair<double, int>, double>> cache;
    for (const auto& [key, val] : cache)
        if (key.first == p && key.second == dim) return val;
    double lo = -1.0, hi = 1.0;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cap_fraction_of_cos(mid, dim) > p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    cache.push_back({{p, dim}, 0.5 * (lo + hi)});
    return cache.back().second;
}

double hypersurface_magnitude(double r, double beta) {
    if (r < 0.5 || r > 1.5) return 0.0;
    const double s = std::abs(r - 1.0);
    return std::sqrt(1.0 / (s * std::pow(-std::log(s), beta)));
}

}  // namespace

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::HardyAttracting: return "hardy_attracting";
        case KernelKind::HardyRepulsing: return "hardy_repulsing";
        case KernelKind::WeightedHardy: return "weighted_hardy";
        case KernelKind::Hypersurface: return "hypersurface";
        case KernelKind::BoundedSmooth: return "bounded_smooth";
        case KernelKind::Sum: return "sum";
        case KernelKind::Scaled: return "scaled";
    }
    return "unknown";
}

KernelSpec KernelSpec::hardy_attracting(double kappa, int dim) {
    KernelSpec s;
    s.kind = KernelKind::HardyAttracting;
    s.kappa = kappa;
    s.dim = dim;
    s.validate();
    return s;
}

KernelSpec KernelSpec::hardy_repulsing(double kappa, int dim) {
    KernelSpec s;
    s.kind = KernelKind::HardyRepulsing;
    s.kappa = kappa;
    s.dim = dim;
    s.validate();
    return s;
}

KernelSpec KernelSpec::weighted_hardy(double kappa, int dim, double cap_fraction) {
    KernelSpec s;
    s.kind = KernelKind::WeightedHardy;
    s.kappa = kappa;
    s.dim = dim;
    s.cap_fraction = cap_fraction;
    s.validate();
    return s;
}

KernelSpec KernelSpec::hypersurface(double beta, int dim) {
    KernelSpec s;
    s.kind = KernelKind::Hypersurface;
    s.beta = beta;
    s.dim = dim;
    s.validate();
    return s;
}

KernelSpec KernelSpec::bounded_smooth(std::vector<double> value) {
    KernelSpec s;
    s.kind = KernelKind::BoundedSmooth;
    s.dim = static_cast<int>(value.size());
    s.value = std::move(value);
    s.validate();
    return s;
}

KernelSpec KernelSpec::sum(std::vector<KernelSpec> components) {
    KernelSpec s;
    s.kind = KernelKind::Sum;
    s.dim = components.empty() ? 0 : components.front().dim;
    s.children = std::move(components);
    s.validate();
    return s;
}

KernelSpec KernelSpec::scaled(double factor, KernelSpec child) {
    KernelSpec s;
    s.kind = KernelKind::Scaled;
    s.dim = child.dim;
    s.factor = factor;
    s.children.push_back(std::move(child));
    s.validate();
    return s;
}

void KernelSpec::validate() const {
    if (dim < 3) {
        std::ostringstream oss;
        oss << "kernel dimension d=" << dim << " unsupported: the catalog requires d >= 3";
        throw UnsupportedDim(oss.str());
    }
    if (kappa < 0.0) throw Error("kernel strength kappa must be >= 0");
    switch (kind) {
        case KernelKind::Hypersurface:
            if (!(beta > 1.0)) throw Error("hypersurface kernel requires beta > 1");
            break;
        case KernelKind::WeightedHardy:
            if (!(cap_fraction > 0.0 && cap_fraction <= 1.0))
                throw Error("weighted Hardy cap fraction must lie in (0, 1]");
            break;
        case KernelKind::BoundedSmooth:
            if (static_cast<int>(value.size()) != dim)
                throw Error("bounded smooth kernel value must have length d");
            break;
        case KernelKind::Sum:
            if (children.empty()) throw Error("sum kernel needs at least one component");
            for (const auto& c : children) {
                if (c.dim != dim) throw Error("sum kernel components must share the dimension");
                c.validate();
            }
            break;
        case KernelKind::Scaled:
            if (children.size() != 1) throw Error("scaled kernel needs exactly one child");
            children.front().validate();
            break;
        default:
            break;
    }
}

bool KernelSpec::is_singular() const {
    switch (kind) {
        case KernelKind::HardyAttracting:
        case KernelKind::HardyRepulsing:
        case KernelKind::WeightedHardy:
        case KernelKind::Hypersurface:
            return true;
        case KernelKind::BoundedSmooth:
            return false;
        case KernelKind::Sum:
        case KernelKind::Scaled:
            return std::any_of(children.begin(), children.end(),
                               [](const KernelSpec& c) { return c.is_singular(); });
    }
    return false;
}

double KernelSpec::singular_distance(std::span<const double> y) const {
    switch (kind) {
        case KernelKind::HardyAttracting:
        case KernelKind::HardyRepulsing:
        case KernelKind::WeightedHardy:
            return norm(y);
        case KernelKind::Hypersurface:
            return std::abs(norm(y) - 1.0);
        case KernelKind::BoundedSmooth:
            return std::numeric_limits<double>::infinity();
        case KernelKind::Sum:
        case KernelKind::Scaled: {
            double dmin = std::numeric_limits<double>::infinity();
            for (const auto& c : children) dmin = std::min(dmin, c.singular_distance(y));
            return dmin;
        }
    }
    return std::numeric_limits<double>::infinity();
}

bool KernelSpec::odd_radial() const {
    switch (kind) {
        case KernelKind::HardyAttracting:
        case KernelKind::HardyRepulsing:
        case KernelKind::Hypersurface:
            return true;
        case KernelKind::WeightedHardy:
        case KernelKind::BoundedSmooth:
            return false;
        case KernelKind::Sum:
        case KernelKind::Scaled:
            return std::all_of(children.begin(), children.end(),
                               [](const KernelSpec& c) { return c.odd_radial(); });
    }
    return false;
}

void eval_kernel(const KernelSpec& spec, std::span<const double> y, std::span<double> out) {
    if (spec.dim < 3) throw UnsupportedDim("eval_kernel requires d >= 3");
    if (static_cast<int>(y.size()) != spec.dim)
        throw Error("eval_kernel: point dimension does not match the kernel");
    if (spec.is_singular() && spec.singular_distance(y) < kSingularityGuard)
        throw SingularPoint("eval_kernel: point within the singularity guard");

    switch (spec.kind) {
        case KernelKind::HardyAttracting:
        case KernelKind::HardyRepulsing: {
            const double r2 = norm2(y);
            double c = hardy_coeff(spec.kappa, spec.dim) / r2;
            if (spec.kind == KernelKind::HardyRepulsing) c = -c;
            for (std::size_t i = 0; i < y.size(); ++i) out[i] = c * y[i];
            return;
        }
        case KernelKind::WeightedHardy: {
            const double r = norm(y);
            const double cos1 = y[0] / r;
            const double thr = cos_threshold_for_fraction(spec.cap_fraction, spec.dim);
            if (cos1 < thr) {
                fill(out, 0.0);
                return;
            }
            const double q = weighted_hardy_q(spec.dim);
            const double c = hardy_coeff(spec.kappa, spec.dim) *
                             std::pow(spec.cap_fraction, -0.5 / q) / (r * r);
            for (std::size_t i = 0; i < y.size(); ++i) out[i] = c * y[i];
            return;
        }
        case KernelKind::Hypersurface: {
            const double r = norm(y);
            const double m = hypersurface_magnitude(r, spec.beta);
            for (std::size_t i = 0; i < y.size(); ++i) out[i] = m * y[i] / r;
            return;
        }
        case KernelKind::BoundedSmooth: {
            std::copy(spec.value.begin(), spec.value.end(), out.begin());
            return;
        }
        case KernelKind::Sum: {
            fill(out, 0.0);
            std::vector<double> tmp(y.size());
            for (const auto& c : spec.children) {
                eval_kernel(c, y, tmp);
                axpy(1.0, tmp, out);
            }
            return;
        }
        case KernelKind::Scaled: {
            eval_kernel(spec.children.front(), y, out);
            scale(out, spec.factor);
            return;
        }
    }
}

std::vector<double> eval_kernel(const KernelSpec& spec, std::span<const double> y) {
    std::vector<double> out(y.size());
    eval_kernel(spec, y, out);
    return out;
}

double divergence(const KernelSpec& spec, std::span<const double> y) {
    if (spec.is_singular() && spec.singular_distance(y) < kSingularityGuard)
        throw SingularPoint("divergence: point within the singularity guard");
    switch (spec.kind) {
        case KernelKind::HardyAttracting:
            return std::sqrt(spec.kappa) * 0.5 * (spec.dim - 2) * (spec.dim - 2) / norm2(y);
        case KernelKind::HardyRepulsing:
            return -std::sqrt(spec.kappa) * 0.5 * (spec.dim - 2) * (spec.dim - 2) / norm2(y);
        case KernelKind::BoundedSmooth:
            return 0.0;
        case KernelKind::Sum: {
            double s = 0.0;
            for (const auto& c : spec.children) s += divergence(c, y);
            return s;
        }
        case KernelKind::Scaled:
            return spec.factor * divergence(spec.children.front(), y);
        case KernelKind::WeightedHardy:
        case KernelKind::Hypersurface:
            throw NoAnalyticDivergence("divergence: " + to_string(spec.kind) +
                                       " has no closed form; use finite differences");
    }
    return 0.0;
}

std::vector<FormBoundRecord> nominal_form_bounds(const KernelSpec& spec) {
    switch (spec.kind) {
        case KernelKind::HardyAttracting:
            return {{spec.kappa, 0.0, BoundFlavor::F, BoundProvenance::Analytic},
                    {2.0 * std::sqrt(spec.kappa), 0.0, BoundFlavor::DivPlus,
                     BoundProvenance::Analytic}};
        case KernelKind::HardyRepulsing:
            // (div K)_+ = 0 for the repulsing kernel.
            return {{spec.kappa, 0.0, BoundFlavor::F, BoundProvenance::Analytic},
                    {0.0, 0.0, BoundFlavor::DivPlus, BoundProvenance::Analytic}};
        case KernelKind::BoundedSmooth: {
            const double c = norm2(spec.value);
            return {{0.0, c, BoundFlavor::F, BoundProvenance::Analytic},
                    {0.0, 0.0, BoundFlavor::DivPlus, BoundProvenance::Analytic}};
        }
        case KernelKind::Sum: {
            // F closes under addition via sqrt(kappa) = sum sqrt(kappa_i); the
            // divergence bound is linear in (div K)_+.
            double sk = 0.0, sc = 0.0, kp = 0.0, cp = 0.0;
            bool have_divplus = true;
            for (const auto& c : spec.children) {
                const auto sub = nominal_form_bounds(c);
                bool child_divplus = false;
                for (const auto& rec : sub) {
                    if (rec.flavor == BoundFlavor::F) {
                        sk += std::sqrt(rec.kappa);
                        sc += std::sqrt(rec.c_kappa);
                    } else if (rec.flavor == BoundFlavor::DivPlus) {
                        kp += rec.kappa;
                        cp += rec.c_kappa;
                        child_divplus = true;
                    }
                }
                have_divplus = have_divplus && child_divplus;
            }
            std::vector<FormBoundRecord> out{
                {sk * sk, sc * sc, BoundFlavor::F, BoundProvenance::Analytic}};
            if (have_divplus)
                out.push_back({kp, cp, BoundFlavor::DivPlus, BoundProvenance::Analytic});
            return out;
        }
        case KernelKind::Scaled: {
            const auto sub = nominal_form_bounds(spec.children.front());
            const double f = spec.factor;
            std::vector<FormBoundRecord> out;
            for (const auto& rec : sub) {
                if (rec.flavor == BoundFlavor::F) {
                    out.push_back({f * f * rec.kappa, f * f * rec.c_kappa, BoundFlavor::F,
                                   BoundProvenance::Analytic});
                } else if (rec.flavor == BoundFlavor::DivPlus && f >= 0.0) {
                    out.push_back({f * rec.kappa, f * rec.c_kappa, BoundFlavor::DivPlus,
                                   BoundProvenance::Analytic});
                }
            }
            return out;
        }
        case KernelKind::WeightedHardy:
        case KernelKind::Hypersurface:
            throw NoAnalyticBound("nominal_form_bounds: " + to_string(spec.kind) +
                                  " has no closed-form bound; estimate numerically");
    }
    return {};
}

RadialKernelProfile kernel_radial_profile(const KernelSpec& spec) {
    RadialKernelProfile prof;
    const int d = spec.dim;
    prof.magnitude = [spec, d](double r) {
        std::vector<double> y(d, 0.0);
        y[0] = r;
        return norm(eval_kernel(spec, y));
    };
    bool analytic_div = true;
    try {
        std::vector<double> probe(static_cast<std::size_t>(d), 0.0);
        probe[0] = 1.37;  // generic radius, off every singular set in the catalog
        (void)divergence(spec, probe);
    } catch (const NoAnalyticDivergence&) {
        analytic_div = false;
    }
    if (analytic_div) {
        prof.div_plus = [spec, d](double r) {
            std::vector<double> y(d, 0.0);
            y[0] = r;
            return std::max(divergence(spec, y), 0.0);
        };
    }
    // Deep-scale continuation: measure the local power exponent at probe
    // radii inside the representable range and extend it below. Exact for the
    // homogeneous catalog kinds, slope 0 for bounded fields; the hypersurface
    // kind is supported away from the origin so the tail is empty.
    const auto make_log = [](std::function<double(double)> fn) {
        const double probe_hi = 1e-6, probe_lo = 1e-8;
        const double f_hi = fn(probe_hi), f_lo = fn(probe_lo);
        double slope = 0.0, anchor = -std::numeric_limits<double>::infinity();
        if (f_hi > 0.0 && f_lo > 0.0) {
            slope = (std::log(f_lo) - std::log(f_hi)) /
                    (std::log(probe_lo) - std::log(probe_hi));
            anchor = std::log(f_hi);
        }
        return [fn, slope, anchor, probe_hi](double r) {
            if (r >= probe_hi) {
                const double v = fn(r);
                return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
            }
            if (!std::isfinite(anchor)) return -std::numeric_limits<double>::infinity();
            return anchor + slope * (std::log(r) - std::log(probe_hi));
        };
    };
    prof.log_magnitude = make_log(prof.magnitude);
    if (prof.div_plus) prof.log_div_plus = make_log(prof.div_plus);

    // Only a plain weighted-Hardy cap carries an angular mask; mixtures are
    // not supported by the radial reduction.
    std::function<bool(const KernelSpec&)> has_cap = [&](const KernelSpec& s) {
        if (s.kind == KernelKind::WeightedHardy) return true;
        for (const auto& c : s.children)
            if (has_cap(c)) return true;
        return false;
    };
    if (spec.kind == KernelKind::WeightedHardy) {
        prof.angular_mass_fraction = spec.cap_fraction;
    } else if (has_cap(spec)) {
        throw Error("kernel_radial_profile: weighted Hardy inside composites is unsupported");
    }
    return prof;
}

SphereRule SphereRule::build(int dim, int polar_nodes, int azimuth_nodes) {
    SphereRule rule;
    if (dim == 2) {
        rule.points.reserve(azimuth_nodes);
        rule.weights.reserve(azimuth_nodes);
        for (int k = 0; k < azimuth_nodes; ++k) {
            const double phi = 2.0 * std::numbers::pi * k / azimuth_nodes;
            rule.points.push_back({std::cos(phi), std::sin(phi)});
            rule.weights.push_back(2.0 * std::numbers::pi / azimuth_nodes);
        }
        return rule;
    }
    const SphereRule sub = build(dim - 1, polar_nodes, azimuth_nodes);
    const Quadrature1D polar = gauss_legendre(polar_nodes, 0.0, std::numbers::pi);
    for (int i = 0; i < polar_nodes; ++i) {
        const double psi = polar.nodes[i];
        const double w = polar.weights[i] * std::pow(std::sin(psi), dim - 2);
        for (std::size_t a = 0; a < sub.points.size(); ++a) {
            std::vector<double> p(dim);
            p[0] = std::cos(psi);
            for (int j = 0; j < dim - 1; ++j) p[j + 1] = std::sin(psi) * sub.points[a][j];
            rule.points.push_back(std::move(p));
            rule.weights.push_back(w * sub.weights[a]);
        }
    }
    return rule;
}

MollifiedKernel::MollifiedKernel(KernelSpec base, double epsilon, int radial_nodes,
                                 int polar_nodes, int azimuth_nodes)
    : base_(std::move(base)), epsilon_(epsilon) {
    if (!(epsilon_ > 0.0)) throw Error("mollify: epsilon must be > 0");
    base_.validate();
    const int d = base_.dim;

    radial_ = gauss_legendre(radial_nodes, 0.0, 1.0);
    double s_radial = 0.0;
    for (int i = 0; i < radial_nodes; ++i) {
        radial_.weights[i] *= bump(radial_.nodes[i]) * std::pow(radial_.nodes[i], d - 1);
        s_radial += radial_.weights[i];
    }
    const double exact_radial = integrate(
        [d](double r) { return bump(r) * std::pow(r, d - 1); }, 0.0, 1.0, 1e-14);
    if (std::abs(s_radial - exact_radial) > 1e-6 * exact_radial)
        throw QuadratureUnderresolved(
            "mollify: radial rule cannot certify the bump normalization to 1e-6");

    sphere_ = SphereRule::build(d, polar_nodes, azimuth_nodes);
    double s_sphere = 0.0;
    for (double w : sphere_.weights) s_sphere += w;
    if (std::abs(s_sphere - sphere_area(d)) > 1e-6 * sphere_area(d))
        throw QuadratureUnderresolved(
            "mollify: sphere rule cannot certify the bump normalization to 1e-6");

    // Self-normalize so the rule integrates gamma_eps to exactly 1 and the
    // mollifier preserves constants bit-for-bit.
    const double total = s_radial * s_sphere;
    for (double& w : radial_.weights) w /= total;

    if (base_.odd_radial() && base_.kind != KernelKind::Hypersurface) {
        bool hyp = false;
        std::function<void(const KernelSpec&)> scan = [&](const KernelSpec& s) {
            if (s.kind == KernelKind::Hypersurface) hyp = true;
            for (const auto& c : s.children) scan(c);
        };
        scan(base_);
        if (!hyp) build_profile();
    }
}

void MollifiedKernel::eval_quadrature(std::span<const double> x, std::span<double> out) const {
    const int d = base_.dim;
    fill(out, 0.0);
    std::vector<double> y(d), k(d);
    for (std::size_t i = 0; i < radial_.nodes.size(); ++i) {
        const double rad = epsilon_ * radial_.nodes[i];
        for (std::size_t a = 0; a < sphere_.points.size(); ++a) {
            for (int j = 0; j < d; ++j) y[j] = x[j] - rad * sphere_.points[a][j];
            try {
                eval_kernel(base_, y, k);
            } catch (const SingularPoint&) {
                y[0] += 1e-9;  // nudge off the singular set; measure-zero event
                eval_kernel(base_, y, k);
            }
            axpy(radial_.weights[i] * sphere_.weights[a], k, out);
        }
    }
}

void MollifiedKernel::build_profile() {
    const int d = base_.dim;
    // Azimuthal symmetry about e1: reduce the angular integral to the polar
    // angle. Uses a finer polar rule than the generic path.
    const int npolar = 48;
    Quadrature1D polar = gauss_legendre(npolar, 0.0, std::numbers::pi);
    double s_polar = 0.0;
    std::vector<double> pw(npolar);
    for (int i = 0; i < npolar; ++i) {
        pw[i] = polar.weights[i] * std::pow(std::sin(polar.nodes[i]), d - 2);
        s_polar += pw[i];
    }
    double s_radial = 0.0;
    for (double w : radial_.weights) s_radial += w;  // currently 1/s_sphere
    const double norm_const = s_radial * s_polar;

    const auto component = [&](double rho) {
        // g(rho) = (gamma_eps * K)(rho e1) . e1
        double acc = 0.0;
        std::vector<double> y(d, 0.0), k(d);
        for (std::size_t i = 0; i < radial_.nodes.size(); ++i) {
            const double rad = epsilon_ * radial_.nodes[i];
            for (int a = 0; a < npolar; ++a) {
                y[0] = rho - rad * std::cos(polar.nodes[a]);
                y[1] = -rad * std::sin(polar.nodes[a]);
                try {
                    eval_kernel(base_, y, k);
                } catch (const SingularPoint&) {
                    y[0] += 1e-9;
                    eval_kernel(base_, y, k);
                }
                acc += radial_.weights[i] * pw[a] * k[0];
            }
        }
        return acc / norm_const;
    };

    profile_rmax_ = 64.0;
    {
        const int n = 193;
        std::vector<double> xs(n), ys(n);
        for (int i = 0; i < n; ++i) {
            xs[i] = 4.0 * epsilon_ * i / (n - 1);
            ys[i] = (i == 0) ? 0.0 : component(xs[i]);  // odd kernel: K_eps(0) = 0
        }
        inner_ = CubicSpline(std::move(xs), std::move(ys));
    }
    {
        const int n = 257;
        std::vector<double> xs(n), ys(n);
        const double t0 = std::log(2.0 * epsilon_), t1 = std::log(profile_rmax_);
        for (int i = 0; i < n; ++i) {
            xs[i] = t0 + (t1 - t0) * i / (n - 1);
            ys[i] = component(std::exp(xs[i]));
        }
        outer_ = CubicSpline(std::move(xs), std::move(ys));
    }
    has_profile_ = true;
}

double MollifiedKernel::radial_component(double r) const {
    if (!has_profile_) throw Error("radial_component: kernel has no radial profile");
    if (r <= 0.0) return 0.0;
    if (r <= 3.0 * epsilon_) return inner_(r);
    if (r <= profile_rmax_) return outer_(std::log(r));
    // Rarely exercised tail: fall back to direct quadrature.
    std::vector<double> x(base_.dim, 0.0), out(base_.dim, 0.0);
    x[0] = r;
    eval_quadrature(x, out);
    return out[0];
}

void MollifiedKernel::eval(std::span<const double> x, std::span<double> out) const {
    if (has_profile_) {
        const double r = norm(x);
        if (r < 1e-14) {
            fill(out, 0.0);
            return;
        }
        const double k = radial_component(r);
        for (std::size_t j = 0; j < x.size(); ++j) out[j] = k * x[j] / r;
        return;
    }
    eval_quadrature(x, out);
}

std::vector<double> MollifiedKernel::eval(std::span<const double> x) const {
    std::vector<double> out(x.size());
    eval(x, out);
    return out;
}

MollifiedKernel mollify(const KernelSpec& base, double epsilon) {
    return MollifiedKernel(base, epsilon);
}

}  // namespace critmc
