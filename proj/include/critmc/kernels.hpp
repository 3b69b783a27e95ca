#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "critmc/errors.hpp"
#include "critmc/numerics.hpp"

namespace critmc {

/// Evaluation closer to a singular set than this raises SingularPoint.
inline constexpr double kSingularityGuard = 1e-12;

enum class KernelKind {
    HardyAttracting,
    HardyRepulsing,
    WeightedHardy,
    Hypersurface,
    BoundedSmooth,
    Sum,
    Scaled,
};

std::string to_string(KernelKind kind);

enum class BoundFlavor { F, MF, DivPlus };

enum class BoundProvenance { Analytic, Estimated };

struct FormBoundRecord {
    double kappa = 0.0;
    double c_kappa = 0.0;
    BoundFlavor flavor = BoundFlavor::F;
    BoundProvenance provenance = BoundProvenance::Analytic;
};

/// Declarative description of a pair-interaction kernel K: R^d -> R^d.
struct KernelSpec {
    KernelKind kind = KernelKind::BoundedSmooth;
    double kappa = 0.0;
    int dim = 3;

    double beta = 2.0;          ///< Hypersurface log exponent, beta > 1.
    double cap_fraction = 1.0;  ///< WeightedHardy: solid-angle fraction of the cap about e1.
    double factor = 1.0;        ///< Scaled.
    std::vector<double> value;  ///< BoundedSmooth constant field.
    std::vector<KernelSpec> children;  ///< Sum components / Scaled child.

    static KernelSpec hardy_attracting(double kappa, int dim);
    static KernelSpec hardy_repulsing(double kappa, int dim);
    static KernelSpec weighted_hardy(double kappa, int dim, double cap_fraction);
    static KernelSpec hypersurface(double beta, int dim);
    static KernelSpec bounded_smooth(std::vector<double> value);
    static KernelSpec sum(std::vector<KernelSpec> components);
    static KernelSpec scaled(double factor, KernelSpec child);

    /// Validates invariants (d >= 3, kappa >= 0, beta > 1, tree shape); throws on violation.
    void validate() const;

    bool is_singular() const;
    /// Distance from y to the kernel's singular set (+inf for bounded kinds).
    double singular_distance(std::span<const double> y) const;
    /// K(-y) == -K(y) and |K| depends on |y| only.
    bool odd_radial() const;
};

/// K(y) per the closed-form catalog. Throws SingularPoint within the guard
/// distance of the singular set and UnsupportedDim for d < 3.
std::vector<double> eval_kernel(const KernelSpec& spec, std::span<const double> y);

/// In-place variant used by hot loops.
void eval_kernel(const KernelSpec& spec, std::span<const double> y, std::span<double> out);

/// Closed-form div K(y). Throws NoAnalyticDivergence for Hypersurface/WeightedHardy.
double divergence(const KernelSpec& spec, std::span<const double> y);

/// Closed-form form-bound records (flavors F and DivPlus). Throws
/// NoAnalyticBound for kinds without one.
std::vector<FormBoundRecord> nominal_form_bounds(const KernelSpec& spec);

/// |K| restricted to a ray, with the fraction of the sphere carrying the mass.
/// Used by the Rayleigh estimators, which integrate radially. The log
/// profiles continue the small-r power behaviour below the double range of
/// |y|^2, where sharpened trials still carry mass.
struct RadialKernelProfile {
    std::function<double(double)> magnitude;      ///< |K|(r) on the supporting directions
    std::function<double(double)> div_plus;       ///< (div K)_+(r); zero if none
    std::function<double(double)> log_magnitude;  ///< log |K|(r), deep-scale safe
    std::function<double(double)> log_div_plus;   ///< log (div K)_+(r), deep-scale safe
    double angular_mass_fraction = 1.0;           ///< share of S^{d-1} where K is nonzero
};

RadialKernelProfile kernel_radial_profile(const KernelSpec& spec);

/// Product quadrature rule on the unit sphere S^{d-1} (exact-enough for the
/// smooth integrands the mollifier sees; weights sum to |S^{d-1}|).
struct SphereRule {
    std::vector<std::vector<double>> points;
    std::vector<double> weights;

    static SphereRule build(int dim, int polar_nodes = 12, int azimuth_nodes = 24);
};

/// Friedrichs mollification K_eps = gamma_eps * K by radial x angular product
/// quadrature. The bump normalization is certified at construction to 1e-6;
/// otherwise the constructor throws QuadratureUnderresolved. For odd radially
/// directed kernels a cubic-spline radial profile is cached so evaluation is
/// O(1) inside integrator loops.
class MollifiedKernel {
public:
    MollifiedKernel(KernelSpec base, double epsilon, int radial_nodes = 32,
                    int polar_nodes = 12, int azimuth_nodes = 24);

    const KernelSpec& base() const { return base_; }
    double epsilon() const { return epsilon_; }
    int dim() const { return base_.dim; }

    std::vector<double> eval(std::span<const double> x) const;
    void eval(std::span<const double> x, std::span<double> out) const;

    /// Scalar radial component k(r) with K_eps(x) = k(|x|) x/|x| (odd radial bases only).
    double radial_component(double r) const;

private:
    void eval_quadrature(std::span<const double> x, std::span<double> out) const;
    void build_profile();

    KernelSpec base_;
    double epsilon_;
    Quadrature1D radial_;          // nodes in [0,1], weights include r^{d-1} * bump, normalized
    SphereRule sphere_;
    bool has_profile_ = false;
    CubicSpline inner_;            // r in [0, 4 eps]
    CubicSpline outer_;            // log r in [2 eps, r_max]
    double profile_rmax_ = 0.0;
};

MollifiedKernel mollify(const KernelSpec& base, double epsilon);

}  // namespace critmc
