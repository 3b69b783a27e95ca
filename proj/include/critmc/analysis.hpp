#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "critmc/kernels.hpp"
#include "critmc/lift.hpp"
#include "critmc/sde.hpp"
#include "critmc/trial.hpp"

namespace critmc {

// ---------------------------------------------------------------------------
// Two-body Bessel oracle

/// Pair-distance reduction for N=2: Z = X1 - X2 solves dZ = -K(Z) dt + 2 dW
/// and R = |Z|/2 is Bessel of dimension nu = d - sqrt(kappa)(d-2)/4.
double bessel_dimension(double kappa, int dim);

struct BesselOracle {
    double nu = 3.0;
    double kappa = 0.0;
    int dim = 3;
    /// R hits zero iff nu < 2, i.e. iff kappa > 16.
    bool hits_zero() const { return nu < 2.0; }
};

BesselOracle make_bessel_oracle(double kappa, int dim);

/// P(Bessel(nu) from r0 hits `threshold` before `horizon`), Crank-Nicolson on
/// a log-radius grid, Richardson-verified across two grids (GridUnderresolved
/// if they disagree beyond 1e-3). threshold == 0 uses an absorbing origin.
double bessel_hit_probability(double nu, double r0, double threshold, double horizon,
                              int grid_nodes = 2000);

// ---------------------------------------------------------------------------
// Rayleigh-quotient estimation

enum class EstimateDirection { LowerBoundOfSup, UpperBoundOfInf };

struct RayleighEstimate {
    double value = 0.0;
    EstimateDirection direction = EstimateDirection::LowerBoundOfSup;
    std::string trial_meta;
    double mc_error = 0.0;
    bool budget_exhausted = false;
    double paper_floor = 0.0;  ///< many-particle estimate: C_{d,N} sanity floor
};

struct TrialFamilySpec {
    TrialFamily family = TrialFamily::RadialPower;
    std::vector<double> eps_schedule{0.2, 0.1, 0.05, 0.02};  // exponent offsets
    double cutoff_radius = 1.0;
    std::vector<double> width_schedule{0.5, 0.2, 0.1, 0.05};  // concentrated bumps
    double center = 1.0;
};

/// Lower bound of the form-bound of `kernel` in the given flavor, maximizing
/// the Rayleigh quotient over the sharpening family by coordinate search.
RayleighEstimate estimate_form_bound(const KernelSpec& kernel, BoundFlavor flavor,
                                     const TrialFamilySpec& family = {});

/// Maximizes the many-particle Hardy ratio over pair-product/Gaussian trials
/// by stochastic coordinate ascent within `budget` integrand evaluations.
RayleighEstimate estimate_multiparticle_hardy(int dim, int n_particles, long budget,
                                              std::uint64_t seed = 7);

// ---------------------------------------------------------------------------
// Phase scan

struct PhaseScanRow {
    double kappa = 0.0;
    double probability = 0.0;
    double stderr_ = 0.0;
    double oracle_probability = -1.0;  ///< -1 when no oracle (N > 2)
};

/// run_ensemble per kappa with the template plan's geometry; N=2 rows carry
/// the Bessel first-passage oracle side by side.
std::vector<PhaseScanRow> collision_phase_scan(const std::vector<double>& kappa_grid,
                                               const SimPlan& plan_template, int workers = 0);

// ---------------------------------------------------------------------------
// Invariant density integrability

enum class IntegrabilityVerdict { Converges, Diverges, Inconclusive };

struct IntegrabilityReport {
    IntegrabilityVerdict verdict = IntegrabilityVerdict::Inconclusive;
    double fitted_rate = 0.0;  ///< estimate of -(alpha+1); > 0 means divergence
    std::vector<double> cutoffs;
    std::vector<double> values;  ///< I(a_k)
    bool w21_variant = false;
};

/// Radial integrability probe of psi (N=2 reduction): integrand r^{d-1} psi(r),
/// or r^{d-1} |Delta psi|(r) for the W^{2,1} variant.
IntegrabilityReport psi_integrability(double kappa, int dim, bool w21_variant = false,
                                      std::vector<double> probe = {});

// ---------------------------------------------------------------------------
// Heat-kernel envelope

struct HeatKernelRow {
    double t = 0.0;
    double slope = 0.0;             ///< log-log density slope near coincidence
    double slope_coarse = 0.0;      ///< same fit before the bandwidth halving
    double envelope_constant = 0.0; ///< fitted C with density <= C * envelope
    long samples = 0;
};

struct HeatKernelReport {
    std::vector<HeatKernelRow> rows;
    double expected_slope = 0.0;  ///< nu - d = -sqrt(kappa)(d-2)/(2N) at N=2
};

/// KDE of the pair-difference law at each t against the eta envelope shape.
HeatKernelReport heat_kernel_envelope_check(double kappa, int dim, int n_particles,
                                            const std::vector<double>& t_grid,
                                            const SimPlan& plan, int workers = 0);

// ---------------------------------------------------------------------------
// Feynman-Kac cross-validation (N=2 radial reduction)

struct FeynmanKacParams {
    double r0 = 1.5;           ///< initial pair distance
    double f_center = 1.5;     ///< radial Gaussian observable f(r)
    double f_width = 0.15;
    double dt = 2e-3;
    long ensemble = 4000;
    double collision_radius = 1e-4;
    std::uint64_t seed = 42;
    double tolerance = 0.05;   ///< tail-budget reference
};

struct FeynmanKacReport {
    double mc_value = 0.0;
    double mc_stderr = 0.0;
    double bvp_value = 0.0;
    double rel_error = 0.0;
    double tail_bound = 0.0;
    double horizon = 0.0;
};

FeynmanKacReport feynman_kac_check(double kappa, int dim, double lambda,
                                   const FeynmanKacParams& params = {}, int workers = 0);

// ---------------------------------------------------------------------------
// Krylov functional

struct KrylovParams {
    double f_amplitude = 1.0;   ///< overall scale of f (homogeneity checks)
    double f_rel_center = 1.0;  ///< f = bump(pair distance) * bump(|com|)
    double f_rel_width = 0.15;
    double f_com_width = 2.0;
    double horizon = 8.0;
    double dt = 2e-3;
    long ensemble = 2000;
    std::uint64_t seed = 11;
};

struct KrylovReport {
    double lhs = 0.0;  ///< E int e^{-lambda s} |g f|(omega_s) ds
    double lhs_stderr = 0.0;
    double rhs = 0.0;  ///< || g |f|^{q/2} ||_2^{2/q}
    double ratio = 0.0;
};

KrylovReport krylov_functional(const SimPlan& plan, const KernelSpec& g, double lambda,
                               double q, const KrylovParams& params = {}, int workers = 0);

// ---------------------------------------------------------------------------
// Sampled Rayleigh check of the lifting lemmas

struct RayleighCheckResult {
    double lhs = 0.0;  ///< ||b phi||^2 on R^{Nd}
    double rhs = 0.0;  ///< delta ||grad phi||^2 + c_delta ||phi||^2
    double slack = 0.0;
    bool holds = false;
};

/// Product-Gaussian trials phi = prod_i exp(-|x_i|^2/(2 a_i^2)) against the
/// lifted Hardy drift; pair terms in closed form, cross terms by a 2D
/// Feynman-parameter quadrature.
RayleighCheckResult rayleigh_lift_check(double kappa, int dim,
                                        const std::vector<double>& widths);

/// E[(Y.Z)/(|Y|^2|Z|^2)] for centred jointly-Gaussian d-vectors with
/// per-component covariance [[sy2, c], [c, sz2]] (exposed for testing).
double gaussian_cross_moment(double sy2, double sz2, double c, int dim);

// ---------------------------------------------------------------------------
// 1D KDE helpers (log-space density fits)

double silverman_bandwidth(std::vector<double> samples);

class Kde1D {
public:
    Kde1D(std::vector<double> samples, double bandwidth);
    double operator()(double x) const;
    double bandwidth() const { return bw_; }
    long size() const { return static_cast<long>(samples_.size()); }

private:
    std::vector<double> samples_;
    double bw_;
};

}  // namespace critmc
