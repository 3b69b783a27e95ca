#pragma once

#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "critmc/kernels.hpp"
#include "critmc/rng.hpp"
#include "critmc/trial.hpp"

namespace critmc {

/// N particle positions in R^d as one point of R^{Nd}.
struct ParticleConfiguration {
    int n_particles = 2;
    int dim = 3;
    std::vector<double> positions;  // flat, length N*d

    ParticleConfiguration() = default;
    ParticleConfiguration(int n, int d) : n_particles(n), dim(d), positions(n * d, 0.0) {}
    ParticleConfiguration(int n, int d, std::vector<double> pos);

    std::span<double> block(int i) { return {positions.data() + i * dim, (std::size_t)dim}; }
    std::span<const double> block(int i) const {
        return {positions.data() + i * dim, (std::size_t)dim};
    }

    double pair_distance(int i, int j) const;
    double min_pair_distance() const;
    void validate() const;
};

/// One edge of the interaction table: a raw spec or its mollification.
using PairKernel = std::variant<KernelSpec, std::shared_ptr<const MollifiedKernel>>;

void eval_pair_kernel(const PairKernel& k, std::span<const double> y, std::span<double> out);
bool pair_kernel_singular(const PairKernel& k);

/// Drift b on R^{Nd}: b_i(x) = (1/N) sum_{j != i} K_ij(x_i - x_j) + M_i(x_i).
/// Immutable once built; shared freely across workers.
struct LiftedDrift {
    int n_particles = 2;
    int dim = 3;
    std::vector<std::optional<PairKernel>> pair;             // N*N, row-major, diagonal unused
    std::vector<std::optional<PairKernel>> particle_drifts;  // size N or empty

    static LiftedDrift uniform(const KernelSpec& k, int n_particles);
    static LiftedDrift uniform(std::shared_ptr<const MollifiedKernel> k, int n_particles);

    const std::optional<PairKernel>& kernel(int i, int j) const {
        return pair[i * n_particles + j];
    }
    void set_kernel(int i, int j, PairKernel k) { pair[i * n_particles + j] = std::move(k); }
};

/// b(x) blockwise; throws CollisionState when a singular unmollified pair sits
/// inside the singularity guard.
void eval_drift(const LiftedDrift& drift, const ParticleConfiguration& x,
                std::span<double> out);
std::vector<double> eval_drift(const LiftedDrift& drift, const ParticleConfiguration& x);

struct LiftedBound {
    double delta = 0.0;
    double c_delta = 0.0;
};

/// Form-bound of the lifted drift: delta = ((N-1)/N)^2 kappa, c = ((N-1)^2/N) c_kappa.
LiftedBound lifted_form_bound(double kappa, double c_kappa, int n_particles);

/// Divergence bound: delta_+ = ((N-1)/N) kappa_+, c = (N-1) c_{kappa_+}.
LiftedBound lifted_div_bound(double kappa_plus, double c_kappa_plus, int n_particles);

/// Multiplicative bound: delta = ((N-1)/sqrt(N)) kappa, c = (N-1) c_kappa.
LiftedBound lifted_mf_bound(double kappa, double c_kappa, int n_particles);

/// Power bound for |b|^{(1+alpha)/2}: chi = ((N-1)/N)^{1+alpha} sigma,
/// c = (N-1)^{1+alpha} / N^alpha c_sigma.
LiftedBound lifted_power_bound(double sigma, double c_sigma, int n_particles, double alpha);

/// Per-particle drifts M_i lift with delta = mu, c = N c_mu.
LiftedBound lifted_particle_drift_bound(double mu, double c_mu, int n_particles);

/// Sum rule sqrt(delta) = sqrt(delta_1) + sqrt(delta_2) (same for c).
LiftedBound combine_form_bounds(const LiftedBound& a, const LiftedBound& b);

/// Pairwise exponent of the invariant density: sqrt(kappa) (d-2) / (2N).
double invariant_exponent(double kappa, int dim, int n_particles);

/// psi(x) = prod_{i<j} |x_i-x_j|^{-sqrt(kappa)(d-2)/(2N)}.
double invariant_density(double kappa, const ParticleConfiguration& x);
double log_invariant_density(double kappa, const ParticleConfiguration& x);

struct LyapunovTerms {
    double residual = 0.0;   ///< -Delta psi - drift divergence term (vanishes identically)
    double relative = 0.0;   ///< residual / max |constituent term|
    double laplacian = 0.0;  ///< Delta psi (analytic)
    double drift_term = 0.0;
    double psi = 0.0;
};

/// Residual of the invariant-density identity for the Hardy interaction.
LyapunovTerms lyapunov_residual(double kappa, const ParticleConfiguration& x);

/// Heat-kernel profile: eta(r) = r^{-sqrt(kappa)(d-2)/(2N)} below 1, 2 above 2,
/// C^2 quintic Hermite blend on [1,2].
class EtaProfile {
public:
    EtaProfile(double kappa, int dim, int n_particles);

    double exponent() const { return exponent_; }
    double value(double r) const;
    /// Blend polynomial and two derivatives at s = r-1 in [0,1].
    void blend_derivatives(double s, double& h, double& dh, double& d2h) const;
    /// Minimum of the blend over [1,2]; dips below 1 whenever the exponent > 0.
    double blend_min() const { return blend_min_; }

    double kappa() const { return kappa_; }
    int dim() const { return dim_; }
    int n_particles() const { return n_; }

private:
    double kappa_;
    int dim_;
    int n_;
    double exponent_;
    double h0_[3];  // value/first/second derivative at r=1
    double h1_[3];  // at r=2
    double blend_min_ = 1.0;
};

/// Envelope shape t^{-Nd/2} prod_{i<j} eta(t^{-1/2} |z_i - z_j|) (constant-free).
double heat_kernel_envelope(const EtaProfile& profile, double t,
                            const ParticleConfiguration& z);

/// Explicit constant of the many-particle Hardy inequality.
double paper_hardy_constant(int dim, int n_particles);

/// A trial on R^{Nd} for the many-particle Hardy quotient. The optional
/// separable form (centre-of-mass x relative, N = 2) enables the
/// deterministic radial route; everything else integrates by importance
/// sampling against the Gaussian envelope.
struct HardyTrial {
    int n_particles = 2;
    int dim = 3;
    std::function<double(std::span<const double>)> value;
    std::function<void(std::span<const double>, std::span<double>)> gradient;
    double sampler_width = 1.0;

    struct Separable {
        std::function<double(double)> com, dcom;  // radial profile u(|c|) and u'
        std::function<double(double)> rel, drel;  // radial profile v(|y|) and v'
        std::vector<double> breaks_com, breaks_rel;
    };
    std::optional<Separable> separable;

    /// phi(x) = u((x1+x2)/2) v(x1-x2); N = 2 only.
    static HardyTrial com_relative(TrialFunction com, TrialFunction rel);

    /// phi(x) = prod_{i<j} (r_ij^2/(r_ij^2+s^2))^{a/2} exp(-|x|^2/(2W^2)).
    /// pair_exponent may be negative down to -(d-2)/2 (excluded); for N = 2 the
    /// trial factorizes over centre-of-mass x relative coordinates and carries
    /// the separable profiles for the deterministic route.
    static HardyTrial pair_product(int n_particles, int dim, double pair_exponent,
                                   double pair_reg, double envelope_width);

    /// phi(x) = (|y|^2+s^2)^{a/2} e^{-|c|^2/Wc^2} e^{-|y|^2/(4W^2)} in
    /// centre-of-mass/relative coordinates, N = 2. With a = -(d-2)/2 the
    /// relative factor spreads the Hardy mass across the scales (s, W) and
    /// the ratio approaches 2/(d-2)^2 like 1/log(W/s); a wide Wc suppresses
    /// the centre-of-mass Dirichlet cost.
    static HardyTrial two_body_sharp(int dim, double pair_exponent, double pair_reg,
                                     double rel_width, double com_width = 0.0);
};

struct HardyRatio {
    double ratio = 0.0;
    double mc_error = 0.0;  ///< 0 for the deterministic route
    double numerator = 0.0;
    double denominator = 0.0;
    long evaluations = 0;
};

/// [sum_{i<j} int phi^2/|x_i-x_j|^2] / int |grad phi|^2 on R^{Nd}.
HardyRatio multiparticle_hardy_ratio(const HardyTrial& phi, int n_particles, int dim,
                                     long mc_samples = 200000, std::uint64_t seed = 1);

}  // namespace critmc
