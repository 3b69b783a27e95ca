#include "critmc/lift.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "critmc/vecops.hpp"

namespace critmc {

ParticleConfiguration::ParticleConfiguration(int n, int d, std::vector<double> pos)
    : n_particles(n), dim(d), positions(std::move(pos)) {
    validate();
}

void ParticleConfiguration::validate() const {
    if (n_particles < 2) throw Error("configuration needs N >= 2 particles");
    if (dim < 3) throw UnsupportedDim("configuration dimension must be >= 3");
    if (static_cast<int>(positions.size()) != n_particles * dim)
        throw Error("configuration positions must have length N*d");
}

double ParticleConfiguration::pair_distance(int i, int j) const {
    return dist(block(i), block(j));
}

double ParticleConfiguration::min_pair_distance() const {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_particles; ++i)
        for (int j = i + 1; j < n_particles; ++j) m = std::min(m, pair_distance(i, j));
    return m;
}

void eval_pair_kernel(const PairKernel& k, std::span<const double> y, std::span<double> out) {
    if (std::holds_alternative<KernelSpec>(k)) {
        eval_kernel(std::get<KernelSpec>(k), y, out);
    } else {
        std::get<std::shared_ptr<const MollifiedKernel>>(k)->eval(y, out);
    }
}

bool pair_kernel_singular(const PairKernel& k) {
    return std::holds_alternative<KernelSpec>(k) && std::get<KernelSpec>(k).is_singular();
}

LiftedDrift LiftedDrift::uniform(const KernelSpec& k, int n_particles) {
    LiftedDrift d;
    d.n_particles = n_particles;
    d.dim = k.dim;
    d.pair.assign(n_particles * n_particles, std::nullopt);
    for (int i = 0; i < n_particles; ++i)
        for (int j = 0; j < n_particles; ++j)
            if (i != j) d.pair[i * n_particles + j] = k;
    return d;
}

LiftedDrift LiftedDrift::uniform(std::shared_ptr<const MollifiedKernel> k, int n_particles) {
    LiftedDrift d;
    d.n_particles = n_particles;
    d.dim = k->dim();
    d.pair.assign(n_particles * n_particles, std::nullopt);
    for (int i = 0; i < n_particles; ++i)
        for (int j = 0; j < n_particles; ++j)
            if (i != j) d.pair[i * n_particles + j] = k;
    return d;
}

void eval_drift(const LiftedDrift& drift, const ParticleConfiguration& x,
                std::span<double> out) {
    const int n = drift.n_particles, d = drift.dim;
    fill(out, 0.0);
    std::vector<double> y(d), k(d);
    const double inv_n = 1.0 / n;
    try {
        for (int i = 0; i < n; ++i) {
            auto bi = out.subspan(i * d, d);
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const auto& edge = drift.kernel(i, j);
                if (!edge) continue;
                sub(x.block(i), x.block(j), y);
                eval_pair_kernel(*edge, y, k);
                axpy(inv_n, k, bi);
            }
            if (!drift.particle_drifts.empty() && drift.particle_drifts[i]) {
                eval_pair_kernel(*drift.particle_drifts[i], x.block(i), k);
                axpy(1.0, k, bi);
            }
        }
    } catch (const SingularPoint& e) {
        throw CollisionState(std::string("eval_drift: ") + e.what());
    }
}

std::vector<double> eval_drift(const LiftedDrift& drift, const ParticleConfiguration& x) {
    std::vector<double> out(x.positions.size());
    eval_drift(drift, x, out);
    return out;
}

LiftedBound lifted_form_bound(double kappa, double c_kappa, int n_particles) {
    const double n = n_particles;
    return {(n - 1.0) * (n - 1.0) / (n * n) * kappa, (n - 1.0) * (n - 1.0) / n * c_kappa};
}

LiftedBound lifted_div_bound(double kappa_plus, double c_kappa_plus, int n_particles) {
    const double n = n_particles;
    return {(n - 1.0) / n * kappa_plus, (n - 1.0) * c_kappa_plus};
}

LiftedBound lifted_mf_bound(double kappa, double c_kappa, int n_particles) {
    const double n = n_particles;
    return {(n - 1.0) / std::sqrt(n) * kappa, (n - 1.0) * c_kappa};
}

LiftedBound lifted_power_bound(double sigma, double c_sigma, int n_particles, double alpha) {
    const double n = n_particles;
    const double ratio = std::pow((n - 1.0) / n, 1.0 + alpha);
    return {ratio * sigma, std::pow(n - 1.0, 1.0 + alpha) / std::pow(n, alpha) * c_sigma};
}

LiftedBound lifted_particle_drift_bound(double mu, double c_mu, int n_particles) {
    return {mu, n_particles * c_mu};
}

LiftedBound combine_form_bounds(const LiftedBound& a, const LiftedBound& b) {
    const double sd = std::sqrt(a.delta) + std::sqrt(b.delta);
    const double sc = std::sqrt(a.c_delta) + std::sqrt(b.c_delta);
    return {sd * sd, sc * sc};
}

double invariant_exponent(double kappa, int dim, int n_particles) {
    return std::sqrt(kappa) * (dim - 2) / (2.0 * n_particles);
}

double log_invariant_density(double kappa, const ParticleConfiguration& x) {
    const double e = invariant_exponent(kappa, x.dim, x.n_particles);
    double sum_log = 0.0;
    for (int i = 0; i < x.n_particles; ++i) {
        for (int j = i + 1; j < x.n_particles; ++j) {
            const double r = x.pair_distance(i, j);
            if (r < kSingularityGuard)
                throw CollisionState("invariant_density: coincident pair");
            sum_log += std::log(r);
        }
    }
    return -e * sum_log;
}

double invariant_density(double kappa, const ParticleConfiguration& x) {
    return std::exp(log_invariant_density(kappa, x));
}

LyapunovTerms lyapunov_residual(double kappa, const ParticleConfiguration& x) {
    const int n = x.n_particles, d = x.dim;
    const double a = invariant_exponent(kappa, d, n);
    const double psi = invariant_density(kappa, x);

    // grad log psi, accumulated over pairs i < j.
    std::vector<double> grad_l(n * d, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double r2 = 0.0;
            for (int c = 0; c < d; ++c) {
                const double diff = x.positions[i * d + c] - x.positions[j * d + c];
                r2 += diff * diff;
            }
            if (r2 < kSingularityGuard * kSingularityGuard)
                throw CollisionState("lyapunov_residual: coincident pair");
            for (int c = 0; c < d; ++c) {
                const double diff = x.positions[i * d + c] - x.positions[j * d + c];
                grad_l[i * d + c] -= a * diff / r2;
                grad_l[j * d + c] += a * diff / r2;
            }
        }
    }

    // Hardy field blocks F_i = sum_{j != i} (x_i - x_j)/r^2, accumulated per i
    // so the rounding pattern differs from grad_l.
    std::vector<double> field(n * d, 0.0);
    double div_sum = 0.0;  // sum_i div F_i
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double r2 = 0.0;
            for (int c = 0; c < d; ++c) {
                const double diff = x.positions[i * d + c] - x.positions[j * d + c];
                r2 += diff * diff;
            }
            for (int c = 0; c < d; ++c) {
                const double diff = x.positions[i * d + c] - x.positions[j * d + c];
                field[i * d + c] += diff / r2;
            }
            div_sum += (d - 2) / r2;
        }
    }

    const double grad_sq = norm2(grad_l);               // |grad log psi|^2
    const double lap_log = -a * div_sum;                // Delta log psi
    const double laplacian = psi * (grad_sq + lap_log);  // Delta psi

    double field_dot_grad = 0.0;  // sum_i F_i . grad_i log psi
    for (int i = 0; i < n * d; ++i) field_dot_grad += field[i] * grad_l[i];
    const double drift_term = a * psi * (div_sum + field_dot_grad);

    LyapunovTerms out;
    out.psi = psi;
    out.laplacian = laplacian;
    out.drift_term = drift_term;
    out.residual = -laplacian - drift_term;
    const double scale = std::max({std::abs(laplacian), psi * grad_sq, psi * std::abs(lap_log),
                                   std::abs(drift_term)});
    out.relative = (scale > 0.0) ? out.residual / scale : 0.0;
    return out;
}

namespace {

/// Quintic Hermite basis on [0,1]: value/first/second derivative data at both ends.
void quintic_basis(double s, double h[6], double dh[6], double d2h[6]) {
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    h[0] = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    h[1] = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    h[2] = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
    h[3] = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    h[4] = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    h[5] = 0.5 * s3 - s4 + 0.5 * s5;
    dh[0] = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
    dh[1] = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
    dh[2] = s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4;
    dh[3] = 30.0 * s2 - 60.0 * s3 + 30.0 * s4;
    dh[4] = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
    dh[5] = 1.5 * s2 - 4.0 * s3 + 2.5 * s4;
    d2h[0] = -60.0 * s + 180.0 * s2 - 120.0 * s3;
    d2h[1] = -36.0 * s + 96.0 * s2 - 60.0 * s3;
    d2h[2] = 1.0 - 9.0 * s + 18.0 * s2 - 10.0 * s3;
    d2h[3] = 60.0 * s - 180.0 * s2 + 120.0 * s3;
    d2h[4] = -24.0 * s + 84.0 * s2 - 60.0 * s3;
    d2h[5] = 3.0 * s - 12.0 * s2 + 10.0 * s3;
}

}  // namespace

EtaProfile::EtaProfile(double kappa, int dim, int n_particles)
    : kappa_(kappa), dim_(dim), n_(n_particles) {
    if (dim < 3) throw UnsupportedDim("EtaProfile requires d >= 3");
    if (n_particles < 2) throw Error("EtaProfile requires N >= 2");
    if (kappa < 0.0) throw Error("EtaProfile requires kappa >= 0");
    exponent_ = invariant_exponent(kappa, dim, n_particles);
    const double q = exponent_;
    h0_[0] = 1.0;
    h0_[1] = -q;            // d/dr r^{-q} at r=1
    h0_[2] = q * (q + 1.0);  // second derivative
    h1_[0] = 2.0;
    h1_[1] = 0.0;
    h1_[2] = 0.0;
    blend_min_ = 2.0;
    for (int i = 0; i <= 2000; ++i) {
        double h, dh, d2h;
        blend_derivatives(i / 2000.0, h, dh, d2h);
        blend_min_ = std::min(blend_min_, h);
    }
}

void EtaProfile::blend_derivatives(double s, double& h, double& dh, double& d2h) const {
    double b[6], db[6], d2b[6];
    quintic_basis(s, b, db, d2b);
    const double c[6] = {h0_[0], h0_[1], h0_[2], h1_[0], h1_[1], h1_[2]};
    h = dh = d2h = 0.0;
    for (int k = 0; k < 6; ++k) {
        h += c[k] * b[k];
        dh += c[k] * db[k];
        d2h += c[k] * d2b[k];
    }
}

double EtaProfile::value(double r) const {
    if (!(r > 0.0)) throw Error("eta: radius must be positive");
    if (r < 1.0) return std::pow(r, -exponent_);
    if (r > 2.0) return 2.0;
    double h, dh, d2h;
    blend_derivatives(r - 1.0, h, dh, d2h);
    return h;
}

double heat_kernel_envelope(const EtaProfile& profile, double t,
                            const ParticleConfiguration& z) {
    if (!(t > 0.0)) throw Error("heat_kernel_envelope: t must be positive");
    const double sqt = std::sqrt(t);
    double log_prod = 0.0;
    for (int i = 0; i < z.n_particles; ++i) {
        for (int j = i + 1; j < z.n_particles; ++j) {
            const double r = z.pair_distance(i, j);
            if (r < kSingularityGuard)
                throw CollisionState("heat_kernel_envelope: coincident pair");
            log_prod += std::log(profile.value(r / sqt));
        }
    }
    const double nd = z.n_particles * z.dim;
    return std::exp(-0.5 * nd * std::log(t) + log_prod);
}

double paper_hardy_constant(int dim, int n_particles) {
    if (dim < 3) throw UnsupportedDim("paper_hardy_constant requires d >= 3");
    if (n_particles < 2) throw Error("paper_hardy_constant requires N >= 2");
    const double d = dim, n = n_particles;
    const double root =
        std::sqrt(1.0 + 3.0 * (d - 2.0) * (d - 2.0) / (2.0 * (d - 1.0) * (d - 1.0)) *
                            (n - 1.0) * (n - 2.0));
    return (d - 2.0) * (d - 2.0) * std::max(1.0 / n, 1.0 / (1.0 + root));
}

HardyTrial HardyTrial::com_relative(TrialFunction com, TrialFunction rel) {
    if (com.dim() != rel.dim()) throw Error("com_relative: factor dimensions differ");
    const int d = com.dim();
    HardyTrial t;
    t.n_particles = 2;
    t.dim = d;
    Separable sep;
    sep.com = [com](double r) { return com.radial_value(r); };
    sep.dcom = [com](double r) { return com.radial_derivative(r); };
    sep.rel = [rel](double r) { return rel.radial_value(r); };
    sep.drel = [rel](double r) { return rel.radial_derivative(r); };
    sep.breaks_com = com.radial_breaks();
    sep.breaks_rel = rel.radial_breaks();
    t.separable = std::move(sep);
    t.sampler_width = 1.0;
    t.value = [com, rel, d](std::span<const double> x) {
        std::vector<double> c(d), y(d);
        for (int k = 0; k < d; ++k) {
            c[k] = 0.5 * (x[k] + x[d + k]);
            y[k] = x[k] - x[d + k];
        }
        return com.value(c) * rel.value(y);
    };
    t.gradient = [com, rel, d](std::span<const double> x, std::span<double> out) {
        std::vector<double> c(d), y(d), gc(d), gy(d);
        for (int k = 0; k < d; ++k) {
            c[k] = 0.5 * (x[k] + x[d + k]);
            y[k] = x[k] - x[d + k];
        }
        const double uc = com.value(c), vy = rel.value(y);
        com.gradient(c, gc);
        rel.gradient(y, gy);
        for (int k = 0; k < d; ++k) {
            out[k] = 0.5 * gc[k] * vy + uc * gy[k];
            out[d + k] = 0.5 * gc[k] * vy - uc * gy[k];
        }
    };
    return t;
}

HardyTrial HardyTrial::pair_product(int n_particles, int dim, double pair_exponent,
                                    double pair_reg, double envelope_width) {
    if (pair_exponent <= -0.5 * (dim - 2))
        throw DegenerateTrial("pair_product: exponent must exceed -(d-2)/2");
    if (pair_reg <= 0.0 || envelope_width <= 0.0)
        throw DegenerateTrial("pair_product: scales must be positive");
    HardyTrial t;
    t.n_particles = n_particles;
    t.dim = dim;
    t.sampler_width = envelope_width;
    const double a = pair_exponent, s2 = pair_reg * pair_reg, w2 = envelope_width * envelope_width;
    const int n = n_particles, d = dim;
    t.value = [a, s2, w2, n, d](std::span<const double> x) {
        double log_pairs = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                double r2 = 0.0;
                for (int c = 0; c < d; ++c) {
                    const double diff = x[i * d + c] - x[j * d + c];
                    r2 += diff * diff;
                }
                if (r2 < 1e-280) return 0.0;
                log_pairs += 0.5 * a * std::log(r2 / (r2 + s2));
            }
        }
        return std::exp(log_pairs - 0.5 * norm2(x) / w2);
    };
    t.gradient = [t_value = t.value, a, s2, w2, n, d](std::span<const double> x,
                                                      std::span<double> out) {
        const double phi = t_value(x);
        for (int i = 0; i < n * d; ++i) out[i] = -x[i] / w2;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                double r2 = 0.0;
                for (int c = 0; c < d; ++c) {
                    const double diff = x[i * d + c] - x[j * d + c];
                    r2 += diff * diff;
                }
                if (r2 < 1e-280) continue;
                const double coeff = a * s2 / (r2 * (r2 + s2));
                for (int c = 0; c < d; ++c) {
                    const double diff = x[i * d + c] - x[j * d + c];
                    out[i * d + c] += coeff * diff;
                    out[j * d + c] -= coeff * diff;
                }
            }
        }
        for (int i = 0; i < n * d; ++i) out[i] *= phi;
    };
    if (n_particles == 2) {
        // exp(-|x|^2/(2W^2)) = exp(-|c|^2/W^2) exp(-|y|^2/(4W^2)) under
        // c = (x1+x2)/2, y = x1-x2, so the trial separates.
        Separable sep;
        sep.com = [w2](double r) { return std::exp(-r * r / w2); };
        sep.dcom = [w2](double r) { return -2.0 * r / w2 * std::exp(-r * r / w2); };
        sep.rel = [a, s2, w2](double r) {
            if (r <= 0.0) r = 1e-300;
            const double r2 = r * r;
            // log form: r^2 underflows long before log r does
            const double log_g = a * (std::log(r) - 0.5 * std::log(r2 + s2));
            return std::exp(log_g - r2 / (4.0 * w2));
        };
        sep.drel = [a, s2, w2, rel = sep.rel](double r) {
            const double r2 = r * r;
            return rel(r) * (a * s2 / (r * (r2 + s2)) - 0.5 * r / w2);
        };
        sep.breaks_com = {envelope_width};
        sep.breaks_rel = {pair_reg, envelope_width};
        t.separable = std::move(sep);
    }
    return t;
}

HardyTrial HardyTrial::two_body_sharp(int dim, double pair_exponent, double pair_reg,
                                      double rel_width, double com_width) {
    if (com_width <= 0.0) com_width = rel_width;
    if (pair_reg <= 0.0 || rel_width <= 0.0)
        throw DegenerateTrial("two_body_sharp: scales must be positive");
    HardyTrial t;
    t.n_particles = 2;
    t.dim = dim;
    t.sampler_width = rel_width;
    const double a = pair_exponent, s2 = pair_reg * pair_reg;
    const double w2 = rel_width * rel_width, wc2 = com_width * com_width;
    const int d = dim;
    t.value = [a, s2, w2, wc2, d](std::span<const double> x) {
        double r2 = 0.0, c2 = 0.0;
        for (int c = 0; c < d; ++c) {
            const double diff = x[c] - x[d + c];
            const double mid = 0.5 * (x[c] + x[d + c]);
            r2 += diff * diff;
            c2 += mid * mid;
        }
        return std::pow(r2 + s2, 0.5 * a) * std::exp(-c2 / wc2 - 0.25 * r2 / w2);
    };
    t.gradient = [value = t.value, a, s2, w2, wc2, d](std::span<const double> x,
                                                      std::span<double> out) {
        const double phi_v = value(x);
        double r2 = 0.0;
        for (int c = 0; c < d; ++c) {
            const double diff = x[c] - x[d + c];
            r2 += diff * diff;
        }
        const double coeff = a / (r2 + s2) - 0.5 / w2;
        for (int c = 0; c < d; ++c) {
            const double diff = x[c] - x[d + c];
            const double mid = 0.5 * (x[c] + x[d + c]);
            out[c] = phi_v * (coeff * diff - mid / wc2);
            out[d + c] = phi_v * (-coeff * diff - mid / wc2);
        }
    };
    Separable sep;
    sep.com = [wc2](double r) { return std::exp(-r * r / wc2); };
    sep.dcom = [wc2](double r) { return -2.0 * r / wc2 * std::exp(-r * r / wc2); };
    sep.rel = [a, s2, w2](double r) {
        return std::pow(r * r + s2, 0.5 * a) * std::exp(-0.25 * r * r / w2);
    };
    sep.drel = [a, s2, w2, rel = sep.rel](double r) {
        return rel(r) * (a * r / (r * r + s2) - 0.5 * r / w2);
    };
    sep.breaks_com = {com_width};
    sep.breaks_rel = {pair_reg, rel_width};
    t.separable = std::move(sep);
    return t;
}

HardyRatio multiparticle_hardy_ratio(const HardyTrial& phi, int n_particles, int dim,
                                     long mc_samples, std::uint64_t seed) {
    HardyRatio out;
    if (phi.separable && n_particles == 2) {
        // Centre-of-mass x relative factorization: the block gradient energy
        // splits as (1/2)|grad u|^2 |v|^2 + 2 |u|^2 |grad v|^2 and the measure
        // factorizes with unit Jacobian.
        const auto& sep = *phi.separable;
        const double area = sphere_area(dim);
        auto rad = [&](const std::function<double(double)>& f,
                       const std::vector<double>& breaks) {
            return area * integrate_radial_pieces(f, dim, breaks);
        };
        const double u2 = rad([&](double r) { return sep.com(r) * sep.com(r); }, sep.breaks_com);
        const double ud =
            rad([&](double r) { return sep.dcom(r) * sep.dcom(r); }, sep.breaks_com);
        const double v2 = rad([&](double r) { return sep.rel(r) * sep.rel(r); }, sep.breaks_rel);
        const double vd =
            rad([&](double r) { return sep.drel(r) * sep.drel(r); }, sep.breaks_rel);
        const double v2m = rad([&](double r) { return sep.rel(r) * sep.rel(r) / (r * r); },
                               sep.breaks_rel);
        out.numerator = u2 * v2m;
        out.denominator = 0.5 * ud * v2 + 2.0 * u2 * vd;
        if (out.denominator <= 0.0 || !std::isfinite(out.denominator) ||
            !std::isfinite(out.numerator))
            throw DegenerateTrial("hardy ratio: degenerate separable integrals");
        out.ratio = out.numerator / out.denominator;
        return out;
    }

    const int nd = n_particles * dim;
    const double w = phi.sampler_width;
    RandomStream rng(seed, 0);
    const int batches = 32;
    const long per_batch = std::max<long>(1, mc_samples / batches);
    std::vector<double> bnum(batches, 0.0), bden(batches, 0.0);
    std::vector<double> x(nd), grad(nd);
    // log of sampler normalization (2 pi w^2)^{nd/2}
    const double log_norm = 0.5 * nd * std::log(2.0 * std::numbers::pi * w * w);
    for (int b = 0; b < batches; ++b) {
        for (long s = 0; s < per_batch; ++s) {
            double z2 = 0.0;
            for (int k = 0; k < nd; ++k) {
                const double z = rng.next_gaussian();
                x[k] = w * z;
                z2 += z * z;
            }
            const double inv_pdf = std::exp(log_norm + 0.5 * z2);
            const double val = phi.value(x);
            double inv_r2 = 0.0;
            for (int i = 0; i < n_particles; ++i) {
                for (int j = i + 1; j < n_particles; ++j) {
                    double r2 = 0.0;
                    for (int c = 0; c < dim; ++c) {
                        const double diff = x[i * dim + c] - x[j * dim + c];
                        r2 += diff * diff;
                    }
                    inv_r2 += 1.0 / r2;
                }
            }
            phi.gradient(x, grad);
            bnum[b] += val * val * inv_r2 * inv_pdf;
            bden[b] += norm2(grad) * inv_pdf;
        }
    }
    double tot_num = 0.0, tot_den = 0.0;
    for (int b = 0; b < batches; ++b) {
        tot_num += bnum[b];
        tot_den += bden[b];
    }
    if (tot_den <= 0.0) throw DegenerateTrial("hardy ratio: zero sampled Dirichlet energy");
    out.evaluations = per_batch * batches;
    out.numerator = tot_num / out.evaluations;
    out.denominator = tot_den / out.evaluations;
    out.ratio = tot_num / tot_den;
    // jackknife over batches
    double jmean = 0.0;
    std::vector<double> jack(batches);
    for (int b = 0; b < batches; ++b) {
        jack[b] = (tot_num - bnum[b]) / (tot_den - bden[b]);
        jmean += jack[b];
    }
    jmean /= batches;
    double var = 0.0;
    for (int b = 0; b < batches; ++b) var += (jack[b] - jmean) * (jack[b] - jmean);
    out.mc_error = std::sqrt(var * (batches - 1.0) / batches);
    return out;
}

}  // namespace critmc
