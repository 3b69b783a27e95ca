#include "critmc/trial.hpp"

#include <algorithm>
#include <cmath>

#include "critmc/vecops.hpp"

namespace critmc {

double integrate_radial(const std::function<double(double)>& f, int dim, double r_lo,
                        double r_hi, double tol) {
    return integrate_radial_pieces(f, dim, {}, r_lo, r_hi, tol);
}

double integrate_radial_pieces(const std::function<double(double)>& f, int dim,
                               std::vector<double> breaks, double r_lo, double r_hi,
                               double tol) {
    const double s_lo = (r_lo > 0.0) ? std::log(r_lo) : -740.0;
    const double s_hi = (r_hi > 0.0) ? std::log(r_hi) : 740.0;
    const auto g = [&](double s) {
        const double r = std::exp(s);
        const double v = f(r) * std::pow(r, dim);  // r^{d-1} dr = r^d ds
        // Intermediate factors of integrable integrands can overflow deep in
        // the tails where the product itself is negligible.
        return std::isfinite(v) ? v : 0.0;
    };
    std::vector<double> cuts{s_lo};
    std::sort(breaks.begin(), breaks.end());
    for (double b : breaks) {
        if (b > 0.0) {
            const double s = std::log(b);
            if (s > s_lo && s < s_hi) cuts.push_back(s);
        }
    }
    cuts.push_back(s_hi);
    // Seed panels of bounded width: the integrand is typically a narrow bump
    // somewhere inside a very wide log-window, which a single adaptive pass
    // can miss entirely.
    std::vector<double> panels;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        panels.push_back(cuts[i]);
        const double width = cuts[i + 1] - cuts[i];
        const int nsub = std::max(1, static_cast<int>(std::ceil(width / 8.0)));
        for (int k = 1; k < nsub; ++k) panels.push_back(cuts[i] + width * k / nsub);
    }
    panels.push_back(s_hi);
    double total = 0.0;
    const double tol_panel = tol / static_cast<double>(panels.size());
    for (std::size_t i = 0; i + 1 < panels.size(); ++i)
        total += integrate(g, panels[i], panels[i + 1], tol_panel);
    return total;
}

double integrate_radial_log(const std::function<double(double)>& log_f, int dim,
                            std::vector<double> breaks, double r_lo, double r_hi,
                            double tol) {
    const double s_lo = (r_lo > 0.0) ? std::log(r_lo) : -740.0;
    const double s_hi = (r_hi > 0.0) ? std::log(r_hi) : 740.0;
    const auto g = [&](double s) {
        const double r = std::exp(s);
        const double e = log_f(r) + dim * s;
        const double v = std::exp(e);
        return std::isfinite(v) ? v : 0.0;
    };
    std::vector<double> cuts{s_lo};
    std::sort(breaks.begin(), breaks.end());
    for (double b : breaks) {
        if (b > 0.0) {
            const double s = std::log(b);
            if (s > s_lo && s < s_hi) cuts.push_back(s);
        }
    }
    cuts.push_back(s_hi);
    std::vector<double> panels;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        panels.push_back(cuts[i]);
        const double width = cuts[i + 1] - cuts[i];
        const int nsub = std::max(1, static_cast<int>(std::ceil(width / 8.0)));
        for (int k = 1; k < nsub; ++k) panels.push_back(cuts[i] + width * k / nsub);
    }
    panels.push_back(s_hi);
    double total = 0.0;
    const double tol_panel = tol / static_cast<double>(panels.size());
    for (std::size_t i = 0; i + 1 < panels.size(); ++i)
        total += integrate(g, panels[i], panels[i + 1], tol_panel);
    return total;
}

TrialFunction TrialFunction::radial_power(int dim, double eps_reg, double exponent,
                                          double cutoff_radius) {
    if (eps_reg <= 0.0) throw DegenerateTrial("radial_power: eps_reg must be > 0");
    if (cutoff_radius <= 0.0) throw DegenerateTrial("radial_power: cutoff must be > 0");
    TrialFunction t;
    t.family_ = TrialFamily::RadialPower;
    t.dim_ = dim;
    t.eps_reg_ = eps_reg;
    t.exponent_ = exponent;
    t.cutoff_ = cutoff_radius;
    t.finalize();
    return t;
}

TrialFunction TrialFunction::gaussian_bump(int dim, double center, double width) {
    if (width <= 0.0) throw DegenerateTrial("gaussian_bump: width must be > 0");
    TrialFunction t;
    t.family_ = TrialFamily::GaussianBump;
    t.dim_ = dim;
    t.center_ = center;
    t.width_ = width;
    t.finalize();
    return t;
}

TrialFunction TrialFunction::tensor_product(std::vector<TrialFunction> factors) {
    if (factors.empty()) throw DegenerateTrial("tensor_product: empty factor list");
    TrialFunction t;
    t.family_ = TrialFamily::TensorProduct;
    t.dim_ = 0;
    for (const auto& f : factors) t.dim_ += f.dim();
    t.factors_ = std::move(factors);
    t.finalize();
    return t;
}

double TrialFunction::radial_value(double r) const {
    switch (family_) {
        case TrialFamily::RadialPower: {
            if (r <= 0.0) r = 1e-300;
            const double u = r / cutoff_;
            return (u <= 1.0) ? std::pow(u, exponent_ + eps_reg_)
                              : std::pow(u, exponent_ - eps_reg_);
        }
        case TrialFamily::GaussianBump: {
            const double z = (r - center_) / width_;
            return std::exp(-0.5 * z * z);
        }
        default:
            throw Error("radial_value: trial is not radial");
    }
}

double TrialFunction::radial_derivative(double r) const {
    switch (family_) {
        case TrialFamily::RadialPower: {
            if (r <= 0.0) r = 1e-300;
            const double u = r / cutoff_;
            const double p = (u <= 1.0) ? exponent_ + eps_reg_ : exponent_ - eps_reg_;
            return p * std::pow(u, p) / r;
        }
        case TrialFamily::GaussianBump: {
            const double z = (r - center_) / width_;
            return -z / width_ * std::exp(-0.5 * z * z);
        }
        default:
            throw Error("radial_derivative: trial is not radial");
    }
}

double TrialFunction::log_radial_value(double r) const {
    switch (family_) {
        case TrialFamily::RadialPower: {
            if (r <= 0.0) r = 1e-300;
            const double lu = std::log(r) - std::log(cutoff_);
            const double p = (lu <= 0.0) ? exponent_ + eps_reg_ : exponent_ - eps_reg_;
            return p * lu;
        }
        case TrialFamily::GaussianBump: {
            const double z = (r - center_) / width_;
            return -0.5 * z * z;
        }
        default:
            throw Error("log_radial_value: trial is not radial");
    }
}

double TrialFunction::log_radial_derivative(double r) const {
    switch (family_) {
        case TrialFamily::RadialPower: {
            if (r <= 0.0) r = 1e-300;
            const double lu = std::log(r) - std::log(cutoff_);
            const double p = (lu <= 0.0) ? exponent_ + eps_reg_ : exponent_ - eps_reg_;
            return std::log(std::abs(p)) + p * lu - std::log(r);
        }
        case TrialFamily::GaussianBump: {
            const double z = (r - center_) / width_;
            if (z == 0.0) return -std::numeric_limits<double>::infinity();
            return std::log(std::abs(z) / width_) - 0.5 * z * z;
        }
        default:
            throw Error("log_radial_derivative: trial is not radial");
    }
}

double TrialFunction::value(std::span<const double> x) const {
    if (family_ == TrialFamily::TensorProduct) {
        double v = 1.0;
        std::size_t off = 0;
        for (const auto& f : factors_) {
            v *= f.value(x.subspan(off, f.dim()));
            off += f.dim();
        }
        return v;
    }
    return radial_value(norm(x));
}

void TrialFunction::gradient(std::span<const double> x, std::span<double> out) const {
    if (family_ == TrialFamily::TensorProduct) {
        // product rule over blocks
        std::size_t off = 0;
        std::vector<double> vals(factors_.size());
        for (std::size_t k = 0; k < factors_.size(); ++k) {
            vals[k] = factors_[k].value(x.subspan(off, factors_[k].dim()));
            off += factors_[k].dim();
        }
        off = 0;
        for (std::size_t k = 0; k < factors_.size(); ++k) {
            auto block = out.subspan(off, factors_[k].dim());
            factors_[k].gradient(x.subspan(off, factors_[k].dim()), block);
            double rest = 1.0;
            for (std::size_t m = 0; m < factors_.size(); ++m)
                if (m != k) rest *= vals[m];
            scale(block, rest);
            off += factors_[k].dim();
        }
        return;
    }
    const double r = norm(x);
    if (r < 1e-300) {
        fill(out, 0.0);
        return;
    }
    const double dp = radial_derivative(r);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = dp * x[i] / r;
}

std::vector<double> TrialFunction::radial_breaks() const {
    switch (family_) {
        case TrialFamily::RadialPower: return {cutoff_};
        case TrialFamily::GaussianBump: {
            // bracket the bump so the seeded quadrature panels resolve it
            std::vector<double> b;
            for (double r : {center_ - 3.0 * width_, center_ - width_, center_,
                             center_ + width_, center_ + 3.0 * width_})
                if (r > 0.0) b.push_back(r);
            if (b.empty()) b.push_back(width_);
            return b;
        }
        default: return {};
    }
}

void TrialFunction::finalize() {
    if (family_ == TrialFamily::TensorProduct) {
        dirichlet_energy_ = 0.0;
        double mass = 1.0;
        for (const auto& f : factors_) {
            if (!std::isfinite(f.l2_mass()))
                throw DegenerateTrial("tensor_product factors must have finite L2 mass");
            mass *= f.l2_mass();
        }
        for (std::size_t k = 0; k < factors_.size(); ++k) {
            dirichlet_energy_ +=
                factors_[k].dirichlet_energy() * mass / factors_[k].l2_mass();
        }
        l2_mass_ = mass;
    } else {
        const double area = sphere_area(dim_);
        const std::vector<double> breaks = radial_breaks();
        // The symmetric power trials live in the homogeneous Sobolev space:
        // finite Dirichlet energy, possibly infinite mass.
        bool mass_finite = true;
        if (family_ == TrialFamily::RadialPower) {
            mass_finite = (2.0 * (exponent_ + eps_reg_) + dim_ > 0.0) &&
                          (2.0 * (exponent_ - eps_reg_) + dim_ < 0.0);
        }
        l2_mass_ = mass_finite ? area * integrate_radial_pieces(
                                            [this](double r) {
                                                const double v = radial_value(r);
                                                return v * v;
                                            },
                                            dim_, breaks)
                               : std::numeric_limits<double>::infinity();
        dirichlet_energy_ = area * integrate_radial_pieces(
                                       [this](double r) {
                                           const double dp = radial_derivative(r);
                                           return dp * dp;
                                       },
                                       dim_, breaks);
    }
    if (!std::isfinite(dirichlet_energy_) || dirichlet_energy_ <= 0.0 || l2_mass_ <= 0.0) {
        throw DegenerateTrial("trial function has degenerate Dirichlet energy");
    }
}

}  // namespace critmc
