#pragma once

#include <functional>
#include <span>
#include <vector>

#include "critmc/errors.hpp"
#include "critmc/numerics.hpp"

namespace critmc {

/// Integrate f(r) r^{d-1} dr over (r_lo, r_hi) in log-radius coordinates.
/// Window endpoints of 0 / +inf are replaced by wide log bounds.
double integrate_radial(const std::function<double(double)>& f, int dim, double r_lo = 0.0,
                        double r_hi = 0.0, double tol = 1e-10);

/// Same, splitting the panel at the given radii (integrand kinks).
double integrate_radial_pieces(const std::function<double(double)>& f, int dim,
                               std::vector<double> breaks, double r_lo = 0.0,
                               double r_hi = 0.0, double tol = 1e-10);

/// Integrate exp(log_f(r)) r^{d-1} dr with the exponent assembled before
/// exponentiation, for integrands whose factors individually leave the double
/// range (sharpened power trials spread mass across hundreds of log-scales).
double integrate_radial_log(const std::function<double(double)>& log_f, int dim,
                            std::vector<double> breaks, double r_lo = 0.0,
                            double r_hi = 0.0, double tol = 1e-10);

enum class TrialFamily { RadialPower, GaussianBump, TensorProduct };

/// Test functions phi in W^{1,2}. Radial families are profiles in r = |x|;
/// TensorProduct glues factors over consecutive coordinate blocks. The
/// Dirichlet energy is computed at construction; degenerate trials throw.
class TrialFunction {
public:
    static TrialFunction radial_power(int dim, double eps_reg, double exponent,
                                      double cutoff_radius);
    static TrialFunction gaussian_bump(int dim, double center, double width);
    static TrialFunction tensor_product(std::vector<TrialFunction> factors);

    TrialFamily family() const { return family_; }
    int dim() const { return dim_; }
    double eps_reg() const { return eps_reg_; }
    double exponent() const { return exponent_; }
    double cutoff_radius() const { return cutoff_; }
    double center() const { return center_; }
    double width() const { return width_; }
    const std::vector<TrialFunction>& factors() const { return factors_; }

    bool is_radial() const { return family_ != TrialFamily::TensorProduct; }

    /// Radial profile value/derivative (radial families only).
    double radial_value(double r) const;
    double radial_derivative(double r) const;

    /// log phi(r) and log |phi'(r)|, safe across the full log-radius window.
    double log_radial_value(double r) const;
    double log_radial_derivative(double r) const;

    double value(std::span<const double> x) const;
    void gradient(std::span<const double> x, std::span<double> out) const;

    /// Dirichlet energy computed by the module quadrature at construction.
    double dirichlet_energy() const { return dirichlet_energy_; }
    /// L2 mass, same quadrature.
    double l2_mass() const { return l2_mass_; }

    /// Radii where the radial profile has kinks (quadrature split points).
    std::vector<double> radial_breaks() const;

private:
    TrialFunction() = default;
    void finalize();

    TrialFamily family_ = TrialFamily::GaussianBump;
    int dim_ = 3;
    double eps_reg_ = 0.1;
    double exponent_ = 0.0;
    double cutoff_ = 1.0;
    double center_ = 1.0;
    double width_ = 0.5;
    std::vector<TrialFunction> factors_;
    double dirichlet_energy_ = 0.0;
    double l2_mass_ = 0.0;
};

}  // namespace critmc
