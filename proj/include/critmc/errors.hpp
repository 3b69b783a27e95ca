#pragma once

#include <stdexcept>
#include <string>

namespace critmc {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Evaluation requested within the guard distance of a kernel's singular set.
struct SingularPoint : Error {
    using Error::Error;
};

/// Spatial dimension outside the supported range (d >= 3).
struct UnsupportedDim : Error {
    using Error::Error;
};

/// Kernel kind has no closed-form divergence; use finite differences.
struct NoAnalyticDivergence : Error {
    using Error::Error;
};

/// Kernel kind has no closed-form form-bound; estimate numerically.
struct NoAnalyticBound : Error {
    using Error::Error;
};

/// Quadrature rule failed its construction-time accuracy certificate.
struct QuadratureUnderresolved : Error {
    using Error::Error;
};

/// A configuration has a pair distance below the singularity guard.
struct CollisionState : Error {
    using Error::Error;
};

/// Trial function with vanishing (or non-finite) Dirichlet energy.
struct DegenerateTrial : Error {
    using Error::Error;
};

/// PDE grids disagree beyond tolerance under refinement.
struct GridUnderresolved : Error {
    using Error::Error;
};

/// Horizon truncation error exceeds the allotted share of the tolerance.
struct TailBoundTooLarge : Error {
    using Error::Error;
};

/// Density slope fit unstable under bandwidth halving.
struct BandwidthUnderresolved : Error {
    using Error::Error;
};

}  // namespace critmc
