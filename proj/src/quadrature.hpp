#pragma once

// Thin wrappers over Boost.Math quadrature with the bench's tolerances.

#include <cmath>
#include <functional>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "ustatbench/errors.hpp"

namespace ustatbench::quad {

inline constexpr double kRelTol = 1e-13;

/// Adaptive Gauss-Kronrod (61 points) on [a, b]; infinite limits allowed.
/// The integrand must be smooth inside the interval.
inline double smooth(const std::function<double(double)>& f, double a, double b) {
    if (a == b) return 0.0;
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 25, kRelTol, &err);
    if (!std::isfinite(v)) throw EstimationError("quadrature produced a non-finite value");
    return v;
}

/// Double-exponential quadrature on a finite [a, b]; tolerates integrable
/// endpoint singularities.
inline double endpoint_singular(const std::function<double(double)>& f, double a, double b) {
    if (a == b) return 0.0;
    thread_local boost::math::quadrature::tanh_sinh<double> integrator(12);
    double err = 0.0;
    double l1 = 0.0;
    const double v = integrator.integrate([&f](double x) { return f(x); }, a, b, kRelTol, &err, &l1);
    if (!std::isfinite(v)) throw EstimationError("quadrature produced a non-finite value");
    return v;
}

} // namespace ustatbench::quad
