#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ustatbench/rng.hpp"
#include "ustatbench/sampling.hpp"

namespace ustatbench {

using KernelFn = std::function<double(std::span<const double>)>;

/// h~1(x) = a_slope * (x - a_center), when the projection is affine in x.
struct AffineProjection {
    double slope = 0.0;
    double center = 0.0;
};

/// A symmetric kernel h of order m, bound to the source distribution that
/// fixes theta = E h and the Hajek projection h~1(x) = E(h(x, X2..Xm)) - theta.
///
/// `theta` is NaN when the kernel is not bound to a distribution (or has no
/// closed form under it) and +inf when E h diverges. `hajek` is empty unless
/// a closed form is known.
struct Kernel {
    std::string name;
    std::size_t order = 1;
    KernelFn evaluate;
    double theta = std::numeric_limits<double>::quiet_NaN();
    std::function<double(double)> hajek;
    /// Var h~1(X1); +inf when infinite, nullopt when unknown.
    std::optional<double> hajek_variance;
    /// Whether E h^2 < inf; nullopt when unknown.
    std::optional<bool> finite_second_moment;
    std::optional<AffineProjection> hajek_affine;
    /// sup |h| when the kernel is bounded.
    std::optional<double> bound;
    /// Distribution the constants above refer to.
    std::optional<DistributionSpec> source;

    [[nodiscard]] bool has_hajek() const noexcept { return static_cast<bool>(hajek); }
};

/// Checked evaluation: arity and finiteness of arguments.
[[nodiscard]] double evaluate_kernel(const Kernel& k, std::span<const double> args);

/// Analytic h~1(x). Throws UnsupportedError when no closed form is attached.
[[nodiscard]] double hajek_analytic(const Kernel& k, double x);

/// Monte Carlo estimate with its standard error.
struct Estimate {
    double value = 0.0;
    /// Sample standard deviation of the replicates over sqrt(draws); +inf for
    /// a single draw.
    double std_error = 0.0;
    std::size_t draws = 0;
    /// Replicates that came out non-finite. They are kept in `value`.
    std::size_t non_finite = 0;

    [[nodiscard]] bool ok() const noexcept { return non_finite == 0 && std::isfinite(value); }
};

/// E(h(x, Y2..Ym)) - theta with Y i.i.d. from `sampler`, one replicate per
/// draw of the (m-1)-tuple.
[[nodiscard]] Estimate hajek_mc(const Kernel& k, double x, const DistributionSpec& sampler, std::size_t draws,
                                Seed seed);

namespace catalog {

/// Names usable in configuration files.
[[nodiscard]] std::vector<std::string> names();

/// Unbound kernel (theta NaN, no projection).
[[nodiscard]] Kernel make(std::string_view name, std::size_t m);

/// Kernel bound to `dist`. Closed forms attached where known:
///   mean       m=1  h=x                   theta=mu, h~1 = x - mu
///   product    any  h=prod x_i            theta=mu^m, h~1 = mu^{m-1} x - mu^m
///   variance   m=2  h=(x1-x2)^2/2         theta=sigma^2, h~1 = ((x-mu)^2 - sigma^2)/2
///   gini       m=2  h=|x1-x2|             normal and exponential sources
///   wilcoxon   m=2  h=1{x1+x2>0}          theta=P(X1+X2>0), h~1 = P(X>-x) - theta
[[nodiscard]] Kernel make(std::string_view name, std::size_t m, const DistributionSpec& dist);

} // namespace catalog

} // namespace ustatbench
