#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ustatbench/kernels.hpp"
#include "ustatbench/rng.hpp"
#include "ustatbench/sampling.hpp"

namespace ustatbench {

/// n^{3/2}.
[[nodiscard]] double truncation_level(std::size_t n);

enum class CenteringMethod {
    /// |h| <= level everywhere, so the upper piece is identically zero.
    bounded,
    /// Closed form or deterministic quadrature.
    analytic,
    monte_carlo,
};

/// c1 = E(h; |h| <= level) and c2 = E(h; |h| > level).
///
/// Only c2 is estimated; c1 is set to theta - c2 so that the two truncated
/// pieces add up to h - theta exactly, whatever the error in c2.
struct Centerings {
    double level = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    /// Standard error of `upper` (0 unless Monte Carlo).
    double std_error = 0.0;
    CenteringMethod method = CenteringMethod::analytic;
    std::size_t draws = 0;
    Seed seed{};
};

/// Available for bounded kernels with bound <= level, the mean kernel, and
/// the order-2 product kernel. Throws UnsupportedError otherwise.
[[nodiscard]] Centerings centerings_analytic(const Kernel& k, double level);

/// Plain Monte Carlo over i.i.d. m-tuples from `sampler`.
[[nodiscard]] Centerings centerings_mc(const Kernel& k, const DistributionSpec& sampler, double level,
                                       std::size_t draws, Seed seed);

/// Analytic when available, otherwise Monte Carlo on the kernel's source
/// distribution.
[[nodiscard]] Centerings compute_centerings(const Kernel& k, double level, std::size_t draws, Seed seed);

/// h1 = h 1{|h| <= L} - c1 and h2 = h 1{|h| > L} - c2.
struct TruncatedKernelPair {
    Kernel base;
    double level = 0.0;
    Centerings centerings;

    [[nodiscard]] double lower_from(double h) const { return (std::abs(h) <= level ? h : 0.0) - centerings.lower; }
    [[nodiscard]] double upper_from(double h) const { return (std::abs(h) > level ? h : 0.0) - centerings.upper; }
    [[nodiscard]] double lower(std::span<const double> args) const { return lower_from(base.evaluate(args)); }
    [[nodiscard]] double upper(std::span<const double> args) const { return upper_from(base.evaluate(args)); }
};

/// Level n^{3/2} unless overridden (+inf disables truncation). Throws
/// ArgumentError for n < m or a level that differs from the centerings',
/// EstimationError for non-finite centerings.
[[nodiscard]] TruncatedKernelPair truncate_kernel(const Kernel& k, std::size_t n, const Centerings& centerings,
                                                  std::optional<double> level_override = std::nullopt);

/// Conditional means of the two pieces given one argument equal to x.
struct TruncatedHajek {
    double first = 0.0;
    double second = 0.0;
    double first_se = 0.0;
    double second_se = 0.0;
    /// Standard error of first + second.
    double sum_se = 0.0;
};

/// Monte Carlo over `draws` (m-1)-tuples; exact (zero error) for m = 1.
[[nodiscard]] TruncatedHajek truncated_hajek(const TruncatedKernelPair& pair, double x,
                                             const DistributionSpec& sampler, std::size_t draws, Seed seed);

/// Evaluator for the projections of the truncated pieces.
///
/// `second(x)` is the conditional mean of h2 given x: exact for m = 1,
/// bounded kernels and the order-2 product kernel, otherwise a Monte Carlo
/// average over one fixed panel of (m-1)-tuples shared by every x.
/// `first(x)` is defined as h~1(x) - second(x) for m >= 2 (so the two
/// projections add up to the analytic h~1 exactly) and as h1(x) for m = 1.
class TruncatedProjection {
public:
    /// Needs an analytic Hajek projection on the base kernel.
    static TruncatedProjection make(const TruncatedKernelPair& pair, const DistributionSpec& sampler,
                                    std::size_t panel_draws, Seed seed);

    [[nodiscard]] double first(double x) const;
    [[nodiscard]] double second(double x) const;
    [[nodiscard]] bool exact() const noexcept { return exact_; }
    [[nodiscard]] std::size_t order() const noexcept { return m_; }

private:
    TruncatedProjection() = default;

    std::size_t m_ = 1;
    bool exact_ = true;
    std::function<double(double)> hajek_;
    std::function<double(double)> first_m1_;
    std::function<double(double)> second_;
};

/// psi1(x_1..x_m) = h1(x_1..x_m) - sum_j first(x_j).
[[nodiscard]] KernelFn psi1(const TruncatedKernelPair& pair, const TruncatedProjection& proj);

struct TruncationDiagnostics {
    std::size_t n = 0;
    double level = 0.0;
    /// n^{-1/2} max_k |k C(k,m)^{-1} sum h2|.
    double j1 = 0.0;
    /// n^{-1/2} max_k |m sum_{i<=k} second(X_i)|.
    double j2 = 0.0;
    /// n^{-1/2} max_k |k C(k,m)^{-1} sum psi1|.
    double j3 = 0.0;
    /// n^{-1/2} max_k |k C(k,m)^{-1} sum (h - theta - sum_j h~1(X_ij))|,
    /// bounded by j1 + j2 + j3.
    double remainder = 0.0;
    /// Mean of psi1^2 over all m-subsets of the full sample.
    double psi_second_moment = 0.0;
};

/// One enumeration pass over all m-subsets (ResourceError past the budget).
[[nodiscard]] TruncationDiagnostics j_diagnostics(std::span<const double> sample, const TruncatedKernelPair& pair,
                                                  std::span<const double> hajek_values,
                                                  const TruncatedProjection& proj);

struct MomentConditionReport {
    /// Draw counts at which the running mean was recorded.
    std::vector<std::size_t> checkpoints;
    std::vector<double> means;
    double estimate = 0.0;
    bool stable = false;
};

/// Running mean of |h|^{4/3} ln|h| (0 at h = 0) over i.i.d. m-tuples,
/// recorded at doubling checkpoints from 1000 draws. `stable` when the last
/// two checkpoint means differ by less than 5% relative. Requires
/// draws >= 1000.
[[nodiscard]] MomentConditionReport moment_condition_estimate(const Kernel& k, const DistributionSpec& sampler,
                                                              std::size_t draws, Seed seed);

} // namespace ustatbench
