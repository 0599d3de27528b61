#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ustatbench/rng.hpp"

namespace ustatbench {

enum class DistributionKind { example_pareto, normal, exponential, student_t };

/// A source distribution F for the i.i.d. sample.
///
/// example-pareto(a) has density |x - a|^{-3} on |x - a| >= 1 (a != 0): mean a,
/// infinite variance, every moment of order < 2 finite. It is the bench's
/// canonical heavy-tailed case; the other kinds are finite-variance baselines
/// (student-t exists to probe moment-condition failure and carries no
/// closed-form moments beyond the classical ones).
class DistributionSpec {
public:
    static DistributionSpec example_pareto(double a);
    static DistributionSpec normal(double mean = 0.0, double sd = 1.0);
    static DistributionSpec exponential(double rate = 1.0);
    static DistributionSpec student_t(double df);

    /// Parses "example-pareto a=2", "normal mean=0 sd=1", "exponential rate=1",
    /// "student-t df=3". Throws ArgumentError on unknown kinds, unknown or
    /// missing parameters.
    static DistributionSpec parse(std::string_view text);

    [[nodiscard]] DistributionKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::string name() const;
    /// Canonical text form, accepted by parse().
    [[nodiscard]] std::string to_string() const;

    [[nodiscard]] double param(std::size_t i) const { return params_.at(i); }

    [[nodiscard]] double pdf(double x) const;
    [[nodiscard]] double cdf(double x) const;
    /// Inverse CDF on (0, 1).
    [[nodiscard]] double quantile(double u) const;

    /// E X; NaN when undefined (student-t with df <= 1).
    [[nodiscard]] double mean() const;
    /// Var X; +inf when infinite.
    [[nodiscard]] double variance() const;
    /// E (X - EX)^4; +inf when infinite.
    [[nodiscard]] double central_moment4() const;

    /// E((X - center)^2 ; |X - center| <= t).
    [[nodiscard]] double truncated_second_moment(double center, double t) const;

    /// E(X ; lo < X <= hi). Bounds may be infinite.
    [[nodiscard]] double partial_first_moment(double lo, double hi) const;

    /// Points where the density is discontinuous or not smooth.
    [[nodiscard]] std::vector<double> breakpoints() const;

    /// One draw. example-pareto and exponential use the inverse CDF.
    [[nodiscard]] double draw(Engine& eng) const;

    friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;

private:
    DistributionSpec(DistributionKind kind, std::vector<double> params)
        : kind_(kind), params_(std::move(params)) {}

    DistributionKind kind_;
    std::vector<double> params_;
};

/// n i.i.d. draws from `dist` on the stream identified by `seed`. The first k
/// draws do not depend on n.
[[nodiscard]] std::vector<double> sample(const DistributionSpec& dist, std::size_t n, Seed seed);

/// Fills `out` with i.i.d. draws, advancing `eng`.
void draw_into(const DistributionSpec& dist, Engine& eng, std::span<double> out);

/// E g(X) by adaptive quadrature over the quantile domain u in (0, 1).
/// `x_breaks` are extra points where g is discontinuous or kinked.
[[nodiscard]] double expect(const DistributionSpec& dist, const std::function<double(double)>& g,
                            std::span<const double> x_breaks = {});

/// Free-function form of DistributionSpec::truncated_second_moment.
[[nodiscard]] double truncated_second_moment(const DistributionSpec& dist, double center, double t);

/// b -> E(g(X)^2 ; |g(X)| <= b) for the Hajek projection g of some kernel.
using TruncatedVariance = std::function<double(double)>;

/// Truncated variance of slope * (X - center); exact wherever the
/// distribution's truncated second moment is.
[[nodiscard]] TruncatedVariance affine_truncated_variance(const DistributionSpec& dist, double slope,
                                                          double center);

/// Truncated variance of an arbitrary g by quadrature. The truncation edges
/// {x : |g(x)| = b} are located on a quantile grid and refined by bisection.
[[nodiscard]] TruncatedVariance numeric_truncated_variance(const DistributionSpec& dist,
                                                           std::function<double(double)> g);

/// Normalizing constant for a DAN sum of n copies: the largest b with
/// n * TV(b) / b^2 > 1, i.e. the nontrivial root of b^2 = n * TV(b). For
/// finite variance s^2 this is asymptotic to s * sqrt(n); for the affine
/// projection under example-pareto it grows like sqrt(n log n).
[[nodiscard]] double estimate_bn(const TruncatedVariance& tv, std::size_t n);

/// W(k/n) for k = 0..n: W(0) = 0 and i.i.d. N(0, 1/n) increments.
[[nodiscard]] std::vector<double> wiener_path(std::size_t n, Seed seed);

/// P(sup_{0<=t<=1} |W(t)| <= x) by the alternating theta series
/// (4/pi) sum_k (-1)^k/(2k+1) exp(-pi^2 (2k+1)^2 / (8 x^2)).
[[nodiscard]] double sup_abs_wiener_cdf(double x);

} // namespace ustatbench
