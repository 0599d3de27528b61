#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "ustatbench/ustat.hpp"

namespace ustatbench {

enum class PathStyle {
    /// Right-continuous step function: value_k on [k/n, (k+1)/n).
    step,
    /// Linear interpolation between consecutive grid values.
    piecewise_linear,
};

enum class NormalizerKind {
    /// V_n = sqrt(sum of squared Hajek values of the sample).
    self,
    /// A fixed constant B_n.
    scalar,
    /// sqrt(n Var h~1(X1)).
    miller_sen,
};

/// A process on [0, 1] stored by its values on the grid t_k = k/n, k = 0..n.
///
/// For step paths the sup over [0, 1] of the difference of two paths is
/// attained on the grid, since both are constant on each [k/n, (k+1)/n).
/// For piecewise-linear paths it is attained at grid points as well (the
/// difference is linear on each cell), so grid evaluation is exact in both
/// cases; sup_distance handles mixed styles cell by cell.
struct NormalizedProcessPath {
    std::size_t n = 0;
    std::size_t m = 1;
    /// values[k] is the path at t = k/n.
    std::vector<double> values;
    PathStyle style = PathStyle::step;
    NormalizerKind normalizer_kind = NormalizerKind::self;
    double normalizer = 1.0;

    [[nodiscard]] double time(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(n); }
    [[nodiscard]] std::vector<double> times() const;
    /// Path value at any t in [0, 1].
    [[nodiscard]] double value_at(double t) const;
    /// sup_t |path(t)|.
    [[nodiscard]] double sup_abs() const;
    /// Writes "t,value" with a header row.
    void write_csv(std::ostream& out) const;
};

struct SelfNormalizer {
    /// V_n^2 = sum_i h~1(X_i)^2.
    double vn2 = 0.0;
    std::size_t n = 0;

    /// Throws InputError on non-finite values.
    [[nodiscard]] static SelfNormalizer from(std::span<const double> hajek_values);
    [[nodiscard]] double vn() const;
};

/// t -> ([nt]/m) (U_[nt] - theta) / V_n for t >= m/n, 0 before; step style.
/// Throws DegenerateError when V_n^2 = 0 and ArgumentError on size mismatch
/// or non-finite theta.
[[nodiscard]] NormalizedProcessPath build_self_normalized_process(const PrefixUPath& path,
                                                                  std::span<const double> hajek_values,
                                                                  double theta);

/// Same with a fixed positive constant in place of V_n.
[[nodiscard]] NormalizedProcessPath build_scalar_normalized_process(const PrefixUPath& path, double bn,
                                                                    double theta);

/// Y*_n: piecewise linear through k (U_k - theta) / (m sqrt(n var_h1)) at
/// t = k/n for k >= m, and 0 on [0, (m - 1)/n]. Requires 0 < var_h1 < inf.
[[nodiscard]] NormalizedProcessPath build_miller_sen_process(const PrefixUPath& path, double var_h1,
                                                             double theta);

/// Step path of sum_{i <= [nt]} hajek_values[i] / normalizer.
[[nodiscard]] NormalizedProcessPath partial_sum_path(std::span<const double> hajek_values, double normalizer,
                                                     NormalizerKind kind = NormalizerKind::self);

/// sup over t in [0, 1] of |a(t) - b(t)|, exact for any mix of styles.
/// Throws ArgumentError when the grids differ.
[[nodiscard]] double sup_distance(const NormalizedProcessPath& a, const NormalizedProcessPath& b);

/// max over the given times of |a(t) - b(t)|.
[[nodiscard]] double sup_distance_over(const NormalizedProcessPath& a, const NormalizedProcessPath& b,
                                       std::span<const double> times);

} // namespace ustatbench
