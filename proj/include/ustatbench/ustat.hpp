#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ustatbench/errors.hpp"
#include "ustatbench/kernels.hpp"
#include "ustatbench/numeric.hpp"

namespace ustatbench {

/// U_k for k = m..n computed from the first k sample points in arrival order.
struct PrefixUPath {
    std::size_t m = 1;
    std::size_t n = 0;
    /// values[k - m] = U_k.
    std::vector<double> values;
    /// Centering used downstream (copied from the kernel; NaN if unbound).
    double theta = std::numeric_limits<double>::quiet_NaN();

    [[nodiscard]] double at(std::size_t k) const { return values.at(k - m); }
};

/// Largest C(n, m) the enumeration oracles accept.
inline constexpr std::uint64_t kEnumerationBudget = 100'000'000;

/// Throws ArgumentError for n < m and ResourceError when C(n, m) exceeds
/// the budget.
void check_enumeration(std::size_t n, std::size_t m, std::uint64_t budget = kEnumerationBudget);

/// Visits every m-subset of {0..n-1} exactly once, grouped by largest index:
/// for k = m..n it calls on_subset(indices) for the C(k-1, m-1) subsets whose
/// largest index is k-1 (lexicographic in the remaining indices), then
/// on_prefix(k). Indices are ascending.
template <class OnSubset, class OnPrefix>
void for_each_prefix_subset(std::size_t n, std::size_t m, OnSubset&& on_subset, OnPrefix&& on_prefix) {
    std::vector<std::size_t> idx(m);
    const std::span<const std::size_t> view(idx);
    for (std::size_t k = m; k <= n; ++k) {
        const std::size_t r = m - 1;
        for (std::size_t j = 0; j < r; ++j) idx[j] = j;
        idx[r] = k - 1;
        const std::size_t limit = k - 1; // choose r indices from [0, limit)
        while (true) {
            on_subset(view);
            if (r == 0) break;
            std::size_t i = r;
            while (i > 0 && idx[i - 1] == limit - r + (i - 1)) --i;
            if (i == 0) break;
            ++idx[i - 1];
            for (std::size_t j = i; j < r; ++j) idx[j] = idx[j - 1] + 1;
        }
        on_prefix(k);
    }
}

/// Exact U_n by enumeration of all C(n, m) subsets in lexicographic order
/// with compensated summation.
[[nodiscard]] double u_statistic_oracle(const Kernel& k, std::span<const double> sample);

/// All U_k, m <= k <= n, with exactly C(n, m) kernel evaluations: when point
/// k arrives only the subsets having k as largest index are evaluated.
[[nodiscard]] PrefixUPath prefix_u_oracle(const Kernel& k, std::span<const double> sample);

enum class Accumulation {
    /// Neumaier-compensated running sums.
    compensated,
    /// Double-double arithmetic throughout (error-free products).
    extended,
};

/// Product kernel via elementary symmetric polynomials:
/// e_j <- e_j + x_k e_{j-1} (descending j), U_k = e_m / C(k, m). O(nm).
[[nodiscard]] PrefixUPath prefix_u_product_fast(std::size_t m, std::span<const double> sample,
                                                Accumulation acc = Accumulation::compensated);

enum class Degree2Kind { variance, gini, wilcoxon };

/// Throws ArgumentError for names other than variance, gini, wilcoxon.
[[nodiscard]] Degree2Kind parse_degree2_kind(std::string_view name);

/// Order-2 kernels in O(log k) per point: running power sums for variance,
/// rank-indexed Fenwick trees for gini and wilcoxon.
[[nodiscard]] PrefixUPath prefix_u_degree2_fast(Degree2Kind kind, std::span<const double> sample);

/// Fastest available evaluator for a catalog kernel; falls back to the oracle.
[[nodiscard]] PrefixUPath prefix_u_path(const Kernel& k, std::span<const double> sample,
                                        Accumulation acc = Accumulation::compensated);

} // namespace ustatbench
