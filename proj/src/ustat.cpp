#include "ustatbench/ustat.hpp"

#include <algorithm>
#include <string>

namespace ustatbench {

void check_enumeration(std::size_t n, std::size_t m, std::uint64_t budget) {
    if (m < 1) throw ArgumentError("kernel order must be >= 1");
    if (n < m) {
        throw ArgumentError("sample size " + std::to_string(n) + " is smaller than kernel order " + std::to_string(m));
    }
    const auto count = binomial_exact(n, m);
    if (!count || *count > budget) {
        throw ResourceError("C(" + std::to_string(n) + ", " + std::to_string(m) +
                            ") exceeds the enumeration budget of " + std::to_string(budget) +
                            " kernel evaluations; use a smaller n or a fast evaluator");
    }
}

double u_statistic_oracle(const Kernel& k, std::span<const double> sample) {
    const std::size_t n = sample.size();
    const std::size_t m = k.order;
    check_enumeration(n, m);
    std::vector<std::size_t> idx(m);
    for (std::size_t j = 0; j < m; ++j) idx[j] = j;
    std::vector<double> args(m);
    CompensatedSum sum;
    while (true) {
        for (std::size_t j = 0; j < m; ++j) args[j] = sample[idx[j]];
        sum.add(k.evaluate(args));
        std::size_t i = m;
        while (i > 0 && idx[i - 1] == n - m + (i - 1)) --i;
        if (i == 0) break;
        ++idx[i - 1];
        for (std::size_t j = i; j < m; ++j) idx[j] = idx[j - 1] + 1;
    }
    return sum.value() / binomial(n, m);
}

PrefixUPath prefix_u_oracle(const Kernel& k, std::span<const double> sample) {
    const std::size_t n = sample.size();
    const std::size_t m = k.order;
    check_enumeration(n, m);
    PrefixUPath path{m, n, {}, k.theta};
    path.values.reserve(n - m + 1);
    std::vector<double> args(m);
    CompensatedSum sum;
    for_each_prefix_subset(
        n, m,
        [&](std::span<const std::size_t> idx) {
            for (std::size_t j = 0; j < m; ++j) args[j] = sample[idx[j]];
            sum.add(k.evaluate(args));
        },
        [&](std::size_t kk) { path.values.push_back(sum.value() / binomial(kk, m)); });
    return path;
}

PrefixUPath prefix_u_product_fast(std::size_t m, std::span<const double> sample, Accumulation acc) {
    const std::size_t n = sample.size();
    if (m < 1) throw ArgumentError("kernel order must be >= 1");
    if (n < m) {
        throw ArgumentError("sample size " + std::to_string(n) + " is smaller than kernel order " + std::to_string(m));
    }
    PrefixUPath path{m, n, {}, std::numeric_limits<double>::quiet_NaN()};
    path.values.reserve(n - m + 1);

    if (acc == Accumulation::extended) {
        std::vector<DoubleDouble> e(m + 1);
        e[0] = {1.0, 0.0};
        for (std::size_t k = 1; k <= n; ++k) {
            const double x = sample[k - 1];
            for (std::size_t j = std::min(k, m); j >= 1; --j) e[j] = e[j] + e[j - 1] * x;
            if (k >= m) path.values.push_back((e[m] / binomial(k, m)).value());
        }
        return path;
    }

    std::vector<CompensatedSum> e(m + 1);
    e[0].add(1.0);
    for (std::size_t k = 1; k <= n; ++k) {
        const double x = sample[k - 1];
        for (std::size_t j = std::min(k, m); j >= 1; --j) e[j].add(x * e[j - 1].value());
        if (k >= m) path.values.push_back(e[m].value() / binomial(k, m));
    }
    return path;
}

Degree2Kind parse_degree2_kind(std::string_view name) {
    if (name == "variance") return Degree2Kind::variance;
    if (name == "gini") return Degree2Kind::gini;
    if (name == "wilcoxon") return Degree2Kind::wilcoxon;
    throw ArgumentError("unknown degree-2 kernel '" + std::string(name) + "'");
}

namespace {

/// Fenwick tree over value ranks holding counts and double-double sums.
class RankTree {
public:
    explicit RankTree(std::size_t size) : count_(size + 1, 0), sum_(size + 1) {}

    void insert(std::size_t rank, double x) {
        for (std::size_t i = rank + 1; i < count_.size(); i += i & (~i + 1)) {
            ++count_[i];
            sum_[i] = sum_[i] + DoubleDouble{x, 0.0};
        }
    }

    /// Count and sum over ranks [0, rank_end).
    [[nodiscard]] std::pair<std::uint64_t, DoubleDouble> prefix(std::size_t rank_end) const {
        std::uint64_t c = 0;
        DoubleDouble s;
        for (std::size_t i = rank_end; i > 0; i -= i & (~i + 1)) {
            c += count_[i];
            s = s + sum_[i];
        }
        return {c, s};
    }

private:
    std::vector<std::uint64_t> count_;
    std::vector<DoubleDouble> sum_;
};

} // namespace

PrefixUPath prefix_u_degree2_fast(Degree2Kind kind, std::span<const double> sample) {
    const std::size_t n = sample.size();
    if (n < 2) throw ArgumentError("order-2 kernels need at least 2 sample points");
    PrefixUPath path{2, n, {}, std::numeric_limits<double>::quiet_NaN()};
    path.values.reserve(n - 1);

    if (kind == Degree2Kind::variance) {
        DoubleDouble p1;
        DoubleDouble p2;
        for (std::size_t k = 1; k <= n; ++k) {
            const double x = sample[k - 1];
            p1 = p1 + DoubleDouble{x, 0.0};
            p2 = p2 + DoubleDouble{x, 0.0} * x;
            if (k < 2) continue;
            const double kd = static_cast<double>(k);
            const DoubleDouble num = p2 * kd - p1 * p1;
            path.values.push_back((num / (kd * (kd - 1.0))).value());
        }
        return path;
    }

    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    // Number of distinct values <= v.
    auto rank_end = [&](double v) {
        return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
    };
    auto rank_of = [&](double v) {
        return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
    };
    RankTree tree(sorted.size());

    if (kind == Degree2Kind::gini) {
        DoubleDouble total;
        DoubleDouble all;
        for (std::size_t k = 1; k <= n; ++k) {
            const double x = sample[k - 1];
            const auto [c_le, s_le] = tree.prefix(rank_end(x));
            const auto c_gt = static_cast<double>((k - 1) - c_le);
            const DoubleDouble s_gt = all - s_le;
            // sum over earlier points of |x - x_i|
            total = total + (DoubleDouble{x, 0.0} * static_cast<double>(c_le) - s_le) + (s_gt - DoubleDouble{x, 0.0} * c_gt);
            tree.insert(rank_of(x), x);
            all = all + DoubleDouble{x, 0.0};
            if (k >= 2) path.values.push_back((total / binomial(k, 2)).value());
        }
        return path;
    }

    // wilcoxon: earlier points with x_i > -x, i.e. x_i + x > 0.
    std::uint64_t hits = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        const double x = sample[k - 1];
        const auto c_le = tree.prefix(rank_end(-x)).first;
        hits += (k - 1) - c_le;
        tree.insert(rank_of(x), x);
        if (k >= 2) path.values.push_back(static_cast<double>(hits) / binomial(k, 2));
    }
    return path;
}

PrefixUPath prefix_u_path(const Kernel& k, std::span<const double> sample, Accumulation acc) {
    PrefixUPath path;
    if (k.name == "mean" || k.name == "product") {
        path = prefix_u_product_fast(k.order, sample, acc);
    } else if (k.order == 2 && (k.name == "variance" || k.name == "gini" || k.name == "wilcoxon")) {
        path = prefix_u_degree2_fast(parse_degree2_kind(k.name), sample);
    } else {
        path = prefix_u_oracle(k, sample);
    }
    path.theta = k.theta;
    return path;
}

} // namespace ustatbench
