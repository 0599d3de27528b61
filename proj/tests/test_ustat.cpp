#include <algorithm>
#include <cmath>
#include <vector>

#include <catch_amalgamated.hpp>

#include "ustatbench/errors.hpp"
#include "ustatbench/ustat.hpp"

using namespace ustatbench;
using Catch::Approx;

namespace {

double rel_diff(double a, double b, double scale) {
    return std::abs(a - b) / std::max(scale, 1e-300);
}

} // namespace

TEST_CASE("hand-computed U statistics") {
    const std::vector<double> xs{1.0, 2.0, 3.0};
    const auto prod = catalog::make("product", 2);
    const auto path = prefix_u_oracle(prod, xs);
    REQUIRE(path.values.size() == 2);
    CHECK(path.at(2) == 2.0);
    CHECK(path.at(3) == Approx(11.0 / 3.0));
    CHECK(u_statistic_oracle(prod, xs) == Approx(11.0 / 3.0));

    const auto fast = prefix_u_product_fast(2, xs);
    CHECK(fast.at(2) == 2.0);
    CHECK(fast.at(3) == Approx(11.0 / 3.0).epsilon(1e-15));

    CHECK(u_statistic_oracle(catalog::make("variance", 2), xs) == Approx(1.0));
    CHECK(u_statistic_oracle(catalog::make("gini", 2), xs) == Approx(4.0 / 3.0));
    CHECK(u_statistic_oracle(catalog::make("mean", 1), xs) == Approx(2.0));
}

TEST_CASE("size and budget errors") {
    const std::vector<double> xs{1.0};
    CHECK_THROWS_AS(prefix_u_oracle(catalog::make("product", 2), xs), ArgumentError);
    CHECK_THROWS_AS(prefix_u_product_fast(2, xs), ArgumentError);
    CHECK_THROWS_AS(prefix_u_degree2_fast(Degree2Kind::gini, xs), ArgumentError);
    CHECK_THROWS_AS(check_enumeration(100000, 3), ResourceError);
    CHECK_NOTHROW(check_enumeration(100, 3));
    CHECK_THROWS_AS(check_enumeration(10, 3, 100), ResourceError);
}

TEST_CASE("prefix subset visitor covers each subset once") {
    for (std::size_t m = 1; m <= 4; ++m) {
        const std::size_t n = 9;
        std::vector<std::vector<std::size_t>> seen;
        std::vector<std::size_t> prefixes;
        for_each_prefix_subset(
            n, m, [&](std::span<const std::size_t> s) { seen.emplace_back(s.begin(), s.end()); },
            [&](std::size_t k) {
                prefixes.push_back(k);
                CHECK(static_cast<double>(seen.size()) == binomial(k, m));
            });
        CHECK(prefixes.size() == n - m + 1);
        for (const auto& s : seen) CHECK(std::is_sorted(s.begin(), s.end()));
        std::sort(seen.begin(), seen.end());
        CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
    }
}

TEST_CASE("prefix oracle agrees with full enumeration at every k") {
    const auto xs = sample(DistributionSpec::normal(), 14, Seed{2, 0});
    for (const char* name : {"product", "variance", "gini", "wilcoxon"}) {
        const auto k = catalog::make(name, 2);
        const auto path = prefix_u_oracle(k, xs);
        for (std::size_t j = 2; j <= xs.size(); ++j) {
            const std::span<const double> head(xs.data(), j);
            CHECK(path.at(j) == Approx(u_statistic_oracle(k, head)).epsilon(1e-14));
        }
    }
}

TEST_CASE("fast evaluators match the oracle") {
    struct Case {
        const char* name;
        std::size_t m;
    };
    const std::vector<Case> cases{{"mean", 1}, {"product", 1}, {"product", 2}, {"product", 3},
                                  {"variance", 2}, {"gini", 2}, {"wilcoxon", 2}};
    const std::vector<DistributionSpec> dists{DistributionSpec::normal(), DistributionSpec::example_pareto(2.0)};
    for (const auto& d : dists) {
        const bool heavy = d.kind() == DistributionKind::example_pareto;
        for (const auto& c : cases) {
            const auto k = catalog::make(c.name, c.m);
            const double tol = heavy && std::string(c.name) == "product" ? 1e-8 : 1e-10;
            for (std::uint64_t r = 0; r < 40; ++r) {
                const auto xs = sample(d, 30, Seed{101, r});
                const auto slow = prefix_u_oracle(k, xs);
                const auto fast = prefix_u_path(k, xs);
                REQUIRE(fast.values.size() == slow.values.size());
                for (std::size_t i = 0; i < slow.values.size(); ++i) {
                    const double scale = std::max(std::abs(slow.values[i]), 1.0);
                    INFO(c.name << " m=" << c.m << " k=" << i + c.m);
                    CHECK(rel_diff(fast.values[i], slow.values[i], scale) <= tol);
                }
            }
        }
    }
}

TEST_CASE("extended accumulation agrees with compensated on benign data") {
    const auto xs = sample(DistributionSpec::normal(1.0, 1.0), 500, Seed{4, 4});
    const auto a = prefix_u_product_fast(3, xs, Accumulation::compensated);
    const auto b = prefix_u_product_fast(3, xs, Accumulation::extended);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        CHECK(a.values[i] == Approx(b.values[i]).epsilon(1e-12));
    }
}

TEST_CASE("wilcoxon fast path with ties and zeros") {
    const std::vector<double> xs{0.0, 0.0, -1.0, 1.0, 1.0, -1.0, 2.0, 0.0};
    const auto k = catalog::make("wilcoxon", 2);
    const auto slow = prefix_u_oracle(k, xs);
    const auto fast = prefix_u_path(k, xs);
    for (std::size_t i = 0; i < slow.values.size(); ++i) CHECK(fast.values[i] == slow.values[i]);
    const auto g = catalog::make("gini", 2);
    const auto gs = prefix_u_oracle(g, xs);
    const auto gf = prefix_u_path(g, xs);
    for (std::size_t i = 0; i < gs.values.size(); ++i) CHECK(gf.values[i] == Approx(gs.values[i]).epsilon(1e-14));
}

TEST_CASE("projection identity over subsets") {
    // sum over m-subsets of sum_j g(X_ij) equals C(k-1, m-1) sum_i g(X_i).
    const auto xs = sample(DistributionSpec::example_pareto(2.0), 20, Seed{8, 8});
    for (std::size_t m = 1; m <= 3; ++m) {
        CompensatedSum lhs;
        for_each_prefix_subset(
            xs.size(), m,
            [&](std::span<const std::size_t> s) {
                for (std::size_t i : s) lhs.add(2.0 * xs[i] - 4.0);
            },
            [](std::size_t) {});
        CompensatedSum tot;
        for (double x : xs) tot.add(2.0 * x - 4.0);
        const double n = static_cast<double>(xs.size());
        const double rhs = static_cast<double>(m) / n * binomial(xs.size(), m) * tot.value();
        CHECK(lhs.value() == Approx(rhs).epsilon(1e-10));
    }
}
