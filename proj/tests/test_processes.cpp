#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <catch_amalgamated.hpp>

#include "ustatbench/errors.hpp"
#include "ustatbench/processes.hpp"

using namespace ustatbench;
using Catch::Approx;

namespace {

std::vector<double> hajek_of(const Kernel& k, std::span<const double> xs) {
    std::vector<double> h;
    for (double x : xs) h.push_back(k.hajek(x));
    return h;
}

} // namespace

TEST_CASE("mean kernel by hand") {
    const std::vector<double> xs{1.0, -1.0};
    const auto k = catalog::make("mean", 1, DistributionSpec::normal());
    const auto u = prefix_u_path(k, xs);
    const auto self = build_self_normalized_process(u, hajek_of(k, xs), 0.0);
    REQUIRE(self.values.size() == 3);
    CHECK(self.values[0] == 0.0);
    CHECK(self.values[1] == Approx(1.0 / std::sqrt(2.0)));
    CHECK(self.values[2] == Approx(0.0).margin(1e-15));

    const auto scalar = build_scalar_normalized_process(u, 1.0, 0.0);
    CHECK(scalar.values[1] == 1.0);
    CHECK(scalar.values[2] == 0.0);
    const auto doubled = build_scalar_normalized_process(u, 2.0, 0.0);
    CHECK(doubled.values[1] == 0.5);
}

TEST_CASE("zero before m/n and single point at n = m") {
    const std::vector<double> xs{2.0, 3.0, 5.0};
    const auto k = catalog::make("product", 3, DistributionSpec::normal(1.0, 1.0));
    const auto u = prefix_u_path(k, xs);
    const std::vector<double> h{1.0, 2.0, 4.0};
    const auto p = build_self_normalized_process(u, h, 1.0);
    CHECK(p.values[0] == 0.0);
    CHECK(p.values[1] == 0.0);
    CHECK(p.values[2] == 0.0);
    CHECK(p.values[3] == Approx((30.0 - 1.0) / std::sqrt(21.0)));
    CHECK(p.value_at(0.99) == 0.0);
    CHECK(p.value_at(1.0) == p.values[3]);
}

TEST_CASE("errors") {
    const std::vector<double> xs{1.0, 2.0};
    const auto u = prefix_u_path(catalog::make("product", 2), xs);
    const std::vector<double> zeros{0.0, 0.0};
    CHECK_THROWS_AS(build_self_normalized_process(u, zeros, 0.0), DegenerateError);
    CHECK_THROWS_AS(build_self_normalized_process(u, std::vector<double>{1.0}, 0.0), ArgumentError);
    CHECK_THROWS_AS(build_scalar_normalized_process(u, 0.0, 0.0), ArgumentError);
    CHECK_THROWS_AS(build_scalar_normalized_process(u, -1.0, 0.0), ArgumentError);
    CHECK_THROWS_AS(build_miller_sen_process(u, 0.0, 0.0), ArgumentError);
    CHECK_THROWS_AS(build_miller_sen_process(u, std::numeric_limits<double>::infinity(), 0.0), ArgumentError);
    CHECK_THROWS_AS(partial_sum_path(zeros, 0.0), ArgumentError);
    const auto a = partial_sum_path(zeros, 1.0);
    const auto b = partial_sum_path(std::vector<double>{1.0, 2.0, 3.0}, 1.0);
    CHECK_THROWS_AS(sup_distance(a, b), ArgumentError);
}

TEST_CASE("partial sums") {
    const auto p = partial_sum_path(std::vector<double>{1.0, -1.0, 1.0}, 1.0);
    CHECK(p.values == std::vector<double>{0.0, 1.0, 0.0, 1.0});
    const auto z = partial_sum_path(std::vector<double>{0.0, 0.0, 0.0}, 1.0);
    CHECK(z.sup_abs() == 0.0);
    CHECK(sup_distance(p, z) == p.sup_abs());
    CHECK(sup_distance(p, p) == 0.0);
}

TEST_CASE("m = 1 reduces to the self-normalized partial-sum path") {
    const auto d = DistributionSpec::example_pareto(2.0);
    const auto k = catalog::make("mean", 1, d);
    for (std::uint64_t r = 0; r < 20; ++r) {
        const auto xs = sample(d, 300, Seed{21, r});
        const auto h = hajek_of(k, xs);
        const auto u = build_self_normalized_process(prefix_u_path(k, xs), h, k.theta);
        const auto s = partial_sum_path(h, SelfNormalizer::from(h).vn());
        CHECK(sup_distance(u, s) <= 1e-12);
    }
}

TEST_CASE("self-normalization is scale invariant") {
    const auto d = DistributionSpec::normal(0.3, 1.2);
    const auto k = catalog::make("variance", 2, d);
    const auto xs = sample(d, 200, Seed{4, 1});
    const auto h = hajek_of(k, xs);
    const auto u = prefix_u_path(k, xs);
    const auto base = build_self_normalized_process(u, h, k.theta);
    const double c = 7.5;
    PrefixUPath scaled_u = u;
    for (double& v : scaled_u.values) v *= c;
    std::vector<double> scaled_h = h;
    for (double& v : scaled_h) v *= c;
    const auto scaled = build_self_normalized_process(scaled_u, scaled_h, c * k.theta);
    for (std::size_t i = 0; i < base.values.size(); ++i) {
        CHECK(scaled.values[i] == Approx(base.values[i]).margin(1e-10));
    }
    const auto same = build_scalar_normalized_process(u, SelfNormalizer::from(h).vn(), k.theta);
    CHECK(same.values == base.values);
}

TEST_CASE("Miller-Sen path") {
    const auto d = DistributionSpec::normal();
    const auto k = catalog::make("product", 3, DistributionSpec::normal(1.0, 1.0));
    const auto xs = sample(d, 40, Seed{6, 0});
    const auto u = prefix_u_path(k, xs);
    const double var = 2.0;
    const auto ms = build_miller_sen_process(u, var, 1.0);
    const auto sc = build_scalar_normalized_process(u, std::sqrt(40.0 * var), 1.0);
    for (std::size_t j = 3; j <= 40; ++j) CHECK(ms.values[j] == sc.values[j]);
    CHECK(ms.value_at(2.0 / (2.0 * 40.0)) == 0.0);
    CHECK(ms.value_at(2.0 / 40.0) == 0.0);
    for (std::size_t j = 3; j < 40; ++j) {
        const double mid = (static_cast<double>(j) + 0.5) / 40.0;
        CHECK(ms.value_at(mid) == Approx(0.5 * (ms.values[j] + ms.values[j + 1])).margin(1e-14));
    }
    // Linear ramp from (m - 1)/n to m/n.
    CHECK(ms.value_at(2.5 / 40.0) == Approx(0.5 * ms.values[3]));
}

TEST_CASE("sup distance with mixed styles is exact") {
    NormalizedProcessPath step;
    step.n = 2;
    step.values = {0.0, 0.0, 0.0};
    NormalizedProcessPath lin = step;
    lin.style = PathStyle::piecewise_linear;
    lin.values = {0.0, 0.0, 3.0};
    // Step is 0 on [1/2, 1) while the linear path approaches 3.
    CHECK(sup_distance(step, lin) == 3.0);
    std::vector<double> fine;
    for (int i = 0; i <= 1000; ++i) fine.push_back(i / 1000.0);
    CHECK(sup_distance_over(step, lin, fine) == Approx(3.0));
}

TEST_CASE("sup distance is monotone under grid refinement") {
    const auto d = DistributionSpec::normal();
    const auto k = catalog::make("variance", 2, d);
    const auto xs = sample(d, 64, Seed{3, 3});
    const auto h = hajek_of(k, xs);
    const auto u = build_self_normalized_process(prefix_u_path(k, xs), h, k.theta);
    const auto s = partial_sum_path(h, SelfNormalizer::from(h).vn());
    double prev = 0.0;
    for (std::size_t step = 64; step >= 1; step /= 2) {
        std::vector<double> times;
        for (std::size_t j = 0; j <= 64; j += step) times.push_back(static_cast<double>(j) / 64.0);
        const double dist = sup_distance_over(u, s, times);
        CHECK(dist >= prev);
        prev = dist;
    }
    CHECK(prev == sup_distance(u, s));
}

TEST_CASE("csv output") {
    const auto p = partial_sum_path(std::vector<double>{0.5, 0.25}, 1.0);
    std::ostringstream out;
    p.write_csv(out);
    CHECK(out.str() == "t,value\n0,0\n0.5,0.5\n1,0.75\n");
}
