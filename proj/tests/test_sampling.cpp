#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <catch_amalgamated.hpp>

#include "ustatbench/errors.hpp"
#include "ustatbench/sampling.hpp"

using namespace ustatbench;
using Catch::Approx;

namespace {

double ks_against(std::vector<double> xs, const DistributionSpec& d) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = d.cdf(xs[i]);
        worst = std::max({worst, std::abs(static_cast<double>(i + 1) / n - f), std::abs(static_cast<double>(i) / n - f)});
    }
    return worst;
}

} // namespace

TEST_CASE("parse round-trips and rejects bad specs") {
    const auto d = DistributionSpec::parse("example-pareto a=2");
    CHECK(d.kind() == DistributionKind::example_pareto);
    CHECK(d.param(0) == 2.0);
    CHECK(DistributionSpec::parse(d.to_string()) == d);
    CHECK(DistributionSpec::parse("normal mean=1 sd=3") == DistributionSpec::normal(1.0, 3.0));
    CHECK(DistributionSpec::parse("exponential rate=0.5") == DistributionSpec::exponential(0.5));
    CHECK_THROWS_AS(DistributionSpec::parse("example-pareto"), ArgumentError);
    CHECK_THROWS_AS(DistributionSpec::parse("example-pareto a=0"), ArgumentError);
    CHECK_THROWS_AS(DistributionSpec::parse("cauchy"), ArgumentError);
    CHECK_THROWS_AS(DistributionSpec::parse("normal sd=-1"), ArgumentError);
    CHECK_THROWS_AS(DistributionSpec::parse("normal mean=0 bogus=1"), ArgumentError);
}

TEST_CASE("example-pareto quantile spot values") {
    const auto d = DistributionSpec::example_pareto(2.0);
    CHECK(std::abs(d.quantile(0.875) - 4.0) <= 1e-12);
    CHECK(d.quantile(0.5) == Approx(3.0).margin(1e-12));
    CHECK(d.quantile(0.125) == Approx(0.0).margin(1e-12));
    CHECK_THROWS_AS(d.quantile(0.0), ArgumentError);
    CHECK_THROWS_AS(d.quantile(1.0), ArgumentError);
}

TEST_CASE("quantile inverts cdf on the support") {
    for (const auto& d : {DistributionSpec::example_pareto(2.0), DistributionSpec::example_pareto(-1.5),
                          DistributionSpec::normal(0.5, 2.0), DistributionSpec::exponential(3.0)}) {
        for (double u = 0.01; u < 0.995; u += 0.0137) {
            const double x = d.quantile(u);
            CHECK(d.quantile(d.cdf(x)) == Approx(x).epsilon(1e-10).margin(1e-10));
        }
    }
}

TEST_CASE("example-pareto cdf agrees with integrated density") {
    const auto d = DistributionSpec::example_pareto(2.0);
    using boost::math::quadrature::gauss_kronrod;
    for (int i = 0; i < 100; ++i) {
        const double x = -20.0 + 0.45 * i;
        double direct = 0.0;
        auto f = [&](double s) { return d.pdf(s); };
        if (x <= 1.0) {
            direct = gauss_kronrod<double, 61>::integrate(f, -std::numeric_limits<double>::infinity(), x, 20, 1e-14);
        } else {
            direct = 0.5;
            if (x > 3.0) direct += gauss_kronrod<double, 61>::integrate(f, 3.0, x, 20, 1e-14);
        }
        CHECK(d.cdf(x) == Approx(direct).margin(1e-8));
    }
}

TEST_CASE("example-pareto draws respect support and match the cdf") {
    const auto d = DistributionSpec::example_pareto(2.0);
    const auto xs = sample(d, 100000, Seed{7, 0});
    CHECK(std::all_of(xs.begin(), xs.end(), [](double x) { return std::abs(x - 2.0) >= 1.0; }));
    CHECK(ks_against(xs, d) <= 0.02);
}

TEST_CASE("sampling is reproducible and prefix-stable") {
    const auto d = DistributionSpec::normal();
    const auto a = sample(d, 200, Seed{11, 3});
    const auto b = sample(d, 500, Seed{11, 3});
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
    const auto c = sample(d, 200, Seed{11, 4});
    CHECK(a != c);
    CHECK_THROWS_AS(sample(d, 0, Seed{1, 0}), ArgumentError);
}

TEST_CASE("truncated second moment") {
    const auto d = DistributionSpec::example_pareto(2.0);
    CHECK(d.truncated_second_moment(2.0, 0.5) == 0.0);
    CHECK(d.truncated_second_moment(2.0, 1.0) == 0.0);
    CHECK(d.truncated_second_moment(2.0, std::numbers::e) == Approx(2.0).epsilon(1e-14));
    using boost::math::quadrature::gauss_kronrod;
    for (int i = 1; i <= 20; ++i) {
        const double t = 1.0 + 0.75 * i;
        const double q = 2.0 * gauss_kronrod<double, 61>::integrate([](double s) { return s * s * std::pow(s, -3.0); },
                                                                     1.0, t, 20, 1e-14);
        CHECK(std::abs(d.truncated_second_moment(2.0, t) - q) <= 1e-8);
    }
    const auto z = DistributionSpec::normal();
    CHECK(z.truncated_second_moment(0.0, std::numeric_limits<double>::infinity()) == Approx(1.0));
    CHECK(z.truncated_second_moment(0.0, 40.0) == Approx(1.0));
    // exponential(1) about 0: E(X^2; X <= 1) = 2 - 5/e.
    CHECK(DistributionSpec::exponential(1.0).truncated_second_moment(0.0, 1.0) ==
          Approx(2.0 - 5.0 / std::numbers::e).epsilon(1e-10));
}

TEST_CASE("expect integrates over the quantile domain") {
    const auto d = DistributionSpec::example_pareto(2.0);
    CHECK(expect(d, [](double x) { return x; }) == Approx(2.0).epsilon(1e-9));
    CHECK(expect(d, [](double x) { return std::abs(x - 2.0) <= 5.0 ? 1.0 : 0.0; }, std::vector<double>{-3.0, 7.0}) ==
          Approx(1.0 - 1.0 / 25.0).epsilon(1e-9));
    CHECK(expect(DistributionSpec::normal(1.0, 2.0), [](double x) { return x * x; }) == Approx(5.0).epsilon(1e-9));
}

TEST_CASE("estimate_bn for the example-pareto affine projection") {
    // Largest root of b^2 = 8 n ln(b/2) (a = 2, m = 2), solved in mpmath.
    const auto d = DistributionSpec::example_pareto(2.0);
    const auto tv = affine_truncated_variance(d, 2.0, 2.0);
    CHECK(estimate_bn(tv, 1000) == Approx(190.97650609855380974).epsilon(1e-9));
    CHECK(estimate_bn(tv, 10000) == Approx(683.14316310906177196).epsilon(1e-9));
    CHECK(estimate_bn(tv, 1000000) == Approx(8155.1232734698678834).epsilon(1e-9));

    const auto numeric = numeric_truncated_variance(d, [](double x) { return 2.0 * (x - 2.0); });
    CHECK(estimate_bn(numeric, 10000) == Approx(683.14316310906177196).epsilon(1e-6));

    double prev = 0.0;
    for (std::size_t n = 5; n < 100000; n = n * 3 + 1) {
        const double b = estimate_bn(tv, n);
        CHECK(b >= prev);
        prev = b;
    }
}

TEST_CASE("estimate_bn for finite variance") {
    const auto tv = affine_truncated_variance(DistributionSpec::normal(0.0, 3.0), 1.0, 0.0);
    CHECK(estimate_bn(tv, 1000000) == Approx(3.0 * 1000.0).epsilon(0.05));
    CHECK_THROWS_AS(estimate_bn([](double) { return 0.0; }, 100), DegenerateError);
    CHECK_THROWS_AS(estimate_bn(tv, 1), ArgumentError);
    // At n = 2 no crossing exists for the example-pareto projection (a = 2, m = 2).
    CHECK_THROWS_AS(estimate_bn(affine_truncated_variance(DistributionSpec::example_pareto(2.0), 2.0, 2.0), 2),
                    DegenerateError);
}

TEST_CASE("wiener path basics") {
    const auto w = wiener_path(64, Seed{1, 0});
    REQUIRE(w.size() == 65);
    CHECK(w[0] == 0.0);

    double s = 0.0;
    double s2 = 0.0;
    const int paths = 100000;
    for (int r = 0; r < paths; ++r) {
        const double w1 = wiener_path(16, Seed{5, static_cast<std::uint64_t>(r)}).back();
        s += w1;
        s2 += w1 * w1;
    }
    const double var = s2 / paths - (s / paths) * (s / paths);
    CHECK(var == Approx(1.0).epsilon(0.03));
}

TEST_CASE("sup |W| law: series oracle and simulation") {
    // Series values from mpmath at 30 digits.
    CHECK(sup_abs_wiener_cdf(0.5) == Approx(0.0091569902897607557542).epsilon(1e-10));
    CHECK(sup_abs_wiener_cdf(1.0) == Approx(0.3707774297995239054).epsilon(1e-10));
    CHECK(sup_abs_wiener_cdf(2.0) == Approx(0.90899947615363375282).epsilon(1e-10));
    CHECK(sup_abs_wiener_cdf(3.0) == Approx(0.99460040787347962968).epsilon(1e-10));
    CHECK(sup_abs_wiener_cdf(0.1) < 1e-10);
    CHECK(sup_abs_wiener_cdf(50.0) == 1.0);
    CHECK_THROWS_AS(sup_abs_wiener_cdf(0.0), ArgumentError);

    double prev = 0.0;
    for (int i = 1; i <= 1000; ++i) {
        const double p = sup_abs_wiener_cdf(0.005 * i);
        CHECK(p >= prev);
        prev = p;
    }

    // E sup|W| = sqrt(pi/2). The discrete maximum on a 4096 grid is biased
    // low by about 0.5826/sqrt(4096).
    const int paths = 20000;
    double total = 0.0;
    for (int r = 0; r < paths; ++r) {
        const auto w = wiener_path(4096, Seed{9, static_cast<std::uint64_t>(r)});
        double m = 0.0;
        for (double v : w) m = std::max(m, std::abs(v));
        total += m;
    }
    CHECK(total / paths == Approx(std::sqrt(std::numbers::pi / 2.0)).epsilon(0.02));
}
