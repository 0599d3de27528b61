#include "ustatbench/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "ustatbench/errors.hpp"
#include "ustatbench/numeric.hpp"

namespace ustatbench {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_order(std::string_view name, std::size_t m, std::size_t expected) {
    if (m != expected) {
        throw ArgumentError(std::string(name) + " kernel has order " + std::to_string(expected) + ", got " +
                            std::to_string(m));
    }
}

/// Product in ascending argument order so that every permutation of the
/// arguments rounds identically.
double sorted_product(std::span<const double> args) {
    if (args.size() <= 2) {
        double p = 1.0;
        for (double x : args) p *= x;
        return p;
    }
    std::array<double, 16> small{};
    std::vector<double> big;
    std::span<double> buf;
    if (args.size() <= small.size()) {
        buf = std::span<double>(small.data(), args.size());
    } else {
        big.assign(args.begin(), args.end());
        buf = big;
    }
    std::copy(args.begin(), args.end(), buf.begin());
    std::sort(buf.begin(), buf.end());
    double p = 1.0;
    for (double x : buf) p *= x;
    return p;
}

double variance_of(const DistributionSpec& dist, const std::function<double(double)>& g) {
    return expect(dist, [&](double x) {
        const double v = g(x);
        return v * v;
    });
}

} // namespace

double evaluate_kernel(const Kernel& k, std::span<const double> args) {
    if (args.size() != k.order) {
        throw ArgumentError("kernel '" + k.name + "' expects " + std::to_string(k.order) + " arguments, got " +
                            std::to_string(args.size()));
    }
    for (double x : args) {
        if (!std::isfinite(x)) throw InputError("kernel arguments must be finite");
    }
    return k.evaluate(args);
}

double hajek_analytic(const Kernel& k, double x) {
    if (!k.has_hajek()) throw UnsupportedError("kernel '" + k.name + "' has no analytic Hajek projection");
    return k.hajek(x);
}

Estimate hajek_mc(const Kernel& k, double x, const DistributionSpec& sampler, std::size_t draws, Seed seed) {
    if (k.order < 2) throw UnsupportedError("hajek_mc needs order >= 2; use the analytic projection for m = 1");
    if (draws < 1) throw ArgumentError("hajek_mc needs draws >= 1");
    if (!std::isfinite(k.theta)) throw UnsupportedError("kernel '" + k.name + "' has no finite theta");

    Engine eng = make_engine(seed);
    std::vector<double> args(k.order);
    args[0] = x;
    const std::span<double> rest(args.data() + 1, args.size() - 1);

    CompensatedSum sum;
    // Welford on the finite replicates for the standard error.
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t finite = 0;
    Estimate est;
    est.draws = draws;
    for (std::size_t i = 0; i < draws; ++i) {
        draw_into(sampler, eng, rest);
        const double v = k.evaluate(args);
        sum.add(v);
        if (!std::isfinite(v)) {
            ++est.non_finite;
            continue;
        }
        ++finite;
        const double delta = v - mean;
        mean += delta / static_cast<double>(finite);
        m2 += delta * (v - mean);
    }
    est.value = sum.value() / static_cast<double>(draws) - k.theta;
    est.std_error = finite > 1 ? std::sqrt(m2 / static_cast<double>(finite - 1) / static_cast<double>(draws)) : kInf;
    return est;
}

namespace catalog {

std::vector<std::string> names() { return {"mean", "product", "variance", "gini", "wilcoxon"}; }

Kernel make(std::string_view name, std::size_t m) {
    if (m < 1) throw ArgumentError("kernel order must be >= 1");
    Kernel k;
    k.name = std::string(name);
    k.order = m;
    if (name == "mean") {
        require_order(name, m, 1);
        k.evaluate = [](std::span<const double> a) { return a[0]; };
    } else if (name == "product") {
        k.evaluate = sorted_product;
    } else if (name == "variance") {
        require_order(name, m, 2);
        k.evaluate = [](std::span<const double> a) {
            const double d = a[0] - a[1];
            return d * d / 2.0;
        };
    } else if (name == "gini") {
        require_order(name, m, 2);
        k.evaluate = [](std::span<const double> a) { return std::abs(a[0] - a[1]); };
    } else if (name == "wilcoxon") {
        require_order(name, m, 2);
        k.evaluate = [](std::span<const double> a) { return a[0] + a[1] > 0.0 ? 1.0 : 0.0; };
        k.bound = 1.0;
    } else {
        throw ArgumentError("unknown kernel '" + std::string(name) + "'");
    }
    return k;
}

Kernel make(std::string_view name, std::size_t m, const DistributionSpec& dist) {
    Kernel k = make(name, m);
    k.source = dist;
    const double mu = dist.mean();
    const double var = dist.variance();

    if (name == "mean" || name == "product") {
        if (std::isnan(mu)) return k;
        const double md = static_cast<double>(m);
        const double slope = m == 1 ? 1.0 : std::pow(mu, md - 1.0);
        const double theta = std::pow(mu, md);
        k.theta = theta;
        k.hajek = [slope, theta](double x) { return slope * x - theta; };
        k.hajek_affine = AffineProjection{slope, mu};
        k.hajek_variance = slope == 0.0 ? 0.0 : slope * slope * var;
        k.finite_second_moment = std::isfinite(var);
        return k;
    }

    if (name == "variance") {
        if (!std::isfinite(var)) {
            k.theta = std::isnan(var) ? var : kInf;
            k.hajek_variance = kInf;
            k.finite_second_moment = false;
            return k;
        }
        k.theta = var;
        k.hajek = [mu, var](double x) { return ((x - mu) * (x - mu) - var) / 2.0; };
        const double mu4 = dist.central_moment4();
        k.hajek_variance = (mu4 - var * var) / 4.0;
        k.finite_second_moment = std::isfinite(mu4);
        return k;
    }

    if (name == "gini") {
        if (std::isnan(mu)) return k;
        // E|x - Y| = x (2F(x) - 1) + mu - 2 E(Y; Y <= x).
        auto abs_dev = [dist, mu](double x) {
            return x * (2.0 * dist.cdf(x) - 1.0) + mu - 2.0 * dist.partial_first_moment(-kInf, x);
        };
        double theta = 0.0;
        if (dist.kind() == DistributionKind::normal) {
            theta = 2.0 * dist.param(1) / std::sqrt(std::numbers::pi);
        } else if (dist.kind() == DistributionKind::exponential) {
            theta = 1.0 / dist.param(0);
        } else {
            theta = expect(dist, abs_dev);
        }
        k.theta = theta;
        k.hajek = [abs_dev, theta](double x) { return abs_dev(x) - theta; };
        k.hajek_variance = std::isfinite(var) ? variance_of(dist, k.hajek) : kInf;
        k.finite_second_moment = std::isfinite(var);
        return k;
    }

    if (name == "wilcoxon") {
        // P(Y > -x) for continuous F.
        auto upper = [dist](double x) { return 1.0 - dist.cdf(-x); };
        double theta = 0.0;
        if (dist.kind() == DistributionKind::normal) {
            theta = 0.5 * std::erfc(-dist.param(0) / dist.param(1));
        } else if (dist.kind() == DistributionKind::student_t) {
            theta = 0.5;
        } else {
            std::vector<double> breaks;
            for (double b : dist.breakpoints()) breaks.push_back(-b);
            theta = expect(dist, upper, breaks);
        }
        k.theta = theta;
        k.hajek = [upper, theta](double x) { return upper(x) - theta; };
        std::vector<double> breaks;
        for (double b : dist.breakpoints()) breaks.push_back(-b);
        k.hajek_variance = expect(
            dist,
            [&](double x) {
                const double v = k.hajek(x);
                return v * v;
            },
            breaks);
        k.finite_second_moment = true;
        return k;
    }
    return k;
}

} // namespace catalog

} // namespace ustatbench
