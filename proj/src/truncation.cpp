#include "ustatbench/truncation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "ustatbench/errors.hpp"
#include "ustatbench/numeric.hpp"
#include "ustatbench/ustat.hpp"

namespace ustatbench {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_product_like(const Kernel& k) { return k.name == "product" || k.name == "mean"; }

/// E(Y; |Y| > s).
double tail_first_moment(const DistributionSpec& d, double s) {
    if (!(s < kInf)) return 0.0;
    return d.partial_first_moment(s, kInf) + d.partial_first_moment(-kInf, -s);
}

/// E(x Y; |x Y| > level) for the order-2 product kernel.
double product2_upper_given(const DistributionSpec& d, double level, double x) {
    if (x == 0.0) return 0.0;
    return x * tail_first_moment(d, level / std::abs(x));
}

void require_theta(const Kernel& k) {
    if (!std::isfinite(k.theta)) {
        throw UnsupportedError("kernel '" + k.name + "' has no finite theta; truncation needs E h");
    }
}

/// Welford accumulator.
struct Running {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double v) {
        ++count;
        const double d = v - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (v - mean);
    }
    [[nodiscard]] double std_error() const {
        if (count < 2) return kInf;
        return std::sqrt(m2 / static_cast<double>(count - 1) / static_cast<double>(count));
    }
};

} // namespace

double truncation_level(std::size_t n) { return std::pow(static_cast<double>(n), 1.5); }

Centerings centerings_analytic(const Kernel& k, double level) {
    require_theta(k);
    if (!(level > 0.0)) throw ArgumentError("truncation level must be positive");
    Centerings c;
    c.level = level;
    if (k.bound && *k.bound <= level) {
        c.method = CenteringMethod::bounded;
        c.upper = 0.0;
    } else if (is_product_like(k) && k.order <= 2 && k.source) {
        c.method = CenteringMethod::analytic;
        const DistributionSpec d = *k.source;
        if (!(level < kInf)) {
            c.upper = 0.0;
        } else if (k.order == 1) {
            c.upper = tail_first_moment(d, level);
        } else {
            std::vector<double> breaks{0.0};
            for (double b : d.breakpoints()) {
                if (b != 0.0) {
                    breaks.push_back(level / std::abs(b));
                    breaks.push_back(-level / std::abs(b));
                }
            }
            c.upper = expect(d, [&](double x) { return product2_upper_given(d, level, x); }, breaks);
        }
    } else {
        throw UnsupportedError("no closed-form truncated centering for kernel '" + k.name + "' of order " +
                               std::to_string(k.order));
    }
    c.lower = k.theta - c.upper;
    return c;
}

Centerings centerings_mc(const Kernel& k, const DistributionSpec& sampler, double level, std::size_t draws,
                         Seed seed) {
    require_theta(k);
    if (!(level > 0.0)) throw ArgumentError("truncation level must be positive");
    if (draws < 1) throw ArgumentError("centerings_mc needs draws >= 1");
    Engine eng = make_engine(seed);
    std::vector<double> args(k.order);
    Running acc;
    CompensatedSum sum;
    for (std::size_t i = 0; i < draws; ++i) {
        draw_into(sampler, eng, args);
        const double h = k.evaluate(args);
        const double v = std::abs(h) > level ? h : 0.0;
        sum.add(v);
        acc.add(v);
    }
    Centerings c;
    c.level = level;
    c.method = CenteringMethod::monte_carlo;
    c.draws = draws;
    c.seed = seed;
    c.upper = sum.value() / static_cast<double>(draws);
    c.std_error = acc.std_error();
    c.lower = k.theta - c.upper;
    return c;
}

Centerings compute_centerings(const Kernel& k, double level, std::size_t draws, Seed seed) {
    try {
        return centerings_analytic(k, level);
    } catch (const UnsupportedError&) {
        require_theta(k);
        if (!k.source) throw UnsupportedError("kernel '" + k.name + "' is not bound to a distribution");
        return centerings_mc(k, *k.source, level, draws, seed);
    }
}

TruncatedKernelPair truncate_kernel(const Kernel& k, std::size_t n, const Centerings& centerings,
                                    std::optional<double> level_override) {
    if (n < k.order) throw ArgumentError("truncation needs n >= m");
    const double level = level_override ? *level_override : truncation_level(n);
    if (!(level > 0.0)) throw ArgumentError("truncation level must be positive");
    if (centerings.level != level) {
        throw ArgumentError("centerings were computed for level " + std::to_string(centerings.level) + ", not " +
                            std::to_string(level));
    }
    if (!std::isfinite(centerings.lower) || !std::isfinite(centerings.upper)) {
        throw EstimationError("truncation centerings must be finite");
    }
    return {k, level, centerings};
}

TruncatedHajek truncated_hajek(const TruncatedKernelPair& pair, double x, const DistributionSpec& sampler,
                               std::size_t draws, Seed seed) {
    if (draws < 1) throw ArgumentError("truncated_hajek needs draws >= 1");
    const std::size_t m = pair.base.order;
    TruncatedHajek out;
    if (m == 1) {
        const double h = pair.base.evaluate(std::span<const double>(&x, 1));
        out.first = pair.lower_from(h);
        out.second = pair.upper_from(h);
        return out;
    }
    Engine eng = make_engine(seed);
    std::vector<double> args(m);
    args[0] = x;
    const std::span<double> rest(args.data() + 1, m - 1);
    Running lo;
    Running up;
    Running tot;
    CompensatedSum lo_sum;
    CompensatedSum up_sum;
    for (std::size_t i = 0; i < draws; ++i) {
        draw_into(sampler, eng, rest);
        const double h = pair.base.evaluate(args);
        const double a = pair.lower_from(h);
        const double b = pair.upper_from(h);
        lo_sum.add(a);
        up_sum.add(b);
        lo.add(a);
        up.add(b);
        tot.add(h);
    }
    const double dd = static_cast<double>(draws);
    out.first = lo_sum.value() / dd;
    out.second = up_sum.value() / dd;
    out.first_se = lo.std_error();
    out.second_se = up.std_error();
    out.sum_se = tot.std_error();
    return out;
}

TruncatedProjection TruncatedProjection::make(const TruncatedKernelPair& pair, const DistributionSpec& sampler,
                                              std::size_t panel_draws, Seed seed) {
    TruncatedProjection p;
    p.m_ = pair.base.order;
    if (p.m_ == 1) {
        p.first_m1_ = [pair](double x) { return pair.lower(std::span<const double>(&x, 1)); };
        p.second_ = [pair](double x) { return pair.upper(std::span<const double>(&x, 1)); };
        p.hajek_ = pair.base.hajek;
        return p;
    }
    if (!pair.base.has_hajek()) {
        throw UnsupportedError("kernel '" + pair.base.name + "' has no analytic Hajek projection");
    }
    p.hajek_ = pair.base.hajek;
    const double c2 = pair.centerings.upper;
    const double level = pair.level;
    if (pair.centerings.method == CenteringMethod::bounded || !(level < kInf)) {
        p.second_ = [c2](double) { return 0.0 - c2; };
        return p;
    }
    if (pair.base.name == "product" && p.m_ == 2 && pair.base.source && *pair.base.source == sampler) {
        const DistributionSpec d = sampler;
        p.second_ = [d, level, c2](double x) { return product2_upper_given(d, level, x) - c2; };
        return p;
    }
    if (panel_draws < 1) throw ArgumentError("projection panel needs at least one draw");
    p.exact_ = false;
    auto panel = std::make_shared<std::vector<double>>(panel_draws * (p.m_ - 1));
    Engine eng = make_engine(seed);
    draw_into(sampler, eng, *panel);
    const Kernel base = pair.base;
    const std::size_t m = p.m_;
    p.second_ = [panel, base, m, level, c2, panel_draws](double x) {
        std::vector<double> args(m);
        args[0] = x;
        CompensatedSum s;
        for (std::size_t i = 0; i < panel_draws; ++i) {
            std::copy_n(panel->begin() + static_cast<std::ptrdiff_t>(i * (m - 1)), m - 1, args.begin() + 1);
            const double h = base.evaluate(args);
            s.add(std::abs(h) > level ? h : 0.0);
        }
        return s.value() / static_cast<double>(panel_draws) - c2;
    };
    return p;
}

double TruncatedProjection::first(double x) const {
    if (m_ == 1) return first_m1_(x);
    return hajek_(x) - second_(x);
}

double TruncatedProjection::second(double x) const { return second_(x); }

KernelFn psi1(const TruncatedKernelPair& pair, const TruncatedProjection& proj) {
    return [pair, proj](std::span<const double> args) {
        double v = pair.lower(args);
        for (double x : args) v -= proj.first(x);
        return v;
    };
}

TruncationDiagnostics j_diagnostics(std::span<const double> sample, const TruncatedKernelPair& pair,
                                    std::span<const double> hajek_values, const TruncatedProjection& proj) {
    const std::size_t n = sample.size();
    const std::size_t m = pair.base.order;
    if (hajek_values.size() != n) throw ArgumentError("need one Hajek value per sample point");
    if (proj.order() != m) throw ArgumentError("projection evaluator has the wrong order");
    check_enumeration(n, m);

    // Per-point cache of both projections.
    std::vector<double> second(n);
    std::vector<double> first(n);
    for (std::size_t i = 0; i < n; ++i) {
        second[i] = proj.second(sample[i]);
        first[i] = m == 1 ? proj.first(sample[i]) : hajek_values[i] - second[i];
    }

    TruncationDiagnostics d;
    d.n = n;
    d.level = pair.level;
    const double md = static_cast<double>(m);
    CompensatedSum s2;
    for (std::size_t k = 1; k <= n; ++k) {
        s2.add(second[k - 1]);
        if (k >= m) d.j2 = std::max(d.j2, std::abs(md * s2.value()));
    }

    const double theta = pair.base.theta;
    std::vector<double> args(m);
    CompensatedSum sum_upper;
    CompensatedSum sum_psi;
    CompensatedSum sum_rem;
    CompensatedSum sum_psi2;
    for_each_prefix_subset(
        n, m,
        [&](std::span<const std::size_t> idx) {
            double proj_first = 0.0;
            double proj_full = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                args[j] = sample[idx[j]];
                proj_first += first[idx[j]];
                proj_full += hajek_values[idx[j]];
            }
            const double h = pair.base.evaluate(args);
            const double psi = pair.lower_from(h) - proj_first;
            sum_upper.add(pair.upper_from(h));
            sum_psi.add(psi);
            sum_psi2.add(psi * psi);
            sum_rem.add((h - theta) - proj_full);
        },
        [&](std::size_t k) {
            const double w = static_cast<double>(k) / binomial(k, m);
            d.j1 = std::max(d.j1, std::abs(w * sum_upper.value()));
            d.j3 = std::max(d.j3, std::abs(w * sum_psi.value()));
            d.remainder = std::max(d.remainder, std::abs(w * sum_rem.value()));
        });
    d.psi_second_moment = sum_psi2.value() / binomial(n, m);

    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    d.j1 *= scale;
    d.j2 *= scale;
    d.j3 *= scale;
    d.remainder *= scale;
    return d;
}

MomentConditionReport moment_condition_estimate(const Kernel& k, const DistributionSpec& sampler,
                                                 std::size_t draws, Seed seed) {
    if (draws < 1000) throw ArgumentError("moment_condition_estimate needs draws >= 1000");
    MomentConditionReport r;
    Engine eng = make_engine(seed);
    std::vector<double> args(k.order);
    CompensatedSum sum;
    std::size_t next = 1000;
    for (std::size_t i = 1; i <= draws; ++i) {
        draw_into(sampler, eng, args);
        const double a = std::abs(k.evaluate(args));
        sum.add(a == 0.0 ? 0.0 : std::pow(a, 4.0 / 3.0) * std::log(a));
        if (i == next || i == draws) {
            r.checkpoints.push_back(i);
            r.means.push_back(sum.value() / static_cast<double>(i));
            next *= 2;
        }
    }
    r.estimate = r.means.back();
    if (r.means.size() >= 2) {
        const double last = r.means.back();
        const double prev = r.means[r.means.size() - 2];
        const double scale = std::max(std::abs(last), std::abs(prev));
        r.stable = std::isfinite(last) && std::isfinite(prev) && (scale == 0.0 || std::abs(last - prev) < 0.05 * scale);
    }
    return r;
}

} // namespace ustatbench
