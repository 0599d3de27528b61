#include "ustatbench/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "quadrature.hpp"
#include "ustatbench/errors.hpp"
#include "ustatbench/io.hpp"

namespace ustatbench {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double Phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Q(1 - q), evaluated without forming 1 - q.
double upper_quantile(const DistributionSpec& d, double q) {
    switch (d.kind()) {
    case DistributionKind::example_pareto:
        return d.param(0) + 1.0 / std::sqrt(2.0 * q);
    case DistributionKind::normal:
        return d.param(0) - d.param(1) * boost::math::quantile(boost::math::normal_distribution<>(), q);
    case DistributionKind::exponential:
        return -std::log(q) / d.param(0);
    case DistributionKind::student_t:
        return -boost::math::quantile(boost::math::students_t_distribution<>(d.param(0)), q);
    }
    return kNaN;
}

/// P(X > x).
double survival(const DistributionSpec& d, double x) {
    switch (d.kind()) {
    case DistributionKind::example_pareto: {
        const double s = x - d.param(0);
        if (s >= 1.0) return 0.5 / (s * s);
        if (s > -1.0) return 0.5;
        return 1.0 - 0.5 / (s * s);
    }
    case DistributionKind::normal:
        return Phi(-(x - d.param(0)) / d.param(1));
    case DistributionKind::exponential:
        return x <= 0.0 ? 1.0 : std::exp(-d.param(0) * x);
    case DistributionKind::student_t:
        return boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<>(d.param(0)), x));
    }
    return kNaN;
}

/// Integral of x * |x - a|^{-3} over (lo, hi] restricted to |x - a| >= 1.
double pareto_partial_first_moment(double a, double lo, double hi) {
    // Right branch u = x - a in [1, inf): antiderivative -a/(2u^2) - 1/u.
    // Left branch u in (-inf, -1]: antiderivative a/(2u^2) + 1/u.
    auto right = [a](double u) { return std::isinf(u) ? 0.0 : -a / (2.0 * u * u) - 1.0 / u; };
    auto left = [a](double u) { return std::isinf(u) ? 0.0 : a / (2.0 * u * u) + 1.0 / u; };
    const double ulo = lo - a;
    const double uhi = hi - a;
    double total = 0.0;
    {
        const double l = std::max(ulo, 1.0);
        const double h = uhi;
        if (h > l) total += right(h) - right(l);
    }
    {
        const double l = ulo;
        const double h = std::min(uhi, -1.0);
        if (h > l) total += left(h) - left(l);
    }
    return total;
}

void check_unit(double u) {
    if (!(u > 0.0 && u < 1.0)) throw ArgumentError("quantile argument must lie in (0, 1)");
}

} // namespace

DistributionSpec DistributionSpec::example_pareto(double a) {
    if (!std::isfinite(a) || a == 0.0) throw ArgumentError("example-pareto requires a finite a != 0");
    return {DistributionKind::example_pareto, {a}};
}

DistributionSpec DistributionSpec::normal(double mean, double sd) {
    if (!std::isfinite(mean) || !std::isfinite(sd) || sd <= 0.0) {
        throw ArgumentError("normal requires finite mean and sd > 0");
    }
    return {DistributionKind::normal, {mean, sd}};
}

DistributionSpec DistributionSpec::exponential(double rate) {
    if (!std::isfinite(rate) || rate <= 0.0) throw ArgumentError("exponential requires rate > 0");
    return {DistributionKind::exponential, {rate}};
}

DistributionSpec DistributionSpec::student_t(double df) {
    if (!std::isfinite(df) || df <= 0.0) throw ArgumentError("student-t requires df > 0");
    return {DistributionKind::student_t, {df}};
}

DistributionSpec DistributionSpec::parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string kind;
    in >> kind;
    std::map<std::string, double, std::less<>> kv;
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ArgumentError("expected key=value in distribution text, got '" + tok + "'");
        }
        const std::string key = tok.substr(0, eq);
        kv[key] = parse_double(std::string_view(tok).substr(eq + 1), key);
    }
    auto take = [&](std::string_view key, std::optional<double> fallback) {
        auto it = kv.find(key);
        if (it == kv.end()) {
            if (!fallback) throw ArgumentError(kind + " requires parameter '" + std::string(key) + "'");
            return *fallback;
        }
        const double v = it->second;
        kv.erase(it);
        return v;
    };
    std::optional<DistributionSpec> out;
    if (kind == "example-pareto") {
        out = example_pareto(take("a", std::nullopt));
    } else if (kind == "normal") {
        const double mean = take("mean", 0.0);
        out = normal(mean, take("sd", 1.0));
    } else if (kind == "exponential") {
        out = exponential(take("rate", 1.0));
    } else if (kind == "student-t") {
        out = student_t(take("df", std::nullopt));
    } else {
        throw ArgumentError("unknown distribution '" + kind + "'");
    }
    if (!kv.empty()) throw ArgumentError("unknown parameter '" + kv.begin()->first + "' for " + kind);
    return *out;
}

std::string DistributionSpec::name() const {
    switch (kind_) {
    case DistributionKind::example_pareto: return "example-pareto";
    case DistributionKind::normal: return "normal";
    case DistributionKind::exponential: return "exponential";
    case DistributionKind::student_t: return "student-t";
    }
    return "?";
}

std::string DistributionSpec::to_string() const {
    switch (kind_) {
    case DistributionKind::example_pareto: return "example-pareto a=" + format_double(params_[0]);
    case DistributionKind::normal:
        return "normal mean=" + format_double(params_[0]) + " sd=" + format_double(params_[1]);
    case DistributionKind::exponential: return "exponential rate=" + format_double(params_[0]);
    case DistributionKind::student_t: return "student-t df=" + format_double(params_[0]);
    }
    return "?";
}

double DistributionSpec::pdf(double x) const {
    switch (kind_) {
    case DistributionKind::example_pareto: {
        const double s = std::abs(x - params_[0]);
        return s >= 1.0 ? 1.0 / (s * s * s) : 0.0;
    }
    case DistributionKind::normal: return phi((x - params_[0]) / params_[1]) / params_[1];
    case DistributionKind::exponential: return x < 0.0 ? 0.0 : params_[0] * std::exp(-params_[0] * x);
    case DistributionKind::student_t:
        return boost::math::pdf(boost::math::students_t_distribution<>(params_[0]), x);
    }
    return kNaN;
}

double DistributionSpec::cdf(double x) const {
    switch (kind_) {
    case DistributionKind::example_pareto: {
        const double s = x - params_[0];
        if (s <= -1.0) return 0.5 / (s * s);
        if (s < 1.0) return 0.5;
        return 1.0 - 0.5 / (s * s);
    }
    case DistributionKind::normal: return Phi((x - params_[0]) / params_[1]);
    case DistributionKind::exponential: return x <= 0.0 ? 0.0 : -std::expm1(-params_[0] * x);
    case DistributionKind::student_t:
        return boost::math::cdf(boost::math::students_t_distribution<>(params_[0]), x);
    }
    return kNaN;
}

double DistributionSpec::quantile(double u) const {
    check_unit(u);
    switch (kind_) {
    case DistributionKind::example_pareto:
        if (u < 0.5) return params_[0] - 1.0 / std::sqrt(2.0 * u);
        return params_[0] + 1.0 / std::sqrt(2.0 * (1.0 - u));
    case DistributionKind::normal:
        return params_[0] + params_[1] * boost::math::quantile(boost::math::normal_distribution<>(), u);
    case DistributionKind::exponential: return -std::log1p(-u) / params_[0];
    case DistributionKind::student_t:
        return boost::math::quantile(boost::math::students_t_distribution<>(params_[0]), u);
    }
    return kNaN;
}

double DistributionSpec::mean() const {
    switch (kind_) {
    case DistributionKind::example_pareto: return params_[0];
    case DistributionKind::normal: return params_[0];
    case DistributionKind::exponential: return 1.0 / params_[0];
    case DistributionKind::student_t: return params_[0] > 1.0 ? 0.0 : kNaN;
    }
    return kNaN;
}

double DistributionSpec::variance() const {
    switch (kind_) {
    case DistributionKind::example_pareto: return kInf;
    case DistributionKind::normal: return params_[1] * params_[1];
    case DistributionKind::exponential: return 1.0 / (params_[0] * params_[0]);
    case DistributionKind::student_t: {
        const double df = params_[0];
        if (df > 2.0) return df / (df - 2.0);
        return df > 1.0 ? kInf : kNaN;
    }
    }
    return kNaN;
}

double DistributionSpec::central_moment4() const {
    switch (kind_) {
    case DistributionKind::example_pareto: return kInf;
    case DistributionKind::normal: return 3.0 * std::pow(params_[1], 4);
    case DistributionKind::exponential: return 9.0 / std::pow(params_[0], 4);
    case DistributionKind::student_t: {
        const double df = params_[0];
        if (df > 4.0) return 3.0 * df * df / ((df - 2.0) * (df - 4.0));
        return df > 1.0 ? kInf : kNaN;
    }
    }
    return kNaN;
}

double DistributionSpec::truncated_second_moment(double center, double t) const {
    if (std::isnan(t) || t < 0.0 || !std::isfinite(center)) {
        throw ArgumentError("truncated_second_moment requires finite center and t >= 0");
    }
    if (kind_ == DistributionKind::example_pareto && center == params_[0]) {
        return t < 1.0 ? 0.0 : 2.0 * std::log(t);
    }
    if (kind_ == DistributionKind::normal) {
        const double sd = params_[1];
        const double d = params_[0] - center;
        if (std::isinf(t)) return d * d + sd * sd;
        const double alpha = (-t - d) / sd;
        const double beta = (t - d) / sd;
        const double mass = Phi(beta) - Phi(alpha);
        return d * d * mass + 2.0 * d * sd * (phi(alpha) - phi(beta)) +
               sd * sd * (mass + alpha * phi(alpha) - beta * phi(beta));
    }
    if (std::isinf(t)) {
        const double mu = mean();
        const double var = variance();
        if (!std::isfinite(var)) return var;
        return var + (mu - center) * (mu - center);
    }
    // Quadrature fallback over [center - t, center + t], split where the
    // density is not smooth.
    std::vector<double> cuts{center - t, center + t};
    for (double b : breakpoints()) {
        if (b > center - t && b < center + t) cuts.push_back(b);
    }
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        total += quad::smooth([&](double x) { return (x - center) * (x - center) * pdf(x); }, cuts[i], cuts[i + 1]);
    }
    return total;
}

double DistributionSpec::partial_first_moment(double lo, double hi) const {
    if (std::isnan(lo) || std::isnan(hi)) throw ArgumentError("partial_first_moment bounds must not be NaN");
    if (!(hi > lo)) return 0.0;
    switch (kind_) {
    case DistributionKind::example_pareto: return pareto_partial_first_moment(params_[0], lo, hi);
    case DistributionKind::normal: {
        const double mu = params_[0];
        const double sd = params_[1];
        const double alpha = (lo - mu) / sd;
        const double beta = (hi - mu) / sd;
        const double pa = std::isinf(alpha) ? 0.0 : phi(alpha);
        const double pb = std::isinf(beta) ? 0.0 : phi(beta);
        return mu * (Phi(beta) - Phi(alpha)) + sd * (pa - pb);
    }
    case DistributionKind::exponential: {
        const double rate = params_[0];
        const double l = std::max(lo, 0.0);
        if (!(hi > l)) return 0.0;
        auto anti = [rate](double x) { return std::isinf(x) ? 0.0 : -(x + 1.0 / rate) * std::exp(-rate * x); };
        return anti(hi) - anti(l);
    }
    case DistributionKind::student_t: {
        if (!(params_[0] > 1.0)) return kNaN;
        return quad::smooth([this](double x) { return x * pdf(x); }, lo, hi);
    }
    }
    return kNaN;
}

std::vector<double> DistributionSpec::breakpoints() const {
    switch (kind_) {
    case DistributionKind::example_pareto: return {params_[0] - 1.0, params_[0] + 1.0};
    case DistributionKind::exponential: return {0.0};
    default: return {};
    }
}

void draw_into(const DistributionSpec& d, Engine& eng, std::span<double> out) {
    switch (d.kind()) {
    case DistributionKind::example_pareto: {
        const double a = d.param(0);
        for (double& x : out) {
            const double u = uniform_open(eng);
            x = u < 0.5 ? a - 1.0 / std::sqrt(2.0 * u) : a + 1.0 / std::sqrt(2.0 * (1.0 - u));
        }
        return;
    }
    case DistributionKind::normal: {
        std::normal_distribution<double> nd(d.param(0), d.param(1));
        for (double& x : out) x = nd(eng);
        return;
    }
    case DistributionKind::exponential: {
        const double rate = d.param(0);
        for (double& x : out) x = -std::log(uniform_open(eng)) / rate;
        return;
    }
    case DistributionKind::student_t: {
        std::student_t_distribution<double> td(d.param(0));
        for (double& x : out) x = td(eng);
        return;
    }
    }
}

double DistributionSpec::draw(Engine& eng) const {
    double x = 0.0;
    draw_into(*this, eng, std::span<double>(&x, 1));
    return x;
}

std::vector<double> sample(const DistributionSpec& dist, std::size_t n, Seed seed) {
    if (n == 0) throw ArgumentError("sample size must be >= 1");
    std::vector<double> out(n);
    Engine eng = make_engine(seed);
    draw_into(dist, eng, out);
    return out;
}

double truncated_second_moment(const DistributionSpec& dist, double center, double t) {
    return dist.truncated_second_moment(center, t);
}

namespace {

/// Quantile-domain split: u in (0, 1/2] integrated directly, u in [1/2, 1)
/// via v = 1 - u with the upper-tail quantile so neither tail loses digits.
struct HalfBreaks {
    std::vector<double> lower; // u coordinates in (0, 1/2)
    std::vector<double> upper; // v coordinates in (0, 1/2)
};

void add_break(const DistributionSpec& d, double x, HalfBreaks& hb) {
    if (!std::isfinite(x)) return;
    const double p = d.cdf(x);
    const double q = survival(d, x);
    if (p > 0.0 && p < 0.5) hb.lower.push_back(p);
    if (q > 0.0 && q < 0.5) hb.upper.push_back(q);
}

double integrate_halves(const DistributionSpec& d, const std::function<double(double)>& g, HalfBreaks hb) {
    auto integrate_half = [](std::vector<double> cuts, const std::function<double(double)>& f) {
        cuts.push_back(0.0);
        cuts.push_back(0.5);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += quad::endpoint_singular(f, cuts[i], cuts[i + 1]);
        return total;
    };
    const double lo = integrate_half(std::move(hb.lower), [&](double u) { return g(d.quantile(u)); });
    const double hi = integrate_half(std::move(hb.upper), [&](double v) { return g(upper_quantile(d, v)); });
    return lo + hi;
}

} // namespace

double expect(const DistributionSpec& dist, const std::function<double(double)>& g, std::span<const double> x_breaks) {
    HalfBreaks hb;
    for (double b : dist.breakpoints()) add_break(dist, b, hb);
    for (double b : x_breaks) add_break(dist, b, hb);
    return integrate_halves(dist, g, std::move(hb));
}

TruncatedVariance affine_truncated_variance(const DistributionSpec& dist, double slope, double center) {
    if (!std::isfinite(slope) || !std::isfinite(center)) throw ArgumentError("affine projection must be finite");
    return [dist, slope, center](double b) {
        if (slope == 0.0) return 0.0;
        return slope * slope * dist.truncated_second_moment(center, b / std::abs(slope));
    };
}

TruncatedVariance numeric_truncated_variance(const DistributionSpec& dist, std::function<double(double)> g) {
    // Geometric grid toward each tail: u = 2^{-j/8} / 2 down to ~1e-300.
    constexpr int kSteps = 8 * 995;
    std::vector<double> grid(kSteps + 1);
    for (int j = 0; j <= kSteps; ++j) grid[j] = 0.5 * std::exp2(-j / 8.0);
    return [dist, g = std::move(g), grid = std::move(grid)](double b) {
        if (b <= 0.0) return 0.0;
        auto inside = [&](double x) { return std::abs(g(x)) <= b; };
        auto edges = [&](auto&& xq) {
            std::vector<double> cuts;
            bool prev = inside(xq(grid[0]));
            for (std::size_t j = 1; j < grid.size(); ++j) {
                const bool cur = inside(xq(grid[j]));
                if (cur != prev) {
                    double hi = grid[j - 1];
                    double lo = grid[j];
                    for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
                        const double mid = 0.5 * (lo + hi);
                        (inside(xq(mid)) == cur ? lo : hi) = mid;
                    }
                    cuts.push_back(0.5 * (lo + hi));
                }
                prev = cur;
            }
            return cuts;
        };
        HalfBreaks hb;
        hb.lower = edges([&](double u) { return dist.quantile(u); });
        hb.upper = edges([&](double v) { return upper_quantile(dist, v); });
        for (double x : dist.breakpoints()) add_break(dist, x, hb);
        return integrate_halves(
            dist,
            [&](double x) {
                const double v = g(x);
                return std::abs(v) <= b ? v * v : 0.0;
            },
            std::move(hb));
    };
}

double estimate_bn(const TruncatedVariance& tv, std::size_t n) {
    if (n < 2) throw ArgumentError("estimate_bn requires n >= 2");
    const double nn = static_cast<double>(n);
    auto above = [&](double b) { return nn * tv(b) > b * b; };

    double hi = std::sqrt(nn);
    double lo = 0.0;
    if (!above(hi)) {
        // A crossing can still sit above sqrt(n) when mass of g sits far out.
        for (double b = 2.0 * hi, top = hi * 0x1.0p64; b <= top; b *= 2.0) {
            if (above(b)) {
                hi = b;
                break;
            }
        }
    }
    if (above(hi)) {
        lo = hi;
        for (int i = 0; i < 2000 && above(hi); ++i) {
            lo = hi;
            hi *= 2.0;
        }
        if (above(hi)) throw EstimationError("estimate_bn: no upper bracket (truncated variance grows too fast)");
    } else {
        bool found = false;
        for (int i = 0; i < 2200; ++i) {
            lo = hi * 0.5;
            if (lo < 1e-300) break;
            if (above(lo)) {
                found = true;
                break;
            }
            hi = lo;
        }
        if (!found) throw DegenerateError("estimate_bn: truncated variance vanishes identically");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (above(mid) ? lo : hi) = mid;
    }
    return hi;
}

std::vector<double> wiener_path(std::size_t n, Seed seed) {
    if (n == 0) throw ArgumentError("wiener_path requires n >= 1");
    std::vector<double> w(n + 1);
    Engine eng = make_engine(seed);
    std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
    w[0] = 0.0;
    for (std::size_t k = 1; k <= n; ++k) w[k] = w[k - 1] + nd(eng);
    return w;
}

double sup_abs_wiener_cdf(double x) {
    if (!(x > 0.0)) throw ArgumentError("sup_abs_wiener_cdf requires x > 0");
    // Beyond x = 8 the complement is below 4 P(N > 8) < 1e-14.
    if (x >= 8.0) return 1.0;
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * x * x);
    double total = 0.0;
    for (long k = 0;; ++k) {
        const double odd = static_cast<double>(2 * k + 1);
        const double term = std::exp(-c * odd * odd) / odd;
        total += (k % 2 == 0) ? term : -term;
        if (term < 1e-12 * std::numbers::pi / 4.0) break;
    }
    return std::clamp(4.0 / std::numbers::pi * total, 0.0, 1.0);
}

} // namespace ustatbench
