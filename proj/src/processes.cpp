#include "ustatbench/processes.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "ustatbench/errors.hpp"
#include "ustatbench/io.hpp"
#include "ustatbench/numeric.hpp"

namespace ustatbench {

namespace {

NormalizedProcessPath scaled_u_path(const PrefixUPath& path, double norm, double theta, PathStyle style,
                                    NormalizerKind kind) {
    if (!std::isfinite(theta)) throw ArgumentError("theta must be finite");
    if (path.values.size() != path.n - path.m + 1) throw ArgumentError("prefix path is incomplete");
    NormalizedProcessPath out;
    out.n = path.n;
    out.m = path.m;
    out.style = style;
    out.normalizer_kind = kind;
    out.normalizer = norm;
    out.values.assign(path.n + 1, 0.0);
    const double md = static_cast<double>(path.m);
    for (std::size_t k = path.m; k <= path.n; ++k) {
        out.values[k] = static_cast<double>(k) / md * (path.at(k) - theta) / norm;
    }
    return out;
}

void check_same_grid(const NormalizedProcessPath& a, const NormalizedProcessPath& b) {
    if (a.n != b.n || a.values.size() != b.values.size()) {
        throw ArgumentError("paths live on different grids (n = " + std::to_string(a.n) + " vs " +
                            std::to_string(b.n) + ")");
    }
}

/// Limit of the path as t increases to k/n, for k >= 1.
double left_limit(const NormalizedProcessPath& p, std::size_t k) {
    return p.style == PathStyle::step ? p.values[k - 1] : p.values[k];
}

} // namespace

std::vector<double> NormalizedProcessPath::times() const {
    std::vector<double> t(n + 1);
    for (std::size_t k = 0; k <= n; ++k) t[k] = time(k);
    return t;
}

double NormalizedProcessPath::value_at(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("t must lie in [0, 1]");
    const double s = t * static_cast<double>(n);
    // Snap t = k/n, which may round to just below k after scaling.
    const double nearest = std::round(s);
    const bool on_grid = std::abs(s - nearest) <= 1e-9;
    const auto k = static_cast<std::size_t>(on_grid ? nearest : std::floor(s));
    if (k >= n) return values[n];
    if (style == PathStyle::step || on_grid) return values[k];
    const double frac = s - static_cast<double>(k);
    return values[k] + frac * (values[k + 1] - values[k]);
}

double NormalizedProcessPath::sup_abs() const {
    double best = 0.0;
    for (double v : values) best = std::max(best, std::abs(v));
    return best;
}

void NormalizedProcessPath::write_csv(std::ostream& out) const {
    out << "t,value\n";
    for (std::size_t k = 0; k <= n; ++k) out << format_double(time(k)) << ',' << format_double(values[k]) << '\n';
}

SelfNormalizer SelfNormalizer::from(std::span<const double> hajek_values) {
    CompensatedSum s;
    for (double h : hajek_values) {
        if (!std::isfinite(h)) throw InputError("Hajek values must be finite");
        s.add(h * h);
    }
    return {s.value(), hajek_values.size()};
}

double SelfNormalizer::vn() const { return std::sqrt(vn2); }

NormalizedProcessPath build_self_normalized_process(const PrefixUPath& path, std::span<const double> hajek_values,
                                                    double theta) {
    if (hajek_values.size() != path.n) {
        throw ArgumentError("expected " + std::to_string(path.n) + " Hajek values, got " +
                            std::to_string(hajek_values.size()));
    }
    const auto sn = SelfNormalizer::from(hajek_values);
    if (!(sn.vn2 > 0.0)) throw DegenerateError("V_n^2 = 0: the Hajek projection vanishes on this sample");
    return scaled_u_path(path, sn.vn(), theta, PathStyle::step, NormalizerKind::self);
}

NormalizedProcessPath build_scalar_normalized_process(const PrefixUPath& path, double bn, double theta) {
    if (!(bn > 0.0) || !std::isfinite(bn)) throw ArgumentError("B_n must be positive and finite");
    return scaled_u_path(path, bn, theta, PathStyle::step, NormalizerKind::scalar);
}

NormalizedProcessPath build_miller_sen_process(const PrefixUPath& path, double var_h1, double theta) {
    if (!(var_h1 > 0.0) || !std::isfinite(var_h1)) {
        throw ArgumentError("Var h~1 must be positive and finite");
    }
    const double norm = std::sqrt(static_cast<double>(path.n) * var_h1);
    return scaled_u_path(path, norm, theta, PathStyle::piecewise_linear, NormalizerKind::miller_sen);
}

NormalizedProcessPath partial_sum_path(std::span<const double> hajek_values, double normalizer,
                                       NormalizerKind kind) {
    if (!(normalizer > 0.0) || !std::isfinite(normalizer)) {
        throw ArgumentError("normalizer must be positive and finite");
    }
    NormalizedProcessPath out;
    out.n = hajek_values.size();
    out.m = 1;
    out.style = PathStyle::step;
    out.normalizer_kind = kind;
    out.normalizer = normalizer;
    out.values.assign(out.n + 1, 0.0);
    CompensatedSum s;
    for (std::size_t k = 1; k <= out.n; ++k) {
        s.add(hajek_values[k - 1]);
        out.values[k] = s.value() / normalizer;
    }
    return out;
}

double sup_distance(const NormalizedProcessPath& a, const NormalizedProcessPath& b) {
    check_same_grid(a, b);
    double best = 0.0;
    for (std::size_t k = 0; k <= a.n; ++k) best = std::max(best, std::abs(a.values[k] - b.values[k]));
    if (a.style == PathStyle::step && b.style == PathStyle::step) return best;
    // With a linear path in the mix the difference is linear on each cell, so
    // the sup over a cell is at its left end or at the limit from the left of
    // its right end.
    for (std::size_t k = 1; k <= a.n; ++k) best = std::max(best, std::abs(left_limit(a, k) - left_limit(b, k)));
    return best;
}

double sup_distance_over(const NormalizedProcessPath& a, const NormalizedProcessPath& b,
                         std::span<const double> times) {
    check_same_grid(a, b);
    double best = 0.0;
    for (double t : times) best = std::max(best, std::abs(a.value_at(t) - b.value_at(t)));
    return best;
}

} // namespace ustatbench
