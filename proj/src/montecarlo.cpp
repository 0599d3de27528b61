#include "ustatbench/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ustatbench/errors.hpp"
#include "ustatbench/hash.hpp"
#include "ustatbench/io.hpp"
#include "ustatbench/numeric.hpp"
#include "ustatbench/processes.hpp"
#include "ustatbench/truncation.hpp"

#ifndef USTATBENCH_VERSION
#define USTATBENCH_VERSION "0.0.0"
#endif

namespace ustatbench {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kAuxStream = ~std::uint64_t{0};
constexpr std::uint64_t kCenteringTag = 0x63656e7465720000ULL;
constexpr std::uint64_t kPanelTag = 0x70616e656c000000ULL;

/// Grid index [n t], robust to t = k/n rounding just below k after scaling.
std::size_t grid_index(double t, std::size_t n) {
    const double s = t * static_cast<double>(n);
    const double nearest = std::round(s);
    if (std::abs(s - nearest) <= 1e-9) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::floor(s));
}

std::string join_sizes(const std::vector<std::size_t>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
    return out;
}

double phi_cdf(double x, double var) { return 0.5 * std::erfc(-x / std::sqrt(2.0 * var)); }

double sup_wiener_cdf_safe(double x) { return x > 0.0 ? sup_abs_wiener_cdf(x) : 0.0; }

/// Sample variance with n - 1 in the denominator, two-pass and compensated.
double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) return kNaN;
    CompensatedSum s;
    for (double x : xs) s.add(x);
    const double mean = s.value() / static_cast<double>(xs.size());
    CompensatedSum q;
    for (double x : xs) q.add((x - mean) * (x - mean));
    return q.value() / static_cast<double>(xs.size() - 1);
}

double sample_mean(const std::vector<double>& xs) {
    if (xs.empty()) return kNaN;
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value() / static_cast<double>(xs.size());
}

/// Linear interpolation between order statistics (NaN entries dropped).
double quantile(std::vector<double> xs, double p) {
    std::erase_if(xs, [](double x) { return std::isnan(x); });
    if (xs.empty()) return kNaN;
    std::sort(xs.begin(), xs.end());
    const double pos = p * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

double max_of(const std::vector<double>& xs) {
    double best = kNaN;
    for (double x : xs) {
        if (std::isfinite(x) && !(x <= best)) best = x;
    }
    return best;
}

double ks_or_nan(const std::vector<double>& xs, const std::function<double(double)>& cdf) {
    try {
        return ks_distance(xs, cdf).distance;
    } catch (const ArgumentError&) {
        return kNaN;
    }
}

/// Runs f(i) for i in [0, count) on `workers` threads. Each index is owned by
/// exactly one call, so results written by index do not depend on scheduling.
/// The exception of the lowest failing index is rethrown.
template <class F>
void parallel_for(std::size_t count, std::size_t workers, F&& f) {
    std::vector<std::exception_ptr> errors(count);
    auto run = [&](std::size_t i) {
        try {
            f(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const std::size_t threads = std::min(workers, count);
        pool.reserve(threads);
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) run(i);
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// Everything a replication needs that depends only on (config, n).
struct NContext {
    std::size_t n = 0;
    double bn = kNaN;
    std::optional<TruncatedKernelPair> pair;
    std::optional<TruncatedProjection> proj;
};

using RowFn = std::function<std::vector<double>(const NContext&, std::span<const double>, bool&)>;

McReport run_rows(const ExperimentConfig& cfg, std::vector<std::string> columns, const std::vector<NContext>& contexts,
                  const RowFn& row_fn) {
    McReport report;
    report.kind = cfg.kind;
    report.columns = std::move(columns);
    const std::size_t reps = cfg.replications;
    report.rows.resize(contexts.size() * reps);
    parallel_for(report.rows.size(), cfg.workers, [&](std::size_t idx) {
        const NContext& ctx = contexts[idx / reps];
        const std::size_t stream = idx % reps;
        // Same stream for every n: the n-sample is a prefix of the larger ones.
        const auto xs = sample(cfg.distribution, ctx.n, Seed{cfg.seed, stream});
        McRow row;
        row.n = ctx.n;
        row.stream = stream;
        row.values = row_fn(ctx, xs, row.flagged);
        for (double v : row.values) {
            if (std::isinf(v)) row.flagged = true;
        }
        report.rows[idx] = std::move(row);
    });

    for (const auto& ctx : contexts) {
        std::size_t flagged = 0;
        for (const auto& r : report.rows) flagged += (r.n == ctx.n && r.flagged) ? 1 : 0;
        if (static_cast<double>(flagged) > 0.01 * static_cast<double>(reps)) {
            throw ExperimentError(std::to_string(flagged) + " of " + std::to_string(reps) +
                                  " replications at n = " + std::to_string(ctx.n) +
                                  " were flagged (degenerate V_n or non-finite statistics); the limit is 1%");
        }
    }
    report.aggregates = compute_aggregates(cfg.kind, report.columns, report.rows);
    return report;
}

std::vector<double> hajek_values(const Kernel& k, std::span<const double> xs) {
    std::vector<double> h(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) h[i] = k.hajek(xs[i]);
    return h;
}

void require_hajek(const Kernel& k, const ExperimentConfig& cfg) {
    if (!std::isfinite(k.theta) || !k.has_hajek()) {
        throw ConfigError(experiment_name(cfg.kind) + " needs a finite theta and a closed-form Hajek projection; '" +
                          k.name + "' under " + cfg.distribution.to_string() + " has none");
    }
}

std::vector<NContext> plain_contexts(const ExperimentConfig& cfg, const Kernel& k, bool with_bn) {
    std::vector<NContext> out;
    for (std::size_t n : cfg.n_values) {
        NContext c;
        c.n = n;
        if (with_bn) c.bn = normalizer_bn(k, n, cfg.bn_method);
        out.push_back(std::move(c));
    }
    return out;
}

/// Columns and row values shared by clt and fclt.
McReport run_path_statistics(const ExperimentConfig& cfg, bool with_sup) {
    cfg.validate();
    const Kernel k = cfg.bound_kernel();
    require_hajek(k, cfg);
    const bool scalar = cfg.normalizer == NormalizerMode::scalar;
    std::vector<std::string> cols{"vn2"};
    if (scalar) cols.push_back("bn");
    cols.push_back("terminal");
    for (double t : cfg.t0) cols.push_back("t0_" + t0_label(t));
    if (with_sup) cols.push_back("sup_abs");

    const auto contexts = plain_contexts(cfg, k, scalar);
    return run_rows(cfg, cols, contexts, [&](const NContext& ctx, std::span<const double> xs, bool& flagged) {
        std::vector<double> v;
        const auto h = hajek_values(k, xs);
        const double vn2 = SelfNormalizer::from(h).vn2;
        v.push_back(vn2);
        if (scalar) v.push_back(ctx.bn);
        if (!scalar && !(vn2 > 0.0)) {
            flagged = true;
            v.resize(cols.size(), kNaN);
            return v;
        }
        const auto u = prefix_u_path(k, xs, cfg.accumulation);
        const auto path = scalar ? build_scalar_normalized_process(u, ctx.bn, k.theta)
                                 : build_self_normalized_process(u, h, k.theta);
        v.push_back(path.values[ctx.n]);
        for (double t : cfg.t0) v.push_back(path.values[grid_index(t, ctx.n)]);
        if (with_sup) v.push_back(path.sup_abs());
        return v;
    });
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

} // namespace

std::string experiment_name(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::clt: return "clt";
    case ExperimentKind::fclt: return "fclt";
    case ExperimentKind::thm3: return "thm3";
    case ExperimentKind::miller_sen: return "miller-sen";
    case ExperimentKind::decompose: return "decompose";
    }
    return "?";
}

ExperimentKind parse_experiment(std::string_view name) {
    for (auto k : {ExperimentKind::clt, ExperimentKind::fclt, ExperimentKind::thm3, ExperimentKind::miller_sen,
                   ExperimentKind::decompose}) {
        if (experiment_name(k) == name) return k;
    }
    throw ConfigError("unknown experiment '" + std::string(name) + "' (expected clt, fclt, thm3, miller-sen, decompose)");
}

void ExperimentConfig::validate() const {
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (n_values.empty()) throw ConfigError("at least one n is required");
    for (std::size_t n : n_values) {
        if (n < m || n < 2) throw ConfigError("every n must satisfy n >= max(m, 2); got n = " + std::to_string(n));
    }
    if (t0.empty()) throw ConfigError("at least one t0 is required");
    for (double t : t0) {
        if (!(t > 0.0 && t <= 1.0)) throw ConfigError("t0 values must lie in (0, 1]; got " + format_double(t));
    }
    if (level_override && !(*level_override > 0.0)) throw ConfigError("truncation level must be positive");
    if (centering_draws < 1 || panel_draws < 1) throw ConfigError("Monte Carlo draw counts must be >= 1");
    try {
        (void)catalog::make(kernel, m);
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
    if (kind == ExperimentKind::decompose) {
        for (std::size_t n : n_values) {
            try {
                check_enumeration(n, m);
            } catch (const ResourceError& e) {
                throw ConfigError(std::string("decompose enumerates every m-subset: ") + e.what());
            }
        }
    }
}

Kernel ExperimentConfig::bound_kernel() const {
    try {
        return catalog::make(kernel, m, distribution);
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
}

std::map<std::string, std::string> ExperimentConfig::echo() const {
    std::map<std::string, std::string> e;
    e["experiment"] = experiment_name(kind);
    e["kernel"] = kernel;
    e["m"] = std::to_string(m);
    e["distribution"] = distribution.to_string();
    e["n"] = join_sizes(n_values);
    std::string ts;
    for (std::size_t i = 0; i < t0.size(); ++i) ts += (i ? "," : "") + t0_label(t0[i]);
    e["t0"] = ts;
    e["replications"] = std::to_string(replications);
    e["seed"] = std::to_string(seed);
    e["normalizer"] = normalizer == NormalizerMode::self ? "self" : "scalar";
    e["bn"] = bn_method == BnMethod::fixed_point ? "fixed-point" : "analytic";
    e["level"] = level_override ? format_double(*level_override) : "n^1.5";
    e["centering_draws"] = std::to_string(centering_draws);
    e["panel_draws"] = std::to_string(panel_draws);
    e["accumulation"] = accumulation == Accumulation::compensated ? "compensated" : "extended";
    return e;
}

std::size_t McReport::column(std::string_view name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ArgumentError("no column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> McReport::values(std::size_t n, std::string_view name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    for (const auto& r : rows) {
        if (r.n == n && !r.flagged) out.push_back(r.values[c]);
    }
    return out;
}

KsResult ks_distance(std::span<const double> samples, const std::function<double(double)>& cdf) {
    KsResult r;
    std::vector<double> xs;
    xs.reserve(samples.size());
    for (double x : samples) {
        if (std::isfinite(x)) {
            xs.push_back(x);
        } else {
            ++r.excluded;
        }
    }
    if (xs.empty()) throw ArgumentError("ks_distance needs at least one finite sample");
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        // Ties: the empirical CDF jumps once, at the last copy.
        std::size_t j = i;
        while (j + 1 < xs.size() && xs[j + 1] == xs[i]) ++j;
        const double below = static_cast<double>(i) / n;
        const double at = static_cast<double>(j + 1) / n;
        r.distance = std::max({r.distance, std::abs(at - f), std::abs(below - f)});
        i = j;
    }
    r.used = xs.size();
    return r;
}

double median(std::vector<double> xs) {
    std::erase_if(xs, [](double x) { return std::isnan(x); });
    if (xs.empty()) return kNaN;
    std::sort(xs.begin(), xs.end());
    const std::size_t h = xs.size() / 2;
    return xs.size() % 2 ? xs[h] : 0.5 * (xs[h - 1] + xs[h]);
}

std::string t0_label(double t0) {
    std::string s = format_double(t0);
    if (s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

double normalizer_bn(const Kernel& k, std::size_t n, BnMethod method) {
    if (method == BnMethod::analytic) {
        if (!k.hajek_variance || !std::isfinite(*k.hajek_variance) || !(*k.hajek_variance > 0.0)) {
            throw ConfigError("bn = analytic needs 0 < Var h~1 < inf, which fails for '" + k.name + "'");
        }
        return std::sqrt(static_cast<double>(n) * *k.hajek_variance);
    }
    if (!k.source || !k.has_hajek()) throw ConfigError("B_n needs a kernel with a closed-form Hajek projection");
    const TruncatedVariance tv = k.hajek_affine
                                     ? affine_truncated_variance(*k.source, k.hajek_affine->slope, k.hajek_affine->center)
                                     : numeric_truncated_variance(*k.source, k.hajek);
    try {
        return estimate_bn(tv, n);
    } catch (const DegenerateError& e) {
        throw ConfigError(std::string("B_n is degenerate at n = ") + std::to_string(n) + ": " + e.what());
    }
}

McReport run_clt_experiment(const ExperimentConfig& cfg) { return run_path_statistics(cfg, false); }

McReport run_fclt_experiment(const ExperimentConfig& cfg) { return run_path_statistics(cfg, true); }

McReport run_sup_error_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const Kernel k = cfg.bound_kernel();
    require_hajek(k, cfg);
    const std::vector<std::string> cols{"vn2", "bn", "terminal", "sup_error_self", "sup_error_scalar", "vn2_over_bn2"};
    const auto contexts = plain_contexts(cfg, k, true);
    return run_rows(cfg, cols, contexts, [&](const NContext& ctx, std::span<const double> xs, bool& flagged) {
        const auto h = hajek_values(k, xs);
        const double vn2 = SelfNormalizer::from(h).vn2;
        std::vector<double> v{vn2, ctx.bn};
        if (!(vn2 > 0.0)) {
            flagged = true;
            v.resize(cols.size(), kNaN);
            return v;
        }
        const auto u = prefix_u_path(k, xs, cfg.accumulation);
        const auto self = build_self_normalized_process(u, h, k.theta);
        const auto scalar = build_scalar_normalized_process(u, ctx.bn, k.theta);
        const double vn = std::sqrt(vn2);
        v.push_back(self.values[ctx.n]);
        v.push_back(sup_distance(self, partial_sum_path(h, vn)));
        v.push_back(sup_distance(scalar, partial_sum_path(h, ctx.bn, NormalizerKind::scalar)));
        v.push_back(vn2 / (ctx.bn * ctx.bn));
        return v;
    });
}

McReport run_miller_sen_comparison(const ExperimentConfig& cfg) {
    cfg.validate();
    const Kernel k = cfg.bound_kernel();
    const bool var_ok = k.hajek_variance && std::isfinite(*k.hajek_variance) && *k.hajek_variance > 0.0;
    const bool second_ok = k.finite_second_moment.value_or(false);
    if (!var_ok || !second_ok) {
        std::string why;
        if (!var_ok) {
            why = k.hajek_variance && std::isinf(*k.hajek_variance) ? "Var h~1(X1) is infinite"
                                                                     : "Var h~1(X1) is not known to be positive and finite";
        } else {
            why = "E h^2 is not known to be finite";
        }
        throw ConfigError("Miller-Sen conditions violated: " + why + " for kernel '" + k.name + "' (m = " +
                          std::to_string(k.order) + ") under " + cfg.distribution.to_string() +
                          "; the scalar-normalized process needs 0 < Var h~1(X1) < inf and E h^2 < inf");
    }
    require_hajek(k, cfg);
    const double var_h1 = *k.hajek_variance;
    const std::vector<std::string> cols{"vn2",           "var_h1",   "terminal", "miller_sen_terminal",
                                        "miller_sen_sup", "sup_abs", "miller_sen_distance"};
    const auto contexts = plain_contexts(cfg, k, false);
    return run_rows(cfg, cols, contexts, [&](const NContext& ctx, std::span<const double> xs, bool& flagged) {
        const auto h = hajek_values(k, xs);
        const double vn2 = SelfNormalizer::from(h).vn2;
        std::vector<double> v{vn2, var_h1};
        if (!(vn2 > 0.0)) {
            flagged = true;
            v.resize(cols.size(), kNaN);
            return v;
        }
        const auto u = prefix_u_path(k, xs, cfg.accumulation);
        const auto self = build_self_normalized_process(u, h, k.theta);
        const auto ms = build_miller_sen_process(u, var_h1, k.theta);
        v.push_back(self.values[ctx.n]);
        v.push_back(ms.values[ctx.n]);
        v.push_back(ms.sup_abs());
        v.push_back(self.sup_abs());
        v.push_back(sup_distance(ms, self));
        return v;
    });
}

McReport run_decompose_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const Kernel k = cfg.bound_kernel();
    require_hajek(k, cfg);
    std::vector<NContext> contexts;
    for (std::size_t n : cfg.n_values) {
        NContext c;
        c.n = n;
        const double level = cfg.level_override ? *cfg.level_override : truncation_level(n);
        const Seed aux{cfg.seed, kAuxStream};
        Centerings cent;
        try {
            cent = compute_centerings(k, level, cfg.centering_draws, aux.derive(kCenteringTag + n));
        } catch (const UnsupportedError& e) {
            throw ConfigError(e.what());
        }
        c.pair = truncate_kernel(k, n, cent, cfg.level_override);
        c.proj = TruncatedProjection::make(*c.pair, cfg.distribution, cfg.panel_draws, aux.derive(kPanelTag + n));
        contexts.push_back(std::move(c));
    }
    const std::vector<std::string> cols{"level", "centering_upper", "j1", "j2", "j3", "j_total", "remainder",
                                        "psi_second_moment"};
    return run_rows(cfg, cols, contexts, [&](const NContext& ctx, std::span<const double> xs, bool&) {
        const auto h = hajek_values(k, xs);
        const auto d = j_diagnostics(xs, *ctx.pair, h, *ctx.proj);
        return std::vector<double>{d.level, ctx.pair->centerings.upper, d.j1, d.j2, d.j3, d.j1 + d.j2 + d.j3,
                                   d.remainder, d.psi_second_moment};
    });
}

McReport run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.kind) {
    case ExperimentKind::clt: return run_clt_experiment(cfg);
    case ExperimentKind::fclt: return run_fclt_experiment(cfg);
    case ExperimentKind::thm3: return run_sup_error_experiment(cfg);
    case ExperimentKind::miller_sen: return run_miller_sen_comparison(cfg);
    case ExperimentKind::decompose: return run_decompose_experiment(cfg);
    }
    throw ConfigError("unknown experiment");
}

std::map<std::string, double> compute_aggregates(ExperimentKind kind, const std::vector<std::string>& columns,
                                                 const std::vector<McRow>& rows) {
    (void)kind;
    std::map<std::string, double> out;
    std::vector<std::size_t> ns;
    for (const auto& r : rows) {
        if (std::find(ns.begin(), ns.end(), r.n) == ns.end()) ns.push_back(r.n);
    }
    std::sort(ns.begin(), ns.end());

    for (std::size_t n : ns) {
        std::map<std::string, double> a;
        std::size_t count = 0;
        std::size_t flagged = 0;
        std::vector<std::vector<double>> cols(columns.size());
        for (const auto& r : rows) {
            if (r.n != n) continue;
            ++count;
            if (r.flagged) {
                ++flagged;
                continue;
            }
            for (std::size_t c = 0; c < columns.size(); ++c) cols[c].push_back(r.values[c]);
        }
        a["replications"] = static_cast<double>(count);
        a["flagged"] = static_cast<double>(flagged);

        double t_min = kInf;
        double t_max = -kInf;
        std::string lbl_min;
        std::string lbl_max;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const std::string& name = columns[c];
            const auto& xs = cols[c];
            if (starts_with(name, "t0_")) {
                const std::string lbl = name.substr(3);
                const double t = parse_double(lbl, "t0");
                a["ks_t0_" + lbl] = ks_or_nan(xs, [t](double x) { return phi_cdf(x, t); });
                a["var_t0_" + lbl] = sample_variance(xs);
                a["mean_t0_" + lbl] = sample_mean(xs);
                if (t < t_min) t_min = t, lbl_min = lbl;
                if (t > t_max) t_max = t, lbl_max = lbl;
                continue;
            }
            if (name == "vn2" || name == "bn" || name == "level" || name == "var_h1" || name == "centering_upper") {
                a[name] = name == "vn2" ? median(xs) : (xs.empty() ? kNaN : xs.front());
                continue;
            }
            a["median_" + name] = median(xs);
            a["q10_" + name] = quantile(xs, 0.1);
            a["q90_" + name] = quantile(xs, 0.9);
            if (name == "sup_abs") a["ks_sup"] = ks_or_nan(xs, sup_wiener_cdf_safe);
            if (name == "miller_sen_sup") a["ks_sup_miller_sen"] = ks_or_nan(xs, sup_wiener_cdf_safe);
            if (name == "terminal") a["ks_terminal"] = ks_or_nan(xs, [](double x) { return phi_cdf(x, 1.0); });
            if (name == "miller_sen_terminal") {
                a["ks_miller_sen_terminal"] = ks_or_nan(xs, [](double x) { return phi_cdf(x, 1.0); });
            }
            if (name == "vn2_over_bn2") {
                std::vector<double> dev;
                for (double x : xs) dev.push_back(std::abs(x - 1.0));
                a["median_abs_vn2_over_bn2_minus_1"] = median(dev);
            }
            if (name == "j1" || name == "j2" || name == "j3" || name == "sup_error_self" || name == "sup_error_scalar" ||
                name == "remainder" || name == "miller_sen_distance") {
                a["max_" + name] = max_of(xs);
            }
        }
        if (t_max > t_min) {
            a["var_ratio_t0"] = a["var_t0_" + lbl_max] / a["var_t0_" + lbl_min];
        }
        const std::string prefix = "n=" + std::to_string(n) + "/";
        for (const auto& [key, v] : a) {
            out[prefix + key] = v;
            if (n == ns.back()) out[key] = v;
        }
    }
    return out;
}

void write_rows_csv(const McReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    std::vector<std::string> cells{"n", "stream", "flagged"};
    cells.insert(cells.end(), report.columns.begin(), report.columns.end());
    write_csv_line(out, cells);
    for (const auto& r : report.rows) {
        cells.assign({std::to_string(r.n), std::to_string(r.stream), r.flagged ? "1" : "0"});
        for (double v : r.values) cells.push_back(format_double(v));
        write_csv_line(out, cells);
    }
    if (!out) throw InputError("failed writing " + path.string());
}

McReport read_rows_csv(ExperimentKind kind, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    McReport report;
    report.kind = kind;
    std::string line;
    if (!std::getline(in, line)) throw InputError(path.string() + " is empty");
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "n" || header[1] != "stream" || header[2] != "flagged") {
        throw InputError(path.string() + " does not start with n,stream,flagged");
    }
    report.columns.assign(header.begin() + 3, header.end());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) throw InputError("ragged row in " + path.string());
        McRow r;
        r.n = static_cast<std::size_t>(parse_double(cells[0], "n"));
        r.stream = static_cast<std::size_t>(parse_double(cells[1], "stream"));
        r.flagged = cells[2] == "1";
        for (std::size_t i = 3; i < cells.size(); ++i) r.values.push_back(parse_double(cells[i], header[i]));
        report.rows.push_back(std::move(r));
    }
    report.aggregates = compute_aggregates(kind, report.columns, report.rows);
    return report;
}

std::string config_hash(const ExperimentConfig& cfg) {
    std::string canon;
    for (const auto& [k, v] : cfg.echo()) canon += k + "=" + v + "\n";
    return sha256_hex(canon);
}

std::string version() { return USTATBENCH_VERSION; }

void write_aggregates_json(const McReport& report, const ExperimentConfig& cfg, const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : report.aggregates) {
        if (std::isfinite(v)) {
            j[k] = v;
        } else {
            j[k] = nullptr;
        }
    }
    for (const auto& [k, v] : cfg.echo()) j["config." + k] = v;
    j["config_hash"] = config_hash(cfg);
    j["experiment"] = experiment_name(report.kind);
    j["schema_version"] = kReportSchemaVersion;
    j["seed"] = cfg.seed;
    j["version"] = version();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_plot_csv(const McReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "n,metric,value\n";
    for (const auto& [key, v] : report.aggregates) {
        if (!starts_with(key, "n=")) continue;
        const auto slash = key.find('/');
        const std::string metric = key.substr(slash + 1);
        if (!starts_with(metric, "ks_") && !starts_with(metric, "median_")) continue;
        out << key.substr(2, slash - 2) << ',' << metric << ',' << format_double(v) << '\n';
    }
}

std::vector<std::string> check_report_consistency(ExperimentKind kind, const std::filesystem::path& rows_csv,
                                                  const std::filesystem::path& aggregates_json) {
    const McReport report = read_rows_csv(kind, rows_csv);
    std::ifstream in(aggregates_json, std::ios::binary);
    if (!in) throw InputError("cannot read " + aggregates_json.string());
    const nlohmann::json j = nlohmann::json::parse(in);
    std::vector<std::string> bad;
    for (const auto& [key, v] : report.aggregates) {
        if (!j.contains(key)) {
            bad.push_back(key);
            continue;
        }
        const auto& stored = j.at(key);
        if (stored.is_null()) {
            if (std::isfinite(v)) bad.push_back(key);
        } else if (!stored.is_number() || stored.get<double>() != v) {
            bad.push_back(key);
        }
    }
    for (const auto& [key, value] : j.items()) {
        if (starts_with(key, "config") || key == "experiment" || key == "schema_version" || key == "seed" ||
            key == "version") {
            continue;
        }
        if (!report.aggregates.contains(key)) bad.push_back(key);
    }
    return bad;
}

} // namespace ustatbench
