#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ustatbench/kernels.hpp"
#include "ustatbench/sampling.hpp"
#include "ustatbench/ustat.hpp"

namespace ustatbench {

/// Version written into every report; bump when a column or key changes meaning.
inline constexpr int kReportSchemaVersion = 1;

enum class ExperimentKind { clt, fclt, thm3, miller_sen, decompose };

[[nodiscard]] std::string experiment_name(ExperimentKind kind);
/// Accepts clt, fclt, thm3, miller-sen, decompose.
[[nodiscard]] ExperimentKind parse_experiment(std::string_view name);

enum class NormalizerMode {
    /// V_n from the sample's Hajek values.
    self,
    /// B_n (see BnMethod).
    scalar,
};

enum class BnMethod {
    /// Largest root of b^2 = n E(h~1^2; |h~1| <= b).
    fixed_point,
    /// sqrt(n Var h~1); needs finite Var h~1.
    analytic,
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::clt;
    std::string kernel = "product";
    std::size_t m = 2;
    DistributionSpec distribution = DistributionSpec::example_pareto(2.0);
    std::vector<std::size_t> n_values{500};
    std::vector<double> t0{1.0};
    std::size_t replications = 200;
    std::uint64_t seed = 0;
    NormalizerMode normalizer = NormalizerMode::self;
    BnMethod bn_method = BnMethod::fixed_point;
    /// Replaces n^{3/2} in decompose runs; +inf disables truncation.
    std::optional<double> level_override;
    std::size_t workers = 1;
    /// Monte Carlo draws for truncated centerings without a closed form.
    std::size_t centering_draws = 1'000'000;
    /// Panel size for projections of the upper truncated piece without a
    /// closed form.
    std::size_t panel_draws = 2000;
    Accumulation accumulation = Accumulation::compensated;

    /// Throws ConfigError on any violated constraint.
    void validate() const;
    /// The kernel bound to the distribution.
    [[nodiscard]] Kernel bound_kernel() const;
    /// Canonical sorted key=value lines, the basis of the config hash.
    [[nodiscard]] std::map<std::string, std::string> echo() const;
};

struct McRow {
    std::size_t n = 0;
    std::size_t stream = 0;
    bool flagged = false;
    /// Aligned with McReport::columns after the three leading fields.
    std::vector<double> values;
};

struct McReport {
    ExperimentKind kind = ExperimentKind::clt;
    /// Metric columns, excluding the leading n, stream, flagged.
    std::vector<std::string> columns;
    /// Sorted by (n, stream).
    std::vector<McRow> rows;
    /// Flat metric name -> value. Per-n entries are keyed "n=<n>/<metric>";
    /// the largest n is repeated without prefix.
    std::map<std::string, double> aggregates;

    [[nodiscard]] std::size_t column(std::string_view name) const;
    /// Column values for one n, non-flagged rows only.
    [[nodiscard]] std::vector<double> values(std::size_t n, std::string_view name) const;
};

struct KsResult {
    double distance = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;
};

/// One-sample Kolmogorov-Smirnov distance sup_x |F_emp(x) - cdf(x)|,
/// checking both sides of every jump. Non-finite samples are excluded and
/// counted; throws ArgumentError if none remain.
[[nodiscard]] KsResult ks_distance(std::span<const double> samples, const std::function<double(double)>& cdf);

/// Median of the finite entries (NaN if none).
[[nodiscard]] double median(std::vector<double> xs);

/// Column label for a t0 value: always carries a decimal point ("1.0", "0.25").
[[nodiscard]] std::string t0_label(double t0);

/// B_n for the configured method.
[[nodiscard]] double normalizer_bn(const Kernel& k, std::size_t n, BnMethod method);

[[nodiscard]] McReport run_clt_experiment(const ExperimentConfig& cfg);
[[nodiscard]] McReport run_fclt_experiment(const ExperimentConfig& cfg);
/// Sup distance between the U-process and the partial-sum path of h~1,
/// with V_n and with B_n.
[[nodiscard]] McReport run_sup_error_experiment(const ExperimentConfig& cfg);
/// Throws ConfigError("Miller-Sen conditions violated: ...") unless
/// 0 < Var h~1 < inf and E h^2 < inf.
[[nodiscard]] McReport run_miller_sen_comparison(const ExperimentConfig& cfg);
[[nodiscard]] McReport run_decompose_experiment(const ExperimentConfig& cfg);
/// Dispatches on cfg.kind.
[[nodiscard]] McReport run_experiment(const ExperimentConfig& cfg);

/// Recomputes the aggregates from the rows alone.
[[nodiscard]] std::map<std::string, double> compute_aggregates(ExperimentKind kind,
                                                               const std::vector<std::string>& columns,
                                                               const std::vector<McRow>& rows);

/// Rows CSV: header "n,stream,flagged,<columns...>", shortest round-trip floats.
void write_rows_csv(const McReport& report, const std::filesystem::path& path);
[[nodiscard]] McReport read_rows_csv(ExperimentKind kind, const std::filesystem::path& path);

/// Flat, key-sorted JSON: aggregates plus config echo ("config.<key>"),
/// seed, config hash, schema and library versions.
void write_aggregates_json(const McReport& report, const ExperimentConfig& cfg,
                           const std::filesystem::path& path);
/// Long-format "n,metric,value" for the KS and median metrics.
void write_plot_csv(const McReport& report, const std::filesystem::path& path);

/// Reloads rows and aggregates and checks that recomputation reproduces every
/// stored metric bit for bit. Returns the mismatching keys.
[[nodiscard]] std::vector<std::string> check_report_consistency(ExperimentKind kind,
                                                                const std::filesystem::path& rows_csv,
                                                                const std::filesystem::path& aggregates_json);

/// SHA-256 of the canonical config echo, hex.
[[nodiscard]] std::string config_hash(const ExperimentConfig& cfg);

/// Library version string.
[[nodiscard]] std::string version();

} // namespace ustatbench
