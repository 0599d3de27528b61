#include "ustatbench/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ustatbench/errors.hpp"
#include "ustatbench/hash.hpp"
#include "ustatbench/io.hpp"
#include "ustatbench/numeric.hpp"
#include "ustatbench/ustat.hpp"

namespace ustatbench {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto piece = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!piece.empty()) out.push_back(piece);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::size_t parse_count(const std::string& text, const std::string& key) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size() || text.empty() || text[0] == '-') {
        throw ConfigError(key + " must be a non-negative integer, got '" + text + "'");
    }
    return static_cast<std::size_t>(v);
}

double parse_real(const std::string& text, const std::string& key) {
    try {
        return parse_double(text, key);
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
}

std::string iso_utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

/// --out > $USTATBENCH_OUT > config "out" > fallback.
std::filesystem::path output_dir(const std::string& flag, const std::map<std::string, std::string>& keys,
                                 const std::string& fallback) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    if (auto it = keys.find("out"); it != keys.end()) return it->second;
    return fallback;
}

/// Records every output with its hash. The manifest is the only file that
/// carries timestamps, so reruns reproduce every hashed byte.
class Manifest {
public:
    Manifest(std::string subcommand, std::filesystem::path dir) : dir_(std::move(dir)) {
        j_["subcommand"] = std::move(subcommand);
        j_["output_dir"] = dir_.string();
        j_["version"] = version();
        j_["started_at"] = iso_utc_now();
        j_["files"] = nlohmann::json::object();
    }

    nlohmann::json& json() { return j_; }

    void add(const std::filesystem::path& file) { j_["files"][file.filename().string()] = sha256_file(file); }

    void write() {
        j_["finished_at"] = iso_utc_now();
        std::ofstream out(dir_ / "manifest.json", std::ios::binary);
        if (!out) throw InputError("cannot write " + (dir_ / "manifest.json").string());
        out << j_.dump(2) << '\n';
    }

private:
    std::filesystem::path dir_;
    nlohmann::json j_;
};

void prepare_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
}

struct DistFlags {
    std::string name;
    std::optional<double> a, mean, sd, rate, df;

    void attach(CLI::App& app) {
        app.add_option("--dist", name, "example-pareto, normal, exponential, student-t");
        app.add_option("--a", a, "example-pareto location");
        app.add_option("--mean", mean, "normal mean");
        app.add_option("--sd", sd, "normal standard deviation");
        app.add_option("--rate", rate, "exponential rate");
        app.add_option("--df", df, "student-t degrees of freedom");
    }

    /// Text form accepted by DistributionSpec::parse, or empty if --dist is absent.
    [[nodiscard]] std::string text() const {
        if (name.empty()) return {};
        std::string t = name;
        auto put = [&t](const char* key, const std::optional<double>& v) {
            if (v) t += std::string(" ") + key + "=" + format_double(*v);
        };
        put("a", a);
        put("mean", mean);
        put("sd", sd);
        put("rate", rate);
        put("df", df);
        return t;
    }
};

DistributionSpec parse_dist(const std::string& text) {
    try {
        return DistributionSpec::parse(text);
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
}

int cmd_sample(const DistFlags& dist_flags, std::size_t n, std::uint64_t seed, const std::string& out_flag,
               std::ostream& out) {
    if (dist_flags.name.empty()) throw ConfigError("--dist is required");
    if (n < 1) throw ConfigError("--n must be >= 1");
    const DistributionSpec dist = parse_dist(dist_flags.text());
    const auto dir = output_dir(out_flag, {}, "ustatbench_out/sample");
    prepare_dir(dir);

    const auto xs = sample(dist, n, Seed{seed, 0});
    const auto samples_csv = dir / "samples.csv";
    {
        std::ofstream f(samples_csv, std::ios::binary);
        f << "x\n";
        for (double x : xs) f << format_double(x) << '\n';
        if (!f) throw InputError("failed writing " + samples_csv.string());
    }

    // Truncated second moments about the mean (the location for
    // example-pareto) on a doubling level grid.
    double center = dist.mean();
    if (!std::isfinite(center)) center = 0.0;
    const auto summary_csv = dir / "summary.csv";
    {
        std::ofstream f(summary_csv, std::ios::binary);
        f << "statistic,level,empirical,analytic\n";
        CompensatedSum s;
        for (double x : xs) s.add(x);
        f << "mean,," << format_double(s.value() / static_cast<double>(n)) << ',' << format_double(dist.mean())
          << '\n';
        for (int e = 0; e <= 10; ++e) {
            const double t = std::ldexp(1.0, e);
            CompensatedSum q;
            for (double x : xs) {
                const double d = x - center;
                if (std::abs(d) <= t) q.add(d * d);
            }
            double analytic = std::numeric_limits<double>::quiet_NaN();
            try {
                analytic = dist.truncated_second_moment(center, t);
            } catch (const UnsupportedError&) {
            }
            f << "truncated_second_moment," << format_double(t) << ','
              << format_double(q.value() / static_cast<double>(n)) << ',' << format_double(analytic) << '\n';
        }
        if (!f) throw InputError("failed writing " + summary_csv.string());
    }

    Manifest manifest("sample", dir);
    manifest.json()["config"] = {{"distribution", dist.to_string()}, {"n", n}, {"seed", seed}};
    manifest.add(samples_csv);
    manifest.add(summary_csv);
    manifest.write();
    out << "wrote " << n << " draws to " << samples_csv.string() << '\n';
    return kExitOk;
}

std::vector<double> read_numbers(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    std::vector<double> xs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto cells = split_csv_line(line);
        const std::string cell = cells.empty() ? std::string() : trim(cells.front());
        if (cell.empty()) continue;
        try {
            xs.push_back(parse_double(cell, "value"));
        } catch (const ArgumentError&) {
            if (lineno == 1) continue; // header
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
        }
    }
    return xs;
}

int cmd_ustat(const std::string& kernel_name, std::size_t m, const std::string& input, bool oracle,
              const std::string& accumulation, const std::string& out_flag, std::ostream& out) {
    Kernel k;
    try {
        k = catalog::make(kernel_name, m);
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
    const Accumulation acc = accumulation == "extended" ? Accumulation::extended : Accumulation::compensated;
    if (accumulation != "extended" && accumulation != "compensated") {
        throw ConfigError("--accumulation must be compensated or extended");
    }
    const auto xs = read_numbers(input);
    if (xs.size() < m) {
        throw ConfigError("the input has " + std::to_string(xs.size()) + " values, fewer than m = " +
                          std::to_string(m));
    }
    const auto dir = output_dir(out_flag, {}, "ustatbench_out/ustat");
    prepare_dir(dir);

    const PrefixUPath fast = prefix_u_path(k, xs, acc);
    std::optional<PrefixUPath> slow;
    if (oracle) {
        try {
            check_enumeration(xs.size(), m);
        } catch (const ResourceError& e) {
            throw ConfigError(std::string("--oracle enumerates every m-subset and ") + e.what() +
                              "; use a smaller n or drop --oracle");
        }
        slow = prefix_u_oracle(k, xs);
    }

    const auto csv = dir / "ustat.csv";
    double max_rel = 0.0;
    {
        std::ofstream f(csv, std::ios::binary);
        f << (slow ? "k,U_k,oracle\n" : "k,U_k\n");
        for (std::size_t kk = m; kk <= xs.size(); ++kk) {
            f << kk << ',' << format_double(fast.at(kk));
            if (slow) {
                const double o = slow->at(kk);
                f << ',' << format_double(o);
                const double scale = std::max(std::abs(o), std::numeric_limits<double>::min());
                max_rel = std::max(max_rel, std::abs(fast.at(kk) - o) / scale);
            }
            f << '\n';
        }
        if (!f) throw InputError("failed writing " + csv.string());
    }

    Manifest manifest("ustat", dir);
    manifest.json()["config"] = {{"kernel", kernel_name}, {"m", m}, {"input", input}, {"oracle", oracle},
                                 {"accumulation", accumulation}};
    if (slow) manifest.json()["max_abs_relative_difference"] = max_rel;
    manifest.add(csv);
    manifest.write();
    out << "wrote U_k for k = " << m << ".." << xs.size() << " to " << csv.string() << '\n';
    if (slow) out << "max_abs_relative_difference=" << format_double(max_rel) << '\n';
    return kExitOk;
}

struct VerifyFlags {
    std::string config;
    std::string kernel;
    std::optional<std::size_t> m;
    DistFlags dist;
    std::string n;
    std::string t0;
    std::optional<std::size_t> replications;
    std::string normalizer;
    std::string bn;
    std::string level;
    std::optional<std::size_t> workers;
};

int cmd_verify(ExperimentKind kind, const VerifyFlags& flags, std::uint64_t seed, const std::string& out_flag,
               std::ostream& out) {
    std::map<std::string, std::string> keys;
    if (!flags.config.empty()) keys = ConfigFile::load(flags.config).resolved(experiment_name(kind));
    if (keys.contains("seed")) throw ConfigError("the seed is not a config key; pass --seed");

    // Flags override the file.
    if (!flags.kernel.empty()) keys["kernel"] = flags.kernel;
    if (flags.m) keys["m"] = std::to_string(*flags.m);
    if (const auto d = flags.dist.text(); !d.empty()) keys["distribution"] = d;
    if (!flags.n.empty()) keys["n"] = flags.n;
    if (!flags.t0.empty()) keys["t0"] = flags.t0;
    if (flags.replications) keys["replications"] = std::to_string(*flags.replications);
    if (!flags.normalizer.empty()) keys["normalizer"] = flags.normalizer;
    if (!flags.bn.empty()) keys["bn"] = flags.bn;
    if (!flags.level.empty()) keys["level"] = flags.level;
    if (flags.workers) keys["workers"] = std::to_string(*flags.workers);

    ExperimentConfig cfg = config_from_keys(kind, keys);
    cfg.seed = seed;
    const auto dir = output_dir(out_flag, keys, "ustatbench_out/" + experiment_name(kind));

    const McReport report = run_experiment(cfg);
    prepare_dir(dir);
    const auto rows_csv = dir / "rows.csv";
    const auto agg_json = dir / "aggregates.json";
    const auto plot_csv = dir / "plot.csv";
    write_rows_csv(report, rows_csv);
    write_aggregates_json(report, cfg, agg_json);
    write_plot_csv(report, plot_csv);
    const auto mismatched = check_report_consistency(kind, rows_csv, agg_json);
    if (!mismatched.empty()) {
        throw ExperimentError("persisted aggregates do not recompute from the rows (first: " + mismatched.front() +
                              ")");
    }

    const auto results = evaluate_assertions(keys, report, cfg.n_values);
    bool all_pass = true;
    nlohmann::json assertions = nlohmann::json::array();
    for (const auto& r : results) {
        out << (r.passed ? "PASS " : "FAIL ") << r.key << ": " << r.description << '\n';
        assertions.push_back({{"key", r.key}, {"description", r.description}, {"passed", r.passed}});
        all_pass = all_pass && r.passed;
    }

    Manifest manifest("verify " + experiment_name(kind), dir);
    nlohmann::json echo = nlohmann::json::object();
    for (const auto& [k, v] : cfg.echo()) echo[k] = v;
    echo["workers"] = std::to_string(cfg.workers);
    manifest.json()["config"] = echo;
    manifest.json()["config_hash"] = config_hash(cfg);
    manifest.json()["assertions"] = assertions;
    manifest.add(rows_csv);
    manifest.add(agg_json);
    manifest.add(plot_csv);
    manifest.write();
    out << "wrote " << report.rows.size() << " rows to " << dir.string() << '\n';
    return all_pass ? kExitOk : kExitAssertion;
}

double aggregate_or_nan(const McReport& report, const std::string& key) {
    const auto it = report.aggregates.find(key);
    return it == report.aggregates.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
}

} // namespace

ConfigFile ConfigFile::parse(std::string_view text, std::string_view origin) {
    ConfigFile cfg;
    std::map<std::string, std::string>* current = &cfg.global;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& what) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(std::string_view(raw).substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("unterminated section header");
            const std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
            if (name.empty()) fail("empty section name");
            current = &cfg.sections[name];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) fail("empty key");
        if (current->contains(key)) fail("duplicate key '" + key + "'");
        (*current)[key] = value;
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::map<std::string, std::string> ConfigFile::resolved(std::string_view section) const {
    auto out = global;
    if (auto it = sections.find(std::string(section)); it != sections.end()) {
        for (const auto& [k, v] : it->second) out[k] = v;
    }
    return out;
}

ExperimentConfig config_from_keys(ExperimentKind kind, const std::map<std::string, std::string>& keys) {
    ExperimentConfig cfg;
    cfg.kind = kind;
    for (const auto& [key, value] : keys) {
        if (key.rfind("assert", 0) == 0 || key == "out") continue;
        if (key == "kernel") {
            cfg.kernel = value;
        } else if (key == "m") {
            cfg.m = parse_count(value, key);
        } else if (key == "distribution") {
            cfg.distribution = parse_dist(value);
        } else if (key == "n") {
            cfg.n_values.clear();
            for (const auto& s : split_list(value)) cfg.n_values.push_back(parse_count(s, key));
        } else if (key == "t0") {
            cfg.t0.clear();
            for (const auto& s : split_list(value)) cfg.t0.push_back(parse_real(s, key));
        } else if (key == "replications") {
            cfg.replications = parse_count(value, key);
        } else if (key == "normalizer") {
            if (value != "self" && value != "scalar") throw ConfigError("normalizer must be self or scalar");
            cfg.normalizer = value == "self" ? NormalizerMode::self : NormalizerMode::scalar;
        } else if (key == "bn") {
            if (value != "fixed-point" && value != "analytic") throw ConfigError("bn must be fixed-point or analytic");
            cfg.bn_method = value == "analytic" ? BnMethod::analytic : BnMethod::fixed_point;
        } else if (key == "level") {
            if (value != "n^1.5") cfg.level_override = parse_real(value, key);
        } else if (key == "workers") {
            cfg.workers = parse_count(value, key);
        } else if (key == "centering_draws") {
            cfg.centering_draws = parse_count(value, key);
        } else if (key == "panel_draws") {
            cfg.panel_draws = parse_count(value, key);
        } else if (key == "accumulation") {
            if (value != "compensated" && value != "extended") {
                throw ConfigError("accumulation must be compensated or extended");
            }
            cfg.accumulation = value == "extended" ? Accumulation::extended : Accumulation::compensated;
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

std::vector<AssertionResult> evaluate_assertions(const std::map<std::string, std::string>& keys,
                                                 const McReport& report, const std::vector<std::size_t>& n_values) {
    std::vector<AssertionResult> out;
    auto per_n = [&](const std::string& metric) {
        std::vector<double> v;
        for (std::size_t n : n_values) v.push_back(aggregate_or_nan(report, "n=" + std::to_string(n) + "/" + metric));
        return v;
    };
    auto list = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
        return s;
    };
    for (const auto& [key, value] : keys) {
        AssertionResult r;
        r.key = key;
        if (key.rfind("assert_max.", 0) == 0 || key.rfind("assert_min.", 0) == 0) {
            const bool is_max = key.rfind("assert_max.", 0) == 0;
            std::string metric = key.substr(11);
            // metric@n selects one n of the sweep.
            if (const auto at = metric.rfind('@'); at != std::string::npos) {
                metric = "n=" + metric.substr(at + 1) + "/" + metric.substr(0, at);
            }
            const double bound = parse_real(value, key);
            const double v = aggregate_or_nan(report, metric);
            r.passed = std::isfinite(v) && (is_max ? v <= bound : v >= bound);
            r.description = metric + " = " + format_double(v) + (is_max ? " <= " : " >= ") + format_double(bound);
        } else if (key == "assert_decreasing" || key == "assert_last_below_first") {
            for (const auto& metric : split_list(value)) {
                AssertionResult each;
                each.key = key;
                const auto v = per_n(metric);
                bool ok = v.size() >= 2;
                for (double x : v) ok = ok && std::isfinite(x);
                if (ok && key == "assert_decreasing") {
                    for (std::size_t i = 1; i < v.size(); ++i) ok = ok && v[i] < v[i - 1];
                } else if (ok) {
                    ok = v.back() < v.front();
                }
                each.passed = ok;
                each.description = metric + " over n = " + list(v);
                out.push_back(std::move(each));
            }
            continue;
        } else if (key.rfind("assert", 0) == 0) {
            throw ConfigError("unknown assertion '" + key + "'");
        } else {
            continue;
        }
        out.push_back(std::move(r));
    }
    return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Self-normalized U-statistic process bench", "ustatbench"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version());

    std::optional<std::uint64_t> seed;
    std::string out_flag;

    auto* sample_cmd = app.add_subcommand("sample", "Draw a sample and summary statistics");
    DistFlags sample_dist;
    std::size_t sample_n = 0;
    sample_dist.attach(*sample_cmd);
    sample_cmd->add_option("--n", sample_n, "Sample size")->required();
    sample_cmd->add_option("--seed", seed, "Master seed")->required();
    sample_cmd->add_option("--out", out_flag, "Output directory");

    auto* ustat_cmd = app.add_subcommand("ustat", "Prefix U-statistic path of a data file");
    std::string kernel_name;
    std::size_t ustat_m = 0;
    std::string input;
    bool oracle = false;
    std::string accumulation = "compensated";
    ustat_cmd->add_option("--kernel", kernel_name, "Kernel name")->required();
    ustat_cmd->add_option("--m", ustat_m, "Kernel order")->required();
    ustat_cmd->add_option("--input", input, "One value per line; a non-numeric first line is a header")->required();
    ustat_cmd->add_flag("--oracle", oracle, "Add the enumeration oracle column");
    ustat_cmd->add_option("--accumulation", accumulation, "compensated or extended");
    ustat_cmd->add_option("--out", out_flag, "Output directory");

    auto* verify_cmd = app.add_subcommand("verify", "Run a Monte Carlo experiment");
    verify_cmd->require_subcommand(1);
    VerifyFlags vflags;
    std::optional<ExperimentKind> kind;
    for (auto k : {ExperimentKind::clt, ExperimentKind::fclt, ExperimentKind::thm3, ExperimentKind::miller_sen,
                   ExperimentKind::decompose}) {
        auto* sub = verify_cmd->add_subcommand(experiment_name(k));
        sub->callback([&kind, k] { kind = k; });
        sub->add_option("--config", vflags.config, "Config file");
        sub->add_option("--seed", seed, "Master seed")->required();
        sub->add_option("--workers", vflags.workers, "Parallel replications");
        sub->add_option("--out", out_flag, "Output directory");
        sub->add_option("--kernel", vflags.kernel);
        sub->add_option("--m", vflags.m);
        vflags.dist.attach(*sub);
        sub->add_option("--n", vflags.n, "Comma-separated sample sizes");
        sub->add_option("--t0", vflags.t0, "Comma-separated times in (0, 1]");
        sub->add_option("--replications", vflags.replications);
        sub->add_option("--normalizer", vflags.normalizer, "self or scalar");
        sub->add_option("--bn", vflags.bn, "fixed-point or analytic");
        sub->add_option("--level", vflags.level, "Truncation level (number or inf)");
    }

    std::vector<std::string> argv_store{"ustatbench"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (sample_cmd->parsed()) return cmd_sample(sample_dist, sample_n, *seed, out_flag, out);
        if (ustat_cmd->parsed()) return cmd_ustat(kernel_name, ustat_m, input, oracle, accumulation, out_flag, out);
        return cmd_verify(*kind, vflags, *seed, out_flag, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}

} // namespace ustatbench
