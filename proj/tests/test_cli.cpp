#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch_amalgamated.hpp>
#include <json.hpp>

#include "ustatbench/cli.hpp"
#include "ustatbench/errors.hpp"
#include "ustatbench/io.hpp"

using namespace ustatbench;

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "ustatbench_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run cli(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

} // namespace

TEST_CASE("config file parsing") {
    const auto cfg = ConfigFile::parse("kernel = product # trailing\n"
                                       "n = 10, 20\n"
                                       "\n"
                                       "[clt]\n"
                                       "n = 30\n"
                                       "assert_max.ks_t0_1.0 = 0.5\n");
    CHECK(cfg.global.at("kernel") == "product");
    CHECK(cfg.resolved("clt").at("n") == "30");
    CHECK(cfg.resolved("fclt").at("n") == "10, 20");
    CHECK_FALSE(cfg.resolved("fclt").contains("assert_max.ks_t0_1.0"));
    CHECK_THROWS_AS(ConfigFile::parse("just words\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse("[open\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse("a = 1\na = 2\n"), ConfigError);
}

TEST_CASE("config keys map onto the experiment config") {
    const std::map<std::string, std::string> keys{
        {"kernel", "variance"}, {"distribution", "normal mean=0 sd=1"}, {"n", "100, 200"}, {"t0", "0.25,1"},
        {"replications", "7"},  {"normalizer", "scalar"},              {"bn", "analytic"}, {"level", "inf"},
        {"out", "ignored"},     {"assert_max.x", "1"}};
    const auto cfg = config_from_keys(ExperimentKind::clt, keys);
    CHECK(cfg.kernel == "variance");
    CHECK(cfg.n_values == std::vector<std::size_t>{100, 200});
    CHECK(cfg.t0 == std::vector<double>{0.25, 1.0});
    CHECK(cfg.replications == 7);
    CHECK(cfg.normalizer == NormalizerMode::scalar);
    CHECK(cfg.bn_method == BnMethod::analytic);
    CHECK(std::isinf(*cfg.level_override));
    CHECK_THROWS_AS(config_from_keys(ExperimentKind::clt, {{"bogus", "1"}}), ConfigError);
    CHECK_THROWS_AS(config_from_keys(ExperimentKind::clt, {{"n", "-3"}}), ConfigError);
    CHECK_THROWS_AS(config_from_keys(ExperimentKind::clt, {{"t0", "0"}}), ConfigError);
}

TEST_CASE("sample writes the support-respecting draws deterministically") {
    const auto a = scratch("sample_a");
    const auto b = scratch("sample_b");
    const std::vector<std::string> base{"sample", "--dist", "example-pareto", "--a", "2", "--n", "1000", "--seed", "7",
                                        "--out"};
    auto args = base;
    args.push_back(a.string());
    REQUIRE(cli(args).code == kExitOk);
    args.back() = b.string();
    REQUIRE(cli(args).code == kExitOk);
    CHECK(slurp(a / "samples.csv") == slurp(b / "samples.csv"));
    CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));

    std::istringstream rows(slurp(a / "samples.csv"));
    std::string line;
    std::getline(rows, line);
    CHECK(line == "x");
    std::size_t count = 0;
    while (std::getline(rows, line)) {
        CHECK(std::abs(parse_double(line) - 2.0) >= 1.0);
        ++count;
    }
    CHECK(count == 1000);

    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(manifest.at("files").contains("samples.csv"));
}

TEST_CASE("sample without a required parameter is a usage error") {
    const auto r = cli({"sample", "--dist", "example-pareto", "--n", "10", "--seed", "7", "--out",
                        scratch("sample_bad").string()});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("'a'") != std::string::npos);
    CHECK(cli({"sample", "--dist", "normal", "--n", "10"}).code == kExitConfig);
}

TEST_CASE("ustat on a small file") {
    const auto dir = scratch("ustat");
    std::ofstream(dir / "in.txt") << "x\n1\n2\n3\n";
    const auto r = cli({"ustat", "--kernel", "product", "--m", "2", "--input", (dir / "in.txt").string(), "--oracle",
                        "--out", (dir / "out").string()});
    REQUIRE(r.code == kExitOk);
    const std::string csv = slurp(dir / "out" / "ustat.csv");
    CHECK(csv == "k,U_k,oracle\n2,2,2\n3," + format_double(11.0 / 3.0) + "," + format_double(11.0 / 3.0) + "\n");
    CHECK(r.out.find("max_abs_relative_difference=") != std::string::npos);

    const auto few = cli({"ustat", "--kernel", "product", "--m", "4", "--input", (dir / "in.txt").string(), "--out",
                          (dir / "out2").string()});
    CHECK(few.code == kExitConfig);
}

TEST_CASE("ustat oracle cross-check stays within 1e-10") {
    const auto dir = scratch("ustat_oracle");
    {
        std::ofstream f(dir / "in.txt");
        for (int i = 0; i < 40; ++i) f << format_double(std::sin(i + 1.0) * 3.0) << '\n';
    }
    const auto r = cli({"ustat", "--kernel", "gini", "--m", "2", "--input", (dir / "in.txt").string(), "--oracle",
                        "--out", (dir / "out").string()});
    REQUIRE(r.code == kExitOk);
    const auto pos = r.out.find("max_abs_relative_difference=");
    REQUIRE(pos != std::string::npos);
    const std::string value = r.out.substr(pos + 28, r.out.find('\n', pos) - pos - 28);
    CHECK(parse_double(value) <= 1e-10);
}

TEST_CASE("verify requires a seed") {
    const auto r = cli({"verify", "clt", "--replications", "5"});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("--seed") != std::string::npos);
}

TEST_CASE("verify clt writes the report and honours assertions") {
    const auto dir = scratch("verify_clt");
    std::ofstream(dir / "run.conf") << "kernel = product\n"
                                       "distribution = example-pareto a=2\n"
                                       "n = 100, 200\n"
                                       "replications = 30\n"
                                       "[clt]\n"
                                       "assert_max.ks_t0_1.0 = 1\n"
                                       "assert_min.replications = 30\n";
    const auto pass = cli({"verify", "clt", "--config", (dir / "run.conf").string(), "--seed", "5", "--out",
                           (dir / "a").string()});
    REQUIRE(pass.code == kExitOk);
    CHECK(pass.out.find("PASS assert_max.ks_t0_1.0") != std::string::npos);
    const auto agg = nlohmann::json::parse(slurp(dir / "a" / "aggregates.json"));
    CHECK(agg.contains("ks_t0_1.0"));
    CHECK(agg.at("config.n") == "100,200");
    CHECK(fs::exists(dir / "a" / "plot.csv"));

    // Same config, same hashes.
    REQUIRE(cli({"verify", "clt", "--config", (dir / "run.conf").string(), "--seed", "5", "--workers", "2", "--out",
                 (dir / "b").string()})
                .code == kExitOk);
    const auto ma = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
    const auto mb = nlohmann::json::parse(slurp(dir / "b" / "manifest.json"));
    CHECK(ma.at("files") == mb.at("files"));

    std::ofstream(dir / "fail.conf") << "n = 100\nreplications = 10\nassert_max.ks_t0_1.0 = 0\n";
    const auto fail = cli({"verify", "clt", "--config", (dir / "fail.conf").string(), "--seed", "5", "--out",
                           (dir / "c").string()});
    CHECK(fail.code == kExitAssertion);
    CHECK(fail.out.find("FAIL assert_max.ks_t0_1.0") != std::string::npos);
}

TEST_CASE("trend assertions read the per-n aggregates") {
    const auto dir = scratch("verify_trend");
    std::ofstream(dir / "t.conf") << "kernel = variance\ndistribution = normal mean=0 sd=1\nn = 50, 800\n"
                                     "replications = 40\nassert_last_below_first = median_sup_error_self\n"
                                     "assert_decreasing = median_sup_error_self\n";
    const auto r =
        cli({"verify", "thm3", "--config", (dir / "t.conf").string(), "--seed", "9", "--out", (dir / "o").string()});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("PASS assert_decreasing") != std::string::npos);
    CHECK(r.out.find("PASS assert_last_below_first") != std::string::npos);
}

TEST_CASE("verify miller-sen rejects the heavy-tailed product kernel") {
    const auto r = cli({"verify", "miller-sen", "--seed", "1", "--out", scratch("ms").string()});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("Miller-Sen conditions violated") != std::string::npos);
}

TEST_CASE("verify thm3 with the mean kernel reports a vanishing sup error") {
    const auto dir = scratch("thm3_mean");
    const auto r = cli({"verify", "thm3", "--kernel", "mean", "--m", "1", "--dist", "normal", "--n", "200",
                        "--replications", "20", "--seed", "4", "--out", dir.string()});
    REQUIRE(r.code == kExitOk);
    const auto agg = nlohmann::json::parse(slurp(dir / "aggregates.json"));
    CHECK(agg.at("median_sup_error_self").get<double>() <= 1e-12);
}

TEST_CASE("output directory precedence") {
    const auto dir = scratch("precedence");
    const auto env_dir = dir / "from_env";
    const auto flag_dir = dir / "from_flag";
    std::ofstream(dir / "o.conf") << "n = 20\nreplications = 5\nout = " << (dir / "from_config").string() << "\n";
    const std::vector<std::string> base{"verify", "clt", "--config", (dir / "o.conf").string(), "--seed", "1"};

    REQUIRE(cli(base).code == kExitOk);
    CHECK(fs::exists(dir / "from_config" / "rows.csv"));

    ::setenv(kOutputEnv, env_dir.c_str(), 1);
    REQUIRE(cli(base).code == kExitOk);
    CHECK(fs::exists(env_dir / "rows.csv"));

    auto with_flag = base;
    with_flag.insert(with_flag.end(), {"--out", flag_dir.string()});
    REQUIRE(cli(with_flag).code == kExitOk);
    CHECK(fs::exists(flag_dir / "rows.csv"));
    ::unsetenv(kOutputEnv);
}

TEST_CASE("seed in a config file is rejected") {
    const auto dir = scratch("seedkey");
    std::ofstream(dir / "s.conf") << "seed = 3\n";
    const auto r = cli({"verify", "clt", "--config", (dir / "s.conf").string(), "--seed", "1"});
    CHECK(r.code == kExitConfig);
}

TEST_CASE("per-n assertions") {
    const auto dir = scratch("per_n");
    std::ofstream(dir / "p.conf") << "n = 50, 100\nreplications = 10\nassert_min.replications@50 = 10\n"
                                     "assert_max.ks_t0_1.0@100 = 1\n";
    const auto r =
        cli({"verify", "clt", "--config", (dir / "p.conf").string(), "--seed", "3", "--out", (dir / "o").string()});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("n=100/ks_t0_1.0 = ") != std::string::npos);
}
