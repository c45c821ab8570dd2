#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include "dynbl/panels.hpp"
#include "dynbl/simulate.hpp"
#include "test_util.hpp"

using testutil::TempDir;
using testutil::read_file;
using testutil::write_file;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs the built CLI binary through the shell, capturing streams.
RunResult run_cli(const TempDir& dir, const std::string& args) {
    const std::string out_path = dir.file("cli_stdout.txt");
    const std::string err_path = dir.file("cli_stderr.txt");
    const std::string cmd =
        std::string(DYNBL_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out_path);
    r.err = read_file(err_path);
    return r;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, sep)) out.push_back(field);
    return out;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

/// Writes a small synthetic price + factor fixture and a matching config.
struct Fixture {
    std::string prices;
    std::string factors;
    std::string config;
    int n_return_rows = 0;
};

Fixture make_fixture(const TempDir& dir, const std::string& extra_json = "") {
    dynbl::GbmParams p;
    p.tickers = {"AA", "BB", "CC", "DD"};
    p.drift_annual = Eigen::VectorXd::Constant(4, 0.08);
    p.vol_annual = Eigen::VectorXd::LinSpaced(4, 0.15, 0.30);
    p.s0 = Eigen::VectorXd::Constant(4, 100.0);
    p.horizon_steps = 150;
    p.seed = 2024;
    const auto panel = dynbl::simulate_gbm(p)[0];

    Fixture f;
    f.prices = dir.file("prices.csv");
    dynbl::write_price_csv(panel, f.prices, 10);

    std::mt19937_64 rng(99);
    std::normal_distribution<double> nd(0.0, 0.005);
    std::ostringstream fac;
    fac << "date,MKTRF,SMB,HML,RMW,CMA,rf\n";
    for (const auto& d : panel.dates) {
        fac << d;
        for (int j = 0; j < 5; ++j) fac << ',' << nd(rng);
        fac << ",0.0001\n";
    }
    f.factors = dir.file("factors.csv");
    write_file(f.factors, fac.str());

    f.config = dir.file("config.json");
    write_file(f.config, "{\n"
                         "  \"prices\": \"" + f.prices + "\",\n"
                         "  \"factors\": \"" + f.factors + "\",\n"
                         "  \"factor_model\": \"ff5\",\n"
                         "  \"mode\": \"dynamic_bl\",\n"
                         "  \"out_dir\": \"" + dir.file("out") + "\",\n"
                         "  \"mv\": {\"rho\": 2.5, \"box\": 0.3},\n"
                         "  \"regularization\": {\"lambda1\": 0.5, \"lambda2\": 0.5, "
                         "\"strength\": 0.5}" + extra_json + "\n}\n");
    f.n_return_rows = p.horizon_steps; // 150 returns, first 60 consumed as warm-up
    return f;
}

} // namespace

TEST_CASE("backtest happy path writes the three outputs") {
    TempDir dir("cli_bt");
    const auto f = make_fixture(dir);
    const auto r = run_cli(dir, "backtest --config " + f.config);
    INFO(r.err);
    REQUIRE(r.exit_code == 0);

    const auto traj = lines_of(read_file(dir.file("out/trajectory.csv")));
    REQUIRE(traj.size() == static_cast<std::size_t>(f.n_return_rows - 60 + 1));
    CHECK(traj[0] == "date,account_value,M,trigger");
    CHECK(std::count(traj[1].begin(), traj[1].end(), ',') == 3);

    const auto metrics = lines_of(read_file(dir.file("out/metrics.csv")));
    REQUIRE(metrics.size() == 2);
    CHECK(split(metrics[1], ',').size() == 7);

    CHECK(!read_file(dir.file("out/window_history.csv")).empty());
}

TEST_CASE("unknown config key fails fast and names the key") {
    TempDir dir("cli_badkey");
    auto f = make_fixture(dir);
    write_file(f.config, "{\n"
                         "  \"prices\": \"" + f.prices + "\",\n"
                         "  \"factors\": \"" + f.factors + "\",\n"
                         "  \"regularization\": {\"lamda1\": 0.5}\n}\n");
    const auto r = run_cli(dir, "backtest --config " + f.config);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("lamda1") != std::string::npos);
}

TEST_CASE("missing referenced file is a config error") {
    TempDir dir("cli_missing");
    const std::string cfg = dir.file("c.json");
    write_file(cfg, "{\"prices\": \"" + dir.file("nope.csv") +
                        "\", \"factors\": \"" + dir.file("nope2.csv") + "\"}\n");
    const auto r = run_cli(dir, "backtest --config " + cfg);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("does not exist") != std::string::npos);
}

TEST_CASE("bad market data is a data error") {
    TempDir dir("cli_baddata");
    auto f = make_fixture(dir);
    write_file(f.prices, "date,AA\n2020-01-01,100\n2020-01-02,0\n");
    write_file(f.config, "{\"prices\": \"" + f.prices + "\", \"factors\": \"" + f.factors +
                             "\"}\n");
    const auto r = run_cli(dir, "backtest --config " + f.config);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("non-positive price") != std::string::npos);
}

TEST_CASE("compare is deterministic and emits four strategy rows") {
    TempDir dir("cli_cmp");
    const auto f = make_fixture(dir);
    REQUIRE(run_cli(dir, "compare --config " + f.config).exit_code == 0);
    const std::string first = read_file(dir.file("out/summary.csv"));
    REQUIRE(run_cli(dir, "compare --config " + f.config).exit_code == 0);
    CHECK(read_file(dir.file("out/summary.csv")) == first);

    const auto rows = lines_of(first);
    REQUIRE(rows.size() == 5);
    const std::vector<std::string> modes = {"market_equal_weight", "static_mv",
                                            "dynamic_mv_no_bl", "dynamic_bl"};
    for (std::size_t i = 0; i < 4; ++i) {
        const auto fields = split(rows[i + 1], ',');
        REQUIRE(fields.size() == 9);
        CHECK(fields[0] == modes[i]);
        for (std::size_t k = 1; k < fields.size(); ++k)
            CHECK_NOTHROW(std::stod(fields[k])); // all numeric columns parse
    }
}

TEST_CASE("compare fee override zeroes the fee column") {
    TempDir dir("cli_fee");
    const auto f = make_fixture(dir);
    REQUIRE(run_cli(dir, "compare --config " + f.config + " --fee-rate 0").exit_code == 0);
    const auto rows = lines_of(read_file(dir.file("out/summary.csv")));
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 1; i < rows.size(); ++i)
        CHECK(split(rows[i], ',')[6] == "0"); // total_fees
}

TEST_CASE("flip twice round-trips the file") {
    TempDir dir("cli_flip");
    const auto f = make_fixture(dir);
    REQUIRE(run_cli(dir, "flip " + f.prices + " " + dir.file("rev.csv")).exit_code == 0);
    REQUIRE(run_cli(dir, "flip " + dir.file("rev.csv") + " " + dir.file("back.csv"))
                .exit_code == 0);
    CHECK(read_file(dir.file("back.csv")) == read_file(f.prices));
    CHECK(read_file(dir.file("rev.csv")) != read_file(f.prices));
}

TEST_CASE("simulate is deterministic in the seed") {
    TempDir dir("cli_sim");
    write_file(dir.file("params.csv"), "ticker,drift,vol\nAAPL,0.744%,36.94%\nMSFT,0.1%,25%\n");
    const std::string base =
        "simulate --params " + dir.file("params.csv") + " --paths 2 --steps 30 --seed 7 --out ";
    REQUIRE(run_cli(dir, base + dir.file("s1")).exit_code == 0);
    REQUIRE(run_cli(dir, base + dir.file("s2")).exit_code == 0);
    for (const char* name : {"path_00000.csv", "path_00001.csv"}) {
        const std::string a = read_file(dir.file("s1/") + name);
        REQUIRE(!a.empty());
        CHECK(a == read_file(dir.file("s2/") + name));
    }
    CHECK(read_file(dir.file("s1/path_00000.csv")) !=
          read_file(dir.file("s1/path_00001.csv")));
}

TEST_CASE("metrics from an account trajectory") {
    TempDir dir("cli_metrics");
    write_file(dir.file("acct.csv"),
               "date,account_value\n2020-01-01,100\n2020-01-02,110\n2020-01-03,99\n");
    const auto r = run_cli(dir, "metrics --account " + dir.file("acct.csv") + " --out " +
                                    dir.file("m.csv"));
    REQUIRE(r.exit_code == 0);
    const auto rows = lines_of(read_file(dir.file("m.csv")));
    REQUIRE(rows.size() == 2);
    const auto fields = split(rows[1], ',');
    REQUIRE(fields.size() == 7);
    CHECK_THAT(std::stod(fields[4]), Catch::Matchers::WithinAbs(0.1, 1e-9)); // max drawdown
    CHECK_THAT(std::stod(fields[6]), Catch::Matchers::WithinAbs(99.0, 1e-9));
}
