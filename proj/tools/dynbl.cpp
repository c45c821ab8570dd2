// Command-line front end: wires JSON run configs and CSV panels to the
// library. Subcommands: backtest, compare, simulate, flip, metrics.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dynbl/backtest.hpp"
#include "dynbl/csv.hpp"
#include "dynbl/panels.hpp"
#include "dynbl/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOutputDigits = 10; // all numeric CLI output, documented in README

std::string fmt(double v) { return dynbl::csv::format_double(v, kOutputDigits); }

/// Writes via a temp file + rename so partially written outputs never land.
void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw dynbl::DataError("cannot write file: " + tmp);
        out << content;
    }
    fs::rename(tmp, path);
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key()))
            throw dynbl::ConfigError("unknown config key '" + it.key() + "' in " + where);
}

template <typename T>
void get_if_present(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

struct RunConfig {
    std::string prices_path;
    std::string factors_path;
    dynbl::FactorModelId model = dynbl::FactorModelId::ff5;
    std::optional<std::string> cap_weights_path;
    std::string out_dir = ".";
    dynbl::BacktestConfig bt;
    bool m_min_given = false;
};

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw dynbl::ConfigError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw dynbl::ConfigError(std::string("config parse error: ") + e.what());
    }

    RunConfig c;
    try {
        reject_unknown_keys(j, {"prices", "factors", "factor_model", "cap_weights", "out_dir",
                                "mode", "window", "regularization", "eta", "tau", "mv",
                                "fee_rate", "initial_cash", "max_views"},
                            "config root");
        c.prices_path = j.at("prices").get<std::string>();
        c.factors_path = j.at("factors").get<std::string>();
        if (j.contains("factor_model"))
            c.model = dynbl::parse_factor_model(j.at("factor_model").get<std::string>());
        if (j.contains("cap_weights"))
            c.cap_weights_path = j.at("cap_weights").get<std::string>();
        get_if_present(j, "out_dir", c.out_dir);
        if (j.contains("mode")) c.bt.mode = dynbl::parse_mode(j.at("mode").get<std::string>());
        if (j.contains("window")) {
            const json& w = j.at("window");
            reject_unknown_keys(w, {"m_init", "h", "c_minus", "c_plus", "m_min", "m_max"},
                                "window");
            get_if_present(w, "m_init", c.bt.window.m_init);
            get_if_present(w, "h", c.bt.window.h);
            get_if_present(w, "c_minus", c.bt.window.c_minus);
            get_if_present(w, "c_plus", c.bt.window.c_plus);
            if (w.contains("m_min")) {
                c.bt.window.m_min = w.at("m_min").get<int>();
                c.m_min_given = true;
            }
            get_if_present(w, "m_max", c.bt.window.m_max);
        }
        if (j.contains("regularization")) {
            const json& r = j.at("regularization");
            reject_unknown_keys(r, {"lambda1", "lambda2", "strength"}, "regularization");
            get_if_present(r, "lambda1", c.bt.reg.lambda1);
            get_if_present(r, "lambda2", c.bt.reg.lambda2);
            get_if_present(r, "strength", c.bt.reg.strength);
        }
        get_if_present(j, "eta", c.bt.eta);
        get_if_present(j, "tau", c.bt.tau);
        if (j.contains("mv")) {
            const json& m = j.at("mv");
            reject_unknown_keys(m, {"rho", "box"}, "mv");
            get_if_present(m, "rho", c.bt.mv.rho);
            get_if_present(m, "box", c.bt.mv.box);
        }
        get_if_present(j, "fee_rate", c.bt.fee_rate);
        get_if_present(j, "initial_cash", c.bt.initial_cash);
        get_if_present(j, "max_views", c.bt.views.max_views);
    } catch (const json::exception& e) {
        throw dynbl::ConfigError(std::string("config error: ") + e.what());
    }

    for (const std::string* p : {&c.prices_path, &c.factors_path}) {
        if (!fs::exists(*p)) throw dynbl::ConfigError("referenced path does not exist: " + *p);
    }
    if (c.cap_weights_path && !fs::exists(*c.cap_weights_path))
        throw dynbl::ConfigError("referenced path does not exist: " + *c.cap_weights_path);

    if (!c.m_min_given)
        c.bt.window.m_min = static_cast<int>(dynbl::factor_names(c.model).size()) + 5;
    if (!c.bt.mv.rho_in_typical_range())
        std::cerr << "warning: rho=" << c.bt.mv.rho << " outside the typical [1,10] range\n";
    return c;
}

Eigen::VectorXd load_cap_weights(const std::string& path,
                                 const std::vector<std::string>& tickers) {
    auto t = dynbl::csv::read_file(path);
    if (t.header.size() < 2 || t.header[0] != "ticker" || t.header[1] != "weight")
        throw dynbl::DataError(path + ": expected header ticker,weight");
    std::map<std::string, double> by_ticker;
    for (const auto& row : t.rows)
        by_ticker[row[0]] = dynbl::csv::parse_double(row[1], path);
    Eigen::VectorXd w(static_cast<Eigen::Index>(tickers.size()));
    for (std::size_t i = 0; i < tickers.size(); ++i) {
        auto it = by_ticker.find(tickers[i]);
        if (it == by_ticker.end())
            throw dynbl::DataError(path + ": no weight for ticker " + tickers[i]);
        w(static_cast<Eigen::Index>(i)) = it->second;
    }
    const double s = w.sum();
    if (s <= 0.0) throw dynbl::DataError(path + ": weights must sum to a positive value");
    return w / s;
}

std::string metrics_csv(const dynbl::Metrics& m, double total_fees, double final_value) {
    std::ostringstream out;
    out << "mean_excess_daily,vol_daily,sharpe_daily,sharpe_annualized,max_drawdown,"
           "total_fees,final_account_value\n";
    out << fmt(m.mean_excess_daily) << ',' << fmt(m.vol_daily) << ',' << fmt(m.sharpe_daily)
        << ',' << fmt(m.sharpe_annualized) << ',' << fmt(m.max_drawdown) << ','
        << fmt(total_fees) << ',' << fmt(final_value) << '\n';
    return out.str();
}

int cmd_backtest(const std::string& config_path) {
    RunConfig c = load_run_config(config_path);
    const auto prices = dynbl::load_price_csv(c.prices_path);
    const auto factors = dynbl::load_factor_csv(c.factors_path, c.model);
    if (c.cap_weights_path)
        c.bt.market_weights = load_cap_weights(*c.cap_weights_path, prices.tickers);

    const dynbl::BacktestResult r = dynbl::run_backtest(c.bt, prices, factors);

    fs::create_directories(c.out_dir);
    std::ostringstream traj;
    traj << "date,account_value,M,trigger\n";
    for (std::size_t i = 0; i < r.dates.size(); ++i)
        traj << r.dates[i] << ',' << fmt(r.account_values(static_cast<Eigen::Index>(i))) << ','
             << r.window_sizes[i] << ',' << r.day_triggers[i] << '\n';
    atomic_write(c.out_dir + "/trajectory.csv", traj.str());

    std::ostringstream wh;
    wh << "date,M,trigger\n";
    for (const auto& e : r.window_history)
        wh << e.date << ',' << e.m << ',' << dynbl::to_string(e.trigger) << '\n';
    atomic_write(c.out_dir + "/window_history.csv", wh.str());

    atomic_write(c.out_dir + "/metrics.csv",
                 metrics_csv(r.metrics, r.total_fees,
                             r.account_values(r.account_values.size() - 1)));
    return 0;
}

int cmd_compare(const std::string& config_path, std::optional<double> fee_override) {
    RunConfig c = load_run_config(config_path);
    if (fee_override) c.bt.fee_rate = *fee_override;
    const auto prices = dynbl::load_price_csv(c.prices_path);
    const auto factors = dynbl::load_factor_csv(c.factors_path, c.model);
    if (c.cap_weights_path)
        c.bt.market_weights = load_cap_weights(*c.cap_weights_path, prices.tickers);

    const auto rows = dynbl::compare_strategies(c.bt, prices, factors);

    std::ostringstream out;
    out << "mode,mean_excess_daily_pct,vol_daily,sharpe_daily,sharpe_annualized,"
           "max_drawdown_pct,total_fees,final_account_value,rebalances\n";
    for (const auto& row : rows)
        out << dynbl::to_string(row.mode) << ',' << fmt(100.0 * row.metrics.mean_excess_daily)
            << ',' << fmt(row.metrics.vol_daily) << ',' << fmt(row.metrics.sharpe_daily) << ','
            << fmt(row.metrics.sharpe_annualized) << ','
            << fmt(100.0 * row.metrics.max_drawdown) << ',' << fmt(row.total_fees) << ','
            << fmt(row.final_value) << ',' << row.rebalances << '\n';
    fs::create_directories(c.out_dir);
    atomic_write(c.out_dir + "/summary.csv", out.str());
    std::cout << out.str();
    return 0;
}

int cmd_simulate(const std::string& params_path, const std::string& out_dir, int paths,
                 std::uint64_t seed, int steps, const std::string& start_date) {
    dynbl::GbmParams p = dynbl::load_gbm_params_csv(params_path);
    p.n_paths = paths;
    p.seed = seed;
    p.horizon_steps = steps;
    p.start_date = start_date;

    const auto panels = dynbl::simulate_gbm(p);
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < panels.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "path_%05zu.csv", i);
        const std::string path = out_dir + "/" + name;
        dynbl::write_price_csv(panels[i], path + ".tmp", kOutputDigits);
        fs::rename(path + ".tmp", path);
    }
    return 0;
}

int cmd_flip(const std::string& prices_path, const std::string& out_path) {
    const auto flipped = dynbl::flip_prices(dynbl::load_price_csv(prices_path));
    dynbl::write_price_csv(flipped, out_path + ".tmp", kOutputDigits);
    fs::rename(out_path + ".tmp", out_path);
    return 0;
}

int cmd_metrics(const std::string& account_path, const std::string& out_path) {
    auto t = dynbl::csv::read_file(account_path);
    if (t.header.size() < 2 || t.header[0] != "date")
        throw dynbl::DataError(account_path + ": expected header date,account_value,...");
    const Eigen::Index T = static_cast<Eigen::Index>(t.rows.size());
    if (T < 2) throw dynbl::DataError(account_path + ": need at least 2 rows");
    Eigen::VectorXd values(T);
    for (Eigen::Index i = 0; i < T; ++i)
        values(i) = dynbl::csv::parse_double(t.rows[static_cast<std::size_t>(i)][1],
                                             account_path);
    Eigen::VectorXd rets(T - 1);
    for (Eigen::Index i = 0; i < T - 1; ++i) rets(i) = values(i + 1) / values(i) - 1.0;
    const dynbl::Metrics m =
        dynbl::compute_metrics(rets, Eigen::VectorXd::Zero(T - 1), values);
    const std::string out = metrics_csv(m, 0.0, values(T - 1));
    if (out_path.empty()) std::cout << out;
    else atomic_write(out_path, out);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic Black-Litterman portfolio engine"};
    app.require_subcommand(1);

    std::string config_path, params_path, prices_path, out_path, account_path;
    std::string out_dir = "simulated";
    std::string start_date = "2020-01-01";
    int paths = 1, steps = 252;
    std::uint64_t seed = 0;
    std::optional<double> fee_override;

    auto* backtest = app.add_subcommand("backtest", "run one strategy from a JSON config");
    backtest->add_option("--config", config_path, "run config (JSON)")->required();

    auto* compare = app.add_subcommand("compare", "run all four strategy modes");
    compare->add_option("--config", config_path, "run config (JSON)")->required();
    double fee_value = 0.0;
    auto* fee_opt = compare->add_option("--fee-rate", fee_value, "override turnover fee rate");

    auto* simulate = app.add_subcommand("simulate", "generate GBM price panels");
    simulate->add_option("--params", params_path, "ticker,drift,vol CSV")->required();
    simulate->add_option("--out", out_dir, "output directory");
    simulate->add_option("--paths", paths, "number of sample paths");
    simulate->add_option("--seed", seed, "RNG seed");
    simulate->add_option("--steps", steps, "trading days per path");
    simulate->add_option("--start-date", start_date, "first calendar date");

    auto* flip = app.add_subcommand("flip", "time-reverse a price panel");
    flip->add_option("prices", prices_path, "input price CSV")->required();
    flip->add_option("out", out_path, "output price CSV")->required();

    auto* metrics = app.add_subcommand("metrics", "metrics from an account trajectory CSV");
    metrics->add_option("--account", account_path, "date,account_value CSV")->required();
    metrics->add_option("--out", out_path, "output CSV (stdout if omitted)");

    CLI11_PARSE(app, argc, argv);
    if (*fee_opt) fee_override = fee_value;

    try {
        if (app.got_subcommand(backtest)) return cmd_backtest(config_path);
        if (app.got_subcommand(compare)) return cmd_compare(config_path, fee_override);
        if (app.got_subcommand(simulate))
            return cmd_simulate(params_path, out_dir, paths, seed, steps, start_date);
        if (app.got_subcommand(flip)) return cmd_flip(prices_path, out_path);
        if (app.got_subcommand(metrics)) return cmd_metrics(account_path, out_path);
    } catch (const dynbl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const dynbl::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const dynbl::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
