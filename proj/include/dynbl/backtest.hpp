#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dynbl/black_litterman.hpp"
#include "dynbl/errors.hpp"
#include "dynbl/factor_model.hpp"
#include "dynbl/optimizer.hpp"
#include "dynbl/panels.hpp"

namespace dynbl {

enum class Trigger { shrink, grow, hold };

inline const char* to_string(Trigger t) {
    switch (t) {
        case Trigger::shrink: return "shrink";
        case Trigger::grow: return "grow";
        default: return "hold";
    }
}

/// Volatility-adaptive window sizing: shrink by (1 - c_minus) when realized
/// block volatility jumps past (1+h) of the previous block, grow by c_plus
/// when it falls below (1-h), clamped to [m_min, m_max].
struct WindowPolicy {
    int m_init = 60;
    double h = 0.1;
    double c_minus = 0.16;
    double c_plus = 1.16;
    int m_min = 10;
    int m_max = 252;

    void validate(Eigen::Index n_factors) const {
        if (h <= 0.0 || h >= 1.0) throw ConfigError("WindowPolicy: h must be in (0,1)");
        if (c_minus <= 0.0 || c_minus >= 1.0)
            throw ConfigError("WindowPolicy: c_minus must be in (0,1)");
        if (c_plus < 1.0) throw ConfigError("WindowPolicy: c_plus must be >= 1");
        if (m_min < static_cast<int>(n_factors) + 2)
            throw ConfigError("WindowPolicy: m_min must be at least J + 2");
        if (m_init < m_min || m_init > m_max)
            throw ConfigError("WindowPolicy: need m_min <= m_init <= m_max");
    }
};

inline std::pair<int, Trigger> adjust_window(double sigma_now, double sigma_prev,
                                             const WindowPolicy& policy, int m) {
    if (sigma_now < 0.0 || sigma_prev < 0.0)
        throw DataError("adjust_window: volatilities must be non-negative");
    int next = m;
    Trigger trig = Trigger::hold;
    if (sigma_now >= (1.0 + policy.h) * sigma_prev) {
        next = static_cast<int>(std::lround((1.0 - policy.c_minus) * m));
        trig = Trigger::shrink;
    } else if (sigma_now <= (1.0 - policy.h) * sigma_prev) {
        next = static_cast<int>(std::lround(policy.c_plus * m));
        trig = Trigger::grow;
    }
    next = std::clamp(next, policy.m_min, policy.m_max);
    return {next, trig};
}

/// fee = fee_rate * sum_i |new_i - prev_i|
inline double apply_turnover_cost(const Eigen::VectorXd& prev_holdings,
                                  const Eigen::VectorXd& new_holdings, double fee_rate) {
    if (prev_holdings.size() != new_holdings.size())
        throw DataError("apply_turnover_cost: dimension mismatch");
    if (fee_rate < 0.0 || fee_rate >= 1.0)
        throw ConfigError("apply_turnover_cost: fee_rate must be in [0,1)");
    return fee_rate * (new_holdings - prev_holdings).cwiseAbs().sum();
}

struct Metrics {
    double mean_excess_daily = 0.0;
    double vol_daily = 0.0;
    double sharpe_daily = 0.0;
    double sharpe_annualized = 0.0;
    double max_drawdown = 0.0;
};

/// Excess-return and drawdown statistics. A zero-volatility series yields a
/// signed-infinity Sharpe sentinel (0 when the mean is also 0).
inline Metrics compute_metrics(const Eigen::VectorXd& portfolio_returns,
                               const Eigen::VectorXd& rf,
                               const Eigen::VectorXd& account_values) {
    if (portfolio_returns.size() == 0 || account_values.size() == 0)
        throw DataError("compute_metrics: empty series");
    if (portfolio_returns.size() != rf.size())
        throw DataError("compute_metrics: returns and rf length mismatch");
    if ((account_values.array() <= 0.0).any())
        throw DataError("compute_metrics: account values must be positive");

    Metrics m;
    const Eigen::VectorXd excess = portfolio_returns - rf;
    const Eigen::Index T = excess.size();
    m.mean_excess_daily = excess.mean();
    if (T > 1)
        m.vol_daily = std::sqrt((excess.array() - m.mean_excess_daily).square().sum() /
                                static_cast<double>(T - 1));
    if (m.vol_daily > 0.0) {
        m.sharpe_daily = m.mean_excess_daily / m.vol_daily;
    } else if (m.mean_excess_daily != 0.0) {
        m.sharpe_daily = std::copysign(std::numeric_limits<double>::infinity(),
                                       m.mean_excess_daily);
    }
    m.sharpe_annualized = m.sharpe_daily * std::sqrt(252.0);

    double peak = account_values(0);
    for (Eigen::Index t = 0; t < account_values.size(); ++t) {
        peak = std::max(peak, account_values(t));
        m.max_drawdown = std::max(m.max_drawdown, (peak - account_values(t)) / peak);
    }
    return m;
}

enum class StrategyMode { dynamic_bl, dynamic_mv_no_bl, static_mv, market_equal_weight };

inline const char* to_string(StrategyMode m) {
    switch (m) {
        case StrategyMode::dynamic_bl: return "dynamic_bl";
        case StrategyMode::dynamic_mv_no_bl: return "dynamic_mv_no_bl";
        case StrategyMode::static_mv: return "static_mv";
        default: return "market_equal_weight";
    }
}

inline StrategyMode parse_mode(const std::string& s) {
    if (s == "dynamic_bl") return StrategyMode::dynamic_bl;
    if (s == "dynamic_mv_no_bl") return StrategyMode::dynamic_mv_no_bl;
    if (s == "static_mv") return StrategyMode::static_mv;
    if (s == "market_equal_weight") return StrategyMode::market_equal_weight;
    throw ConfigError("unknown strategy mode '" + s + "'");
}

struct BacktestConfig {
    WindowPolicy window;
    RegularizationParams reg;
    double eta = 0.94;
    double tau = 0.025;
    MvConfig mv;
    double fee_rate = 0.01;
    double initial_cash = 1'000'000.0;
    StrategyMode mode = StrategyMode::dynamic_bl;
    /// equal-weight market weights unless a cap-weight vector is supplied
    Eigen::VectorXd market_weights;
    ViewOptions views;
    /// equal-weight mode rebalances back to 1/n every day instead of
    /// buy-and-hold (off by default, matching the benchmark definition)
    bool market_rebalance_daily = false;

    void validate() const {
        if (fee_rate < 0.0 || fee_rate >= 1.0) throw ConfigError("fee_rate must be in [0,1)");
        if (initial_cash <= 0.0) throw ConfigError("initial_cash must be positive");
        if (eta < 0.0 || eta > 1.0) throw ConfigError("eta must be in [0,1]");
        if (tau <= 0.0 || tau >= 1.0) throw ConfigError("tau must be in (0,1)");
        reg.validate();
    }
};

struct WindowEvent {
    std::string date;
    int m = 0;
    Trigger trigger = Trigger::hold;
};

struct BacktestResult {
    std::vector<std::string> dates;        // trading dates
    Eigen::VectorXd account_values;        // end-of-day, fee-inclusive
    Eigen::VectorXd daily_returns;         // pre-fee portfolio returns w'r
    Eigen::VectorXd daily_fees;            // turnover fee charged that day
    std::vector<int> window_sizes;         // window size in effect per day
    std::vector<std::string> day_triggers; // resize event on that day, or ""
    std::vector<std::pair<std::string, PortfolioWeights>> weight_history;
    std::vector<WindowEvent> window_history;
    Metrics metrics;
    double total_fees = 0.0;
};

namespace detail {

struct Estimate {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
};

inline Estimate estimate_block(const BacktestConfig& cfg, const Eigen::MatrixXd& win_returns,
                               const Eigen::MatrixXd& win_factors) {
    Estimate est;
    if (cfg.mode == StrategyMode::dynamic_bl) {
        const FactorFit fit = fit_factor_model(win_returns, win_factors, cfg.reg);
        const Eigen::VectorXd f_current = win_factors.row(win_factors.rows() - 1).transpose();
        BlInputs in;
        in.sigma = sample_covariance(win_returns);
        in.tau = cfg.tau;
        in.views = generate_views(fit, f_current, cfg.views);
        const Eigen::Index n = win_returns.cols();
        const Eigen::VectorXd w_mkt =
            cfg.market_weights.size() == n
                ? cfg.market_weights
                : Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
        in.pi = implied_returns(in.sigma, w_mkt, cfg.mv.rho);
        est.mu = bl_elastic_net(in, cfg.reg);
        const Eigen::VectorXd r_latest = win_returns.row(win_returns.rows() - 1).transpose();
        est.sigma = ewma_covariance(bl_closed_form(in).sigma_hat, r_latest, cfg.eta);
    } else {
        est.mu = win_returns.colwise().mean().transpose();
        est.sigma = sample_covariance(win_returns);
    }
    return est;
}

} // namespace detail

/// Runs the dynamic sliding-window strategy (or one of the benchmark modes)
/// over aligned return/factor data. Fees are charged on turnover at each
/// rebalance; within a block, share quantities are held fixed.
inline BacktestResult run_backtest(const BacktestConfig& cfg, const PricePanel& prices,
                                   const FactorPanel& factors) {
    cfg.validate();
    auto [rp, fp] = align(compute_returns(prices), factors);
    const Eigen::Index T = rp.returns.rows();
    const Eigen::Index n = rp.returns.cols();
    const Eigen::Index J = fp.values.cols();
    cfg.window.validate(J);
    cfg.mv.validate(n);
    if (T < cfg.window.m_init + 1)
        throw DataError("run_backtest: need at least m_init + 1 aligned rows, have " +
                        std::to_string(T));

    BacktestResult res;
    const Eigen::Index first = cfg.window.m_init;
    const Eigen::Index days = T - first;
    res.account_values.resize(days);
    res.daily_returns.resize(days);
    res.daily_fees.setZero(days);

    double account = cfg.initial_cash;
    Eigen::VectorXd holdings = Eigen::VectorXd::Zero(n);
    int m_current = cfg.window.m_init;
    double sigma_prev = -1.0; // previous block volatility, unset for first block
    const Eigen::VectorXd w_equal = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));

    Eigen::Index t = first;
    while (t < T) {
        // estimate and solve for this block's weights
        PortfolioWeights w_star;
        const bool once = cfg.mode == StrategyMode::static_mv ||
                          cfg.mode == StrategyMode::market_equal_weight;
        if (cfg.mode == StrategyMode::market_equal_weight) {
            w_star.w = w_equal;
        } else {
            const Eigen::Index m_eff = std::min<Eigen::Index>(m_current, t);
            const auto est = detail::estimate_block(
                cfg, rp.returns.middleRows(t - m_eff, m_eff),
                fp.values.middleRows(t - m_eff, m_eff));
            try {
                w_star = solve_mean_variance(est.mu, est.sigma, cfg.mv);
            } catch (const Error& e) {
                throw NumericalError("at " + rp.dates[static_cast<std::size_t>(t)] + ": " +
                                     e.what());
            }
        }
        res.weight_history.emplace_back(rp.dates[static_cast<std::size_t>(t)], w_star);

        const Eigen::Index block_len = once ? T - t : std::min<Eigen::Index>(m_current, T - t);
        std::vector<double> block_returns;
        block_returns.reserve(static_cast<std::size_t>(block_len));

        for (Eigen::Index s = t; s < t + block_len; ++s) {
            const Eigen::VectorXd r = rp.returns.row(s).transpose();
            double fee = 0.0;
            const bool rebalance =
                s == t || (cfg.mode == StrategyMode::market_equal_weight &&
                           cfg.market_rebalance_daily);
            if (rebalance) {
                const Eigen::VectorXd target = w_star.w * account;
                fee = apply_turnover_cost(holdings, target, cfg.fee_rate);
                holdings = target;
            }
            const double gross = holdings.dot(r) / account; // pre-fee portfolio return
            holdings = holdings.cwiseProduct(Eigen::VectorXd::Ones(n) + r);
            const double next_account = account * (1.0 + gross) - fee;
            if (next_account <= 0.0)
                throw NumericalError("account wiped out at " +
                                     rp.dates[static_cast<std::size_t>(s)]);
            // deduct the fee pro-rata so holdings keep summing to the account
            holdings *= next_account / holdings.sum();
            account = next_account;
            res.total_fees += fee;

            const Eigen::Index idx = s - first;
            res.account_values(idx) = account;
            res.daily_returns(idx) = gross;
            res.daily_fees(idx) = fee;
            res.dates.push_back(rp.dates[static_cast<std::size_t>(s)]);
            res.window_sizes.push_back(m_current);
            res.day_triggers.emplace_back();
            block_returns.push_back(gross);
        }
        t += block_len;

        if (!once && t < T) {
            // realized block volatility from pre-fee daily returns
            double sigma_block = 0.0;
            if (block_returns.size() > 1) {
                double mean = 0.0;
                for (double x : block_returns) mean += x;
                mean /= static_cast<double>(block_returns.size());
                double ss = 0.0;
                for (double x : block_returns) ss += (x - mean) * (x - mean);
                sigma_block = std::sqrt(ss / static_cast<double>(block_returns.size() - 1));
            }
            if (sigma_prev >= 0.0) {
                const auto [m_next, trig] =
                    adjust_window(sigma_block, sigma_prev, cfg.window, m_current);
                res.window_history.push_back(
                    {rp.dates[static_cast<std::size_t>(t - 1)], m_next, trig});
                res.day_triggers.back() = to_string(trig);
                m_current = m_next;
            }
            sigma_prev = sigma_block;
        }
    }

    res.metrics = compute_metrics(res.daily_returns, fp.rf.segment(first, days),
                                  res.account_values);
    return res;
}

struct StrategySummary {
    StrategyMode mode;
    Metrics metrics;
    double total_fees = 0.0;
    double final_value = 0.0;
    int rebalances = 0;
};

/// Runs all four modes on the same data and returns one summary row each.
inline std::vector<StrategySummary> compare_strategies(const BacktestConfig& base,
                                                       const PricePanel& prices,
                                                       const FactorPanel& factors) {
    std::vector<StrategySummary> rows;
    for (StrategyMode mode :
         {StrategyMode::market_equal_weight, StrategyMode::static_mv,
          StrategyMode::dynamic_mv_no_bl, StrategyMode::dynamic_bl}) {
        BacktestConfig cfg = base;
        cfg.mode = mode;
        const BacktestResult r = run_backtest(cfg, prices, factors);
        rows.push_back({mode, r.metrics, r.total_fees,
                        r.account_values(r.account_values.size() - 1),
                        static_cast<int>(r.weight_history.size())});
    }
    return rows;
}

} // namespace dynbl
