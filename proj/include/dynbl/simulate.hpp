#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynbl/csv.hpp"
#include "dynbl/errors.hpp"
#include "dynbl/panels.hpp"

namespace dynbl {

/// Per-asset GBM parameters; drift and volatility are annualized decimals.
struct GbmParams {
    std::vector<std::string> tickers;
    Eigen::VectorXd drift_annual;
    Eigen::VectorXd vol_annual;
    Eigen::VectorXd s0;
    double dt = 1.0 / 252.0;
    int horizon_steps = 252;
    int n_paths = 1;
    std::uint64_t seed = 0;
    std::string start_date = "2020-01-01";

    void validate() const {
        const Eigen::Index n = static_cast<Eigen::Index>(tickers.size());
        if (drift_annual.size() != n || vol_annual.size() != n || s0.size() != n)
            throw DataError("GbmParams: per-asset vectors must match ticker count");
        if ((vol_annual.array() < 0.0).any()) throw DataError("GbmParams: negative volatility");
        if ((s0.array() <= 0.0).any()) throw DataError("GbmParams: initial prices must be positive");
        if (dt <= 0.0 || horizon_steps < 1 || n_paths < 1)
            throw DataError("GbmParams: dt, horizon_steps, n_paths must be positive");
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Small counter-based normal generator: each (path, asset) pair owns an
/// independent stream, so output does not depend on generation order.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t path, std::uint64_t asset)
        : state_(splitmix64(splitmix64(seed ^ splitmix64(path + 1)) ^ splitmix64(asset + 17))) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // Box-Muller on two uniforms in (0,1)
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        const double rad = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.283185307179586476925286766559;
        spare_ = rad * std::sin(two_pi * u2);
        have_spare_ = true;
        return rad * std::cos(two_pi * u2);
    }

private:
    double uniform() {
        state_ = splitmix64(state_);
        return static_cast<double>(state_ >> 11) * 0x1.0p-53;
    }
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// days-from-civil / civil-from-days (proleptic Gregorian)
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

inline std::vector<std::string> date_sequence(const std::string& start, int count) {
    if (!csv::is_iso_date(start)) throw DataError("malformed start date '" + start + "'");
    const int y = std::stoi(start.substr(0, 4));
    const int m = std::stoi(start.substr(5, 2));
    const int d = std::stoi(start.substr(8, 2));
    const std::int64_t base = days_from_civil(y, m, d);
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        int yy, mm, dd;
        civil_from_days(base + i, yy, mm, dd);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", yy, mm, dd);
        out.emplace_back(buf);
    }
    return out;
}

} // namespace detail

/// Exact log-normal GBM stepping:
///   S_{t+1} = S_t * exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z)
/// One price panel per path; streams are seeded per (path, asset) so results
/// are independent of generation order.
inline std::vector<PricePanel> simulate_gbm(const GbmParams& params) {
    params.validate();
    const Eigen::Index n = static_cast<Eigen::Index>(params.tickers.size());
    const int T = params.horizon_steps;
    const auto dates = detail::date_sequence(params.start_date, T + 1);

    std::vector<PricePanel> panels;
    panels.reserve(static_cast<std::size_t>(params.n_paths));
    for (int path = 0; path < params.n_paths; ++path) {
        PricePanel p;
        p.dates = dates;
        p.tickers = params.tickers;
        p.prices.resize(T + 1, n);
        for (Eigen::Index a = 0; a < n; ++a) {
            detail::NormalStream z(params.seed, static_cast<std::uint64_t>(path),
                                   static_cast<std::uint64_t>(a));
            const double drift =
                (params.drift_annual(a) - 0.5 * params.vol_annual(a) * params.vol_annual(a)) *
                params.dt;
            const double diffusion = params.vol_annual(a) * std::sqrt(params.dt);
            double s = params.s0(a);
            p.prices(0, a) = s;
            for (int t = 1; t <= T; ++t) {
                s *= std::exp(drift + diffusion * z.next());
                p.prices(t, a) = s;
            }
        }
        panels.push_back(std::move(p));
    }
    return panels;
}

/// Reads `ticker,drift,vol` rows; values may carry a trailing '%' (or use a
/// `_pct` header suffix), in which case they are divided by 100.
inline GbmParams load_gbm_params_csv(const std::string& path) {
    auto t = csv::read_file(path);
    int ticker_col = -1, drift_col = -1, vol_col = -1;
    bool drift_pct = false, vol_pct = false;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        const auto& h = t.header[i];
        if (h == "ticker") ticker_col = static_cast<int>(i);
        else if (h == "drift") drift_col = static_cast<int>(i);
        else if (h == "drift_pct") { drift_col = static_cast<int>(i); drift_pct = true; }
        else if (h == "vol") vol_col = static_cast<int>(i);
        else if (h == "vol_pct") { vol_col = static_cast<int>(i); vol_pct = true; }
    }
    if (ticker_col < 0 || drift_col < 0 || vol_col < 0)
        throw DataError(path + ": need columns ticker, drift, vol");

    auto parse = [&](const std::string& raw, bool header_pct, const std::string& ctx) {
        std::string s = raw;
        bool pct = header_pct;
        if (!s.empty() && s.back() == '%') {
            s.pop_back();
            pct = true;
        }
        const double v = csv::parse_double(s, ctx);
        return pct ? v / 100.0 : v;
    };

    GbmParams p;
    const Eigen::Index rows = static_cast<Eigen::Index>(t.rows.size());
    p.drift_annual.resize(rows);
    p.vol_annual.resize(rows);
    p.s0 = Eigen::VectorXd::Constant(rows, 100.0);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = t.rows[static_cast<std::size_t>(r)];
        p.tickers.push_back(row[static_cast<std::size_t>(ticker_col)]);
        p.drift_annual(r) = parse(row[static_cast<std::size_t>(drift_col)], drift_pct,
                                  path + " drift row " + p.tickers.back());
        p.vol_annual(r) = parse(row[static_cast<std::size_t>(vol_col)], vol_pct,
                                path + " vol row " + p.tickers.back());
        if (p.vol_annual(r) < 0.0)
            throw DataError(path + ": negative volatility for " + p.tickers.back());
    }
    return p;
}

/// Per-asset time reversal of the price rows; dates keep their original
/// ascending order.
inline PricePanel flip_prices(const PricePanel& p) {
    if (p.prices.rows() < 1) throw DataError("flip_prices: empty panel");
    PricePanel out = p;
    out.prices = p.prices.colwise().reverse();
    return out;
}

} // namespace dynbl
