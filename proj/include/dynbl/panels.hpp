#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dynbl/csv.hpp"
#include "dynbl/errors.hpp"

namespace dynbl {

/// Date-aligned panel of adjusted closing prices, one column per ticker.
/// Dates are ISO-8601 strings, strictly increasing (lexicographic ==
/// chronological for this format).
struct PricePanel {
    std::vector<std::string> dates;
    std::vector<std::string> tickers;
    Eigen::MatrixXd prices; // [T x n]

    void validate() const {
        if (static_cast<Eigen::Index>(dates.size()) != prices.rows())
            throw DataError("price panel: date count != row count");
        if (static_cast<Eigen::Index>(tickers.size()) != prices.cols())
            throw DataError("price panel: ticker count != column count");
        for (std::size_t t = 1; t < dates.size(); ++t)
            if (dates[t] <= dates[t - 1])
                throw DataError("price panel: duplicate or out-of-order date " + dates[t]);
        for (Eigen::Index r = 0; r < prices.rows(); ++r)
            for (Eigen::Index c = 0; c < prices.cols(); ++c) {
                const double p = prices(r, c);
                if (!std::isfinite(p) || p <= 0.0)
                    throw DataError("non-positive price at row " + std::to_string(r) +
                                    " column " + tickers[static_cast<std::size_t>(c)]);
            }
    }
};

/// Simple per-period returns; row t is dated at the later price in the ratio.
struct ReturnPanel {
    std::vector<std::string> dates;
    std::vector<std::string> tickers;
    Eigen::MatrixXd returns; // [T-1 x n]
};

enum class FactorModelId { ff5, carhart4 };

inline const std::vector<std::string>& factor_names(FactorModelId m) {
    static const std::vector<std::string> ff5 = {"MKTRF", "SMB", "HML", "RMW", "CMA"};
    static const std::vector<std::string> carhart4 = {"MKTRF", "SMB", "HML", "UMD"};
    return m == FactorModelId::ff5 ? ff5 : carhart4;
}

inline FactorModelId parse_factor_model(const std::string& s) {
    if (s == "ff5") return FactorModelId::ff5;
    if (s == "carhart4") return FactorModelId::carhart4;
    throw ConfigError("unknown factor model '" + s + "' (expected ff5 or carhart4)");
}

/// Factor realizations plus the per-period risk-free rate, decimals (0.01 = 1%).
struct FactorPanel {
    std::vector<std::string> dates;
    std::vector<std::string> names;
    Eigen::MatrixXd values; // [T x J]
    Eigen::VectorXd rf;     // [T]
};

/// Parses `date,<ticker>...` and returns a validated panel sorted by date.
inline PricePanel load_price_csv(const std::string& path) {
    auto t = csv::read_file(path);
    if (t.header.empty() || t.header[0] != "date")
        throw DataError(path + ": first header column must be 'date'");
    if (t.header.size() < 2) throw DataError(path + ": no ticker columns");

    PricePanel p;
    p.tickers.assign(t.header.begin() + 1, t.header.end());
    const std::size_t n = p.tickers.size();

    // sort rows by date, then validate
    std::sort(t.rows.begin(), t.rows.end(),
              [](const auto& a, const auto& b) { return a[0] < b[0]; });

    p.prices.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (!csv::is_iso_date(row[0]))
            throw DataError(path + ": malformed date '" + row[0] + "'");
        if (r > 0 && row[0] == t.rows[r - 1][0])
            throw DataError(path + ": duplicate date " + row[0]);
        p.dates.push_back(row[0]);
        for (std::size_t c = 0; c < n; ++c) {
            const double v = csv::parse_double(row[c + 1], path + " row " + row[0]);
            if (!std::isfinite(v) || v <= 0.0)
                throw DataError(path + ": non-positive price at date " + row[0] +
                                " column " + p.tickers[c]);
            p.prices(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    p.validate();
    return p;
}

/// Parses `date,<factors...>,rf` for the given model; factor columns may
/// appear in any order in the file but come out in canonical model order.
inline FactorPanel load_factor_csv(const std::string& path, FactorModelId model) {
    auto t = csv::read_file(path);
    const auto& wanted = factor_names(model);

    auto find_col = [&](const std::string& name) {
        for (std::size_t i = 0; i < t.header.size(); ++i)
            if (t.header[i] == name) return static_cast<int>(i);
        throw DataError(path + ": missing column '" + name + "'");
    };

    const int date_col = find_col("date");
    const int rf_col = find_col("rf");
    std::vector<int> cols;
    for (const auto& name : wanted) cols.push_back(find_col(name));

    std::sort(t.rows.begin(), t.rows.end(),
              [&](const auto& a, const auto& b) { return a[date_col] < b[date_col]; });

    FactorPanel f;
    f.names = wanted;
    const Eigen::Index T = static_cast<Eigen::Index>(t.rows.size());
    const Eigen::Index J = static_cast<Eigen::Index>(wanted.size());
    f.values.resize(T, J);
    f.rf.resize(T);
    for (Eigen::Index r = 0; r < T; ++r) {
        const auto& row = t.rows[static_cast<std::size_t>(r)];
        if (!csv::is_iso_date(row[date_col]))
            throw DataError(path + ": malformed date '" + row[date_col] + "'");
        if (r > 0 && row[date_col] == f.dates.back())
            throw DataError(path + ": duplicate date " + row[date_col]);
        f.dates.push_back(row[date_col]);
        for (Eigen::Index j = 0; j < J; ++j) {
            const double v = csv::parse_double(row[cols[static_cast<std::size_t>(j)]],
                                               path + " row " + row[date_col]);
            if (!std::isfinite(v)) throw DataError(path + ": non-finite factor value");
            f.values(r, j) = v;
        }
        f.rf(r) = csv::parse_double(row[rf_col], path + " rf row " + row[date_col]);
    }
    return f;
}

/// returns[t,i] = prices[t+1,i] / prices[t,i] - 1
inline ReturnPanel compute_returns(const PricePanel& p) {
    if (p.prices.rows() < 2) throw DataError("compute_returns: need at least 2 price rows");
    ReturnPanel r;
    r.tickers = p.tickers;
    r.dates.assign(p.dates.begin() + 1, p.dates.end());
    const Eigen::Index T = p.prices.rows() - 1;
    r.returns = p.prices.bottomRows(T).cwiseQuotient(p.prices.topRows(T)).array() - 1.0;
    return r;
}

/// Restricts both panels to the intersection of their dates, ascending.
inline std::pair<ReturnPanel, FactorPanel> align(const ReturnPanel& r, const FactorPanel& f) {
    std::map<std::string, Eigen::Index> fidx;
    for (std::size_t i = 0; i < f.dates.size(); ++i)
        fidx[f.dates[i]] = static_cast<Eigen::Index>(i);

    std::vector<std::pair<Eigen::Index, Eigen::Index>> keep; // (return row, factor row)
    for (std::size_t i = 0; i < r.dates.size(); ++i) {
        auto it = fidx.find(r.dates[i]);
        if (it != fidx.end()) keep.emplace_back(static_cast<Eigen::Index>(i), it->second);
    }
    if (keep.size() < 2)
        throw DataError("align: fewer than 2 common dates between returns and factors");

    ReturnPanel ro;
    ro.tickers = r.tickers;
    ro.returns.resize(static_cast<Eigen::Index>(keep.size()), r.returns.cols());
    FactorPanel fo;
    fo.names = f.names;
    fo.values.resize(static_cast<Eigen::Index>(keep.size()), f.values.cols());
    fo.rf.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        ro.dates.push_back(r.dates[static_cast<std::size_t>(keep[k].first)]);
        fo.dates.push_back(ro.dates.back());
        ro.returns.row(static_cast<Eigen::Index>(k)) = r.returns.row(keep[k].first);
        fo.values.row(static_cast<Eigen::Index>(k)) = f.values.row(keep[k].second);
        fo.rf(static_cast<Eigen::Index>(k)) = f.rf(keep[k].second);
    }
    return {std::move(ro), std::move(fo)};
}

/// Writes a panel in the same wide layout load_price_csv reads.
inline void write_price_csv(const PricePanel& p, const std::string& path,
                            int significant_digits = 15) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "date";
    for (const auto& tk : p.tickers) out << ',' << tk;
    out << '\n';
    for (Eigen::Index r = 0; r < p.prices.rows(); ++r) {
        out << p.dates[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < p.prices.cols(); ++c)
            out << ',' << csv::format_double(p.prices(r, c), significant_digits);
        out << '\n';
    }
}

} // namespace dynbl
