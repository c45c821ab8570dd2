#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "dynbl/elastic_net.hpp"
#include "dynbl/errors.hpp"
#include "dynbl/panels.hpp"

namespace dynbl {

/// Per-asset intercepts, factor loadings, and residual variances.
struct FactorFit {
    Eigen::VectorXd alpha;     // [n]
    Eigen::MatrixXd beta;      // [n x J]
    Eigen::VectorXd resid_var; // [n], denominator M-1
};

/// K views: q = P mu + eps, eps ~ N(0, omega). Omega is diagonal here.
struct ViewSet {
    Eigen::VectorXd q;     // [K]
    Eigen::MatrixXd pick;  // [K x n]
    Eigen::MatrixXd omega; // [K x K]

    Eigen::Index size() const { return q.size(); }
};

struct ViewOptions {
    double variance_floor = 1e-10;
    /// 0 keeps one view per asset; otherwise keep the k assets with the
    /// smallest residual variance.
    int max_views = 0;
};

/// Runs one Elastic Net fit per asset column over an aligned window.
inline FactorFit fit_factor_model(const Eigen::MatrixXd& returns, const Eigen::MatrixXd& factors,
                                  const RegularizationParams& reg,
                                  const ElasticNetOptions& opts = {}) {
    const Eigen::Index M = returns.rows();
    const Eigen::Index n = returns.cols();
    const Eigen::Index J = factors.cols();
    if (factors.rows() != M) throw DataError("fit_factor_model: unaligned panels");
    if (M < J + 2)
        throw DataError("fit_factor_model: window length " + std::to_string(M) +
                        " too short for " + std::to_string(J) + " factors");

    FactorFit fit;
    fit.alpha.resize(n);
    fit.beta.resize(n, J);
    fit.resid_var.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        ElasticNetResult r;
        try {
            r = fit_elastic_net(factors, returns.col(i), reg, opts);
        } catch (const NumericalError& e) {
            throw NumericalError("asset " + std::to_string(i) + ": " + e.what());
        }
        fit.alpha(i) = r.coeffs(0);
        fit.beta.row(i) = r.coeffs.tail(J).transpose();
        const Eigen::VectorXd resid =
            returns.col(i) - Eigen::VectorXd::Constant(M, fit.alpha(i)) -
            factors * fit.beta.row(i).transpose();
        const double mean = resid.mean();
        fit.resid_var(i) =
            (resid.array() - mean).square().sum() / static_cast<double>(M - 1);
    }
    return fit;
}

inline FactorFit fit_factor_model(const ReturnPanel& r, const FactorPanel& f,
                                  const RegularizationParams& reg,
                                  const ElasticNetOptions& opts = {}) {
    if (r.dates != f.dates) throw DataError("fit_factor_model: panels not date-aligned");
    return fit_factor_model(r.returns, f.values, reg, opts);
}

/// One absolute view per asset: q = alpha + beta * f_current, confidence
/// from the regression residual variances (floored to stay PD).
inline ViewSet generate_views(const FactorFit& fit, const Eigen::VectorXd& f_current,
                              const ViewOptions& opts = {}) {
    if (!f_current.allFinite()) throw DataError("generate_views: non-finite factor vector");
    if (f_current.size() != fit.beta.cols())
        throw DataError("generate_views: factor dimension mismatch");
    const Eigen::Index n = fit.alpha.size();

    std::vector<Eigen::Index> assets(static_cast<std::size_t>(n));
    std::iota(assets.begin(), assets.end(), 0);
    if (opts.max_views > 0 && opts.max_views < n) {
        std::stable_sort(assets.begin(), assets.end(), [&](Eigen::Index a, Eigen::Index b) {
            return fit.resid_var(a) < fit.resid_var(b);
        });
        assets.resize(static_cast<std::size_t>(opts.max_views));
        std::sort(assets.begin(), assets.end());
    }

    const Eigen::Index K = static_cast<Eigen::Index>(assets.size());
    ViewSet v;
    v.q.resize(K);
    v.pick = Eigen::MatrixXd::Zero(K, n);
    v.omega = Eigen::MatrixXd::Zero(K, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const Eigen::Index i = assets[static_cast<std::size_t>(k)];
        v.q(k) = fit.alpha(i) + fit.beta.row(i).dot(f_current);
        v.pick(k, i) = 1.0;
        v.omega(k, k) = std::max(fit.resid_var(i), opts.variance_floor);
    }
    return v;
}

} // namespace dynbl
