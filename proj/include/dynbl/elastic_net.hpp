#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "dynbl/errors.hpp"

namespace dynbl {

/// Elastic Net mixing weights. lambda1 + lambda2 must be 1 (or both 0 to
/// disable regularization); `strength` scales the overall penalty.
struct RegularizationParams {
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    double strength = 1.0;

    void validate() const {
        if (lambda1 < 0.0 || lambda2 < 0.0 || strength < 0.0)
            throw ConfigError("regularization parameters must be non-negative");
        const double s = lambda1 + lambda2;
        if (s != 0.0 && std::abs(s - 1.0) > 1e-12)
            throw ConfigError("lambda1 + lambda2 must equal 1 (or both 0 to disable)");
    }

    bool disabled() const { return strength == 0.0 || lambda1 + lambda2 == 0.0; }
};

struct ElasticNetOptions {
    double tol = 1e-8;     // max-abs coefficient change per sweep
    int max_sweeps = 10000;
    bool penalize_intercept = true;
};

struct ElasticNetResult {
    Eigen::VectorXd coeffs;
    std::vector<double> sweep_objectives;
    int sweeps = 0;
};

namespace detail {

inline double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

/// Cyclic coordinate descent for
///   min_c ||y - Z c||^2 + strength * sum_j m_j (lambda2 c_j^2 + lambda1 |c_j|)
/// where m_j in {0,1} marks penalized coefficients. Columns are scaled to
/// unit RMS internally for descent stability; the penalty stays in natural
/// units and coefficients are reported un-scaled.
inline ElasticNetResult coordinate_descent(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                           const RegularizationParams& reg,
                                           const Eigen::VectorXd& penalty_mask, double tol,
                                           int max_sweeps) {
    const Eigen::Index m = Z.rows();
    const Eigen::Index p = Z.cols();
    if (y.size() != m) throw NumericalError("coordinate_descent: dimension mismatch");
    if (!Z.allFinite() || !y.allFinite())
        throw NumericalError("coordinate_descent: non-finite input");
    reg.validate();

    Eigen::VectorXd scale(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double rms = std::sqrt(Z.col(j).squaredNorm() / static_cast<double>(m));
        scale(j) = rms > 0.0 ? rms : 1.0;
    }
    Eigen::MatrixXd Zs = Z * scale.cwiseInverse().asDiagonal();
    Eigen::VectorXd colsq(p);
    for (Eigen::Index j = 0; j < p; ++j) colsq(j) = Zs.col(j).squaredNorm();

    const double s = reg.strength;
    const double l1 = reg.lambda1;
    const double l2 = reg.lambda2;

    Eigen::VectorXd c = Eigen::VectorXd::Zero(p); // scaled-coordinate coefficients
    Eigen::VectorXd resid = y;

    ElasticNetResult out;
    auto objective = [&]() {
        double pen = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double beta = c(j) / scale(j);
            pen += penalty_mask(j) * (l2 * beta * beta + l1 * std::abs(beta));
        }
        return resid.squaredNorm() + s * pen;
    };

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double cj_old = c(j);
            // partial residual correlation
            double rho = Zs.col(j).dot(resid) + colsq(j) * cj_old;
            const double mj = penalty_mask(j);
            const double thresh = mj * s * l1 / (2.0 * scale(j));
            const double denom = colsq(j) + mj * s * l2 / (scale(j) * scale(j));
            double cj_new = 0.0;
            if (denom > 0.0) cj_new = soft_threshold(rho, thresh) / denom;
            if (cj_new != cj_old) {
                resid -= Zs.col(j) * (cj_new - cj_old);
                c(j) = cj_new;
                max_delta = std::max(max_delta, std::abs(cj_new - cj_old) / scale(j));
            }
        }
        out.sweep_objectives.push_back(objective());
        out.sweeps = sweep + 1;
        if (max_delta < tol) {
            out.coeffs = c.cwiseQuotient(scale);
            return out;
        }
    }
    throw NumericalError("coordinate descent did not converge in " +
                         std::to_string(max_sweeps) + " sweeps");
}

} // namespace detail

/// Fits y ~ intercept + X beta with the Elastic Net penalty applied to the
/// stacked [intercept; beta] vector (the intercept is penalized by default).
/// Returns [intercept, beta...].
inline ElasticNetResult fit_elastic_net(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        const RegularizationParams& reg,
                                        const ElasticNetOptions& opts = {}) {
    const Eigen::Index m = X.rows();
    if (m < 2) throw NumericalError("fit_elastic_net: need at least 2 observations");
    Eigen::MatrixXd Z(m, X.cols() + 1);
    Z.col(0).setOnes();
    Z.rightCols(X.cols()) = X;
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(Z.cols());
    mask(0) = opts.penalize_intercept ? 1.0 : 0.0;
    return detail::coordinate_descent(Z, y, reg, mask, opts.tol, opts.max_sweeps);
}

} // namespace dynbl
