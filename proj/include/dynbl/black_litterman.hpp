#pragma once

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "dynbl/elastic_net.hpp"
#include "dynbl/errors.hpp"
#include "dynbl/factor_model.hpp"

namespace dynbl {

/// Everything the posterior needs: implied returns Pi, prior covariance
/// Sigma, confidence scale tau (Q = tau * Sigma), and the view set.
struct BlInputs {
    Eigen::VectorXd pi;
    Eigen::MatrixXd sigma;
    double tau = 0.025;
    ViewSet views;

    Eigen::MatrixXd q_mat() const { return tau * sigma; }

    void validate() const {
        const Eigen::Index n = pi.size();
        if (sigma.rows() != n || sigma.cols() != n)
            throw DataError("BlInputs: sigma dimension mismatch");
        if (tau <= 0.0 || tau >= 1.0) throw ConfigError("BlInputs: tau must be in (0,1)");
        if (views.size() > 0 && views.pick.cols() != n)
            throw DataError("BlInputs: pick matrix column mismatch");
    }
};

/// Stacked regression y = B mu + eps with block-diagonal noise covariance V.
struct StackedSystem {
    Eigen::VectorXd y; // [n+K]
    Eigen::MatrixXd b; // [(n+K) x n], top block identity
    Eigen::MatrixXd v; // [(n+K) x (n+K)]
};

struct BlEstimate {
    Eigen::VectorXd mu_hat;
    Eigen::MatrixXd sigma_hat;
};

namespace detail {

inline void check_condition(const Eigen::MatrixXd& m, const char* what,
                            double threshold = 1e12) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0 || hi / lo > threshold)
        throw NumericalError(std::string("singular or ill-conditioned matrix: ") + what);
}

} // namespace detail

/// Pi = 2 rho Sigma w_mkt, the gradient-zero condition of the mean-variance
/// objective at the market portfolio.
inline Eigen::VectorXd implied_returns(const Eigen::MatrixXd& sigma,
                                       const Eigen::VectorXd& w_mkt, double rho) {
    if (sigma.rows() != w_mkt.size() || sigma.cols() != w_mkt.size())
        throw DataError("implied_returns: dimension mismatch");
    if (rho <= 0.0) throw ConfigError("implied_returns: rho must be positive");
    return 2.0 * rho * sigma * w_mkt;
}

/// Unbiased sample covariance (denominator M-1), symmetrized, with a small
/// diagonal jitter when the smallest eigenvalue is not positive.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& window, double jitter = 1e-8) {
    const Eigen::Index M = window.rows();
    if (M < 2) throw DataError("sample_covariance: window too short");
    const Eigen::RowVectorXd mean = window.colwise().mean();
    const Eigen::MatrixXd centered = window.rowwise() - mean;
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(M - 1);
    cov = 0.5 * (cov + cov.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0)
        cov += jitter * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
    return cov;
}

/// Closed-form posterior:
///   mu_hat    = Pi + Q P' (P Q P' + Omega)^-1 (q - P Pi)
///   sigma_hat = Sigma + (Q^-1 + P' Omega^-1 P)^-1
/// With no views this reduces to mu_hat = Pi, sigma_hat = Sigma + Q.
inline BlEstimate bl_closed_form(const BlInputs& in) {
    in.validate();
    const Eigen::Index n = in.pi.size();
    const Eigen::MatrixXd Q = in.q_mat();

    BlEstimate out;
    if (in.views.size() == 0) {
        out.mu_hat = in.pi;
        out.sigma_hat = in.sigma + Q;
        return out;
    }

    const Eigen::MatrixXd& P = in.views.pick;
    const Eigen::MatrixXd& Om = in.views.omega;
    const Eigen::MatrixXd M = P * Q * P.transpose() + Om;
    detail::check_condition(M, "P Q P' + Omega");

    const Eigen::LDLT<Eigen::MatrixXd> mldlt(M);
    out.mu_hat = in.pi + Q * P.transpose() * mldlt.solve(in.views.q - P * in.pi);

    detail::check_condition(Q, "Q");
    detail::check_condition(Om, "Omega");
    const Eigen::MatrixXd Qinv =
        Eigen::LDLT<Eigen::MatrixXd>(Q).solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd OmInvP = Eigen::LDLT<Eigen::MatrixXd>(Om).solve(P);
    Eigen::MatrixXd inner = Qinv + P.transpose() * OmInvP;
    inner = 0.5 * (inner + inner.transpose()).eval();
    Eigen::MatrixXd correction =
        Eigen::LDLT<Eigen::MatrixXd>(inner).solve(Eigen::MatrixXd::Identity(n, n));
    correction = 0.5 * (correction + correction.transpose()).eval();
    out.sigma_hat = in.sigma + correction;
    out.sigma_hat = 0.5 * (out.sigma_hat + out.sigma_hat.transpose()).eval();
    return out;
}

inline StackedSystem make_stacked_system(const BlInputs& in) {
    in.validate();
    const Eigen::Index n = in.pi.size();
    const Eigen::Index K = in.views.size();
    StackedSystem s;
    s.y.resize(n + K);
    s.y.head(n) = in.pi;
    s.b.resize(n + K, n);
    s.b.topRows(n) = Eigen::MatrixXd::Identity(n, n);
    s.v = Eigen::MatrixXd::Zero(n + K, n + K);
    s.v.topLeftCorner(n, n) = in.q_mat();
    if (K > 0) {
        s.y.tail(K) = in.views.q;
        s.b.bottomRows(K) = in.views.pick;
        s.v.bottomRightCorner(K, K) = in.views.omega;
    }
    return s;
}

/// Solves the whitened Elastic Net WLS problem
///   min_mu (y - B mu)' V^-1 (y - B mu) + strength (l2 ||mu||^2 + l1 ||mu||_1)
/// by factoring the two diagonal blocks of V independently and running the
/// coordinate-descent core with no intercept. With both lambdas zero this
/// reproduces the closed-form posterior mean.
inline Eigen::VectorXd bl_elastic_net(const StackedSystem& sys, const RegularizationParams& reg,
                                      double tol = 1e-12, int max_sweeps = 100000) {
    const Eigen::Index n = sys.b.cols();
    const Eigen::Index total = sys.y.size();
    const Eigen::Index K = total - n;

    Eigen::MatrixXd bw(total, n); // whitened design
    Eigen::VectorXd yw(total);

    const Eigen::LLT<Eigen::MatrixXd> lltQ(sys.v.topLeftCorner(n, n));
    if (lltQ.info() != Eigen::Success)
        throw NumericalError("bl_elastic_net: Q block of V is not positive definite");
    yw.head(n) = lltQ.matrixL().solve(sys.y.head(n));
    bw.topRows(n) = lltQ.matrixL().solve(sys.b.topRows(n));

    if (K > 0) {
        const Eigen::LLT<Eigen::MatrixXd> lltOm(sys.v.bottomRightCorner(K, K));
        if (lltOm.info() != Eigen::Success)
            throw NumericalError("bl_elastic_net: Omega block of V is not positive definite");
        yw.tail(K) = lltOm.matrixL().solve(sys.y.tail(K));
        bw.bottomRows(K) = lltOm.matrixL().solve(sys.b.bottomRows(K));
    }

    const Eigen::VectorXd mask = Eigen::VectorXd::Ones(n);
    return detail::coordinate_descent(bw, yw, reg, mask, tol, max_sweeps).coeffs;
}

inline Eigen::VectorXd bl_elastic_net(const BlInputs& in, const RegularizationParams& reg,
                                      double tol = 1e-12, int max_sweeps = 100000) {
    return bl_elastic_net(make_stacked_system(in), reg, tol, max_sweeps);
}

/// Sigma_EWMA = eta * sigma_hat + (1 - eta) * r r'
inline Eigen::MatrixXd ewma_covariance(const Eigen::MatrixXd& sigma_hat,
                                       const Eigen::VectorXd& r, double eta) {
    if (sigma_hat.rows() != r.size() || sigma_hat.cols() != r.size())
        throw DataError("ewma_covariance: dimension mismatch");
    if (eta < 0.0 || eta > 1.0) throw ConfigError("ewma_covariance: eta must be in [0,1]");
    return eta * sigma_hat + (1.0 - eta) * r * r.transpose();
}

} // namespace dynbl
