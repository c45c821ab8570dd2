#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "dynbl/errors.hpp"

namespace dynbl {

/// Mean-variance problem parameters: risk aversion and the symmetric box
/// bound on each weight. Feasibility requires n * box >= 1.
struct MvConfig {
    double rho = 2.5;
    double box = 0.1;

    void validate(Eigen::Index n) const {
        if (box <= 0.0 || box > 1.0) throw ConfigError("MvConfig: box must be in (0,1]");
        if (rho <= 0.0) throw ConfigError("MvConfig: rho must be positive");
        if (static_cast<double>(n) * box < 1.0 - 1e-12)
            throw NumericalError("infeasible: n * box < 1");
    }

    bool rho_in_typical_range() const { return rho >= 1.0 && rho <= 10.0; }
};

struct PortfolioWeights {
    Eigen::VectorXd w;
};

namespace detail {

/// Symmetrize and clip negative eigenvalues to zero, plus a tiny jitter.
inline Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& sigma, double jitter = 1e-10) {
    Eigen::MatrixXd s = 0.5 * (sigma + sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.eigenvalues().minCoeff() >= 0.0) return s;
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    s = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    s = 0.5 * (s + s.transpose()).eval();
    s += jitter * Eigen::MatrixXd::Identity(s.rows(), s.cols());
    return s;
}

/// Exact projection onto { sum w = 1, -box <= w_i <= box } via bisection on
/// the shift theta in w_i = clip(v_i - theta, -box, box).
inline Eigen::VectorXd project_budget_box(const Eigen::VectorXd& v, double box) {
    const Eigen::Index n = v.size();
    auto sum_at = [&](double theta) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            s += std::clamp(v(i) - theta, -box, box);
        return s;
    };
    double lo = v.minCoeff() - box - 1.0, hi = v.maxCoeff() + box + 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (sum_at(mid) > 1.0) lo = mid; else hi = mid;
    }
    const double theta = 0.5 * (lo + hi);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = std::clamp(v(i) - theta, -box, box);
    // absorb the bisection residual into an unclamped coordinate
    double gap = 1.0 - w.sum();
    for (Eigen::Index i = 0; i < n && gap != 0.0; ++i) {
        const double room_up = box - w(i), room_dn = w(i) + box;
        const double step = std::clamp(gap, -room_dn, room_up);
        w(i) += step;
        gap -= step;
    }
    return w;
}

/// FISTA on the smooth objective with exact projection; fallback path when
/// the active-set method stalls.
inline Eigen::VectorXd projected_gradient(const Eigen::MatrixXd& A, const Eigen::VectorXd& mu,
                                          double box, const Eigen::VectorXd& w0,
                                          double tol = 1e-10, int max_iters = 50000) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    const double L = std::max(2.0 * es.eigenvalues().maxCoeff(), 1e-12);
    Eigen::VectorXd w = w0, z = w0;
    double t = 1.0;
    for (int it = 0; it < max_iters; ++it) {
        const Eigen::VectorXd grad = 2.0 * A * z - mu;
        const Eigen::VectorXd w_next = project_budget_box(z - grad / L, box);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        z = w_next + ((t - 1.0) / t_next) * (w_next - w);
        const double delta = (w_next - w).lpNorm<Eigen::Infinity>();
        w = w_next;
        t = t_next;
        if (delta < tol) break;
    }
    return w;
}

} // namespace detail

/// Max-norm of the KKT stationarity residual of the box-and-budget QP at w,
/// with the budget multiplier fitted by least squares over the coordinates
/// strictly inside the box (or by breakpoint scan when none are). Zero iff
/// w is optimal.
inline double kkt_residual(const PortfolioWeights& pw, const Eigen::VectorXd& mu,
                           const Eigen::MatrixXd& sigma, const MvConfig& cfg,
                           double active_tol = 1e-9) {
    const Eigen::Index n = mu.size();
    const Eigen::VectorXd g = 2.0 * cfg.rho * (sigma * pw.w) - mu;

    std::vector<Eigen::Index> inactive, at_upper, at_lower;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (pw.w(i) >= cfg.box - active_tol) at_upper.push_back(i);
        else if (pw.w(i) <= -cfg.box + active_tol) at_lower.push_back(i);
        else inactive.push_back(i);
    }

    auto residual_at = [&](double nu) {
        double r = 0.0;
        for (auto i : inactive) r = std::max(r, std::abs(g(i) + nu));
        // upper-active needs multiplier -(g+nu) >= 0, lower-active needs g+nu >= 0
        for (auto i : at_upper) r = std::max(r, std::max(0.0, g(i) + nu));
        for (auto i : at_lower) r = std::max(r, std::max(0.0, -(g(i) + nu)));
        return r;
    };

    if (!inactive.empty()) {
        double nu = 0.0;
        for (auto i : inactive) nu -= g(i);
        nu /= static_cast<double>(inactive.size());
        return residual_at(nu);
    }
    // all coordinates at a bound: scan the breakpoints -g_i of the piecewise
    // linear residual for the best multiplier
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) best = std::min(best, residual_at(-g(i)));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            best = std::min(best, residual_at(-0.5 * (g(i) + g(j))));
    return best;
}

/// Solves  max_w  mu' w - rho w' Sigma w   s.t.  sum w = 1, |w_i| <= box
/// with a primal active-set method on the box constraints (projected
/// gradient as a fallback). Deterministic; the returned point satisfies the
/// KKT conditions to 1e-6.
inline PortfolioWeights solve_mean_variance(const Eigen::VectorXd& mu,
                                            const Eigen::MatrixXd& sigma, const MvConfig& cfg) {
    const Eigen::Index n = mu.size();
    if (sigma.rows() != n || sigma.cols() != n)
        throw DataError("solve_mean_variance: dimension mismatch");
    cfg.validate(n);
    if (!mu.allFinite() || !sigma.allFinite())
        throw NumericalError("solve_mean_variance: non-finite input");

    const Eigen::MatrixXd A = cfg.rho * detail::psd_repair(sigma); // min w'Aw - mu'w
    const double b = cfg.box;

    enum class State { free, upper, lower };
    std::vector<State> state(static_cast<std::size_t>(n), State::free);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));

    const double feas_tol = 1e-12;
    const double dual_tol = 1e-10;
    const int max_outer = 50 * static_cast<int>(n) + 200;
    bool converged = false;

    for (int outer = 0; outer < max_outer; ++outer) {
        std::vector<Eigen::Index> F;
        for (Eigen::Index i = 0; i < n; ++i)
            if (state[static_cast<std::size_t>(i)] == State::free) F.push_back(i);
        const Eigen::Index nf = static_cast<Eigen::Index>(F.size());

        Eigen::VectorXd target = w;
        double nu = 0.0;
        if (nf > 0) {
            // KKT system for the free block: [2A_FF 1; 1' 0][w_F; nu] = [rhs; budget]
            Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + 1, nf + 1);
            Eigen::VectorXd rhs(nf + 1);
            double bound_sum = 0.0;
            Eigen::VectorXd w_bound = w;
            for (Eigen::Index i = 0; i < n; ++i)
                if (state[static_cast<std::size_t>(i)] != State::free) bound_sum += w(i);
            for (Eigen::Index a = 0; a < nf; ++a) {
                for (Eigen::Index c = 0; c < nf; ++c) kkt(a, c) = 2.0 * A(F[a], F[c]);
                kkt(a, nf) = 1.0;
                kkt(nf, a) = 1.0;
                double cross = 0.0;
                for (Eigen::Index i = 0; i < n; ++i)
                    if (state[static_cast<std::size_t>(i)] != State::free)
                        cross += 2.0 * A(F[a], i) * w(i);
                rhs(a) = mu(F[a]) - cross;
            }
            rhs(nf) = 1.0 - bound_sum;
            const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
            if (!sol.allFinite()) break; // singular subproblem, use the fallback
            for (Eigen::Index a = 0; a < nf; ++a) target(F[a]) = sol(a);
            nu = sol(nf);
        }

        const Eigen::VectorXd d = target - w;
        const double step_norm = d.lpNorm<Eigen::Infinity>();

        if (step_norm > feas_tol) {
            // longest feasible step toward the subproblem optimum
            double alpha = 1.0;
            Eigen::Index blocking = -1;
            State block_side = State::upper;
            for (auto i : F) {
                if (d(i) > feas_tol && w(i) + d(i) > b) {
                    const double a_i = (b - w(i)) / d(i);
                    if (a_i < alpha) { alpha = a_i; blocking = i; block_side = State::upper; }
                } else if (d(i) < -feas_tol && w(i) + d(i) < -b) {
                    const double a_i = (-b - w(i)) / d(i);
                    if (a_i < alpha) { alpha = a_i; blocking = i; block_side = State::lower; }
                }
            }
            w += std::max(alpha, 0.0) * d;
            if (blocking >= 0) {
                state[static_cast<std::size_t>(blocking)] = block_side;
                w(blocking) = block_side == State::upper ? b : -b;
                continue;
            }
        }

        // at the subproblem optimum for this working set: check bound multipliers
        const Eigen::VectorXd g = 2.0 * A * w - mu;
        if (nf == 0) {
            // fit nu to the interval the bound multipliers allow
            double lo = -std::numeric_limits<double>::infinity();
            double hi = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < n; ++i) {
                if (state[static_cast<std::size_t>(i)] == State::upper) hi = std::min(hi, -g(i));
                else lo = std::max(lo, -g(i));
            }
            if (lo <= hi + dual_tol) { converged = true; break; }
            nu = 0.5 * (lo + hi);
        }
        double worst = -dual_tol;
        Eigen::Index worst_i = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto s = state[static_cast<std::size_t>(i)];
            if (s == State::free) continue;
            const double lambda = s == State::upper ? -(g(i) + nu) : (g(i) + nu);
            if (lambda < worst) { worst = lambda; worst_i = i; }
        }
        if (worst_i < 0) { converged = true; break; }
        state[static_cast<std::size_t>(worst_i)] = State::free;
    }

    if (!converged)
        w = detail::projected_gradient(A, mu, b, w);

    // clean up roundoff against the contract tolerances
    w = w.cwiseMax(-b).cwiseMin(b);
    const double gap = 1.0 - w.sum();
    if (std::abs(gap) > 0.0) {
        double slack = gap;
        for (Eigen::Index i = 0; i < n && slack != 0.0; ++i) {
            const double step = std::clamp(slack, -(w(i) + b), b - w(i));
            w(i) += step;
            slack -= step;
        }
    }

    PortfolioWeights pw{w};
    if (std::abs(pw.w.sum() - 1.0) > 1e-8 || (pw.w.cwiseAbs().array() > b + 1e-10).any())
        throw NumericalError("solve_mean_variance: returned point infeasible");
    if (kkt_residual(pw, mu, sigma, cfg) > 1e-6) {
        pw.w = detail::projected_gradient(A, mu, b, pw.w);
        if (kkt_residual(pw, mu, sigma, cfg) > 1e-6)
            throw NumericalError("solve_mean_variance: did not reach KKT tolerance");
    }
    return pw;
}

} // namespace dynbl
