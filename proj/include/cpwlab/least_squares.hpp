#pragma once

// Small damped (Levenberg-Marquardt style) least-squares driver used by
// the trace and TLS fitters. Jacobian by forward differences, column
// equilibration, damped step by QR of the stacked system, damping factor
// x2 on a rejected step and /3 on an accepted one. Converges on a
// negligible relative step, a negligible residual improvement, gradient
// orthogonality, or a full rejection cascade (numerically stationary).

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>

namespace cpwlab {

struct LsqOptions {
    int max_iterations = 200;
    double step_tol = 1e-10;
    double lambda0 = 1e-3;
    double lambda_reject = 2.0;
    double lambda_accept = 3.0;
    double lambda_max = 1e14;
    // Scaled-gradient orthogonality threshold: resolution limit of the
    // forward-difference Jacobian. Well above the ~1e-8 numerical floor,
    // well below mid-descent values.
    double gradient_tol = 1e-7;
    // Accepted steps improving the sum of squares by less than this
    // relative amount terminate the iteration.
    double ftol = 1e-12;
};

struct LsqResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;   // sigma^2 (J^T J)^-1 at the optimum
    double ssr = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool converged = false;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using ParamPredicate = std::function<bool(const Eigen::VectorXd&)>;

namespace detail {

inline Eigen::MatrixXd forward_jacobian(const ResidualFn& fn, const Eigen::VectorXd& p,
                                        const Eigen::VectorXd& r0,
                                        const Eigen::VectorXd& scale) {
    const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    Eigen::MatrixXd jac(r0.size(), p.size());
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        const double h = sqrt_eps * std::max(std::abs(p[j]), scale[j]);
        Eigen::VectorXd pj = p;
        pj[j] += h;
        jac.col(j) = (fn(pj) - r0) / h;
    }
    return jac;
}

}  // namespace detail

// `scale` sets the differencing step and the convergence metric for
// parameters passing through zero; `valid` rejects steps that leave the
// parameter domain (treated as a failed step: damping increases).
inline LsqResult levenberg_marquardt(const ResidualFn& fn, Eigen::VectorXd p,
                                     const Eigen::VectorXd& scale,
                                     const LsqOptions& opt = {},
                                     const ParamPredicate& valid = nullptr) {
    LsqResult out;
    Eigen::VectorXd r = fn(p);
    double ssr = r.squaredNorm();
    double lambda = opt.lambda0;
    Eigen::MatrixXd jac = detail::forward_jacobian(fn, p, r, scale);
    bool jac_fresh = true;

    int iter = 0;
    bool check_gradient = true;
    for (; iter < opt.max_iterations; ++iter) {
        if (!jac_fresh) {
            jac = detail::forward_jacobian(fn, p, r, scale);
            jac_fresh = true;
            check_gradient = true;
        }

        // Column equilibration: dead columns (flat directions) are frozen.
        Eigen::VectorXd col_norm(p.size());
        for (Eigen::Index j = 0; j < p.size(); ++j) col_norm[j] = jac.col(j).norm();
        const double max_norm = col_norm.maxCoeff();
        Eigen::VectorXd s = Eigen::VectorXd::Zero(p.size());
        for (Eigen::Index j = 0; j < p.size(); ++j)
            if (col_norm[j] > 1e-14 * max_norm && col_norm[j] > 0.0) s[j] = 1.0 / col_norm[j];

        // Gradient orthogonality: the residual being numerically orthogonal
        // to every (equilibrated) Jacobian column is the optimum, whether or
        // not the residual itself is zero.
        if (check_gradient) {
            const double gnorm = ((jac * s.asDiagonal()).transpose() * r).lpNorm<Eigen::Infinity>();
            if (gnorm <= opt.gradient_tol * std::max(r.norm(), 1e-300)) {
                out.converged = true;
                break;
            }
            check_gradient = false;
        }

        // Damped step from the QR factorization of the stacked system
        // [J S; sqrt(lambda) I] delta = [-r; 0]: avoids squaring the
        // condition number the way normal equations would.
        const Eigen::Index m = r.size(), np = p.size();
        const Eigen::MatrixXd js = jac * s.asDiagonal();
        Eigen::MatrixXd stacked(m + np, np);
        stacked.topRows(m) = js;
        stacked.bottomRows(np) =
            std::sqrt(lambda) * Eigen::MatrixXd::Identity(np, np);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + np);
        rhs.head(m) = -r;
        const Eigen::VectorXd step_scaled = stacked.householderQr().solve(rhs);
        const Eigen::VectorXd step = s.asDiagonal() * step_scaled;

        const Eigen::VectorXd p_try = p + step;
        bool ok = step.allFinite() && (!valid || valid(p_try));
        if (ok) {
            Eigen::VectorXd r_try = fn(p_try);
            const double ssr_try = r_try.squaredNorm();
            ok = std::isfinite(ssr_try) && ssr_try <= ssr;
            if (ok) {
                double rel_step = 0.0;
                for (Eigen::Index j = 0; j < p.size(); ++j)
                    rel_step = std::max(rel_step,
                                        std::abs(step[j]) / std::max(std::abs(p[j]), scale[j]));
                const double improvement = ssr - ssr_try;
                p = p_try;
                r = std::move(r_try);
                ssr = ssr_try;
                lambda /= opt.lambda_accept;
                jac_fresh = false;
                if (rel_step < opt.step_tol || improvement <= opt.ftol * ssr) {
                    out.converged = true;
                    ++iter;
                    break;
                }
            }
        }
        if (!ok) {
            lambda *= opt.lambda_reject;
            // A full rejection cascade means no damped step of any size
            // improves the residual: the iterate is numerically stationary.
            if (lambda > opt.lambda_max) {
                out.converged = true;
                ++iter;
                break;
            }
        }
    }

    out.params = p;
    out.ssr = ssr;
    out.iterations = iter;

    // Covariance from the undamped normal equations at the optimum.
    jac = detail::forward_jacobian(fn, p, r, scale);
    const Eigen::Index m = r.size(), n = p.size();
    const double dof = static_cast<double>(m > n ? m - n : 1);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    out.covariance = (ssr / dof) * jtj.completeOrthogonalDecomposition().pseudoInverse();
    return out;
}

}  // namespace cpwlab
