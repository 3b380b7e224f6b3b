#pragma once

#include "dlmap/econometrics/design.hpp"

#include <functional>

namespace dlmap::econometrics {

// Log-likelihood with optional gradient and Hessian.
using Objective = std::function<double(const Vector& theta, Vector* grad, Matrix* hess)>;

struct NewtonConfig {
    std::size_t max_iter = 200;
    double grad_tol = 1e-8;
    int max_halvings = 50;
};

struct NewtonResult {
    Vector theta;
    double loglik = 0.0;
    Vector grad;
    Matrix hess;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> trace;
};

inline double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Ascent direction solving (-H + lambda I) d = g, with lambda raised from
// zero until the shifted matrix is positive definite.
inline Vector ascent_direction(const Matrix& hess, const Vector& grad) {
    Matrix a = -hess;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
        Vector d = llt.solve(grad);
        if (d.allFinite())
            return d;
    }
    double scale = std::max(1e-8, a.diagonal().cwiseAbs().maxCoeff());
    for (double lambda = 1e-8 * scale; lambda < 1e12 * scale; lambda *= 10.0) {
        Matrix shifted = a + lambda * Matrix::Identity(a.rows(), a.cols());
        Eigen::LLT<Matrix> l2(shifted);
        if (l2.info() == Eigen::Success) {
            Vector d = l2.solve(grad);
            if (d.allFinite())
                return d;
        }
    }
    return grad / scale;
}

// Newton ascent with step halving. A step is accepted only if the
// log-likelihood does not fall by more than rounding noise.
inline NewtonResult newton_maximize(const Objective& f, Vector theta, const NewtonConfig& cfg = {}) {
    NewtonResult r;
    Vector g;
    Matrix h;
    double ll = f(theta, &g, &h);
    if (!std::isfinite(ll))
        throw Error(ErrorKind::convergence, "log-likelihood is not finite at the starting values");
    r.trace.push_back(ll);
    for (r.iterations = 0; r.iterations < cfg.max_iter; ++r.iterations) {
        if (max_abs(g) < cfg.grad_tol) {
            r.converged = true;
            break;
        }
        Vector d = ascent_direction(h, g);
        double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(ll));
        double t = 1.0;
        bool accepted = false;
        Vector next;
        double ll_next = 0.0;
        // Inside the quadratic region the predicted gain drowns in the
        // summation error of the log-likelihood; there the full step is
        // taken and the gradient decides.
        const bool tiny = g.dot(d) < 1e3 * noise;
        for (int k = 0; k <= cfg.max_halvings; ++k, t *= 0.5) {
            next = theta + t * d;
            ll_next = f(next, nullptr, nullptr);
            if (std::isfinite(ll_next) && (tiny || ll_next >= ll - noise)) {
                accepted = true;
                break;
            }
        }
        if (!accepted)
            break;
        bool stalled = ll_next - ll <= noise && (next - theta).cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + max_abs(theta));
        theta = next;
        ll = f(theta, &g, &h);
        r.trace.push_back(ll);
        if (stalled) {
            r.converged = max_abs(g) < cfg.grad_tol;
            ++r.iterations;
            break;
        }
    }
    if (!r.converged && max_abs(g) < cfg.grad_tol)
        r.converged = true;
    r.theta = theta;
    r.loglik = ll;
    r.grad = g;
    r.hess = h;
    return r;
}

} // namespace dlmap::econometrics
