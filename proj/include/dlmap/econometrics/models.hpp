#pragma once

#include "dlmap/econometrics/design.hpp"
#include "dlmap/econometrics/newton.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <numbers>

namespace dlmap::econometrics {

// ---------------------------------------------------------------- normal

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double log_norm_pdf(double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi); }

namespace detail {
// 1 - 1/x^2 + 3/x^4 - 15/x^6, the tail series of Phi(x) * (-x) / phi(x).
inline double tail_series(double x) {
    double u = 1.0 / (x * x);
    return 1.0 - u + 3.0 * u * u - 15.0 * u * u * u;
}
} // namespace detail

inline double log_norm_cdf(double x) {
    if (x > 0.0)
        return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
    if (x > -30.0)
        return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
    return log_norm_pdf(x) - std::log(-x) + std::log(detail::tail_series(x));
}

// phi(x) / Phi(x)
inline double mills(double x) {
    if (x > -30.0)
        return std::exp(log_norm_pdf(x) - log_norm_cdf(x));
    return -x / detail::tail_series(x);
}

// ---------------------------------------------------------------- results

enum class ModelKind { probit, tobit, negbin, mnlogit, poisson };

inline const char* to_string(ModelKind k) {
    switch (k) {
    case ModelKind::probit: return "probit";
    case ModelKind::tobit: return "tobit";
    case ModelKind::negbin: return "negbin";
    case ModelKind::mnlogit: return "mnlogit";
    case ModelKind::poisson: return "poisson";
    }
    return "?";
}

inline ModelKind parse_model(std::string_view s) {
    if (s == "probit") return ModelKind::probit;
    if (s == "tobit") return ModelKind::tobit;
    if (s == "negbin") return ModelKind::negbin;
    if (s == "mnlogit") return ModelKind::mnlogit;
    if (s == "poisson") return ModelKind::poisson;
    fail("unknown model '" + std::string(s) + "'");
}

struct FitResult {
    ModelKind kind = ModelKind::probit;
    std::vector<std::string> names;
    Vector coef;
    Matrix cov;
    double loglik = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> trace;
    double grad_max = 0.0;
    std::size_t n = 0;
    // Columns of the mean design, in order.
    std::vector<std::string> mean_names;
    // mnlogit: all levels and the reference index.
    std::vector<std::string> levels;
    std::size_t reference = 0;
    double censor_point = 0.0;

    Vector se() const { return cov.diagonal().cwiseMax(0.0).cwiseSqrt(); }

    std::optional<std::size_t> index(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name)
                return i;
        return std::nullopt;
    }

    double coefficient(const std::string& name) const {
        auto i = index(name);
        require(i.has_value(), "no coefficient named '" + name + "'");
        return coef(static_cast<Eigen::Index>(*i));
    }
};

// Inverse of the observed information; NaN when singular.
inline Matrix covariance_from_hessian(const Matrix& hess) {
    Matrix info = -hess;
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        return Matrix::Constant(hess.rows(), hess.cols(), std::numeric_limits<double>::quiet_NaN());
    Matrix cov = ldlt.solve(Matrix::Identity(hess.rows(), hess.cols()));
    return 0.5 * (cov + cov.transpose());
}

inline FitResult make_result(ModelKind kind, const NewtonResult& nr, std::vector<std::string> names,
                             const DesignMatrix& d) {
    FitResult f;
    f.kind = kind;
    f.names = std::move(names);
    f.coef = nr.theta;
    f.cov = covariance_from_hessian(nr.hess);
    f.loglik = nr.loglik;
    f.iterations = nr.iterations;
    f.converged = nr.converged;
    f.trace = nr.trace;
    f.grad_max = max_abs(nr.grad);
    f.n = d.rows();
    f.mean_names = d.names;
    return f;
}

inline void require_converged(const NewtonResult& nr, const char* model) {
    if (!nr.converged)
        throw Error(ErrorKind::convergence, std::string(model) + " did not converge after " +
                                                std::to_string(nr.iterations) + " iterations (max gradient " +
                                                format_double(max_abs(nr.grad)) + ")");
}

// Accumulates sum_i w_i x_i x_i' into an existing block.
inline Matrix weighted_cross(const Matrix& x, const Vector& w) { return x.transpose() * w.asDiagonal() * x; }

// ---------------------------------------------------------------- probit

inline double probit_loglik(const DesignMatrix& d, const Vector& beta, Vector* grad, Matrix* hess) {
    Vector eta = d.x * beta;
    const auto n = d.x.rows();
    double ll = 0.0;
    Vector g(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double q = d.y(i) > 0.5 ? 1.0 : -1.0;
        double u = q * eta(i);
        ll += log_norm_cdf(u);
        double lam = mills(u);
        g(i) = q * lam;
        w(i) = -lam * (u + lam);
    }
    if (grad)
        *grad = d.x.transpose() * g;
    if (hess)
        *hess = weighted_cross(d.x, w);
    return ll;
}

inline bool is_dummy_column(const Matrix& x, Eigen::Index j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (x(i, j) != 0.0 && x(i, j) != 1.0)
            return false;
    return true;
}

// A 0/1 column whose 0-rows or 1-rows all share one outcome drives its
// coefficient to infinity.
inline void check_dummy_separation(const DesignMatrix& d) {
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) {
        const auto& name = d.names[static_cast<std::size_t>(j)];
        if (name == intercept_name || !is_dummy_column(d.x, j))
            continue;
        for (double side : {0.0, 1.0}) {
            int seen = 0; // bit 0: y=0 present, bit 1: y=1 present
            std::size_t count = 0;
            for (Eigen::Index i = 0; i < d.x.rows(); ++i)
                if (d.x(i, j) == side) {
                    seen |= d.y(i) > 0.5 ? 2 : 1;
                    ++count;
                }
            if (count > 0 && seen != 3)
                fail("perfect separation: outcome is constant where '" + name + "' = " +
                     (side == 0.0 ? "0" : "1"));
        }
    }
}

inline double column_sd(const Matrix& x, Eigen::Index j) {
    double mean = x.col(j).mean();
    return std::sqrt((x.col(j).array() - mean).square().sum() / std::max<double>(1.0, static_cast<double>(x.rows() - 1)));
}

inline FitResult fit_probit(const DesignMatrix& d, const NewtonConfig& cfg = {}) {
    d.validate();
    for (Eigen::Index i = 0; i < d.y.size(); ++i)
        require(d.y(i) == 0.0 || d.y(i) == 1.0, "probit response must be 0/1");
    require(d.y.minCoeff() != d.y.maxCoeff(), "probit response is constant");
    check_full_rank(d);
    check_dummy_separation(d);
    auto f = [&](const Vector& b, Vector* g, Matrix* h) { return probit_loglik(d, b, g, h); };
    auto nr = newton_maximize(f, Vector::Zero(d.x.cols()), cfg);
    // Divergence along a separating direction shows up as an implausibly
    // large standardized coefficient.
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) {
        const auto& name = d.names[static_cast<std::size_t>(j)];
        if (name == intercept_name)
            continue;
        if (std::abs(nr.theta(j)) * column_sd(d.x, j) > 10.0)
            fail("perfect separation suspected: coefficient on '" + name + "' diverges");
    }
    require_converged(nr, "probit");
    return make_result(ModelKind::probit, nr, d.names, d);
}

// ---------------------------------------------------------------- tobit

// theta = [beta; log sigma]; observations at or below the censor point are
// treated as censored.
inline double tobit_loglik(const DesignMatrix& d, double censor, const Vector& theta, Vector* grad, Matrix* hess) {
    const auto p = d.x.cols(), n = d.x.rows();
    Vector beta = theta.head(p);
    double tau = theta(p), sigma = std::exp(tau);
    Vector eta = d.x * beta;
    double ll = 0.0;
    Vector gb = Vector::Zero(p), hbt = Vector::Zero(p);
    Vector wbb(n);
    double gt = 0.0, htt = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (d.y(i) <= censor) {
            double z = (censor - eta(i)) / sigma;
            ll += log_norm_cdf(z);
            double lam = mills(z);
            double dlam = -lam * (z + lam);
            gb -= (lam / sigma) * d.x.row(i).transpose();
            gt += -lam * z;
            wbb(i) = dlam / (sigma * sigma);
            hbt += ((dlam * z + lam) / sigma) * d.x.row(i).transpose();
            htt += dlam * z * z + lam * z;
        } else {
            double r = (d.y(i) - eta(i)) / sigma;
            ll += log_norm_pdf(r) - tau;
            gb += (r / sigma) * d.x.row(i).transpose();
            gt += -1.0 + r * r;
            wbb(i) = -1.0 / (sigma * sigma);
            hbt += (-2.0 * r / sigma) * d.x.row(i).transpose();
            htt += -2.0 * r * r;
        }
    }
    if (grad) {
        grad->resize(p + 1);
        grad->head(p) = gb;
        (*grad)(p) = gt;
    }
    if (hess) {
        hess->resize(p + 1, p + 1);
        hess->topLeftCorner(p, p) = weighted_cross(d.x, wbb);
        hess->col(p).head(p) = hbt;
        hess->row(p).head(p) = hbt.transpose();
        (*hess)(p, p) = htt;
    }
    return ll;
}

inline Vector least_squares(const Matrix& x, const Vector& y) { return x.colPivHouseholderQr().solve(y); }

inline FitResult fit_tobit(const DesignMatrix& d, double censor = 0.0, const NewtonConfig& cfg = {}) {
    d.validate();
    require(d.y.minCoeff() >= censor, "tobit response falls below the censoring point");
    std::size_t censored = 0;
    for (Eigen::Index i = 0; i < d.y.size(); ++i)
        censored += d.y(i) <= censor;
    require(censored < d.rows(), "all observations are censored");
    check_full_rank(d);
    const auto p = d.x.cols();
    Vector start(p + 1);
    start.head(p) = least_squares(d.x, d.y);
    Vector resid = d.y - d.x * start.head(p);
    double s2 = resid.squaredNorm() / static_cast<double>(d.rows());
    start(p) = 0.5 * std::log(std::max(s2, 1e-12));
    auto f = [&](const Vector& t, Vector* g, Matrix* h) { return tobit_loglik(d, censor, t, g, h); };
    auto nr = newton_maximize(f, start, cfg);
    require_converged(nr, "tobit");
    auto names = d.names;
    names.push_back("log_sigma");
    auto r = make_result(ModelKind::tobit, nr, names, d);
    r.censor_point = censor;
    return r;
}

// ---------------------------------------------------------------- counts

inline void check_counts(const Vector& y) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        require(y(i) >= 0.0, "count response has a negative value");
        require(y(i) == std::floor(y(i)), "count response has a non-integer value");
    }
}

inline double poisson_loglik(const DesignMatrix& d, const Vector& beta, Vector* grad, Matrix* hess) {
    Vector eta = d.x * beta;
    double ll = 0.0;
    Vector mu(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        mu(i) = std::exp(eta(i));
        ll += d.y(i) * eta(i) - mu(i) - std::lgamma(d.y(i) + 1.0);
    }
    if (grad)
        *grad = d.x.transpose() * (d.y - mu);
    if (hess)
        *hess = -weighted_cross(d.x, mu);
    return ll;
}

inline FitResult fit_poisson(const DesignMatrix& d, const NewtonConfig& cfg = {}) {
    d.validate();
    check_counts(d.y);
    check_full_rank(d);
    Vector start = Vector::Zero(d.x.cols());
    if (auto c = d.column(intercept_name))
        start(static_cast<Eigen::Index>(*c)) = std::log(std::max(d.y.mean(), 1e-8));
    auto f = [&](const Vector& b, Vector* g, Matrix* h) { return poisson_loglik(d, b, g, h); };
    auto nr = newton_maximize(f, start, cfg);
    require_converged(nr, "poisson");
    return make_result(ModelKind::poisson, nr, d.names, d);
}

// NB2 with log mean x'beta and log dispersion z'gamma; theta = [beta; gamma].
// Var(y) = mu + alpha mu^2 with alpha = exp(z'gamma).
inline double negbin_loglik(const DesignMatrix& d, const Matrix& z, const Vector& theta, Vector* grad,
                            Matrix* hess) {
    using boost::math::digamma;
    using boost::math::trigamma;
    const auto p = d.x.cols(), q = z.cols(), n = d.x.rows();
    Vector eta = d.x * theta.head(p);
    Vector zeta = z * theta.tail(q);
    double ll = 0.0;
    Vector ge(n), gz(n), hee(n), hzz(n), hez(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double y = d.y(i), mu = std::exp(eta(i)), th = std::exp(-zeta(i));
        double tm = th + mu;
        ll += std::lgamma(y + th) - std::lgamma(th) - std::lgamma(y + 1.0) + th * (std::log(th) - std::log(tm)) +
              y * (eta(i) - std::log(tm));
        if (!grad && !hess)
            continue;
        ge(i) = th * (y - mu) / tm;
        double dth = digamma(y + th) - digamma(th) + std::log(th) + 1.0 - std::log(tm) - (th + y) / tm;
        gz(i) = -th * dth;
        if (hess) {
            hee(i) = -th * mu * (th + y) / (tm * tm);
            double d2th = trigamma(y + th) - trigamma(th) + 1.0 / th - 2.0 / tm + (th + y) / (tm * tm);
            hzz(i) = th * th * d2th + th * dth;
            hez(i) = -th * (y - mu) * mu / (tm * tm);
        }
    }
    if (grad) {
        grad->resize(p + q);
        grad->head(p) = d.x.transpose() * ge;
        grad->tail(q) = z.transpose() * gz;
    }
    if (hess) {
        hess->resize(p + q, p + q);
        hess->topLeftCorner(p, p) = weighted_cross(d.x, hee);
        hess->bottomRightCorner(q, q) = z.transpose() * hzz.asDiagonal() * z;
        Matrix cross = d.x.transpose() * hez.asDiagonal() * z;
        hess->topRightCorner(p, q) = cross;
        hess->bottomLeftCorner(q, p) = cross.transpose();
    }
    return ll;
}

inline DesignMatrix intercept_only(std::size_t n) {
    DesignMatrix d;
    d.names = {intercept_name};
    d.x = Matrix::Ones(static_cast<Eigen::Index>(n), 1);
    d.y = Vector::Zero(static_cast<Eigen::Index>(n));
    return d;
}

// Newton on a sub-block of theta with the rest held fixed.
inline NewtonResult block_newton(const Objective& f, Vector& theta, Eigen::Index offset, Eigen::Index size,
                                 std::size_t iters) {
    auto sub = [&](const Vector& b, Vector* g, Matrix* h) {
        Vector full = theta;
        full.segment(offset, size) = b;
        Vector fg;
        Matrix fh;
        double ll = f(full, g ? &fg : nullptr, h ? &fh : nullptr);
        if (g)
            *g = fg.segment(offset, size);
        if (h)
            *h = fh.block(offset, offset, size, size);
        return ll;
    };
    NewtonConfig c;
    c.max_iter = iters;
    auto nr = newton_maximize(sub, theta.segment(offset, size), c);
    theta.segment(offset, size) = nr.theta;
    return nr;
}

inline FitResult fit_negbin(const DesignMatrix& d, const std::optional<DesignMatrix>& dispersion = std::nullopt,
                            const NewtonConfig& cfg = {}) {
    d.validate();
    check_counts(d.y);
    check_full_rank(d);
    DesignMatrix zd = dispersion ? *dispersion : intercept_only(d.rows());
    require(zd.rows() == d.rows(), "dispersion design has a different number of rows");
    zd.y = d.y;
    check_full_rank(zd);
    const auto p = d.x.cols(), q = zd.x.cols();
    Vector theta = Vector::Zero(p + q);
    {
        NewtonConfig pc;
        pc.max_iter = cfg.max_iter;
        Vector start = Vector::Zero(p);
        if (auto c = d.column(intercept_name))
            start(static_cast<Eigen::Index>(*c)) = std::log(std::max(d.y.mean(), 1e-8));
        auto pf = [&](const Vector& b, Vector* g, Matrix* h) { return poisson_loglik(d, b, g, h); };
        theta.head(p) = newton_maximize(pf, start, pc).theta;
    }
    auto f = [&](const Vector& t, Vector* g, Matrix* h) { return negbin_loglik(d, zd.x, t, g, h); };
    // Alternate between the mean and dispersion blocks, then finish with
    // joint Newton steps from the alternating solution.
    for (int round = 0; round < 5; ++round) {
        block_newton(f, theta, p, q, 3);
        block_newton(f, theta, 0, p, 3);
    }
    auto nr = newton_maximize(f, theta, cfg);
    require_converged(nr, "negative binomial");
    auto names = d.names;
    for (const auto& n : zd.names)
        names.push_back("dispersion:" + n);
    return make_result(ModelKind::negbin, nr, names, d);
}

// ---------------------------------------------------------------- mnlogit

// theta stacks one coefficient block per non-reference level, in level
// order.
inline double mnlogit_loglik(const DesignMatrix& d, std::size_t n_levels, std::size_t ref, const Vector& theta,
                             Vector* grad, Matrix* hess) {
    const auto p = d.x.cols(), n = d.x.rows();
    const auto J = static_cast<Eigen::Index>(n_levels - 1);
    Matrix eta(n, J);
    for (Eigen::Index j = 0; j < J; ++j)
        eta.col(j) = d.x * theta.segment(j * p, p);
    Matrix prob(n, J), resid(n, J);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double m = std::max(0.0, eta.row(i).maxCoeff());
        double denom = std::exp(-m);
        for (Eigen::Index j = 0; j < J; ++j)
            denom += std::exp(eta(i, j) - m);
        double log_denom = m + std::log(denom);
        auto yi = static_cast<std::size_t>(d.y(i));
        if (yi == ref)
            ll -= log_denom;
        for (Eigen::Index j = 0; j < J; ++j) {
            std::size_t level = static_cast<std::size_t>(j) < ref ? static_cast<std::size_t>(j) : static_cast<std::size_t>(j) + 1;
            prob(i, j) = std::exp(eta(i, j) - log_denom);
            bool hit = yi == level;
            if (hit)
                ll += eta(i, j) - log_denom;
            resid(i, j) = (hit ? 1.0 : 0.0) - prob(i, j);
        }
    }
    if (grad) {
        grad->resize(J * p);
        for (Eigen::Index j = 0; j < J; ++j)
            grad->segment(j * p, p) = d.x.transpose() * resid.col(j);
    }
    if (hess) {
        hess->resize(J * p, J * p);
        for (Eigen::Index j = 0; j < J; ++j)
            for (Eigen::Index k = j; k < J; ++k) {
                Vector w = -prob.col(j).cwiseProduct((j == k ? Vector::Ones(n) : Vector::Zero(n)) - prob.col(k));
                Matrix b = weighted_cross(d.x, w);
                hess->block(j * p, k * p, p, p) = b;
                if (k != j)
                    hess->block(k * p, j * p, p, p) = b.transpose();
            }
    }
    return ll;
}

inline std::size_t level_index(const std::vector<std::string>& levels, const std::string& name) {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == name)
            return i;
    fail("unknown response level '" + name + "'");
}

inline FitResult fit_mnlogit(const DesignMatrix& d, const std::string& reference, const NewtonConfig& cfg = {}) {
    d.validate();
    require(d.levels.size() >= 2, "multinomial logit needs at least two response levels");
    std::size_t ref = level_index(d.levels, reference);
    std::vector<std::size_t> counts(d.levels.size(), 0);
    for (Eigen::Index i = 0; i < d.y.size(); ++i) {
        auto v = d.y(i);
        require(v >= 0 && v < static_cast<double>(d.levels.size()) && v == std::floor(v), "categorical response out of range");
        ++counts[static_cast<std::size_t>(v)];
    }
    for (std::size_t l = 0; l < counts.size(); ++l)
        require(counts[l] > 0, "response level '" + d.levels[l] + "' has no observations");
    check_full_rank(d);
    const auto p = d.x.cols();
    const auto J = static_cast<Eigen::Index>(d.levels.size() - 1);
    auto f = [&](const Vector& t, Vector* g, Matrix* h) { return mnlogit_loglik(d, d.levels.size(), ref, t, g, h); };
    auto nr = newton_maximize(f, Vector::Zero(J * p), cfg);
    require_converged(nr, "multinomial logit");
    std::vector<std::string> names;
    for (std::size_t l = 0; l < d.levels.size(); ++l) {
        if (l == ref)
            continue;
        for (const auto& c : d.names)
            names.push_back(d.levels[l] + ":" + c);
    }
    auto r = make_result(ModelKind::mnlogit, nr, names, d);
    r.levels = d.levels;
    r.reference = ref;
    return r;
}

// ---------------------------------------------------------------- dispatch

struct FitRequest {
    ModelKind kind = ModelKind::probit;
    DesignMatrix mean;
    std::optional<DesignMatrix> dispersion;
    double censor_point = 0.0;
    std::string reference;
    NewtonConfig newton;

    FitRequest subset(const std::vector<std::size_t>& rows) const {
        FitRequest r = *this;
        r.mean = mean.subset(rows);
        if (dispersion)
            r.dispersion = dispersion->subset(rows);
        return r;
    }
};

inline FitResult fit(const FitRequest& req) {
    switch (req.kind) {
    case ModelKind::probit: return fit_probit(req.mean, req.newton);
    case ModelKind::tobit: return fit_tobit(req.mean, req.censor_point, req.newton);
    case ModelKind::negbin: return fit_negbin(req.mean, req.dispersion, req.newton);
    case ModelKind::mnlogit: return fit_mnlogit(req.mean, req.reference, req.newton);
    case ModelKind::poisson: return fit_poisson(req.mean, req.newton);
    }
    fail("unknown model");
}

} // namespace dlmap::econometrics
