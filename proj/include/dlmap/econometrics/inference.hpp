#pragma once

#include "dlmap/econometrics/models.hpp"
#include "dlmap/rng.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <map>

namespace dlmap::econometrics {

// ---------------------------------------------------------------- bootstrap

struct BootstrapConfig {
    std::size_t replications = 500;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct BootstrapResult {
    Matrix cov;
    Vector se;
    std::size_t replications = 0;
    std::size_t failed = 0;
    std::vector<std::string> warnings;
};

// Resamples whole clusters with replacement, refits, and reports the
// empirical covariance of the replicate estimates. Replicates whose fit
// fails are dropped and counted.
inline BootstrapResult bootstrap_se(const FitRequest& req, const BootstrapConfig& cfg = {}) {
    require(cfg.replications >= 2, "bootstrap needs at least two replications");
    const auto& d = req.mean;
    require(d.cluster.size() == d.rows(), "bootstrap needs a cluster id per row");
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < d.rows(); ++i)
        groups[d.cluster[i]].push_back(i);
    require(groups.size() >= 2, "bootstrap needs at least two clusters");
    std::vector<const std::vector<std::size_t>*> members;
    for (const auto& [_, rows] : groups)
        members.push_back(&rows);
    const std::size_t G = members.size();

    std::vector<std::optional<Vector>> est(cfg.replications);
    parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
        Rng rng(derive_seed(cfg.seed, "bootstrap.replicate", r));
        std::vector<std::size_t> rows;
        rows.reserve(d.rows());
        for (std::size_t g = 0; g < G; ++g) {
            const auto& m = *members[rng.below(G)];
            rows.insert(rows.end(), m.begin(), m.end());
        }
        try {
            est[r] = fit(req.subset(rows)).coef;
        } catch (const Error&) {
            est[r] = std::nullopt;
        }
    });
    BootstrapResult out;
    std::vector<Vector> ok;
    for (auto& e : est) {
        if (e)
            ok.push_back(std::move(*e));
        else
            ++out.failed;
    }
    out.replications = ok.size();
    if (ok.size() < 2)
        throw Error(ErrorKind::convergence, "fewer than two bootstrap replicates converged");
    const auto p = ok.front().size();
    Vector mean = Vector::Zero(p);
    for (const auto& v : ok)
        mean += v;
    mean /= static_cast<double>(ok.size());
    out.cov = Matrix::Zero(p, p);
    for (const auto& v : ok)
        out.cov += (v - mean) * (v - mean).transpose();
    out.cov /= static_cast<double>(ok.size() - 1);
    out.se = out.cov.diagonal().cwiseSqrt();
    if (10 * out.failed > cfg.replications)
        out.warnings.push_back(std::to_string(out.failed) + " of " + std::to_string(cfg.replications) +
                               " bootstrap replicates failed to converge");
    return out;
}

// ---------------------------------------------------------------- LR test

struct LrTest {
    double statistic = 0.0;
    std::size_t df = 0;
    double p_value = 1.0;
};

inline LrTest lr_test(const FitResult& restricted, const FitResult& full, double tol = 1e-6) {
    require(restricted.n == full.n, "likelihood-ratio test needs models fitted on the same rows");
    require(full.coef.size() >= restricted.coef.size(), "restricted model has more parameters than the full model");
    double stat = 2.0 * (full.loglik - restricted.loglik);
    if (stat < -tol * std::max(1.0, std::abs(full.loglik)))
        fail("restricted log-likelihood exceeds the full model's; models are not nested or did not converge");
    LrTest t;
    t.statistic = std::max(0.0, stat);
    t.df = static_cast<std::size_t>(full.coef.size() - restricted.coef.size());
    if (t.df == 0 || t.statistic == 0.0) {
        t.p_value = 1.0;
        return t;
    }
    boost::math::chi_squared dist(static_cast<double>(t.df));
    t.p_value = boost::math::cdf(boost::math::complement(dist, t.statistic));
    return t;
}

// ---------------------------------------------------------------- margins

enum class EvalRow { median_row, mean_row };

inline Vector evaluation_row(const DesignMatrix& d, EvalRow at) {
    Vector row(d.x.cols());
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) {
        if (at == EvalRow::mean_row) {
            row(j) = d.x.col(j).mean();
        } else {
            std::vector<double> v(d.x.col(j).data(), d.x.col(j).data() + d.x.rows());
            row(j) = quantile(std::move(v), 0.5);
        }
    }
    return row;
}

// Predicted probability of `level` (mnlogit) or of y = 1 (probit) at row x.
inline double predict_probability(const FitResult& f, const Vector& x, std::size_t level = 1) {
    const auto p = static_cast<Eigen::Index>(f.mean_names.size());
    if (f.kind == ModelKind::probit)
        return norm_cdf(x.dot(f.coef.head(p)));
    require(f.kind == ModelKind::mnlogit, "probabilities are defined for probit and mnlogit fits");
    const auto K = f.levels.size();
    std::vector<double> eta(K, 0.0);
    Eigen::Index block = 0;
    for (std::size_t l = 0; l < K; ++l) {
        if (l == f.reference)
            continue;
        eta[l] = x.dot(f.coef.segment(block * p, p));
        ++block;
    }
    double m = *std::max_element(eta.begin(), eta.end());
    double denom = 0.0;
    for (double e : eta)
        denom += std::exp(e - m);
    return std::exp(eta[level] - m) / denom;
}

// Discrete change (1 minus 0) for 0/1 columns, derivative otherwise, with
// the other covariates at the chosen row.
inline double marginal_effect(const FitResult& f, const DesignMatrix& d, const std::string& column, EvalRow at,
                              const std::string& category = {}) {
    require(f.kind == ModelKind::probit || f.kind == ModelKind::mnlogit,
            "marginal effects are available for probit and mnlogit fits");
    require(d.names == f.mean_names, "design does not match the fitted model");
    auto c = d.column(column);
    require(c.has_value(), "unknown column '" + column + "'");
    std::size_t level = 1;
    if (f.kind == ModelKind::mnlogit) {
        require(!category.empty(), "mnlogit marginal effects need a response category");
        level = level_index(f.levels, category);
    }
    const auto j = static_cast<Eigen::Index>(*c);
    Vector x = evaluation_row(d, at);
    if (is_dummy_column(d.x, j)) {
        Vector x1 = x, x0 = x;
        x1(j) = 1.0;
        x0(j) = 0.0;
        return predict_probability(f, x1, level) - predict_probability(f, x0, level);
    }
    const auto p = static_cast<Eigen::Index>(f.mean_names.size());
    if (f.kind == ModelKind::probit)
        return norm_pdf(x.dot(f.coef.head(p))) * f.coef(j);
    // dP_l/dx_j = P_l (b_lj - sum_k P_k b_kj), reference coefficients zero.
    const auto K = f.levels.size();
    std::vector<double> prob(K), bj(K, 0.0);
    Eigen::Index block = 0;
    for (std::size_t l = 0; l < K; ++l) {
        prob[l] = predict_probability(f, x, l);
        if (l == f.reference)
            continue;
        bj[l] = f.coef(block * p + j);
        ++block;
    }
    double avg = 0.0;
    for (std::size_t l = 0; l < K; ++l)
        avg += prob[l] * bj[l];
    return prob[level] * (bj[level] - avg);
}

// ---------------------------------------------------------------- tables

inline double normal_p_value(double z) {
    boost::math::normal n;
    return 2.0 * boost::math::cdf(boost::math::complement(n, std::abs(z)));
}

inline std::string stars(double p) {
    if (p < 0.01)
        return "***";
    if (p < 0.05)
        return "**";
    if (p < 0.1)
        return "*";
    return "";
}

// se: bootstrap SEs when available, analytic otherwise.
inline void write_coefficients(std::ostream& out, const FitResult& f, const Vector& se) {
    out << "term,estimate,se,z,p,stars\n";
    for (Eigen::Index i = 0; i < f.coef.size(); ++i) {
        double z = f.coef(i) / se(i);
        double p = std::isfinite(z) ? normal_p_value(z) : std::numeric_limits<double>::quiet_NaN();
        out << csv::quote(f.names[static_cast<std::size_t>(i)]) << ',' << format_double(f.coef(i)) << ','
            << format_double(se(i)) << ',' << format_double(z) << ',' << format_double(p) << ','
            << (std::isfinite(p) ? stars(p) : "") << '\n';
    }
}

} // namespace dlmap::econometrics
