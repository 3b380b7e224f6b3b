#pragma once

#include "dlmap/common.hpp"
#include "dlmap/csv.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <set>

namespace dlmap::econometrics {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline const std::string intercept_name = "(Intercept)";

struct DesignMatrix {
    std::vector<std::string> names;
    Matrix x;
    Vector y;
    std::vector<std::string> cluster;
    // Categorical responses: y holds an index into levels.
    std::vector<std::string> levels;

    std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(x.cols()); }

    std::optional<std::size_t> column(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name)
                return i;
        return std::nullopt;
    }

    bool has_intercept() const { return column(intercept_name).has_value(); }

    // Rows may repeat (bootstrap draws).
    DesignMatrix subset(const std::vector<std::size_t>& rows) const {
        DesignMatrix d;
        d.names = names;
        d.levels = levels;
        d.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
        d.y.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            auto src = static_cast<Eigen::Index>(rows[r]);
            d.x.row(static_cast<Eigen::Index>(r)) = x.row(src);
            d.y(static_cast<Eigen::Index>(r)) = y(src);
            if (!cluster.empty())
                d.cluster.push_back(cluster[rows[r]]);
        }
        return d;
    }

    void validate() const {
        require(x.rows() > 0, "design has no rows");
        require(y.size() == x.rows(), "response length does not match the design");
        require(names.size() == cols(), "column names do not match the design");
        std::set<std::string> uniq(names.begin(), names.end());
        require(uniq.size() == names.size(), "duplicate column names in design");
        require(cluster.empty() || cluster.size() == rows(), "cluster ids do not match the design");
        require(x.allFinite() && y.allFinite(), "design contains missing or non-finite values");
    }
};

// Flags columns that are all zero, constant next to an intercept, or
// otherwise make the design rank deficient.
inline void check_full_rank(const DesignMatrix& d) {
    const auto n = d.x.rows();
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) {
        const auto& name = d.names[static_cast<std::size_t>(j)];
        if (name == intercept_name)
            continue;
        double lo = d.x.col(j).minCoeff(), hi = d.x.col(j).maxCoeff();
        if (lo == hi && (lo == 0.0 || d.has_intercept()))
            fail("column '" + name + "' has no variation in this sample");
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(d.x);
    qr.setThreshold(1e-10);
    if (qr.rank() < d.x.cols()) {
        // Name the first column that the pivoting pushed into the null space.
        auto perm = qr.colsPermutation().indices();
        std::string bad = d.names[static_cast<std::size_t>(perm(qr.rank()))];
        fail("design is rank deficient (" + std::to_string(qr.rank()) + " of " + std::to_string(n > 0 ? d.x.cols() : 0) +
             " columns identified); check '" + bad + "'");
    }
}

enum class ResponseKind { numeric, categorical };

// Column roles for building a design from an analysis table.
struct RoleSpec {
    std::string response;
    ResponseKind response_kind = ResponseKind::numeric;
    // Declared categorical levels; empty means observed levels.
    std::vector<std::string> levels;
    std::vector<std::string> covariates;
    std::vector<std::string> fixed_effects;
    std::string cluster;
    bool intercept = true;
};

// Dummy blocks drop the first level in sorted order; dummy columns are
// named "column=level".
inline DesignMatrix build_design(const csv::Table& t, const RoleSpec& spec) {
    require(!spec.response.empty(), "design needs a response column");
    const std::size_t n = t.rows.size();
    require(n > 0, "analysis table has no rows");
    DesignMatrix d;
    std::vector<std::vector<double>> cols;
    if (spec.intercept) {
        d.names.push_back(intercept_name);
        cols.emplace_back(n, 1.0);
    }
    auto numeric = [&](const std::string& name) {
        auto c = t.column(name);
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& s = t.rows[i][c];
            require(!s.empty() && s != "NA", "missing value in column '" + name + "' at row " + std::to_string(i + 1));
            v[i] = parse_double(s, name);
            require(std::isfinite(v[i]), "non-finite value in column '" + name + "'");
        }
        return v;
    };
    for (const auto& c : spec.covariates) {
        d.names.push_back(c);
        cols.push_back(numeric(c));
    }
    for (const auto& fe : spec.fixed_effects) {
        auto c = t.column(fe);
        std::set<std::string> levels;
        for (const auto& r : t.rows) {
            require(!r[c].empty() && r[c] != "NA", "missing value in fixed-effect column '" + fe + "'");
            levels.insert(r[c]);
        }
        bool first = true;
        for (const auto& l : levels) {
            if (first) {
                first = false;
                continue;
            }
            d.names.push_back(fe + "=" + l);
            std::vector<double> v(n);
            for (std::size_t i = 0; i < n; ++i)
                v[i] = t.rows[i][c] == l ? 1.0 : 0.0;
            cols.push_back(std::move(v));
        }
    }
    d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t i = 0; i < n; ++i)
            d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
    d.y.resize(static_cast<Eigen::Index>(n));
    if (spec.response_kind == ResponseKind::categorical) {
        auto c = t.column(spec.response);
        std::vector<std::string> levels = spec.levels;
        if (levels.empty()) {
            std::set<std::string> seen;
            for (const auto& r : t.rows)
                seen.insert(r[c]);
            levels.assign(seen.begin(), seen.end());
        }
        std::map<std::string, std::size_t> idx;
        for (std::size_t i = 0; i < levels.size(); ++i)
            idx[levels[i]] = i;
        for (std::size_t i = 0; i < n; ++i) {
            auto it = idx.find(t.rows[i][c]);
            require(it != idx.end(), "response level '" + t.rows[i][c] + "' is not declared");
            d.y(static_cast<Eigen::Index>(i)) = static_cast<double>(it->second);
        }
        d.levels = levels;
    } else {
        auto v = numeric(spec.response);
        for (std::size_t i = 0; i < n; ++i)
            d.y(static_cast<Eigen::Index>(i)) = v[i];
    }
    if (!spec.cluster.empty()) {
        auto c = t.column(spec.cluster);
        for (const auto& r : t.rows)
            d.cluster.push_back(r[c]);
    }
    d.validate();
    return d;
}

// Same rows, different response column (numeric).
inline DesignMatrix with_response(DesignMatrix d, const Vector& y) {
    require(y.size() == d.x.rows(), "response length does not match the design");
    d.y = y;
    d.levels.clear();
    return d;
}

} // namespace dlmap::econometrics
