#pragma once

#include "dlmap/econometrics/models.hpp"
#include "dlmap/rng.hpp"

#include <map>
#include <set>

namespace dlmap::econometrics {

enum class MatchMode { exact, psm };

struct MatchSpec {
    MatchMode mode = MatchMode::exact;
    // exact: one composite key per row (e.g. categories|year|journal).
    std::vector<std::string> keys;
    // psm: covariates for the treatment probit; y is overwritten with the
    // treatment indicator.
    std::optional<DesignMatrix> covariates;
    std::uint64_t seed = 1;
};

struct AttResult {
    std::string outcome;
    double att = 0.0;
    double se = 0.0;
    std::size_t matched = 0;
    std::size_t unmatched = 0;
};

struct MatchResult {
    std::vector<AttResult> outcomes;
    // Per treated row: matched control rows (empty if unmatched).
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> pairs;
    std::optional<Vector> propensity;
};

inline AttResult paired_att(const std::string& name, const Vector& y, const MatchResult& m) {
    AttResult r;
    r.outcome = name;
    std::vector<double> diffs;
    for (const auto& [t, controls] : m.pairs) {
        if (controls.empty()) {
            ++r.unmatched;
            continue;
        }
        double cf = 0.0;
        for (auto c : controls)
            cf += y(static_cast<Eigen::Index>(c));
        cf /= static_cast<double>(controls.size());
        diffs.push_back(y(static_cast<Eigen::Index>(t)) - cf);
    }
    r.matched = diffs.size();
    double sum = 0.0;
    for (double d : diffs)
        sum += d;
    r.att = sum / static_cast<double>(diffs.size());
    if (diffs.size() > 1) {
        double ss = 0.0;
        for (double d : diffs)
            ss += (d - r.att) * (d - r.att);
        r.se = std::sqrt(ss / static_cast<double>(diffs.size() - 1)) / std::sqrt(static_cast<double>(diffs.size()));
    } else {
        r.se = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

// Treated rows matched to controls sharing the full key (all of them, equal
// weight) or, under psm, to the single nearest unused control by
// propensity score, visiting treated rows in a seeded random order. Exact
// distance ties go to the lowest control row.
inline MatchResult match_and_att(const Vector& treatment, const std::vector<std::pair<std::string, Vector>>& outcomes,
                                 const MatchSpec& spec) {
    const auto n = static_cast<std::size_t>(treatment.size());
    for (std::size_t i = 0; i < n; ++i)
        require(treatment(static_cast<Eigen::Index>(i)) == 0.0 || treatment(static_cast<Eigen::Index>(i)) == 1.0,
                "treatment must be 0/1");
    for (const auto& [name, y] : outcomes)
        require(static_cast<std::size_t>(y.size()) == n, "outcome '" + name + "' has the wrong length");
    std::vector<std::size_t> treated, controls;
    for (std::size_t i = 0; i < n; ++i)
        (treatment(static_cast<Eigen::Index>(i)) == 1.0 ? treated : controls).push_back(i);
    require(!treated.empty(), "no treated units");
    require(!controls.empty(), "no control units");

    MatchResult m;
    if (spec.mode == MatchMode::exact) {
        require(spec.keys.size() == n, "exact matching needs one key per row");
        std::map<std::string, std::vector<std::size_t>> cells;
        for (auto c : controls)
            cells[spec.keys[c]].push_back(c);
        for (auto t : treated) {
            auto it = cells.find(spec.keys[t]);
            m.pairs.emplace_back(t, it == cells.end() ? std::vector<std::size_t>{} : it->second);
        }
    } else {
        require(spec.covariates.has_value(), "propensity matching needs covariates");
        auto design = with_response(*spec.covariates, treatment);
        auto pf = fit_probit(design);
        Vector score = (design.x * pf.coef).unaryExpr([](double e) { return norm_cdf(e); });
        m.propensity = score;
        std::set<std::pair<double, std::size_t>> pool;
        for (auto c : controls)
            pool.emplace(score(static_cast<Eigen::Index>(c)), c);
        auto order = treated;
        Rng rng(derive_seed(spec.seed, "match.order", 0));
        rng.shuffle(order);
        for (auto t : order) {
            if (pool.empty()) {
                m.pairs.emplace_back(t, std::vector<std::size_t>{});
                continue;
            }
            double s = score(static_cast<Eigen::Index>(t));
            auto hi = pool.lower_bound({s, 0});
            std::optional<std::pair<double, std::size_t>> best;
            double best_d = std::numeric_limits<double>::infinity();
            auto consider = [&](std::pair<double, std::size_t> cand) {
                double dist = std::abs(cand.first - s);
                if (dist < best_d || (dist == best_d && cand.second < best->second)) {
                    best_d = dist;
                    best = cand;
                }
            };
            if (hi != pool.end())
                consider(*hi);
            if (hi != pool.begin()) {
                // Lowest row among controls tied at the nearest lower score.
                double below = std::prev(hi)->first;
                consider(*pool.lower_bound({below, 0}));
            }
            pool.erase(*best);
            m.pairs.emplace_back(t, std::vector<std::size_t>{best->second});
        }
        std::sort(m.pairs.begin(), m.pairs.end());
    }
    std::size_t matched = 0;
    for (const auto& p : m.pairs)
        matched += !p.second.empty();
    require(matched > 0, "no treated unit found a match");
    for (const auto& [name, y] : outcomes)
        m.outcomes.push_back(paired_att(name, y, m));
    return m;
}

} // namespace dlmap::econometrics
