#pragma once

// Paper-level variables built from bibliographic records.

#include "dlmap/common.hpp"
#include "dlmap/corpus.hpp"

#include <map>
#include <set>

namespace dlmap::econometrics {

struct CitedPaper {
    int year = 0;
    std::vector<std::string> categories;
    double citations = 0.0;
};

// Flags papers in the top `share` of citations among papers of the same
// year that share at least one subject category: a paper is flagged when
// fewer than share * |comparison set| papers are cited strictly more.
inline std::vector<bool> top_cited_flags(const std::vector<CitedPaper>& papers, double share) {
    require(share > 0.0 && share < 1.0, "top-cited share must lie in (0, 1)");
    std::map<std::pair<int, std::string>, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < papers.size(); ++i)
        for (const auto& c : papers[i].categories)
            cells[{papers[i].year, c}].push_back(i);
    std::vector<bool> out(papers.size(), false);
    for (std::size_t i = 0; i < papers.size(); ++i) {
        std::set<std::size_t> comparison;
        for (const auto& c : papers[i].categories) {
            const auto& v = cells[{papers[i].year, c}];
            comparison.insert(v.begin(), v.end());
        }
        if (comparison.empty())
            continue;
        std::size_t above = 0;
        for (auto j : comparison)
            above += papers[j].citations > papers[i].citations;
        out[i] = static_cast<double>(above) < share * static_cast<double>(comparison.size());
    }
    return out;
}

// Survey articles: the title mentions survey, overview or review.
inline bool survey_flag(std::string_view title) {
    static const std::set<std::string> words = {"survey", "surveys", "overview", "overviews", "review", "reviews"};
    for (const auto& t : corpus::normalize_text(title))
        if (words.count(t))
            return true;
    return false;
}

inline double log1p_count(double x) {
    require(x >= 0.0, "counts must be non-negative");
    return std::log1p(x);
}

// Collaboration dummies from author affiliation countries and
// institutions.
struct Collaboration {
    bool international = false;
    bool multi_institution = false;
};

inline Collaboration collaboration(const std::vector<std::string>& countries,
                                   const std::vector<std::string>& institutions) {
    std::set<std::string> c(countries.begin(), countries.end()), i(institutions.begin(), institutions.end());
    return {c.size() > 1, i.size() > 1};
}

} // namespace dlmap::econometrics
