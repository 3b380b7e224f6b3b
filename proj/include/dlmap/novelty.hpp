#pragma once

// Re-combinatorial novelty over pairs of referenced journals.

#include "dlmap/common.hpp"
#include "dlmap/csv.hpp"

#include <map>
#include <optional>
#include <set>
#include <unordered_map>

namespace dlmap::novelty {

struct ReferenceRecord {
    std::string paper_id;
    int year = 0;
    std::vector<std::string> cited_journals; // multiset
};

struct JournalPair {
    std::uint32_t lo = 0, hi = 0;
    auto operator<=>(const JournalPair&) const = default;
};

inline std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
    if (a > b)
        std::swap(a, b);
    return static_cast<std::uint64_t>(a) << 32 | b;
}

inline JournalPair pair_of(std::uint64_t key) {
    return {static_cast<std::uint32_t>(key >> 32), static_cast<std::uint32_t>(key)};
}

// Unordered distinct-journal pairs, once each, in canonical order.
inline std::vector<std::pair<std::string, std::string>> enumerate_pairs(const ReferenceRecord& r) {
    std::set<std::string> js(r.cited_journals.begin(), r.cited_journals.end());
    std::vector<std::string> v(js.begin(), js.end());
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j)
            out.emplace_back(v[i], v[j]);
    return out;
}

// Triples paper_id,year,journal_id; one row per reference.
inline std::vector<ReferenceRecord> read_references(const std::string& path) {
    auto t = csv::read_table(path);
    auto cp = t.column("paper_id"), cy = t.column("year"), cj = t.column("journal_id");
    std::map<std::string, ReferenceRecord> by_paper;
    for (const auto& row : t.rows) {
        int y = static_cast<int>(parse_int(row[cy], "year"));
        auto& rec = by_paper[row[cp]];
        if (rec.paper_id.empty()) {
            rec.paper_id = row[cp];
            rec.year = y;
        } else if (rec.year != y) {
            fail(path + ": paper " + row[cp] + " has conflicting years");
        }
        require(!row[cj].empty(), path + ": empty journal id for paper " + row[cp]);
        rec.cited_journals.push_back(row[cj]);
    }
    std::vector<ReferenceRecord> out;
    for (auto& [_, r] : by_paper)
        out.push_back(std::move(r));
    return out;
}

enum class Scope { all_sciences, no_cs, only_hs };

inline const char* to_string(Scope s) {
    switch (s) {
    case Scope::all_sciences: return "all";
    case Scope::no_cs: return "nocs";
    case Scope::only_hs: return "onlyhs";
    }
    return "?";
}

using JournalCategories = std::map<std::string, std::set<std::string>>;

// journal_id,category; a journal may appear on several rows.
inline JournalCategories read_journal_categories(const std::string& path) {
    auto t = csv::read_table(path);
    auto cj = t.column("journal_id"), cc = t.column("category");
    JournalCategories m;
    for (const auto& row : t.rows)
        m[row[cj]].insert(row[cc]);
    return m;
}

class ScopeFilter {
public:
    ScopeFilter() = default;
    ScopeFilter(JournalCategories journals, std::set<std::string> cs, std::set<std::string> hs)
        : journals_(std::move(journals)), cs_(std::move(cs)), hs_(std::move(hs)) {
        for (const auto& c : cs_)
            require(!hs_.count(c), "category '" + c + "' is listed as both computer science and health science");
    }

    bool is_cs(const std::string& j) const {
        auto it = journals_.find(j);
        if (it == journals_.end())
            return false;
        return std::any_of(it->second.begin(), it->second.end(), [&](const auto& c) { return cs_.count(c) > 0; });
    }

    // Every category of the journal is a health-science one.
    bool is_only_hs(const std::string& j) const {
        auto it = journals_.find(j);
        if (it == journals_.end() || it->second.empty())
            return false;
        return std::all_of(it->second.begin(), it->second.end(), [&](const auto& c) { return hs_.count(c) > 0; });
    }

    bool admits(Scope s, const std::string& a, const std::string& b) const {
        switch (s) {
        case Scope::all_sciences: return true;
        case Scope::no_cs: return !is_cs(a) && !is_cs(b);
        case Scope::only_hs: return is_only_hs(a) && is_only_hs(b);
        }
        return false;
    }

private:
    JournalCategories journals_;
    std::set<std::string> cs_, hs_;
};

struct NoveltyConfig {
    std::uint64_t reuse_threshold = 5;
    int reuse_years = 3;
    int window_years = 3;
    // Last year of data; defaults to the latest paper year.
    std::optional<int> data_end;
    unsigned threads = 1;
};

struct NoveltyScores {
    std::string paper_id;
    int year = 0;
    bool dummy_all = false, dummy_nocs = false, dummy_onlyhs = false;
    double weighted_all = 0.0, weighted_nocs = 0.0, weighted_onlyhs = 0.0;
    std::size_t qualifying_all = 0, qualifying_nocs = 0, qualifying_onlyhs = 0;
};

struct NoveltyDiagnostics {
    std::size_t papers_scored = 0;
    std::size_t papers_skipped_censored = 0;
    // Qualifying pairs where a journal had an all-zero profile.
    std::size_t zero_profile_pairs = 0;
};

// Sparse symmetric co-citation counts (papers containing the pair) over a
// block of years; the diagonal is always zero.
class CooccurrenceWindow {
public:
    void add(std::uint32_t a, std::uint32_t b, std::uint64_t n) {
        rows_[a][b] += n;
        rows_[b][a] += n;
    }

    std::uint64_t count(std::uint32_t a, std::uint32_t b) const {
        auto it = rows_.find(a);
        if (it == rows_.end())
            return 0;
        auto jt = it->second.find(b);
        return jt == it->second.end() ? 0 : jt->second;
    }

    // 1 - cosine of the two journals' profiles; a zero profile gives 1.
    double distance(std::uint32_t a, std::uint32_t b, bool* zero_profile = nullptr) const {
        auto ia = rows_.find(a), ib = rows_.find(b);
        if (ia == rows_.end() || ib == rows_.end()) {
            if (zero_profile)
                *zero_profile = true;
            return 1.0;
        }
        std::uint64_t dot = 0, na = 0, nb = 0;
        for (const auto& [k, v] : ia->second)
            na += v * v;
        for (const auto& [k, v] : ib->second)
            nb += v * v;
        auto x = ia->second.begin(), y = ib->second.begin();
        while (x != ia->second.end() && y != ib->second.end()) {
            if (x->first < y->first)
                ++x;
            else if (y->first < x->first)
                ++y;
            else {
                dot += x->second * y->second;
                ++x;
                ++y;
            }
        }
        if (zero_profile)
            *zero_profile = false;
        double cos = static_cast<double>(dot) /
                     (std::sqrt(static_cast<double>(na)) * std::sqrt(static_cast<double>(nb)));
        return 1.0 - cos;
    }

private:
    std::unordered_map<std::uint32_t, std::map<std::uint32_t, std::uint64_t>> rows_;
};

class NoveltyIndex {
public:
    NoveltyIndex(const std::vector<ReferenceRecord>& records, NoveltyConfig cfg = {}) : cfg_(cfg) {
        require(!records.empty(), "novelty needs at least one reference record");
        require(cfg_.reuse_years >= 1 && cfg_.window_years >= 1, "novelty windows must be positive");
        std::set<std::string> names;
        for (const auto& r : records)
            names.insert(r.cited_journals.begin(), r.cited_journals.end());
        journals_.assign(names.begin(), names.end());
        for (std::uint32_t i = 0; i < journals_.size(); ++i)
            journal_id_[journals_[i]] = i;

        std::set<std::string> ids;
        papers_.reserve(records.size());
        for (const auto& r : records) {
            require(ids.insert(r.paper_id).second, "duplicate paper id " + r.paper_id);
            Paper p{r.paper_id, r.year, {}};
            std::set<std::uint32_t> js;
            for (const auto& j : r.cited_journals)
                js.insert(journal_id_.at(j));
            std::vector<std::uint32_t> v(js.begin(), js.end());
            for (std::size_t a = 0; a < v.size(); ++a)
                for (std::size_t b = a + 1; b < v.size(); ++b)
                    p.pairs.push_back(pair_key(v[a], v[b]));
            std::sort(p.pairs.begin(), p.pairs.end());
            papers_.push_back(std::move(p));
        }
        std::sort(papers_.begin(), papers_.end(), [](const Paper& a, const Paper& b) { return a.id < b.id; });
        first_year_ = papers_.front().year;
        last_year_ = first_year_;
        for (const auto& p : papers_) {
            first_year_ = std::min(first_year_, p.year);
            last_year_ = std::max(last_year_, p.year);
            for (auto k : p.pairs) {
                ++per_year_[p.year][k];
                auto [it, inserted] = first_seen_.emplace(k, p.year);
                if (!inserted)
                    it->second = std::min(it->second, p.year);
            }
        }
        if (cfg_.data_end) {
            require(*cfg_.data_end >= last_year_, "data_end precedes the latest paper year");
            last_year_ = *cfg_.data_end;
        }
    }

    int first_year() const { return first_year_; }
    int last_year() const { return last_year_; }
    const std::vector<std::string>& journals() const { return journals_; }

    std::uint32_t journal(const std::string& name) const {
        auto it = journal_id_.find(name);
        require(it != journal_id_.end(), "unknown journal " + name);
        return it->second;
    }

    // No reference list strictly before y contains the pair.
    bool is_new_pair(std::uint64_t key, int y) const {
        auto it = first_seen_.find(key);
        return it == first_seen_.end() || it->second >= y;
    }

    bool censored(int y) const { return y + cfg_.reuse_years > last_year_; }

    // Papers in (y, y + reuse_years] whose reference list contains the pair.
    std::uint64_t reuse_count(std::uint64_t key, int y) const {
        if (censored(y))
            throw Error(ErrorKind::validation, "right-censored focal year " + std::to_string(y) +
                                                   ": reuse window ends after " + std::to_string(last_year_));
        std::uint64_t n = 0;
        for (int t = y + 1; t <= y + cfg_.reuse_years; ++t)
            n += count_in_year(key, t);
        return n;
    }

    std::uint64_t count_in_year(std::uint64_t key, int y) const {
        auto it = per_year_.find(y);
        if (it == per_year_.end())
            return 0;
        auto jt = it->second.find(key);
        return jt == it->second.end() ? 0 : jt->second;
    }

    CooccurrenceWindow window(int y) const {
        CooccurrenceWindow w;
        for (int t = y - cfg_.window_years; t < y; ++t) {
            auto it = per_year_.find(t);
            if (it == per_year_.end())
                continue;
            for (const auto& [k, n] : it->second) {
                auto p = pair_of(k);
                w.add(p.lo, p.hi, n);
            }
        }
        return w;
    }

    // Scores every paper whose reuse window lies inside the data; papers in
    // censored years are skipped and counted. Explicit focal years that are
    // censored raise.
    std::vector<NoveltyScores> score_all(const ScopeFilter& filter, NoveltyDiagnostics* diag = nullptr,
                                         std::optional<std::set<int>> focal_years = std::nullopt) const {
        if (focal_years)
            for (int y : *focal_years)
                if (censored(y))
                    throw Error(ErrorKind::validation, "right-censored focal year " + std::to_string(y));
        std::vector<std::size_t> todo;
        NoveltyDiagnostics d;
        for (std::size_t i = 0; i < papers_.size(); ++i) {
            int y = papers_[i].year;
            if (focal_years && !focal_years->count(y))
                continue;
            if (censored(y)) {
                ++d.papers_skipped_censored;
                continue;
            }
            todo.push_back(i);
        }
        std::set<int> years;
        for (auto i : todo)
            years.insert(papers_[i].year);
        std::map<int, CooccurrenceWindow> windows;
        for (int y : years)
            windows.emplace(y, window(y));

        std::vector<NoveltyScores> out(todo.size());
        std::vector<std::size_t> zero(todo.size(), 0);
        parallel_for(todo.size(), cfg_.threads, [&](std::size_t t) {
            out[t] = score(papers_[todo[t]], windows.at(papers_[todo[t]].year), filter, &zero[t]);
        });
        for (auto z : zero)
            d.zero_profile_pairs += z;
        d.papers_scored = out.size();
        if (diag)
            *diag = d;
        return out;
    }

private:
    struct Paper {
        std::string id;
        int year;
        std::vector<std::uint64_t> pairs; // sorted
    };

    NoveltyScores score(const Paper& p, const CooccurrenceWindow& w, const ScopeFilter& filter,
                        std::size_t* zero_profiles) const {
        NoveltyScores s;
        s.paper_id = p.id;
        s.year = p.year;
        double sum_all = 0.0, sum_nocs = 0.0, sum_hs = 0.0;
        for (auto k : p.pairs) {
            if (!is_new_pair(k, p.year) || reuse_count(k, p.year) < cfg_.reuse_threshold)
                continue;
            auto jp = pair_of(k);
            bool zp = false;
            double dist = w.distance(jp.lo, jp.hi, &zp);
            if (zp)
                ++*zero_profiles;
            const auto& a = journals_[jp.lo];
            const auto& b = journals_[jp.hi];
            sum_all += dist;
            ++s.qualifying_all;
            if (filter.admits(Scope::no_cs, a, b)) {
                sum_nocs += dist;
                ++s.qualifying_nocs;
            }
            if (filter.admits(Scope::only_hs, a, b)) {
                sum_hs += dist;
                ++s.qualifying_onlyhs;
            }
        }
        s.dummy_all = s.qualifying_all > 0;
        s.dummy_nocs = s.qualifying_nocs > 0;
        s.dummy_onlyhs = s.qualifying_onlyhs > 0;
        s.weighted_all = std::log(1.0 + sum_all);
        s.weighted_nocs = std::log(1.0 + sum_nocs);
        s.weighted_onlyhs = std::log(1.0 + sum_hs);
        return s;
    }

    NoveltyConfig cfg_;
    std::vector<std::string> journals_;
    std::unordered_map<std::string, std::uint32_t> journal_id_;
    std::vector<Paper> papers_;
    std::map<int, std::unordered_map<std::uint64_t, std::uint64_t>> per_year_;
    std::unordered_map<std::uint64_t, int> first_seen_;
    int first_year_ = 0, last_year_ = 0;
};

inline void write_scores(const std::string& path, const std::vector<NoveltyScores>& scores) {
    auto out = open_output(path);
    out << "paper_id,year,novelty_dummy_all,novelty_dummy_nocs,novelty_dummy_onlyhs,"
           "novelty_all,novelty_nocs,novelty_onlyhs\n";
    for (const auto& s : scores)
        out << csv::quote(s.paper_id) << ',' << s.year << ',' << int(s.dummy_all) << ',' << int(s.dummy_nocs) << ','
            << int(s.dummy_onlyhs) << ',' << format_double(s.weighted_all) << ','
            << format_double(s.weighted_nocs) << ',' << format_double(s.weighted_onlyhs) << '\n';
}

} // namespace dlmap::novelty
