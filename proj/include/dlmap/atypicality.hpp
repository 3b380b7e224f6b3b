#pragma once

// Conventionality / novelty z-scores of referenced-journal pairs against
// randomized citation networks, and the four-quadrant paper coding.

#include "dlmap/common.hpp"
#include "dlmap/csv.hpp"
#include "dlmap/novelty.hpp"
#include "dlmap/rng.hpp"

#include <map>
#include <optional>
#include <set>
#include <unordered_map>

namespace dlmap::atypicality {

using novelty::pair_key;
using novelty::pair_of;

struct EdgeRecord {
    std::string paper_id;
    int year = 0;
    std::string journal_id;
    int cited_year = 0;
};

struct Edge {
    std::uint32_t paper = 0;
    std::uint32_t journal = 0;
    int cited_year = 0;
    bool operator==(const Edge&) const = default;
};

// Papers and journals are interned in sorted id order; edges are kept sorted
// by (paper, journal, cited_year) so a network's layout never depends on
// input order.
class CitationNetwork {
public:
    CitationNetwork() = default;

    explicit CitationNetwork(const std::vector<EdgeRecord>& records) {
        require(!records.empty(), "citation network needs at least one edge");
        std::map<std::string, int> years;
        std::set<std::string> journals;
        for (const auto& r : records) {
            auto [it, inserted] = years.emplace(r.paper_id, r.year);
            require(inserted || it->second == r.year, "paper " + r.paper_id + " has conflicting years");
            journals.insert(r.journal_id);
        }
        for (const auto& [id, y] : years) {
            paper_index_[id] = static_cast<std::uint32_t>(papers_.size());
            papers_.push_back(id);
            paper_year_.push_back(y);
        }
        for (const auto& j : journals) {
            journal_index_[j] = static_cast<std::uint32_t>(journals_.size());
            journals_.push_back(j);
        }
        for (const auto& r : records)
            edges_.push_back({paper_index_.at(r.paper_id), journal_index_.at(r.journal_id), r.cited_year});
        std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
            return std::tie(a.paper, a.journal, a.cited_year) < std::tie(b.paper, b.journal, b.cited_year);
        });
        for (std::size_t e = 0; e < edges_.size(); ++e)
            strata_[edges_[e].cited_year].push_back(e);
    }

    const std::vector<Edge>& edges() const { return edges_; }
    std::vector<Edge>& mutable_edges() { return edges_; }
    const std::vector<std::string>& papers() const { return papers_; }
    const std::vector<std::string>& journals() const { return journals_; }
    int paper_year(std::uint32_t p) const { return paper_year_.at(p); }
    // cited year -> edge indices
    const std::map<int, std::vector<std::size_t>>& strata() const { return strata_; }

    // Distinct-journal pair keys per paper, each sorted.
    std::vector<std::vector<std::uint64_t>> paper_pairs() const {
        std::vector<std::set<std::uint32_t>> js(papers_.size());
        for (const auto& e : edges_)
            js[e.paper].insert(e.journal);
        std::vector<std::vector<std::uint64_t>> out(papers_.size());
        for (std::size_t p = 0; p < js.size(); ++p) {
            std::vector<std::uint32_t> v(js[p].begin(), js[p].end());
            for (std::size_t a = 0; a < v.size(); ++a)
                for (std::size_t b = a + 1; b < v.size(); ++b)
                    out[p].push_back(pair_key(v[a], v[b]));
        }
        return out;
    }

private:
    std::vector<std::string> papers_, journals_;
    std::vector<int> paper_year_;
    std::unordered_map<std::string, std::uint32_t> paper_index_, journal_index_;
    std::vector<Edge> edges_;
    std::map<int, std::vector<std::size_t>> strata_;
};

inline std::vector<EdgeRecord> read_edges(const std::string& path) {
    auto t = csv::read_table(path);
    auto cp = t.column("paper_id"), cy = t.column("year"), cj = t.column("journal_id"), cc = t.column("cited_year");
    std::vector<EdgeRecord> out;
    for (const auto& r : t.rows)
        out.push_back({r[cp], static_cast<int>(parse_int(r[cy], "year")), r[cj],
                       static_cast<int>(parse_int(r[cc], "cited_year"))});
    return out;
}

struct Marginals {
    std::map<std::uint32_t, std::uint64_t> per_paper;
    std::map<std::pair<std::uint32_t, int>, std::uint64_t> per_journal_year;
    std::map<std::pair<std::uint32_t, int>, std::uint64_t> per_paper_year;
    bool operator==(const Marginals&) const = default;
};

inline Marginals marginals(const std::vector<Edge>& edges) {
    Marginals m;
    for (const auto& e : edges) {
        ++m.per_paper[e.paper];
        ++m.per_journal_year[{e.journal, e.cited_year}];
        ++m.per_paper_year[{e.paper, e.cited_year}];
    }
    return m;
}

struct NullConfig {
    std::size_t n_nulls = 50;
    // Attempted swaps per edge.
    double swap_factor = 10.0;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

// One null draw. Within each cited-year stratum, swap_factor * |stratum|
// attempts each pick two edges uniformly (independently, so a pick may
// coincide) and exchange their cited journals. Each stratum has its own
// stream so strata evolve independently of one another.
inline std::vector<Edge> randomize_edges(const CitationNetwork& net, std::uint64_t seed, double swap_factor = 10.0) {
    auto edges = net.edges();
    for (const auto& [year, idx] : net.strata()) {
        if (idx.size() < 2)
            continue;
        Rng rng(derive_seed(seed, "atypicality.stratum", static_cast<std::uint64_t>(static_cast<std::int64_t>(year))));
        auto attempts = static_cast<std::uint64_t>(std::llround(swap_factor * static_cast<double>(idx.size())));
        for (std::uint64_t s = 0; s < attempts; ++s) {
            auto a = idx[rng.below(idx.size())];
            auto b = idx[rng.below(idx.size())];
            std::swap(edges[a].journal, edges[b].journal);
        }
    }
    return edges;
}

inline CitationNetwork randomize(const CitationNetwork& net, std::uint64_t seed, double swap_factor = 10.0) {
    require(!net.edges().empty(), "cannot randomize an empty network");
    CitationNetwork out = net;
    out.mutable_edges() = randomize_edges(net, seed, swap_factor);
    return out;
}

struct PairZScore {
    novelty::JournalPair pair;
    std::uint64_t observed = 0;
    double null_mean = 0.0;
    double null_sd = 0.0;
    std::optional<double> z;
};

// Counts, for each tracked pair, the papers whose journal set contains it.
inline void count_pairs(const std::vector<Edge>& edges, std::size_t n_papers,
                        const std::unordered_map<std::uint64_t, std::size_t>& tracked,
                        std::vector<std::uint64_t>& counts) {
    std::vector<std::vector<std::uint32_t>> js(n_papers);
    for (const auto& e : edges)
        js[e.paper].push_back(e.journal);
    std::fill(counts.begin(), counts.end(), 0);
    for (auto& v : js) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        for (std::size_t a = 0; a < v.size(); ++a)
            for (std::size_t b = a + 1; b < v.size(); ++b)
                if (auto it = tracked.find(pair_key(v[a], v[b])); it != tracked.end())
                    ++counts[it->second];
    }
}

struct ZScoreResult {
    std::vector<PairZScore> pairs; // sorted by pair
    std::unordered_map<std::uint64_t, std::size_t> index;
    std::size_t undefined = 0;

    const PairZScore* find(std::uint64_t key) const {
        auto it = index.find(key);
        return it == index.end() ? nullptr : &pairs[it->second];
    }
};

// Null moments are reduced from integer sums, so the result does not depend
// on the order in which null networks are processed.
inline ZScoreResult pair_zscores(const CitationNetwork& net, const NullConfig& cfg = {}) {
    require(cfg.n_nulls >= 2, "need at least two null networks");
    require(cfg.swap_factor >= 0.0, "swap factor must be non-negative");
    ZScoreResult res;
    std::set<std::uint64_t> keys;
    for (const auto& pp : net.paper_pairs())
        keys.insert(pp.begin(), pp.end());
    for (auto k : keys) {
        res.index[k] = res.pairs.size();
        res.pairs.push_back({pair_of(k), 0, 0.0, 0.0, std::nullopt});
    }
    const std::size_t P = res.pairs.size();
    std::vector<std::uint64_t> observed(P);
    count_pairs(net.edges(), net.papers().size(), res.index, observed);

    unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.n_nulls)));
    std::vector<std::vector<std::uint64_t>> sum(threads, std::vector<std::uint64_t>(P, 0)),
        sumsq(threads, std::vector<std::uint64_t>(P, 0));
    parallel_for(threads, threads, [&](std::size_t w) {
        std::vector<std::uint64_t> c(P);
        for (std::size_t n = w; n < cfg.n_nulls; n += threads) {
            auto edges = randomize_edges(net, derive_seed(cfg.seed, "atypicality.null", n), cfg.swap_factor);
            count_pairs(edges, net.papers().size(), res.index, c);
            for (std::size_t i = 0; i < P; ++i) {
                sum[w][i] += c[i];
                sumsq[w][i] += c[i] * c[i];
            }
        }
    });
    const auto n = static_cast<unsigned __int128>(cfg.n_nulls);
    for (std::size_t i = 0; i < P; ++i) {
        unsigned __int128 s = 0, ss = 0;
        for (unsigned w = 0; w < threads; ++w) {
            s += sum[w][i];
            ss += sumsq[w][i];
        }
        auto& r = res.pairs[i];
        r.observed = observed[i];
        r.null_mean = static_cast<double>(s) / static_cast<double>(n);
        unsigned __int128 num = n * ss - s * s; // n(n-1) * sample variance, exact
        r.null_sd = std::sqrt(static_cast<double>(num) / (static_cast<double>(n) * static_cast<double>(n - 1)));
        if (num > 0)
            r.z = (static_cast<double>(r.observed) - r.null_mean) / r.null_sd;
        else
            ++res.undefined;
    }
    return res;
}

enum class Quadrant { unset, hc_hn, hc_ln, lc_hn, lc_ln };

inline const char* to_string(Quadrant q) {
    switch (q) {
    case Quadrant::hc_hn: return "HC-HN";
    case Quadrant::hc_ln: return "HC-LN";
    case Quadrant::lc_hn: return "LC-HN";
    case Quadrant::lc_ln: return "LC-LN";
    case Quadrant::unset: break;
    }
    return "unset";
}

struct PaperZSummary {
    std::string paper_id;
    int year = 0;
    double median_z = 0.0;
    double p10_z = 0.0;
    std::size_t n_pairs = 0;
    bool high_conventionality = false;
    bool high_novelty = false;
    Quadrant quadrant = Quadrant::unset;
};

inline PaperZSummary summarize_paper(std::vector<double> zs) {
    require(!zs.empty(), "paper has no defined z-scores");
    std::sort(zs.begin(), zs.end());
    PaperZSummary s;
    s.median_z = sorted_quantile(zs, 0.5);
    s.p10_z = sorted_quantile(zs, 0.1);
    s.n_pairs = zs.size();
    return s;
}

struct QuadrantThresholds {
    double median_of_medians = 0.0;
    double median_of_p10 = 0.0;
};

// High conventionality: median z at or above the population median of
// medians. High novelty: 10th percentile strictly below the population
// median of 10th percentiles.
inline QuadrantThresholds assign_quadrants(std::vector<PaperZSummary>& summaries) {
    QuadrantThresholds t;
    if (summaries.empty())
        return t;
    std::vector<double> med, p10;
    for (const auto& s : summaries) {
        med.push_back(s.median_z);
        p10.push_back(s.p10_z);
    }
    t.median_of_medians = quantile(med, 0.5);
    t.median_of_p10 = quantile(p10, 0.5);
    for (auto& s : summaries) {
        s.high_conventionality = s.median_z >= t.median_of_medians;
        s.high_novelty = s.p10_z < t.median_of_p10;
        s.quadrant = s.high_conventionality ? (s.high_novelty ? Quadrant::hc_hn : Quadrant::hc_ln)
                                            : (s.high_novelty ? Quadrant::lc_hn : Quadrant::lc_ln);
    }
    return t;
}

struct AtypicalityReport {
    std::vector<PaperZSummary> papers;
    QuadrantThresholds thresholds;
    std::size_t undefined_pairs = 0;
    std::size_t excluded_papers = 0; // no pair with a defined z
};

inline AtypicalityReport score_papers(const CitationNetwork& net, const ZScoreResult& z) {
    AtypicalityReport rep;
    rep.undefined_pairs = z.undefined;
    auto pp = net.paper_pairs();
    for (std::uint32_t p = 0; p < pp.size(); ++p) {
        std::vector<double> zs;
        for (auto k : pp[p])
            if (const auto* r = z.find(k); r && r->z)
                zs.push_back(*r->z);
        if (zs.empty()) {
            ++rep.excluded_papers;
            continue;
        }
        auto s = summarize_paper(std::move(zs));
        s.paper_id = net.papers()[p];
        s.year = net.paper_year(p);
        rep.papers.push_back(std::move(s));
    }
    rep.thresholds = assign_quadrants(rep.papers);
    return rep;
}

inline void write_report(const std::string& path, const AtypicalityReport& rep) {
    auto out = open_output(path);
    out << "paper_id,year,median_z,p10_z,high_conventionality,high_novelty,quadrant\n";
    for (const auto& s : rep.papers)
        out << csv::quote(s.paper_id) << ',' << s.year << ',' << format_double(s.median_z) << ','
            << format_double(s.p10_z) << ',' << int(s.high_conventionality) << ',' << int(s.high_novelty) << ','
            << to_string(s.quadrant) << '\n';
}

inline void write_pair_scores(const std::string& path, const CitationNetwork& net, const ZScoreResult& z) {
    auto out = open_output(path);
    out << "journal_a,journal_b,observed,null_mean,null_sd,z\n";
    for (const auto& p : z.pairs)
        out << csv::quote(net.journals()[p.pair.lo]) << ',' << csv::quote(net.journals()[p.pair.hi]) << ','
            << p.observed << ',' << format_double(p.null_mean) << ',' << format_double(p.null_sd) << ','
            << (p.z ? format_double(*p.z) : "NA") << '\n';
}

} // namespace dlmap::atypicality
