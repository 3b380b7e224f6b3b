#pragma once

// Slow reference implementations and small synthetic inputs shared by
// the unit tests and the acceptance runner. The oracles share nothing with
// the library beyond plain data types.

#include "dlmap/atypicality.hpp"
#include "dlmap/corpus.hpp"
#include "dlmap/embed.hpp"
#include "dlmap/novelty.hpp"
#include "dlmap/rng.hpp"
#include "dlmap/termcluster.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

// ---- embeddings ----------------------------------------------------------

inline dlmap::embed::BasicEmbeddingModel<double> random_model(std::size_t v, std::size_t d, dlmap::Rng& r) {
    dlmap::embed::BasicEmbeddingModel<double> m;
    std::unordered_map<std::string, std::uint64_t> counts;
    for (std::size_t i = 0; i < v; ++i)
        counts["t" + std::to_string(i)] = 1 + i;
    m.vocab = dlmap::corpus::Vocabulary(counts);
    m.dim = d;
    m.input.resize(v * d);
    m.output.resize(v * d);
    for (auto& x : m.input)
        x = r.normal() * 0.3;
    for (auto& x : m.output)
        x = r.normal() * 0.3;
    return m;
}

inline double sgns_loss(const dlmap::embed::BasicEmbeddingModel<double>& m, std::size_t c, std::size_t ctx,
                        const std::vector<std::size_t>& neg) {
    // Written out directly from the objective.
    auto dot_rows = [&](const std::vector<double>& a, std::size_t i, std::size_t j) {
        double s = 0;
        for (std::size_t d = 0; d < m.dim; ++d)
            s += a[i * m.dim + d] * m.input[j * m.dim + d];
        return s;
    };
    double l = std::log1p(std::exp(-dot_rows(m.output, ctx, c)));
    for (auto n : neg)
        l += std::log1p(std::exp(dot_rows(m.output, n, c)));
    return l;
}

// ---- phrases -------------------------------------------------------------

// Quadratic oracle: counts by rescanning the whole corpus for every
// candidate pair.
inline std::map<dlmap::corpus::Bigram, double> phrase_scores(const std::vector<dlmap::corpus::TokenStream>& streams,
                                                             double delta) {
    std::vector<std::pair<std::string, bool>> flat; // token, last-in-document
    for (const auto& s : streams)
        for (std::size_t i = 0; i < s.tokens.size(); ++i)
            flat.emplace_back(s.tokens[i], i + 1 == s.tokens.size());
    auto unigram = [&](const std::string& t) {
        std::uint64_t c = 0;
        for (const auto& f : flat)
            c += f.first == t;
        return c;
    };
    std::map<dlmap::corpus::Bigram, double> out;
    const double total = static_cast<double>(flat.size());
    for (std::size_t i = 0; i + 1 < flat.size(); ++i) {
        if (flat[i].second)
            continue;
        dlmap::corpus::Bigram b{flat[i].first, flat[i + 1].first};
        if (out.count(b))
            continue;
        std::uint64_t c = 0;
        for (std::size_t j = 0; j + 1 < flat.size(); ++j)
            c += !flat[j].second && flat[j].first == b.first && flat[j + 1].first == b.second;
        double ci = static_cast<double>(unigram(b.first)), cj = static_cast<double>(unigram(b.second));
        out[b] = (static_cast<double>(c) - delta) / (ci * cj) * total;
    }
    return out;
}

inline std::vector<dlmap::corpus::TokenStream> random_streams(std::uint64_t seed, std::size_t n_tokens,
                                                              std::size_t vocab) {
    dlmap::Rng r(seed);
    std::vector<dlmap::corpus::TokenStream> s;
    std::size_t used = 0;
    while (used < n_tokens) {
        dlmap::corpus::TokenStream t;
        t.doc_id = std::to_string(s.size());
        auto len = std::min<std::size_t>(n_tokens - used, 1 + r.below(30));
        for (std::size_t i = 0; i < len; ++i)
            t.tokens.push_back("w" + std::to_string(r.below(vocab)));
        used += len;
        s.push_back(std::move(t));
    }
    return s;
}

// ---- retrieval -----------------------------------------------------------

inline const std::vector<std::string> search_words = {"deep",   "learning", "neural", "network", "networks", "gene",
                                                      "cancer", "model", "convolutional", "image", "data", "memory"};

inline std::string random_text(dlmap::Rng& r, std::size_t n) {
    static const char* seps[] = {" ", " ", " ", ", ", "-", "_", ". ", " (", ") "};
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        auto w = search_words[r.below(search_words.size())];
        if (r.uniform() < 0.1)
            w[0] = static_cast<char>(std::toupper(w[0]));
        s += w;
        s += seps[r.below(9)];
    }
    return s;
}

inline std::vector<dlmap::corpus::RawDocument> random_store_docs(std::size_t n, std::uint64_t seed) {
    dlmap::Rng r(seed);
    std::vector<dlmap::corpus::RawDocument> docs(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& d = docs[i];
        d.id = "D" + std::to_string(i);
        d.year = 1990 + static_cast<int>(r.below(29));
        d.title = random_text(r, 3 + r.below(4));
        d.abstract = random_text(r, 5 + r.below(20));
        for (std::uint64_t k = 0, nk = r.below(3); k < nk; ++k)
            d.keywords.push_back(random_text(r, 1 + r.below(2)));
    }
    return docs;
}

// Independent scan: every field is flattened to " w1 w2 ... " over
// alphanumeric runs and terms are matched as padded substrings.
inline std::string flatten(const std::string& text) {
    std::string s = " ";
    for (char c : text)
        s += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : ' ';
    std::string out = " ";
    std::istringstream in(s);
    std::string w;
    while (in >> w)
        out += w + " ";
    return out;
}

inline std::set<std::string> brute_force(const std::vector<dlmap::corpus::RawDocument>& docs,
                                         const std::vector<std::string>& terms) {
    std::set<std::string> out;
    for (const auto& d : docs) {
        std::vector<std::string> fields = {flatten(d.title), flatten(d.abstract)};
        for (const auto& k : d.keywords)
            fields.push_back(flatten(k));
        for (const auto& t : terms) {
            auto needle = flatten(t);
            if (needle == " ")
                continue;
            bool hit = false;
            for (const auto& f : fields)
                hit = hit || f.find(needle) != std::string::npos;
            if (hit) {
                out.insert(d.id);
                break;
            }
        }
    }
    return out;
}

// ---- term clustering -----------------------------------------------------

inline dlmap::termcluster::Matrix blobs(std::size_t n, std::size_t d, std::size_t k, double spread,
                                        std::uint64_t seed, std::vector<std::size_t>* truth = nullptr) {
    dlmap::Rng r(seed);
    dlmap::termcluster::Matrix centers(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
    for (Eigen::Index c = 0; c < centers.rows(); ++c)
        for (Eigen::Index j = 0; j < centers.cols(); ++j)
            centers(c, j) = 10.0 * r.normal();
    dlmap::termcluster::Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        auto c = static_cast<Eigen::Index>(i % k);
        if (truth)
            truth->push_back(i % k);
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            x(static_cast<Eigen::Index>(i), j) = centers(c, j) + spread * r.normal();
    }
    return x;
}


// ---- novelty -------------------------------------------------------------

struct RefPaper {
    std::string id;
    int year;
    std::set<std::string> journals;
};

struct JournalInfo {
    std::map<std::string, std::set<std::string>> categories;
    std::set<std::string> cs, hs;

    bool cs_journal(const std::string& j) const {
        auto it = categories.find(j);
        if (it == categories.end())
            return false;
        for (const auto& c : it->second)
            if (cs.count(c))
                return true;
        return false;
    }
    bool hs_only(const std::string& j) const {
        auto it = categories.find(j);
        if (it == categories.end() || it->second.empty())
            return false;
        for (const auto& c : it->second)
            if (!hs.count(c))
                return false;
        return true;
    }
};

struct NoveltyRow {
    std::string id;
    bool dummy[3];
    double weighted[3];
    std::size_t qualifying[3];
};

// Scope 0 = all sciences, 1 = no CS, 2 = only HS.
inline std::vector<NoveltyRow> novelty(const std::vector<RefPaper>& papers, const JournalInfo& info,
                                       std::uint64_t threshold, int reuse_years = 3, int window_years = 3) {
    int end = 0;
    std::set<std::string> all_journals;
    for (const auto& p : papers) {
        end = std::max(end, p.year);
        all_journals.insert(p.journals.begin(), p.journals.end());
    }
    auto both = [](const RefPaper& p, const std::string& a, const std::string& b) {
        return p.journals.count(a) && p.journals.count(b);
    };
    std::vector<NoveltyRow> out;
    for (const auto& p : papers) {
        if (p.year + reuse_years > end)
            continue;
        NoveltyRow row{p.id, {false, false, false}, {0, 0, 0}, {0, 0, 0}};
        double sum[3] = {0, 0, 0};
        std::vector<std::string> js(p.journals.begin(), p.journals.end());
        for (std::size_t i = 0; i < js.size(); ++i)
            for (std::size_t j = i + 1; j < js.size(); ++j) {
                const auto &a = js[i], &b = js[j];
                bool seen = false;
                std::uint64_t reuse = 0;
                for (const auto& q : papers) {
                    if (!both(q, a, b))
                        continue;
                    seen = seen || q.year < p.year;
                    reuse += q.year > p.year && q.year <= p.year + reuse_years;
                }
                if (seen || reuse < threshold)
                    continue;
                // Co-citation profiles over the preceding window.
                auto profile = [&](const std::string& x) {
                    std::map<std::string, std::uint64_t> v;
                    for (const auto& q : papers)
                        if (q.year >= p.year - window_years && q.year < p.year && q.journals.count(x))
                            for (const auto& y : q.journals)
                                if (y != x)
                                    ++v[y];
                    return v;
                };
                auto va = profile(a), vb = profile(b);
                std::uint64_t dot = 0, na = 0, nb = 0;
                for (const auto& [k, c] : va) {
                    na += c * c;
                    if (auto it = vb.find(k); it != vb.end())
                        dot += c * it->second;
                }
                for (const auto& [k, c] : vb)
                    nb += c * c;
                double dist = 1.0;
                if (na > 0 && nb > 0)
                    dist = 1.0 - static_cast<double>(dot) /
                                     (std::sqrt(static_cast<double>(na)) * std::sqrt(static_cast<double>(nb)));
                bool in[3] = {true, !info.cs_journal(a) && !info.cs_journal(b), info.hs_only(a) && info.hs_only(b)};
                for (int s = 0; s < 3; ++s)
                    if (in[s]) {
                        sum[s] += dist;
                        ++row.qualifying[s];
                    }
            }
        for (int s = 0; s < 3; ++s) {
            row.dummy[s] = row.qualifying[s] > 0;
            row.weighted[s] = std::log(1.0 + sum[s]);
        }
        out.push_back(row);
    }
    std::sort(out.begin(), out.end(), [](const NoveltyRow& a, const NoveltyRow& b) { return a.id < b.id; });
    return out;
}

// 200 papers, 20 journals over 15 years, with planted first-ever pairs
// re-cited 3, 6 and 12 times so that thresholds 3, 5 and 10 each bite.
struct NoveltyFixture {
    std::vector<dlmap::novelty::ReferenceRecord> records;
    std::vector<RefPaper> papers;
    JournalInfo info;
    dlmap::novelty::JournalCategories categories;
};

inline NoveltyFixture novelty_fixture(std::uint64_t seed) {
    dlmap::Rng r(seed);
    NoveltyFixture f;
    auto jname = [](std::size_t i) { return "J" + std::string(i < 10 ? "0" : "") + std::to_string(i); };
    const std::size_t background = 14;
    const int first = 2000, years = 15;
    std::vector<std::pair<int, std::set<std::string>>> raw;
    // Planted pairs over journals 14..19: (14,15) x3, (16,17) x6, (18,19) x12.
    const std::size_t planted_reuse[3] = {3, 6, 12};
    std::size_t planted_total = 0;
    for (auto n : planted_reuse)
        planted_total += 1 + n;
    const std::size_t rest = 200 - planted_total;
    for (std::size_t i = 0; i < rest; ++i) {
        std::set<std::string> js;
        for (std::uint64_t k = 0, nk = 2 + r.below(4); k < nk; ++k)
            js.insert(jname(r.below(background)));
        raw.push_back({first + static_cast<int>(r.below(years)), js});
    }
    for (std::size_t p = 0; p < 3; ++p) {
        auto a = jname(background + 2 * p), b = jname(background + 2 * p + 1);
        int y0 = first + 5 + static_cast<int>(p);
        std::set<std::string> js = {a, b, jname(r.below(background)), jname(r.below(background))};
        raw.push_back({y0, js});
        for (std::size_t k = 0; k < planted_reuse[p]; ++k)
            raw.push_back({y0 + 1 + static_cast<int>(r.below(3)), {a, b, jname(r.below(background))}});
        // Give each planted journal some earlier history of its own.
        raw[r.below(rest)].second.insert(r.below(2) ? a : b);
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
        std::string id = "P" + std::to_string(1000 + i);
        dlmap::novelty::ReferenceRecord rec{id, raw[i].first, {}};
        for (const auto& j : raw[i].second) {
            rec.cited_journals.push_back(j);
            if (r.below(4) == 0)
                rec.cited_journals.push_back(j); // repeated citation of the same journal
        }
        f.records.push_back(rec);
        f.papers.push_back({id, raw[i].first, raw[i].second});
    }
    f.info.cs = {"Computer Science, Artificial Intelligence", "Computer Science, Theory & Methods"};
    f.info.hs = {"Oncology", "Neurosciences", "Genetics & Heredity"};
    static const std::vector<std::vector<std::string>> kinds = {
        {"Oncology"},
        {"Neurosciences", "Genetics & Heredity"},
        {"Computer Science, Artificial Intelligence"},
        {"Oncology", "Computer Science, Theory & Methods"},
        {"Physics, Applied"},
        {"Genetics & Heredity", "Physics, Applied"},
        {}};
    // Planted pairs: CS, non-CS and health-only, in that order.
    static const std::vector<std::vector<std::string>> planted_kinds = {
        {"Computer Science, Artificial Intelligence"}, {"Oncology"}, {"Physics, Applied"}, {"Oncology"},
        {"Oncology"}, {"Neurosciences", "Genetics & Heredity"}};
    for (std::size_t j = 0; j < 20; ++j) {
        const auto& k = j < background ? kinds[j % kinds.size()] : planted_kinds[j - background];
        if (k.empty())
            continue;
        f.info.categories[jname(j)] = {k.begin(), k.end()};
        f.categories[jname(j)] = {k.begin(), k.end()};
    }
    return f;
}

inline dlmap::novelty::ScopeFilter filter_for(const NoveltyFixture& f) {
    return dlmap::novelty::ScopeFilter(f.categories, f.info.cs, f.info.hs);
}

// ---- atypicality ---------------------------------------------------------

inline std::vector<dlmap::atypicality::EdgeRecord> random_edges(std::size_t papers, std::size_t journals,
                                                                std::uint64_t seed) {
    dlmap::Rng r(seed);
    std::vector<dlmap::atypicality::EdgeRecord> out;
    for (std::size_t p = 0; p < papers; ++p) {
        int year = 2010 + static_cast<int>(r.below(5));
        for (std::uint64_t k = 0, nk = 2 + r.below(6); k < nk; ++k)
            out.push_back({"p" + std::to_string(p), year, "j" + std::to_string(r.below(journals)),
                           year - 1 - static_cast<int>(r.below(4))});
    }
    return out;
}

// Six papers over three cited-year strata, small enough to enumerate.
inline std::vector<dlmap::atypicality::EdgeRecord> six_paper_network() {
    return {
        {"a", 2010, "J1", 2008}, {"a", 2010, "J2", 2008}, {"a", 2010, "J3", 2007},
        {"b", 2010, "J1", 2008}, {"b", 2010, "J3", 2009}, {"b", 2010, "J4", 2007},
        {"c", 2011, "J2", 2009}, {"c", 2011, "J4", 2008}, {"c", 2011, "J1", 2007},
        {"d", 2011, "J3", 2008}, {"d", 2011, "J2", 2009},
        {"e", 2012, "J4", 2009}, {"e", 2012, "J1", 2009}, {"e", 2012, "J5", 2007},
        {"f", 2012, "J5", 2008}, {"f", 2012, "J2", 2007},
    };
}


struct ExactMoments {
    double mean = 0, var = 0;
};

// Exhaustive null: within each cited-year stratum every arrangement of the
// journal multiset over the stratum's edge slots is equally likely.
inline std::map<std::uint64_t, ExactMoments> exhaustive_null(const dlmap::atypicality::CitationNetwork& net) {
    using dlmap::atypicality::Edge;
    auto edges = net.edges();
    std::vector<std::vector<std::size_t>> slots;
    std::vector<std::vector<std::uint32_t>> labels;
    for (const auto& [y, idx] : net.strata()) {
        slots.push_back(idx);
        std::vector<std::uint32_t> l;
        for (auto e : idx)
            l.push_back(edges[e].journal);
        std::sort(l.begin(), l.end());
        labels.push_back(l);
    }
    std::set<std::uint64_t> keys;
    for (const auto& pp : net.paper_pairs())
        keys.insert(pp.begin(), pp.end());
    std::map<std::uint64_t, double> s, ss;
    double configs = 0;
    auto evaluate = [&] {
        std::vector<std::set<std::uint32_t>> js(net.papers().size());
        for (const auto& e : edges)
            js[e.paper].insert(e.journal);
        std::map<std::uint64_t, double> c;
        for (const auto& j : js) {
            std::vector<std::uint32_t> v(j.begin(), j.end());
            for (std::size_t a = 0; a < v.size(); ++a)
                for (std::size_t b = a + 1; b < v.size(); ++b)
                    c[dlmap::novelty::pair_key(v[a], v[b])] += 1;
        }
        for (auto k : keys) {
            s[k] += c[k];
            ss[k] += c[k] * c[k];
        }
        configs += 1;
    };
    std::function<void(std::size_t)> rec = [&](std::size_t stratum) {
        if (stratum == slots.size()) {
            evaluate();
            return;
        }
        auto l = labels[stratum];
        do {
            for (std::size_t i = 0; i < l.size(); ++i)
                edges[slots[stratum][i]].journal = l[i];
            rec(stratum + 1);
        } while (std::next_permutation(l.begin(), l.end()));
    };
    rec(0);
    std::map<std::uint64_t, ExactMoments> out;
    for (auto k : keys) {
        double m = s[k] / configs;
        out[k] = {m, ss[k] / configs - m * m};
    }
    return out;
}

// ---- dtw -----------------------------------------------------------------

// Minimum over every monotone warping path, costs added in path order.
inline double dtw_paths(const std::vector<double>& a, const std::vector<double>& b, bool squared = false) {
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
        double d = a[i] - b[j];
        acc = acc + (squared ? d * d : std::abs(d));
        if (i + 1 == a.size() && j + 1 == b.size()) {
            best = std::min(best, acc);
            return;
        }
        if (i + 1 < a.size())
            walk(i + 1, j, acc);
        if (j + 1 < b.size())
            walk(i, j + 1, acc);
        if (i + 1 < a.size() && j + 1 < b.size())
            walk(i + 1, j + 1, acc);
    };
    walk(0, 0, 0.0);
    return best;
}

// ---- clustering agreement ------------------------------------------------

inline double adjusted_rand(const std::vector<std::size_t>& x, const std::vector<std::size_t>& y) {
    std::map<std::pair<std::size_t, std::size_t>, double> nij;
    std::map<std::size_t, double> a, b;
    for (std::size_t i = 0; i < x.size(); ++i) {
        nij[{x[i], y[i]}] += 1;
        a[x[i]] += 1;
        b[y[i]] += 1;
    }
    auto c2 = [](double n) { return n * (n - 1) / 2; };
    double sij = 0, sa = 0, sb = 0;
    for (auto& [k, v] : nij)
        sij += c2(v);
    for (auto& [k, v] : a)
        sa += c2(v);
    for (auto& [k, v] : b)
        sb += c2(v);
    double expected = sa * sb / c2(static_cast<double>(x.size()));
    double mx = (sa + sb) / 2;
    return mx == expected ? 1.0 : (sij - expected) / (mx - expected);
}

} // namespace oracle
