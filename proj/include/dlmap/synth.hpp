#pragma once

// Synthetic data with planted structure: topic corpora, citation records
// with a known first-ever-pair schedule, citation-share series, and analysis
// tables drawn from known regression models.

#include "dlmap/atypicality.hpp"
#include "dlmap/common.hpp"
#include "dlmap/corpus.hpp"
#include "dlmap/csv.hpp"
#include "dlmap/novelty.hpp"
#include "dlmap/retrieve.hpp"
#include "dlmap/rng.hpp"
#include "dlmap/tsclust.hpp"

#include <json.hpp>

#include <map>
#include <numbers>
#include <set>

namespace dlmap::synth {

// Pronounceable pseudo-words; the leading consonant is one no English
// function word starts with in this shape, so they never hit a stoplist.
inline std::string pseudo_word(std::size_t index, std::size_t syllables = 3) {
    static const char* lead = "kqvxz";
    static const char* cons = "bdfgkmnprstvz";
    static const char* vow = "aeiou";
    std::string w;
    w += lead[index % 5];
    index /= 5;
    w += vow[index % 5];
    index /= 5;
    for (std::size_t s = 1; s < syllables || index > 0; ++s) {
        w += cons[index % 13];
        index /= 13;
        w += vow[index % 5];
        index /= 5;
    }
    return w;
}

// Cumulative weights i^-exponent for i = 1..n.
inline std::vector<double> zipf_cdf(std::size_t n, double exponent) {
    std::vector<double> cdf(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += std::pow(static_cast<double>(i + 1), -exponent);
        cdf[i] = total;
    }
    for (auto& c : cdf)
        c /= total;
    return cdf;
}

inline std::size_t draw_cdf(Rng& rng, const std::vector<double>& cdf) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), rng.uniform());
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

// ---------------------------------------------------------------- topics

struct TopicCorpusConfig {
    std::size_t topics = 2;
    std::size_t words_per_topic = 1000;
    std::size_t docs = 2000;
    std::size_t doc_length = 50;
    double zipf_exponent = 0.5;
    std::uint64_t seed = 1;
};

struct TopicCorpus {
    std::vector<corpus::TokenStream> streams;
    std::map<std::string, std::size_t> word_topic;
    std::vector<std::size_t> doc_topic;
};

// Each document draws all its tokens from one topic's private vocabulary.
inline TopicCorpus topic_corpus(const TopicCorpusConfig& cfg) {
    require(cfg.topics >= 1 && cfg.words_per_topic >= 1 && cfg.docs >= 1, "topic corpus sizes must be positive");
    TopicCorpus tc;
    std::vector<std::vector<std::string>> words(cfg.topics);
    for (std::size_t t = 0; t < cfg.topics; ++t)
        for (std::size_t w = 0; w < cfg.words_per_topic; ++w) {
            auto s = pseudo_word(t * cfg.words_per_topic + w);
            words[t].push_back(s);
            tc.word_topic[s] = t;
        }
    auto cdf = zipf_cdf(cfg.words_per_topic, cfg.zipf_exponent);
    Rng rng(derive_seed(cfg.seed, "synth.topics", 0));
    for (std::size_t d = 0; d < cfg.docs; ++d) {
        std::size_t t = d % cfg.topics;
        corpus::TokenStream s;
        char id[32];
        std::snprintf(id, sizeof id, "doc%06zu", d);
        s.doc_id = id;
        for (std::size_t i = 0; i < cfg.doc_length; ++i)
            s.tokens.push_back(words[t][draw_cdf(rng, cdf)]);
        tc.streams.push_back(std::move(s));
        tc.doc_topic.push_back(t);
    }
    return tc;
}

// ---------------------------------------------------------------- documents

struct DocumentCorpusConfig {
    std::size_t docs = 600;
    int first_year = 2000;
    int last_year = 2019;
    // Share of documents drawn from the deep-learning topic in the last
    // year; the share rises linearly from near zero.
    double dl_share_end = 0.5;
    std::size_t words_per_topic = 300;
    std::size_t abstract_length = 60;
    std::uint64_t seed = 1;
};

inline const std::vector<std::string>& planted_dl_phrases() {
    static const std::vector<std::string> p = {
        "deep learning", "neural network", "neural networks", "convolutional neural network",
        "recurrent neural network", "deep neural network", "long short term memory",
        "generative adversarial network", "artificial neural network", "CNN", "LSTM"};
    return p;
}

inline const std::vector<std::string>& health_categories_sample() {
    static const std::vector<std::string> c = {"Neurosciences", "Oncology", "Radiology, Nuclear Medicine & Medical Imaging",
                                               "Medical Informatics", "Cardiac & Cardiovascular Systems",
                                               "Biochemistry & Molecular Biology"};
    return c;
}

// Two topics of pseudo-words; deep-learning documents also carry planted
// phrases and computer-science categories with some probability.
inline std::vector<corpus::RawDocument> document_corpus(const DocumentCorpusConfig& cfg) {
    require(cfg.last_year >= cfg.first_year, "document corpus needs a valid year range");
    Rng rng(derive_seed(cfg.seed, "synth.documents", 0));
    std::vector<std::string> dl_words, hs_words, shared;
    for (std::size_t w = 0; w < cfg.words_per_topic; ++w) {
        dl_words.push_back(pseudo_word(w));
        hs_words.push_back(pseudo_word(cfg.words_per_topic + w));
    }
    for (std::size_t w = 0; w < cfg.words_per_topic / 3; ++w)
        shared.push_back(pseudo_word(2 * cfg.words_per_topic + w));
    auto cdf = zipf_cdf(cfg.words_per_topic, 0.7);
    auto shared_cdf = zipf_cdf(shared.size(), 0.7);
    auto cs = retrieve::computer_science_categories();
    std::vector<std::string> cs_list(cs.begin(), cs.end());
    const auto& hs_list = health_categories_sample();
    static const std::vector<std::string> countries = {"US", "CN", "DE", "FR", "GB", "IT", "JP", "KR"};
    const auto& phrases = planted_dl_phrases();
    const int span = cfg.last_year - cfg.first_year;

    std::vector<corpus::RawDocument> docs;
    for (std::size_t d = 0; d < cfg.docs; ++d) {
        corpus::RawDocument doc;
        char id[32];
        std::snprintf(id, sizeof id, "W%06zu", d);
        doc.id = id;
        doc.year = cfg.first_year + static_cast<int>(rng.below(static_cast<std::uint64_t>(span + 1)));
        double frac = span > 0 ? static_cast<double>(doc.year - cfg.first_year) / span : 1.0;
        bool dl = rng.uniform() < cfg.dl_share_end * (0.05 + 0.95 * frac);
        const auto& words = dl ? dl_words : hs_words;
        auto text = [&](std::size_t len) {
            std::string s;
            for (std::size_t i = 0; i < len; ++i) {
                if (!s.empty())
                    s += ' ';
                if (dl && rng.uniform() < 0.06)
                    s += phrases[rng.below(phrases.size())];
                else if (rng.uniform() < 0.2)
                    s += shared[draw_cdf(rng, shared_cdf)];
                else
                    s += words[draw_cdf(rng, cdf)];
            }
            return s;
        };
        doc.title = text(8);
        doc.abstract = text(cfg.abstract_length);
        for (int k = 0; k < 3; ++k)
            doc.keywords.push_back(text(2));
        doc.venue_id = std::string(dl ? "JDL" : "JHS") + std::to_string(rng.below(12));
        std::set<std::string> cats;
        cats.insert(hs_list[rng.below(hs_list.size())]);
        if (dl && rng.uniform() < 0.6)
            cats.insert(cs_list[rng.below(cs_list.size())]);
        if (rng.uniform() < 0.2)
            cats.insert(hs_list[rng.below(hs_list.size())]);
        doc.subject_categories.assign(cats.begin(), cats.end());
        doc.source = rng.uniform() < 0.5 ? corpus::Source::wos : corpus::Source::arxiv;
        std::set<std::string> cty;
        auto nc = 1 + rng.below(2);
        for (std::uint64_t c = 0; c < nc; ++c)
            cty.insert(countries[rng.below(countries.size())]);
        doc.countries.assign(cty.begin(), cty.end());
        docs.push_back(std::move(doc));
    }
    return docs;
}

// ---------------------------------------------------------------- citations

struct CitationConfig {
    std::size_t background_journals = 15;
    int first_year = 2000;
    int last_year = 2014;
    std::size_t papers_per_year = 12;
    std::size_t refs_per_paper = 4;
    // The planted schedule: `planted` pairs of fresh journals first cited
    // together in focal_year and reused `reuse` times over the next three
    // years; `decoys` fresh pairs reused only `decoy_reuse` times.
    int focal_year = 2008;
    std::size_t planted = 3;
    std::size_t reuse = 6;
    std::size_t decoys = 2;
    std::size_t decoy_reuse = 2;
    std::uint64_t seed = 1;
};

struct CitationData {
    std::vector<atypicality::EdgeRecord> edges; // also the novelty reference triples
    std::vector<std::pair<std::string, std::string>> journal_categories;
    std::vector<std::pair<std::string, std::string>> planted_pairs;
    std::vector<std::pair<std::string, std::string>> decoy_pairs;
};

inline std::string journal_name(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i);
    return buf;
}

// The first year contains one paper per background pair, so no background
// pair is ever new afterwards; planted and decoy papers cite only their
// own fresh pair. The number of qualifying new pairs in focal_year is
// therefore exactly `planted` whenever reuse >= threshold > decoy_reuse.
inline CitationData citation_data(const CitationConfig& cfg) {
    require(cfg.background_journals >= 2, "need at least two background journals");
    require(cfg.first_year < cfg.focal_year && cfg.focal_year + 3 <= cfg.last_year,
            "focal year must leave a full reuse window");
    Rng rng(derive_seed(cfg.seed, "synth.citations", 0));
    CitationData out;
    std::size_t serial = 0;
    auto paper_id = [&] {
        char buf[32];
        std::snprintf(buf, sizeof buf, "P%06zu", serial++);
        return std::string(buf);
    };
    auto cited_year = [&](int y) { return y - 1 - static_cast<int>(rng.below(5)); };
    std::vector<std::string> bg;
    for (std::size_t j = 0; j < cfg.background_journals; ++j)
        bg.push_back(journal_name("J", j));
    for (std::size_t a = 0; a < bg.size(); ++a)
        for (std::size_t b = a + 1; b < bg.size(); ++b) {
            auto id = paper_id();
            out.edges.push_back({id, cfg.first_year, bg[a], cited_year(cfg.first_year)});
            out.edges.push_back({id, cfg.first_year, bg[b], cited_year(cfg.first_year)});
        }
    for (int y = cfg.first_year + 1; y <= cfg.last_year; ++y)
        for (std::size_t p = 0; p < cfg.papers_per_year; ++p) {
            auto id = paper_id();
            auto nrefs = std::max<std::size_t>(2, cfg.refs_per_paper - 1 + rng.below(3));
            for (std::size_t r = 0; r < nrefs; ++r)
                out.edges.push_back({id, y, bg[rng.below(bg.size())], cited_year(y)});
        }
    auto plant = [&](std::size_t count, std::size_t reuse, const char* prefix, auto& record) {
        for (std::size_t k = 0; k < count; ++k) {
            auto a = journal_name(prefix, 2 * k), b = journal_name(prefix, 2 * k + 1);
            record.emplace_back(a, b);
            auto emit = [&](int y) {
                auto id = paper_id();
                out.edges.push_back({id, y, a, cited_year(y)});
                out.edges.push_back({id, y, b, cited_year(y)});
            };
            emit(cfg.focal_year);
            for (std::size_t r = 0; r < reuse; ++r)
                emit(cfg.focal_year + 1 + static_cast<int>(r % 3));
        }
    };
    plant(cfg.planted, cfg.reuse, "N", out.planted_pairs);
    plant(cfg.decoys, cfg.decoy_reuse, "D", out.decoy_pairs);

    // Categories: background journals cycle through CS, health and other;
    // planted journals are health journals.
    auto cs = retrieve::computer_science_categories();
    std::vector<std::string> cs_list(cs.begin(), cs.end());
    const auto& hs = health_categories_sample();
    for (std::size_t j = 0; j < bg.size(); ++j) {
        switch (j % 3) {
        case 0: out.journal_categories.emplace_back(bg[j], cs_list[j % cs_list.size()]); break;
        case 1: out.journal_categories.emplace_back(bg[j], hs[j % hs.size()]); break;
        default:
            out.journal_categories.emplace_back(bg[j], hs[j % hs.size()]);
            out.journal_categories.emplace_back(bg[j], "Mathematics, Applied");
        }
    }
    for (const auto& [a, b] : out.planted_pairs) {
        out.journal_categories.emplace_back(a, hs[0]);
        out.journal_categories.emplace_back(b, hs[1]);
    }
    for (const auto& [a, b] : out.decoy_pairs) {
        out.journal_categories.emplace_back(a, hs[2]);
        out.journal_categories.emplace_back(b, hs[3]);
    }
    return out;
}

inline std::vector<novelty::ReferenceRecord> to_references(const std::vector<atypicality::EdgeRecord>& edges) {
    std::map<std::string, novelty::ReferenceRecord> m;
    for (const auto& e : edges) {
        auto& r = m[e.paper_id];
        r.paper_id = e.paper_id;
        r.year = e.year;
        r.cited_journals.push_back(e.journal_id);
    }
    std::vector<novelty::ReferenceRecord> out;
    for (auto& [_, r] : m)
        out.push_back(std::move(r));
    return out;
}

// ---------------------------------------------------------------- series

struct SeriesConfig {
    std::size_t rising = 9;
    std::size_t falling = 9;
    int first_year = 2000;
    std::size_t length = 20;
    double noise = 0.01;
    std::uint64_t seed = 1;
};

// Rising family: logistic take-off at a random year; falling family: the
// mirror image. Values are shares in [0, 1].
inline std::vector<tsclust::TimeSeries> share_series(const SeriesConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, "synth.series", 0));
    std::vector<tsclust::TimeSeries> out;
    auto make = [&](bool up, std::size_t k) {
        tsclust::TimeSeries s;
        s.id = std::string(up ? "R" : "F") + std::to_string(k);
        s.start_year = cfg.first_year;
        double mid = static_cast<double>(cfg.length) * (0.4 + 0.3 * rng.uniform());
        double level = 0.3 + 0.4 * rng.uniform();
        for (std::size_t t = 0; t < cfg.length; ++t) {
            double l = 1.0 / (1.0 + std::exp(-(static_cast<double>(t) - mid) / 1.5));
            double v = level * (up ? l : 1.0 - l) + cfg.noise * rng.normal();
            s.values.push_back(std::clamp(v, 0.0, 1.0));
        }
        out.push_back(std::move(s));
    };
    for (std::size_t k = 0; k < cfg.rising; ++k)
        make(true, k);
    for (std::size_t k = 0; k < cfg.falling; ++k)
        make(false, k);
    return out;
}

inline void write_series(const std::string& path, const std::vector<tsclust::TimeSeries>& series) {
    auto out = open_output(path);
    out << "series_id,year,value\n";
    for (const auto& s : series)
        for (std::size_t t = 0; t < s.values.size(); ++t)
            out << s.id << ',' << s.start_year + static_cast<int>(t) << ',' << format_double(s.values[t]) << '\n';
}

// ---------------------------------------------------------------- analysis

struct AnalysisConfig {
    std::size_t rows = 2000;
    std::size_t journals = 100;
    std::size_t fields = 4;
    int first_year = 2014;
    int last_year = 2018;
    double beta_dl_mean = 0.1;   // NB mean
    double beta_dl_disp = 0.15;  // NB log dispersion
    double beta_dl_probit = -0.2;
    double beta_dl_tobit = -0.3;
    std::uint64_t seed = 1;
};

struct AnalysisData {
    csv::Table table;
    nlohmann::ordered_json truth;
};

inline const std::vector<std::string>& quadrant_levels() {
    static const std::vector<std::string> q = {"HC-HN", "HC-LN", "LC-HN", "LC-LN"};
    return q;
}

// Columns: paper_id, journal, field, year, dl, log_refs, log_authors,
// intl_collab, jif, survey, novelty_dummy (probit), novelty (tobit at 0),
// citations (NB2), quadrant (multinomial logit, LC-HN reference).
inline AnalysisData analysis_data(const AnalysisConfig& cfg) {
    require(cfg.rows >= 10 && cfg.journals >= 2 && cfg.fields >= 1, "analysis sizes too small");
    Rng rng(derive_seed(cfg.seed, "synth.analysis", 0));
    std::vector<double> jif(cfg.journals);
    std::vector<std::size_t> jfield(cfg.journals);
    for (std::size_t j = 0; j < cfg.journals; ++j) {
        jif[j] = 1.0 + 3.0 * rng.uniform();
        jfield[j] = rng.below(cfg.fields);
    }
    const double b_probit[] = {-0.3, cfg.beta_dl_probit, 0.25, 0.1};   // const, dl, log_refs, jif
    const double b_tobit[] = {0.2, cfg.beta_dl_tobit, 0.3, 1.0};       // const, dl, log_refs, log sigma
    const double b_nb[] = {0.5, cfg.beta_dl_mean, 0.3, 0.2};           // const, dl, log_refs, jif
    const double g_nb[] = {-0.7, cfg.beta_dl_disp};                    // const, dl
    // quadrant logits vs LC-HN: const, dl, log_refs
    const double b_mn[3][3] = {{0.2, 0.3, -0.1}, {-0.1, -0.4, 0.2}, {0.3, 0.1, 0.15}};

    AnalysisData out;
    out.table.header = {"paper_id", "journal", "field", "year", "dl", "log_refs", "log_authors", "intl_collab",
                        "jif", "survey", "novelty_dummy", "novelty", "citations", "quadrant"};
    for (std::size_t i = 0; i < cfg.rows; ++i) {
        auto j = rng.below(cfg.journals);
        int year = cfg.first_year + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.last_year - cfg.first_year + 1)));
        double dl = rng.uniform() < 0.3 ? 1.0 : 0.0;
        double log_refs = std::log(5.0 + static_cast<double>(rng.poisson(30.0)));
        double log_authors = std::log(1.0 + static_cast<double>(rng.poisson(3.0)));
        double intl = rng.uniform() < 0.25 ? 1.0 : 0.0;
        double survey = rng.uniform() < 0.05 ? 1.0 : 0.0;
        double eta_p = b_probit[0] + b_probit[1] * dl + b_probit[2] * log_refs + b_probit[3] * jif[j];
        double nov_dummy = eta_p + rng.normal() > 0.0 ? 1.0 : 0.0;
        double eta_t = b_tobit[0] + b_tobit[1] * dl + b_tobit[2] * log_refs;
        double nov = std::max(0.0, eta_t + std::exp(b_tobit[3]) * rng.normal());
        double mu = std::exp(b_nb[0] + b_nb[1] * dl + b_nb[2] * log_refs + b_nb[3] * jif[j]);
        double alpha = std::exp(g_nb[0] + g_nb[1] * dl);
        auto cites = rng.negative_binomial(mu, alpha);
        // levels in order HC-HN, HC-LN, LC-HN(ref), LC-LN
        double e[4];
        int blk = 0;
        for (int l = 0; l < 4; ++l) {
            if (l == 2) {
                e[l] = 0.0;
                continue;
            }
            e[l] = b_mn[blk][0] + b_mn[blk][1] * dl + b_mn[blk][2] * log_refs;
            ++blk;
        }
        double m = *std::max_element(e, e + 4), den = 0.0;
        for (double v : e)
            den += std::exp(v - m);
        double u = rng.uniform() * den, acc = 0.0;
        int q = 3;
        for (int l = 0; l < 4; ++l) {
            acc += std::exp(e[l] - m);
            if (u < acc) {
                q = l;
                break;
            }
        }
        char pid[32];
        std::snprintf(pid, sizeof pid, "A%06zu", i);
        out.table.rows.push_back({pid, journal_name("J", j), "F" + std::to_string(jfield[j]), std::to_string(year),
                                  format_double(dl), format_double(log_refs), format_double(log_authors),
                                  format_double(intl), format_double(jif[j]), format_double(survey),
                                  format_double(nov_dummy), format_double(nov), std::to_string(cites),
                                  quadrant_levels()[static_cast<std::size_t>(q)]});
    }
    out.truth = {
        {"probit", {{"(Intercept)", b_probit[0]}, {"dl", b_probit[1]}, {"log_refs", b_probit[2]}, {"jif", b_probit[3]}}},
        {"tobit", {{"(Intercept)", b_tobit[0]}, {"dl", b_tobit[1]}, {"log_refs", b_tobit[2]}, {"log_sigma", b_tobit[3]}}},
        {"negbin",
         {{"(Intercept)", b_nb[0]}, {"dl", b_nb[1]}, {"log_refs", b_nb[2]}, {"jif", b_nb[3]},
          {"dispersion:(Intercept)", g_nb[0]}, {"dispersion:dl", g_nb[1]}}},
        {"mnlogit",
         {{"HC-HN:(Intercept)", b_mn[0][0]}, {"HC-HN:dl", b_mn[0][1]}, {"HC-HN:log_refs", b_mn[0][2]},
          {"HC-LN:(Intercept)", b_mn[1][0]}, {"HC-LN:dl", b_mn[1][1]}, {"HC-LN:log_refs", b_mn[1][2]},
          {"LC-LN:(Intercept)", b_mn[2][0]}, {"LC-LN:dl", b_mn[2][1]}, {"LC-LN:log_refs", b_mn[2][2]}}}};
    return out;
}

} // namespace dlmap::synth
