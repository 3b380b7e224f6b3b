#pragma once

// Abstract ingestion: normalization, frequency filters, acronym expansion and
// frequent-bigram pasting.

#include "dlmap/common.hpp"

#include <json.hpp>

#include <cctype>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace dlmap::corpus {

enum class Source { arxiv, wos, synthetic };

inline Source parse_source(std::string_view s) {
    if (s == "arxiv" || s == "arxiv-like")
        return Source::arxiv;
    if (s == "wos" || s == "wos-like")
        return Source::wos;
    if (s == "synthetic")
        return Source::synthetic;
    fail("unknown document source '" + std::string(s) + "'");
}

inline const char* to_string(Source s) {
    switch (s) {
    case Source::arxiv: return "arxiv";
    case Source::wos: return "wos";
    case Source::synthetic: return "synthetic";
    }
    return "synthetic";
}

struct RawDocument {
    std::string id;
    int year = 0;
    std::string title;
    std::string abstract;
    std::vector<std::string> keywords;
    std::string venue_id;
    std::vector<std::string> subject_categories; // sorted, unique
    Source source = Source::synthetic;
    std::vector<std::string> countries; // optional affiliation countries
};

inline RawDocument document_from_json(const nlohmann::json& j) {
    RawDocument d;
    require(j.contains("id") && j.contains("year"), "document needs 'id' and 'year'");
    d.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    d.year = j.at("year").get<int>();
    d.title = j.value("title", "");
    d.abstract = j.value("abstract", "");
    d.keywords = j.value("keywords", std::vector<std::string>{});
    d.venue_id = j.value("venue_id", "");
    auto cats = j.value("subject_categories", std::vector<std::string>{});
    std::set<std::string> uniq(cats.begin(), cats.end());
    d.subject_categories.assign(uniq.begin(), uniq.end());
    d.source = parse_source(j.value("source", "synthetic"));
    d.countries = j.value("countries", std::vector<std::string>{});
    require(d.year >= 1900 && d.year <= 2100,
            "document " + d.id + ": year " + std::to_string(d.year) + " outside [1900, 2100]");
    return d;
}

inline nlohmann::ordered_json document_to_json(const RawDocument& d) {
    nlohmann::ordered_json j;
    j["id"] = d.id;
    j["year"] = d.year;
    j["title"] = d.title;
    j["abstract"] = d.abstract;
    j["keywords"] = d.keywords;
    j["venue_id"] = d.venue_id;
    j["subject_categories"] = d.subject_categories;
    j["source"] = to_string(d.source);
    if (!d.countries.empty())
        j["countries"] = d.countries;
    return j;
}

inline std::vector<RawDocument> read_jsonl(const std::string& path) {
    std::vector<RawDocument> docs;
    std::unordered_set<std::string> seen;
    std::size_t ln = 0;
    for (const auto& line : read_lines(path)) {
        ++ln;
        if (trim(line).empty())
            continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(path + ":" + std::to_string(ln) + ": " + e.what());
        }
        auto d = document_from_json(j);
        require(seen.insert(d.id).second, path + ": duplicate document id " + d.id);
        docs.push_back(std::move(d));
    }
    return docs;
}

inline void write_jsonl(const std::string& path, const std::vector<RawDocument>& docs) {
    auto out = open_output(path);
    for (const auto& d : docs)
        out << document_to_json(d).dump() << '\n';
}

struct TokenStream {
    std::string doc_id;
    std::vector<std::string> tokens;

    bool operator==(const TokenStream&) const = default;
};

enum class KeywordPolicy { by_source, always, never };

struct NormalizationConfig {
    bool split_hyphens = true;
    bool keep_numbers = true;
    // by_source: keywords join the text for everything except arXiv-like
    // records, which carry no author keywords in the training corpus.
    KeywordPolicy keywords = KeywordPolicy::by_source;
};

// Lowercases ASCII, drops apostrophes, splits on any other punctuation or
// whitespace, and keeps internal underscores. Bytes >= 0x80 are kept as
// word characters so UTF-8 text survives untouched.
inline std::vector<std::string> normalize_text(std::string_view text,
                                               const NormalizationConfig& cfg = {}) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        auto b = cur.find_first_not_of('_');
        if (b != std::string::npos) {
            auto e = cur.find_last_not_of('_');
            std::string tok = cur.substr(b, e - b + 1);
            bool numeric = std::all_of(tok.begin(), tok.end(),
                                       [](unsigned char c) { return std::isdigit(c) || c == '_'; });
            if (cfg.keep_numbers || !numeric)
                out.push_back(std::move(tok));
        }
        cur.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80 || c == '_') {
            cur += static_cast<char>(std::tolower(c));
        } else if (c == '\'') {
            continue;
        } else if (c == '-' && !cfg.split_hyphens) {
            cur += '_';
        } else {
            flush();
        }
    }
    flush();
    return out;
}

inline bool includes_keywords(const RawDocument& doc, const NormalizationConfig& cfg) {
    switch (cfg.keywords) {
    case KeywordPolicy::always: return true;
    case KeywordPolicy::never: return false;
    case KeywordPolicy::by_source: return doc.source != Source::arxiv;
    }
    return false;
}

// Title, abstract and (per policy) keywords, in that order.
inline TokenStream tokenize(const RawDocument& doc, const NormalizationConfig& cfg = {}) {
    TokenStream ts{doc.id, normalize_text(doc.title, cfg)};
    auto append = [&](std::string_view text) {
        auto toks = normalize_text(text, cfg);
        ts.tokens.insert(ts.tokens.end(), std::make_move_iterator(toks.begin()),
                         std::make_move_iterator(toks.end()));
    };
    append(doc.abstract);
    if (includes_keywords(doc, cfg))
        for (const auto& k : doc.keywords)
            append(k);
    return ts;
}

inline std::vector<TokenStream> filter_short(std::vector<TokenStream> streams,
                                             std::size_t min_tokens = 15) {
    std::erase_if(streams, [&](const TokenStream& s) { return s.tokens.size() < min_tokens; });
    return streams;
}

inline void remove_stopwords(std::vector<TokenStream>& streams,
                             const std::unordered_set<std::string>& stopwords) {
    for (auto& s : streams)
        std::erase_if(s.tokens, [&](const std::string& t) { return stopwords.count(t) > 0; });
}

// ---------------------------------------------------------------- vocabulary

class Vocabulary {
public:
    struct Entry {
        std::size_t index = 0;
        std::uint64_t count = 0;
    };

    Vocabulary() = default;

    // Tokens are ordered by descending count, ties lexicographic.
    explicit Vocabulary(const std::unordered_map<std::string, std::uint64_t>& counts) {
        std::vector<std::pair<std::string, std::uint64_t>> items(counts.begin(), counts.end());
        std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        for (auto& [tok, c] : items)
            add(tok, c);
    }

    void add(const std::string& token, std::uint64_t count) {
        require(!entries_.count(token), "duplicate vocabulary token " + token);
        entries_[token] = Entry{tokens_.size(), count};
        tokens_.push_back(token);
        counts_.push_back(count);
        total_ += count;
    }

    std::size_t size() const { return tokens_.size(); }
    bool empty() const { return tokens_.empty(); }
    bool contains(const std::string& t) const { return entries_.count(t) > 0; }

    const Entry* find(const std::string& t) const {
        auto it = entries_.find(t);
        return it == entries_.end() ? nullptr : &it->second;
    }

    std::size_t index(const std::string& t) const {
        auto* e = find(t);
        require(e != nullptr, "token '" + t + "' not in vocabulary");
        return e->index;
    }

    std::uint64_t count(const std::string& t) const {
        auto* e = find(t);
        return e ? e->count : 0;
    }

    const std::string& token(std::size_t i) const { return tokens_.at(i); }
    std::uint64_t count_at(std::size_t i) const { return counts_.at(i); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    std::uint64_t total() const { return total_; }

    bool operator==(const Vocabulary& o) const {
        return tokens_ == o.tokens_ && counts_ == o.counts_;
    }

private:
    std::unordered_map<std::string, Entry> entries_;
    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

inline std::unordered_map<std::string, std::uint64_t>
count_tokens(const std::vector<TokenStream>& streams) {
    std::unordered_map<std::string, std::uint64_t> counts;
    for (const auto& s : streams)
        for (const auto& t : s.tokens)
            ++counts[t];
    return counts;
}

// Counts tokens, drops those seen fewer than min_count times from both the
// vocabulary and the streams.
inline Vocabulary build_vocabulary(std::vector<TokenStream>& streams, std::uint64_t min_count) {
    require(min_count >= 1, "min_count must be >= 1");
    auto counts = count_tokens(streams);
    std::erase_if(counts, [&](const auto& kv) { return kv.second < min_count; });
    for (auto& s : streams)
        std::erase_if(s.tokens, [&](const std::string& t) { return !counts.count(t); });
    return Vocabulary(counts);
}

inline void write_vocabulary(const std::string& path, const Vocabulary& v) {
    auto out = open_output(path);
    for (std::size_t i = 0; i < v.size(); ++i)
        out << v.token(i) << '\t' << i << '\t' << v.count_at(i) << '\n';
}

inline Vocabulary read_vocabulary(const std::string& path) {
    Vocabulary v;
    for (const auto& line : read_lines(path)) {
        if (line.empty())
            continue;
        auto f = split(line, '\t');
        require(f.size() == 3, path + ": vocabulary rows need token, index, count");
        require(static_cast<std::size_t>(parse_int(f[1], "vocabulary index")) == v.size(),
                path + ": vocabulary indices must be dense and ordered");
        v.add(f[0], static_cast<std::uint64_t>(parse_int(f[2], "vocabulary count")));
    }
    return v;
}

inline void write_streams(const std::string& path, const std::vector<TokenStream>& streams) {
    auto out = open_output(path);
    for (const auto& s : streams)
        out << join(s.tokens, " ") << '\n';
}

// Stream ids are line numbers; the text format carries tokens only.
inline std::vector<TokenStream> read_streams(const std::string& path) {
    std::vector<TokenStream> out;
    std::size_t n = 0;
    for (const auto& line : read_lines(path)) {
        TokenStream s{std::to_string(n++), {}};
        for (auto& t : split(line, ' '))
            if (!t.empty())
                s.tokens.push_back(std::move(t));
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------- phrases

// (count(a,b) - delta) / (count(a) * count(b)).
inline double score_bigram(std::uint64_t count_ij, std::uint64_t count_i, std::uint64_t count_j,
                           double delta) {
    if (count_i == 0 || count_j == 0)
        fail("bigram scored against a zero unigram count: vocabulary is corrupted");
    return (static_cast<double>(count_ij) - delta) /
           (static_cast<double>(count_i) * static_cast<double>(count_j));
}

using Bigram = std::pair<std::string, std::string>;

struct BigramHash {
    std::size_t operator()(const Bigram& b) const noexcept {
        auto h1 = std::hash<std::string>{}(b.first);
        auto h2 = std::hash<std::string>{}(b.second);
        return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
    }
};

using BigramCounts = std::unordered_map<Bigram, std::uint64_t, BigramHash>;

// Single streaming pass over adjacent positions inside each document.
inline BigramCounts count_bigrams(const std::vector<TokenStream>& streams) {
    BigramCounts counts;
    for (const auto& s : streams)
        for (std::size_t i = 0; i + 1 < s.tokens.size(); ++i)
            ++counts[{s.tokens[i], s.tokens[i + 1]}];
    return counts;
}

struct PhraseConfig {
    double delta = 5.0;
    double threshold = 50.0;
    int passes = 3;
    // Multiply raw scores by the corpus token count before thresholding.
    bool scale_by_total = true;
};

struct PhraseTable {
    std::unordered_map<Bigram, double, BigramHash> scores;
    double delta = 5.0;
    double threshold = 50.0;

    bool accepts(const Bigram& b) const {
        auto it = scores.find(b);
        return it != scores.end() && it->second >= threshold;
    }
};

inline PhraseTable score_phrases(const std::vector<TokenStream>& streams, const Vocabulary& vocab,
                                 const PhraseConfig& cfg) {
    PhraseTable table;
    table.delta = cfg.delta;
    table.threshold = cfg.threshold;
    const double scale = cfg.scale_by_total ? static_cast<double>(vocab.total()) : 1.0;
    for (const auto& [bigram, c] : count_bigrams(streams)) {
        double s = score_bigram(c, vocab.count(bigram.first), vocab.count(bigram.second), cfg.delta);
        table.scores.emplace(bigram, s * scale);
    }
    return table;
}

// One greedy left-to-right pass; accepted pairs never overlap. Returns the
// number of pastes performed.
inline std::size_t paste_pass(std::vector<TokenStream>& streams, const PhraseTable& table) {
    std::size_t pastes = 0;
    for (auto& s : streams) {
        std::vector<std::string> out;
        out.reserve(s.tokens.size());
        std::size_t i = 0;
        while (i < s.tokens.size()) {
            if (i + 1 < s.tokens.size() && table.accepts({s.tokens[i], s.tokens[i + 1]})) {
                out.push_back(s.tokens[i] + "_" + s.tokens[i + 1]);
                i += 2;
                ++pastes;
            } else {
                out.push_back(std::move(s.tokens[i]));
                ++i;
            }
        }
        s.tokens = std::move(out);
    }
    return pastes;
}

struct PasteReport {
    std::vector<std::size_t> pastes_per_pass;
    std::vector<PhraseTable> tables; // one per pass
};

// Repeated pasting; the vocabulary is rebuilt from exact counts after every
// pass (no frequency cut, so token mass is conserved).
inline PasteReport paste_phrases(std::vector<TokenStream>& streams, Vocabulary& vocab,
                                 const PhraseConfig& cfg) {
    require(cfg.passes >= 1, "phrase passes must be >= 1");
    PasteReport report;
    for (int p = 0; p < cfg.passes; ++p) {
        report.tables.push_back(score_phrases(streams, vocab, cfg));
        report.pastes_per_pass.push_back(paste_pass(streams, report.tables.back()));
        vocab = Vocabulary(count_tokens(streams));
    }
    return report;
}

// Accepted bigrams of every pass, best first within a pass.
inline void write_phrase_table(const std::string& path, const std::vector<PhraseTable>& tables) {
    auto out = open_output(path);
    out << "pass\tfirst\tsecond\tscore\n";
    for (std::size_t p = 0; p < tables.size(); ++p) {
        std::vector<std::pair<Bigram, double>> rows;
        for (const auto& kv : tables[p].scores)
            if (kv.second >= tables[p].threshold)
                rows.push_back(kv);
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        for (const auto& [b, s] : rows)
            out << p + 1 << '\t' << b.first << '\t' << b.second << '\t' << format_double(s) << '\n';
    }
}

// ---------------------------------------------------------------- acronyms

struct AcronymTable {
    std::map<std::string, std::string> entries;
};

// Two tab-separated columns: acronym, underscore-joined expansion.
inline AcronymTable read_acronyms(const std::string& path) {
    AcronymTable t;
    for (const auto& raw : read_lines(path)) {
        auto line = trim(raw);
        if (line.empty() || line.front() == '#')
            continue;
        auto f = split(line, '\t');
        require(f.size() == 2, path + ": acronym rows need two columns");
        t.entries[std::string(trim(f[0]))] = std::string(trim(f[1]));
    }
    return t;
}

inline void write_acronyms(const std::string& path, const AcronymTable& t) {
    auto out = open_output(path);
    for (const auto& [a, full] : t.entries)
        out << a << '\t' << full << '\n';
}

inline void expand_acronyms(std::vector<TokenStream>& streams, const AcronymTable& table) {
    for (auto& s : streams)
        for (auto& t : s.tokens)
            if (auto it = table.entries.find(t); it != table.entries.end())
                t = it->second;
}

// ---------------------------------------------------------------- pipeline

struct PrepareConfig {
    NormalizationConfig normalization;
    std::size_t min_tokens = 15;
    std::uint64_t min_count = 5;
};

// tokenize -> short-document filter -> stopwords -> acronyms -> vocabulary.
// Output is ordered by document id.
inline std::pair<std::vector<TokenStream>, Vocabulary>
prepare(const std::vector<RawDocument>& docs, const std::unordered_set<std::string>& stopwords,
        const AcronymTable& acronyms, const PrepareConfig& cfg) {
    std::vector<TokenStream> streams;
    streams.reserve(docs.size());
    for (const auto& d : docs)
        streams.push_back(tokenize(d, cfg.normalization));
    std::sort(streams.begin(), streams.end(),
              [](const TokenStream& a, const TokenStream& b) { return a.doc_id < b.doc_id; });
    streams = filter_short(std::move(streams), cfg.min_tokens);
    remove_stopwords(streams, stopwords);
    expand_acronyms(streams, acronyms);
    auto vocab = build_vocabulary(streams, cfg.min_count);
    return {std::move(streams), std::move(vocab)};
}

} // namespace dlmap::corpus
