#pragma once

// Phrase retrieval over title/keywords/abstract and the diffusion statistics
// computed on the retrieved set.

#include "dlmap/common.hpp"
#include "dlmap/corpus.hpp"
#include "dlmap/csv.hpp"

#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <set>

namespace dlmap::retrieve {

using corpus::RawDocument;

// Store-side normalization: corpus rules, then underscores split as well so
// that "deep_learning" in text and the term deep_learning both become
// [deep, learning].
inline std::vector<std::string> match_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (auto& t : corpus::normalize_text(text))
        for (auto& part : split(t, '_'))
            if (!part.empty())
                out.push_back(std::move(part));
    return out;
}

// A search term as its constituent token sequence.
inline std::vector<std::string> term_tokens(std::string_view term) {
    return match_tokens(term);
}

// Title, abstract, then each keyword as its own segment; phrases never span
// segment boundaries.
inline std::vector<std::vector<std::string>> document_segments(const RawDocument& d) {
    std::vector<std::vector<std::string>> segs;
    segs.push_back(match_tokens(d.title));
    segs.push_back(match_tokens(d.abstract));
    for (const auto& k : d.keywords)
        segs.push_back(match_tokens(k));
    return segs;
}

template <typename T>
bool contains_sequence(const std::vector<T>& hay, const std::vector<T>& needle) {
    if (needle.empty() || needle.size() > hay.size())
        return false;
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

// True iff some term occurs as a contiguous token run in some field.
inline bool match_document(const RawDocument& doc, const std::vector<std::string>& terms) {
    if (terms.empty())
        return false;
    auto segs = document_segments(doc);
    for (const auto& term : terms) {
        auto needle = term_tokens(term);
        for (const auto& s : segs)
            if (contains_sequence(s, needle))
                return true;
    }
    return false;
}

class DocumentStore {
public:
    DocumentStore() = default;

    explicit DocumentStore(std::vector<RawDocument> docs) : docs_(std::move(docs)) {
        std::unordered_set<std::string> seen;
        for (const auto& d : docs_)
            require(seen.insert(d.id).second, "duplicate document id " + d.id);
        segments_.resize(docs_.size());
        for (std::size_t i = 0; i < docs_.size(); ++i) {
            for (const auto& seg : document_segments(docs_[i])) {
                std::vector<std::uint32_t> ids;
                ids.reserve(seg.size());
                for (const auto& t : seg)
                    ids.push_back(intern(t));
                segments_[i].push_back(std::move(ids));
            }
        }
        build_postings();
        build_side_indexes();
    }

    std::size_t size() const { return docs_.size(); }
    const std::vector<RawDocument>& documents() const { return docs_; }
    const RawDocument& document(std::size_t i) const { return docs_.at(i); }

    std::optional<std::uint32_t> token_id(const std::string& t) const {
        auto it = dict_.find(t);
        if (it == dict_.end())
            return std::nullopt;
        return it->second;
    }

    const std::vector<std::uint32_t>& postings(std::uint32_t token) const { return postings_.at(token); }
    const std::map<int, std::vector<std::size_t>>& by_year() const { return by_year_; }
    const std::map<std::string, std::vector<std::size_t>>& by_category() const { return by_category_; }

    // Candidate documents from the rarest constituent's postings, verified
    // positionally.
    std::vector<std::size_t> match_term(const std::string& term) const {
        std::vector<std::uint32_t> needle;
        for (const auto& t : term_tokens(term)) {
            auto id = token_id(t);
            if (!id)
                return {};
            needle.push_back(*id);
        }
        if (needle.empty())
            return {};
        const std::vector<std::uint32_t>* rarest = &postings_[needle[0]];
        for (auto id : needle)
            if (postings_[id].size() < rarest->size())
                rarest = &postings_[id];
        std::vector<std::size_t> out;
        for (auto d : *rarest)
            for (const auto& seg : segments_[d])
                if (contains_sequence(seg, needle)) {
                    out.push_back(d);
                    break;
                }
        return out;
    }

    // Sorted document indices matching any term.
    std::vector<std::size_t> retrieve_indices(const std::vector<std::string>& terms) const {
        std::vector<char> hit(docs_.size(), 0);
        for (const auto& t : terms)
            for (auto d : match_term(t))
                hit[d] = 1;
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < hit.size(); ++i)
            if (hit[i])
                out.push_back(i);
        return out;
    }

    std::optional<std::size_t> find(const std::string& id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end())
            return std::nullopt;
        return it->second;
    }

    // Layout: dir/documents.jsonl + dir/index.bin.
    void save(const std::string& dir) const;
    static DocumentStore load(const std::string& dir);

private:
    std::uint32_t intern(const std::string& t) {
        auto [it, inserted] = dict_.emplace(t, static_cast<std::uint32_t>(tokens_.size()));
        if (inserted)
            tokens_.push_back(t);
        return it->second;
    }

    void build_postings() {
        postings_.assign(tokens_.size(), {});
        for (std::size_t d = 0; d < segments_.size(); ++d) {
            std::set<std::uint32_t> uniq;
            for (const auto& seg : segments_[d])
                uniq.insert(seg.begin(), seg.end());
            for (auto t : uniq)
                postings_[t].push_back(static_cast<std::uint32_t>(d));
        }
    }

    void build_side_indexes() {
        by_year_.clear();
        by_category_.clear();
        by_id_.clear();
        for (std::size_t i = 0; i < docs_.size(); ++i) {
            by_year_[docs_[i].year].push_back(i);
            for (const auto& c : docs_[i].subject_categories)
                by_category_[c].push_back(i);
            by_id_[docs_[i].id] = i;
        }
    }

    std::vector<RawDocument> docs_;
    std::unordered_map<std::string, std::uint32_t> dict_;
    std::vector<std::string> tokens_;
    std::vector<std::vector<std::vector<std::uint32_t>>> segments_;
    std::vector<std::vector<std::uint32_t>> postings_;
    std::map<int, std::vector<std::size_t>> by_year_;
    std::map<std::string, std::vector<std::size_t>> by_category_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i)
        b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        fail("truncated store index");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

inline std::uint64_t get_u64(std::istream& in) {
    std::uint64_t lo = get_u32(in);
    return lo | static_cast<std::uint64_t>(get_u32(in)) << 32;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline constexpr char index_magic[8] = {'D', 'L', 'M', 'A', 'P', 'I', 'D', 'X'};

} // namespace detail

inline void DocumentStore::save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    const std::string docs_path = dir + "/documents.jsonl";
    corpus::write_jsonl(docs_path, docs_);
    auto out = open_output(dir + "/index.bin");
    out.write(detail::index_magic, 8);
    detail::put_u32(out, 1);
    detail::put_u64(out, detail::fnv1a(detail::slurp(docs_path)));
    detail::put_u64(out, docs_.size());
    detail::put_u64(out, tokens_.size());
    for (const auto& t : tokens_) {
        detail::put_u32(out, static_cast<std::uint32_t>(t.size()));
        out.write(t.data(), static_cast<std::streamsize>(t.size()));
    }
    for (const auto& segs : segments_) {
        detail::put_u32(out, static_cast<std::uint32_t>(segs.size()));
        for (const auto& s : segs) {
            detail::put_u32(out, static_cast<std::uint32_t>(s.size()));
            for (auto id : s)
                detail::put_u32(out, id);
        }
    }
    for (const auto& p : postings_) {
        detail::put_u32(out, static_cast<std::uint32_t>(p.size()));
        for (auto d : p)
            detail::put_u32(out, d);
    }
}

inline DocumentStore DocumentStore::load(const std::string& dir) {
    const std::string docs_path = dir + "/documents.jsonl";
    DocumentStore s;
    s.docs_ = corpus::read_jsonl(docs_path);
    std::ifstream in(dir + "/index.bin", std::ios::binary);
    if (!in)
        fail("cannot open " + dir + "/index.bin");
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, detail::index_magic, 8) != 0)
        fail(dir + "/index.bin: not a dlmap store index");
    require(detail::get_u32(in) == 1, dir + "/index.bin: unsupported version");
    require(detail::get_u64(in) == detail::fnv1a(detail::slurp(docs_path)),
            dir + "/index.bin: index is stale relative to documents.jsonl");
    require(detail::get_u64(in) == s.docs_.size(), dir + "/index.bin: document count mismatch");
    auto ntok = detail::get_u64(in);
    for (std::uint64_t i = 0; i < ntok; ++i) {
        std::string t(detail::get_u32(in), '\0');
        if (!in.read(t.data(), static_cast<std::streamsize>(t.size())))
            fail("truncated store index");
        s.intern(t);
    }
    s.segments_.resize(s.docs_.size());
    for (auto& segs : s.segments_) {
        segs.resize(detail::get_u32(in));
        for (auto& seg : segs) {
            seg.resize(detail::get_u32(in));
            for (auto& id : seg)
                id = detail::get_u32(in);
        }
    }
    s.postings_.resize(ntok);
    for (auto& p : s.postings_) {
        p.resize(detail::get_u32(in));
        for (auto& d : p)
            d = detail::get_u32(in);
    }
    s.build_side_indexes();
    return s;
}

inline std::set<std::string> retrieve(const DocumentStore& store, const std::vector<std::string>& terms) {
    std::set<std::string> out;
    for (auto i : store.retrieve_indices(terms))
        out.insert(store.document(i).id);
    return out;
}

inline void write_ids(const std::string& path, const DocumentStore& store, const std::vector<std::size_t>& idx) {
    auto out = open_output(path);
    out << "id,year\n";
    for (auto i : idx)
        out << csv::quote(store.document(i).id) << ',' << store.document(i).year << '\n';
}

inline std::vector<std::size_t> read_ids(const std::string& path, const DocumentStore& store) {
    auto t = csv::read_table(path);
    auto col = t.column("id");
    std::vector<std::size_t> out;
    for (const auto& r : t.rows) {
        auto i = store.find(r[col]);
        require(i.has_value(), path + ": id " + r[col] + " is not in the store");
        out.push_back(*i);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------- trends

struct TrendSeries {
    std::vector<int> years;
    std::vector<std::uint64_t> counts;
    std::vector<std::optional<double>> growth;
    // Set where at least one year-on-year term had a zero base and was
    // skipped from the moving average.
    std::vector<bool> skipped_zero_base;
};

// Counts over a contiguous year range; growth(y) averages the year-on-year
// rates of y-2, y-1, y and is defined only once y-3 is inside the range.
inline TrendSeries trend_from_counts(int first_year, const std::vector<std::uint64_t>& counts) {
    TrendSeries ts;
    ts.counts = counts;
    for (std::size_t i = 0; i < counts.size(); ++i)
        ts.years.push_back(first_year + static_cast<int>(i));
    ts.growth.assign(counts.size(), std::nullopt);
    ts.skipped_zero_base.assign(counts.size(), false);
    for (std::size_t i = 3; i < counts.size(); ++i) {
        double sum = 0.0;
        int n = 0;
        for (std::size_t t = i - 2; t <= i; ++t) {
            if (counts[t - 1] == 0) {
                ts.skipped_zero_base[i] = true;
                continue;
            }
            sum += (static_cast<double>(counts[t]) - static_cast<double>(counts[t - 1])) /
                   static_cast<double>(counts[t - 1]);
            ++n;
        }
        if (n > 0)
            ts.growth[i] = sum / n;
    }
    return ts;
}

inline std::pair<int, int> year_span(const DocumentStore& store, const std::vector<std::size_t>& ids) {
    require(!ids.empty(), "trend needs a non-empty document set");
    int lo = store.document(ids.front()).year, hi = lo;
    for (auto i : ids) {
        lo = std::min(lo, store.document(i).year);
        hi = std::max(hi, store.document(i).year);
    }
    return {lo, hi};
}

inline TrendSeries yearly_trend(const std::vector<std::size_t>& ids, const DocumentStore& store,
                                std::optional<std::pair<int, int>> range = std::nullopt) {
    auto [lo, hi] = range ? *range : year_span(store, ids);
    require(lo <= hi, "empty year range");
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(hi - lo + 1), 0);
    for (auto i : ids) {
        int y = store.document(i).year;
        if (y >= lo && y <= hi)
            ++counts[static_cast<std::size_t>(y - lo)];
    }
    return trend_from_counts(lo, counts);
}

inline void write_trend(const std::string& path, const TrendSeries& ts) {
    auto out = open_output(path);
    out << "year,count,growth\n";
    for (std::size_t i = 0; i < ts.years.size(); ++i)
        out << ts.years[i] << ',' << ts.counts[i] << ','
            << (ts.growth[i] ? format_double(*ts.growth[i]) : "NA") << '\n';
}

// The seven computer-science subject categories used for cross-classification.
inline std::set<std::string> computer_science_categories() {
    return {"Computer Science, Artificial Intelligence",
            "Computer Science, Cybernetics",
            "Computer Science, Hardware & Architecture",
            "Computer Science, Information Systems",
            "Computer Science, Interdisciplinary Applications",
            "Computer Science, Software Engineering",
            "Computer Science, Theory & Methods"};
}

inline bool intersects(const std::vector<std::string>& cats, const std::set<std::string>& target) {
    return std::any_of(cats.begin(), cats.end(), [&](const std::string& c) { return target.count(c) > 0; });
}

struct ShareSeries {
    std::vector<int> years;
    std::vector<std::optional<double>> share; // missing where a year has no documents
};

inline ShareSeries cross_classification_share(const std::vector<std::size_t>& ids, const DocumentStore& store,
                                              const std::set<std::string>& target,
                                              std::optional<std::pair<int, int>> range = std::nullopt) {
    ShareSeries out;
    if (ids.empty() && !range)
        return out;
    auto [lo, hi] = range ? *range : year_span(store, ids);
    std::vector<std::uint64_t> total(static_cast<std::size_t>(hi - lo + 1), 0), hit(total.size(), 0);
    for (auto i : ids) {
        const auto& d = store.document(i);
        if (d.year < lo || d.year > hi)
            continue;
        auto y = static_cast<std::size_t>(d.year - lo);
        ++total[y];
        if (intersects(d.subject_categories, target))
            ++hit[y];
    }
    for (std::size_t y = 0; y < total.size(); ++y) {
        out.years.push_back(lo + static_cast<int>(y));
        if (total[y] == 0)
            out.share.push_back(std::nullopt);
        else
            out.share.push_back(static_cast<double>(hit[y]) / static_cast<double>(total[y]));
    }
    return out;
}

using AreaMap = std::map<std::string, std::string>; // category -> research area

inline AreaMap read_area_map(const std::string& path) {
    auto t = csv::read_table(path);
    auto c = t.column("category"), a = t.column("area");
    AreaMap m;
    for (const auto& r : t.rows)
        m[r[c]] = r[a];
    return m;
}

inline const std::string unknown_area = "unknown";

inline std::set<std::string> areas_of(const RawDocument& d, const AreaMap& map) {
    std::set<std::string> areas;
    for (const auto& c : d.subject_categories)
        if (auto it = map.find(c); it != map.end())
            areas.insert(it->second);
    if (areas.empty())
        areas.insert(unknown_area);
    return areas;
}

enum class AreaCounting { weighted, multi };

// weighted: a document in m areas adds 1/m to each; multi: 1 to each.
inline std::map<std::string, double> area_shares(const std::vector<std::size_t>& ids, const DocumentStore& store,
                                                 const AreaMap& map, AreaCounting mode = AreaCounting::weighted) {
    std::map<std::string, double> out;
    for (auto i : ids) {
        auto areas = areas_of(store.document(i), map);
        double w = mode == AreaCounting::weighted ? 1.0 / static_cast<double>(areas.size()) : 1.0;
        for (const auto& a : areas)
            out[a] += w;
    }
    return out;
}

// Multi-counted: a document with authors in several countries counts once
// for each.
inline std::map<std::string, std::uint64_t> country_counts(const std::vector<std::size_t>& ids,
                                                           const DocumentStore& store) {
    std::map<std::string, std::uint64_t> out;
    for (auto i : ids) {
        const auto& cs = store.document(i).countries;
        std::set<std::string> uniq(cs.begin(), cs.end());
        for (const auto& c : uniq)
            ++out[c];
    }
    return out;
}

} // namespace dlmap::retrieve
