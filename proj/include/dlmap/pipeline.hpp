#pragma once

// Stage orchestration: one INI config per run, outputs in a work directory,
// and a manifest line per executed stage.

#include "dlmap/atypicality.hpp"
#include "dlmap/common.hpp"
#include "dlmap/corpus.hpp"
#include "dlmap/csv.hpp"
#include "dlmap/econometrics.hpp"
#include "dlmap/embed.hpp"
#include "dlmap/novelty.hpp"
#include "dlmap/retrieve.hpp"
#include "dlmap/synth.hpp"
#include "dlmap/termcluster.hpp"
#include "dlmap/tsclust.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <map>

namespace dlmap::pipeline {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------- digests

inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail("cannot open " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0)
            EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

// ---------------------------------------------------------------- stages

enum class Stage { prepare, phrases, train, cluster, terms, retrieve, trends, novelty, atypicality, tsclust, fit, match, report };

inline const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> s = {Stage::prepare, Stage::phrases,  Stage::train,   Stage::cluster,
                                         Stage::terms,   Stage::retrieve, Stage::trends,  Stage::novelty,
                                         Stage::atypicality, Stage::tsclust, Stage::fit, Stage::match, Stage::report};
    return s;
}

inline const char* to_string(Stage s) {
    switch (s) {
    case Stage::prepare: return "prepare";
    case Stage::phrases: return "phrases";
    case Stage::train: return "train";
    case Stage::cluster: return "cluster";
    case Stage::terms: return "terms";
    case Stage::retrieve: return "retrieve";
    case Stage::trends: return "trends";
    case Stage::novelty: return "novelty";
    case Stage::atypicality: return "atypicality";
    case Stage::tsclust: return "tsclust";
    case Stage::fit: return "fit";
    case Stage::match: return "match";
    case Stage::report: return "report";
    }
    return "?";
}

inline Stage parse_stage(std::string_view s) {
    for (auto st : all_stages())
        if (s == to_string(st))
            return st;
    fail("unknown stage '" + std::string(s) + "'");
}

// Work-directory files whose presence marks a stage as done.
inline std::vector<std::string> stage_markers(Stage s) {
    switch (s) {
    case Stage::prepare: return {"streams.txt", "vocab.tsv"};
    case Stage::phrases: return {"phrased_streams.txt", "phrased_vocab.tsv"};
    case Stage::train: return {"model.bin", "model.bin.vocab"};
    case Stage::cluster: return {"clusters.tsv"};
    case Stage::terms: return {"terms.txt"};
    case Stage::retrieve: return {"store/documents.jsonl", "store/index.bin", "ids.csv"};
    case Stage::trends: return {"trend.csv", "cs_share.csv"};
    case Stage::novelty: return {"novelty.csv"};
    case Stage::atypicality: return {"atypicality.csv"};
    case Stage::tsclust: return {"ts_labels.csv", "ts_envelopes.json"};
    case Stage::fit: return {"fit_summary.json"};
    case Stage::match: return {"att.csv"};
    case Stage::report: return {"report/report.json"};
    }
    return {};
}

inline std::vector<Stage> direct_prerequisites(Stage s) {
    switch (s) {
    case Stage::phrases: return {Stage::prepare};
    case Stage::train: return {Stage::phrases};
    case Stage::cluster: return {Stage::train};
    case Stage::terms: return {Stage::cluster};
    case Stage::retrieve: return {Stage::terms};
    case Stage::trends: return {Stage::retrieve};
    case Stage::report: return {Stage::trends, Stage::tsclust, Stage::fit};
    default: return {};
    }
}

// ---------------------------------------------------------------- config

// INI document plus command-line overrides; every value a stage reads is
// echoed into that stage's manifest entry.
class Config {
public:
    Config() = default;

    static Config load(const std::string& path, const std::vector<std::string>& overrides = {}) {
        Config c;
        try {
            boost::property_tree::read_ini(path, c.tree_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            fail(std::string("config: ") + e.what());
        }
        c.base_ = fs::absolute(path).parent_path();
        for (const auto& o : overrides)
            c.set(o);
        return c;
    }

    static Config from_string(const std::string& text, const fs::path& base,
                              const std::vector<std::string>& overrides = {}) {
        Config c;
        std::istringstream in(text);
        boost::property_tree::read_ini(in, c.tree_);
        c.base_ = base;
        for (const auto& o : overrides)
            c.set(o);
        return c;
    }

    // "section.key=value"
    void set(const std::string& assignment) {
        auto eq = assignment.find('=');
        require(eq != std::string::npos && assignment.find('.') < eq,
                "override '" + assignment + "' must look like section.key=value");
        tree_.put(key_path(std::string(trim(assignment.substr(0, eq)))), std::string(trim(assignment.substr(eq + 1))));
    }

    bool has(const std::string& key) const { return tree_.get_optional<std::string>(key_path(key)).has_value(); }

    std::string str(const std::string& key, const std::string& def) {
        auto v = tree_.get<std::string>(key_path(key), def);
        echo_[key] = v;
        return v;
    }

    std::string required(const std::string& key) {
        auto v = tree_.get_optional<std::string>(key_path(key));
        require(v.has_value() && !v->empty(), "config is missing '" + key + "'");
        echo_[key] = *v;
        return *v;
    }

    long long integer(const std::string& key, long long def) {
        auto v = str(key, std::to_string(def));
        return parse_int(v, key);
    }

    double real(const std::string& key, double def) {
        auto v = str(key, format_double(def));
        return parse_double(v, key);
    }

    bool flag(const std::string& key, bool def) {
        auto v = str(key, def ? "true" : "false");
        if (v == "true" || v == "1" || v == "yes")
            return true;
        if (v == "false" || v == "0" || v == "no")
            return false;
        fail("config '" + key + "' must be true or false");
    }

    std::vector<std::string> list(const std::string& key, const std::string& def = "") {
        std::vector<std::string> out;
        for (auto& s : split(str(key, def), ','))
            if (auto t = trim(s); !t.empty())
                out.emplace_back(t);
        return out;
    }

    // Paths are relative to the config file's directory.
    std::string path(const std::string& key, const std::string& def = "") {
        auto v = def.empty() ? required(key) : str(key, def);
        fs::path p(v);
        return (p.is_absolute() ? p : base_ / p).lexically_normal().string();
    }

    std::vector<std::string> sections_with_prefix(const std::string& prefix) const {
        std::vector<std::string> out;
        for (const auto& [name, _] : tree_)
            if (name.rfind(prefix, 0) == 0)
                out.push_back(name);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::uint64_t seed() { return static_cast<std::uint64_t>(integer("run.seed", 1)); }

    fs::path work_dir() {
        auto w = str("run.work", "work");
        fs::path p(w);
        return (p.is_absolute() ? p : base_ / p).lexically_normal();
    }

    ojson take_echo() {
        ojson j = ojson::object();
        for (const auto& [k, v] : echo_)
            j[k] = v;
        echo_.clear();
        return j;
    }

    const fs::path& base() const { return base_; }

private:
    // Section names may contain dots ("model.probit"); only the last dot
    // separates section from key.
    static boost::property_tree::ptree::path_type key_path(std::string key) {
        auto dot = key.rfind('.');
        if (dot != std::string::npos)
            key[dot] = '\x1f';
        return {key, '\x1f'};
    }

    boost::property_tree::ptree tree_;
    fs::path base_ = fs::current_path();
    std::map<std::string, std::string> echo_;
};

// ---------------------------------------------------------------- context

class StageContext {
public:
    StageContext(Config& cfg, Stage stage) : cfg_(cfg), stage_(stage), work_(cfg.work_dir()) {
        fs::create_directories(work_);
    }

    Config& config() { return cfg_; }
    Stage stage() const { return stage_; }

    std::string work(const std::string& rel) const { return (work_ / rel).string(); }

    // A digest-tracked external input.
    std::string input(const std::string& name, const std::string& key, const std::string& def = "") {
        auto p = cfg_.path(key, def);
        require(fs::exists(p), "input '" + name + "' not found: " + p);
        inputs_[name] = sha256_file(p);
        return p;
    }

    // A digest-tracked upstream output in the work directory.
    std::string upstream(const std::string& rel) {
        auto p = work(rel);
        require(fs::exists(p), "missing upstream output " + rel);
        inputs_["work/" + rel] = sha256_file(p);
        return p;
    }

    std::string output(const std::string& rel) {
        auto p = work_ / rel;
        fs::create_directories(p.parent_path());
        outputs_.push_back(rel);
        return p.string();
    }

    void note(const std::string& key, ojson value) { notes_[key] = std::move(value); }

    ojson manifest(std::uint64_t seed) {
        ojson j;
        j["stage"] = to_string(stage_);
        j["seed"] = seed;
        j["params"] = cfg_.take_echo();
        ojson in = ojson::object();
        for (const auto& [k, v] : inputs_)
            in[k] = v;
        j["inputs"] = in;
        ojson out = ojson::object();
        auto outs = outputs_;
        std::sort(outs.begin(), outs.end());
        outs.erase(std::unique(outs.begin(), outs.end()), outs.end());
        for (const auto& rel : outs)
            out[rel] = sha256_file(work(rel));
        j["outputs"] = out;
        if (!notes_.empty())
            j["notes"] = notes_;
        return j;
    }

private:
    Config& cfg_;
    Stage stage_;
    fs::path work_;
    std::map<std::string, std::string> inputs_;
    std::vector<std::string> outputs_;
    ojson notes_ = ojson::object();
};

inline bool stage_done(const fs::path& work, Stage s) {
    for (const auto& m : stage_markers(s))
        if (!fs::exists(work / m))
            return false;
    return true;
}

// Earliest stage in pipeline order, among the transitive prerequisites of
// `s`, whose outputs are missing.
inline std::optional<Stage> missing_prerequisite(const fs::path& work, Stage s) {
    std::set<Stage> closure;
    std::vector<Stage> todo = direct_prerequisites(s);
    while (!todo.empty()) {
        auto t = todo.back();
        todo.pop_back();
        if (closure.insert(t).second)
            for (auto p : direct_prerequisites(t))
                todo.push_back(p);
    }
    for (auto st : all_stages())
        if (closure.count(st) && !stage_done(work, st))
            return st;
    return std::nullopt;
}

// ---------------------------------------------------------------- helpers

inline std::unordered_set<std::string> word_set(const std::string& path) {
    auto v = read_word_list(path);
    return {v.begin(), v.end()};
}

inline std::set<std::string> category_set(const std::string& path) {
    auto v = read_word_list(path);
    return {v.begin(), v.end()};
}

inline corpus::KeywordPolicy parse_keywords(const std::string& s) {
    if (s == "by_source") return corpus::KeywordPolicy::by_source;
    if (s == "always") return corpus::KeywordPolicy::always;
    if (s == "never") return corpus::KeywordPolicy::never;
    fail("keywords must be by_source, always or never");
}

inline corpus::NormalizationConfig normalization(Config& c) {
    corpus::NormalizationConfig n;
    n.split_hyphens = c.flag("prepare.split_hyphens", true);
    n.keep_numbers = c.flag("prepare.keep_numbers", true);
    n.keywords = parse_keywords(c.str("prepare.keywords", "by_source"));
    return n;
}

inline void write_json(const std::string& path, const ojson& j) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

inline ojson read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        fail("cannot open " + path);
    return ojson::parse(in);
}

inline ojson table_json(const csv::Table& t) {
    ojson rows = ojson::array();
    for (const auto& r : t.rows) {
        ojson o;
        for (std::size_t i = 0; i < t.header.size(); ++i)
            o[t.header[i]] = r[i];
        rows.push_back(o);
    }
    return rows;
}

// ---------------------------------------------------------------- stage bodies

inline void run_prepare(StageContext& ctx) {
    auto& c = ctx.config();
    auto docs = corpus::read_jsonl(ctx.input("corpus", "paths.corpus"));
    auto stop = word_set(ctx.input("stopwords", "paths.stopwords"));
    auto acr = corpus::read_acronyms(ctx.input("acronyms", "paths.acronyms"));
    corpus::PrepareConfig pc;
    pc.normalization = normalization(c);
    pc.min_tokens = static_cast<std::size_t>(c.integer("prepare.min_tokens", 15));
    pc.min_count = static_cast<std::uint64_t>(c.integer("prepare.min_count", 5));
    auto [streams, vocab] = corpus::prepare(docs, stop, acr, pc);
    corpus::write_streams(ctx.output("streams.txt"), streams);
    corpus::write_vocabulary(ctx.output("vocab.tsv"), vocab);
    auto ids = open_output(ctx.output("stream_ids.txt"));
    for (const auto& s : streams)
        ids << s.doc_id << '\n';
    ctx.note("documents", docs.size());
    ctx.note("kept_documents", streams.size());
    ctx.note("vocabulary", vocab.size());
}

inline void run_phrases(StageContext& ctx) {
    auto& c = ctx.config();
    auto streams = corpus::read_streams(ctx.upstream("streams.txt"));
    auto vocab = corpus::Vocabulary(corpus::count_tokens(streams));
    corpus::PhraseConfig pc;
    pc.delta = c.real("phrases.delta", 5.0);
    pc.threshold = c.real("phrases.threshold", 50.0);
    pc.passes = static_cast<int>(c.integer("phrases.passes", 3));
    pc.scale_by_total = c.flag("phrases.scale_by_total", true);
    auto rep = corpus::paste_phrases(streams, vocab, pc);
    corpus::write_streams(ctx.output("phrased_streams.txt"), streams);
    corpus::write_vocabulary(ctx.output("phrased_vocab.tsv"), vocab);
    corpus::write_phrase_table(ctx.output("phrases.tsv"), rep.tables);
    ctx.note("pastes_per_pass", rep.pastes_per_pass);
}

inline void run_train(StageContext& ctx) {
    auto& c = ctx.config();
    auto streams = corpus::read_streams(ctx.upstream("phrased_streams.txt"));
    auto min_count = static_cast<std::uint64_t>(c.integer("train.min_count", c.integer("prepare.min_count", 5)));
    auto vocab = corpus::build_vocabulary(streams, min_count);
    embed::TrainingConfig tc;
    tc.dim = static_cast<std::size_t>(c.integer("train.dim", 512));
    tc.window = static_cast<std::size_t>(c.integer("train.window", 7));
    tc.negatives = static_cast<std::size_t>(c.integer("train.negatives", 15));
    tc.epochs = static_cast<std::size_t>(c.integer("train.epochs", 30));
    tc.learning_rate = c.real("train.learning_rate", 0.025);
    tc.subsample = c.real("train.subsample", 0.0);
    tc.threads = static_cast<unsigned>(c.integer("train.threads", 1));
    tc.seed = derive_seed(c.seed(), "train", 0);
    embed::TrainingLog log;
    auto model = embed::train<float>(streams, vocab, tc, &log);
    embed::save_model(ctx.output("model.bin"), model);
    ctx.output("model.bin.vocab");
    auto out = open_output(ctx.output("train_log.csv"));
    out << "epoch,mean_loss,smoothed_loss\n";
    for (std::size_t e = 0; e < log.epoch_mean_loss.size(); ++e)
        out << e + 1 << ',' << format_double(log.epoch_mean_loss[e]) << ',' << format_double(log.epoch_smoothed_loss[e])
            << '\n';
    ctx.note("pairs", log.pairs);
}

inline void run_cluster(StageContext& ctx) {
    auto& c = ctx.config();
    auto vocab = corpus::read_vocabulary(ctx.upstream("phrased_vocab.tsv"));
    auto model = embed::load_model(ctx.upstream("model.bin"), &vocab);
    ctx.upstream("model.bin.vocab");
    termcluster::Matrix x(static_cast<Eigen::Index>(model.size()), static_cast<Eigen::Index>(model.dim));
    for (std::size_t i = 0; i < model.size(); ++i)
        for (std::size_t d = 0; d < model.dim; ++d)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = model.input_row(i)[d];
    x = termcluster::unit_rows(x);
    termcluster::KMeansConfig kc;
    kc.restarts = static_cast<std::size_t>(c.integer("cluster.restarts", 10));
    kc.max_iter = static_cast<std::size_t>(c.integer("cluster.max_iter", 300));
    kc.seed = derive_seed(c.seed(), "cluster.kmeans", 0);
    kc.threads = static_cast<unsigned>(c.integer("cluster.threads", 1));
    auto k = static_cast<std::size_t>(c.integer("cluster.k", 0));
    if (k == 0) {
        termcluster::GapConfig gc;
        gc.k_max = static_cast<std::size_t>(c.integer("cluster.k_max", 10));
        gc.n_refs = static_cast<std::size_t>(c.integer("cluster.n_refs", 20));
        gc.kmeans = kc;
        gc.kmeans.seed = derive_seed(c.seed(), "cluster.gap", 0);
        auto gap = termcluster::gap_statistic(x, gc);
        termcluster::write_gap_report(ctx.output("gap.tsv"), gap);
        k = gap.chosen_k;
    }
    auto a = termcluster::kmeans(x, k, kc);
    auto labels = termcluster::label_tokens(model.vocab.tokens(), a);
    std::unordered_map<std::string, std::uint64_t> freqs;
    for (std::size_t i = 0; i < vocab.size(); ++i)
        freqs[vocab.token(i)] = vocab.count_at(i);
    termcluster::write_cluster_report(ctx.output("clusters.tsv"), labels, freqs);
    ctx.note("k", k);
    ctx.note("inertia", a.inertia);
}

inline void run_terms(StageContext& ctx) {
    auto& c = ctx.config();
    std::unordered_map<std::string, std::uint64_t> freqs;
    auto labels = termcluster::read_cluster_report(ctx.upstream("clusters.tsv"), &freqs);
    auto block = word_set(ctx.input("blocklist", "paths.blocklist"));
    auto seed_token = c.str("terms.seed_token", "deep_learning");
    auto members = termcluster::select_seed_cluster(labels, seed_token);
    auto terms = termcluster::extract_search_terms(members, freqs, block,
                                                   static_cast<std::size_t>(c.integer("terms.max_terms", 30)));
    termcluster::write_terms(ctx.output("terms.txt"), terms);
    auto out = open_output(ctx.output("terms_frequencies.tsv"));
    out << "term\tfrequency\n";
    for (std::size_t i = 0; i < terms.terms.size(); ++i)
        out << terms.terms[i] << '\t' << terms.frequencies[i] << '\n';
    ctx.note("cluster_size", members.size());
    ctx.note("terms", terms.terms.size());
}

inline void run_retrieve(StageContext& ctx) {
    auto& c = ctx.config();
    auto docs = corpus::read_jsonl(ctx.input("store_corpus", "paths.store_corpus", c.str("paths.corpus", "")));
    auto terms = termcluster::read_terms(ctx.upstream("terms.txt")).terms;
    retrieve::DocumentStore store(std::move(docs));
    store.save(ctx.work("store"));
    ctx.output("store/documents.jsonl");
    ctx.output("store/index.bin");
    auto ids = store.retrieve_indices(terms);
    retrieve::write_ids(ctx.output("ids.csv"), store, ids);
    ctx.note("documents", store.size());
    ctx.note("retrieved", ids.size());
}

inline void write_share(const std::string& path, const retrieve::ShareSeries& s) {
    auto out = open_output(path);
    out << "year,share\n";
    for (std::size_t i = 0; i < s.years.size(); ++i)
        out << s.years[i] << ',' << (s.share[i] ? format_double(*s.share[i]) : "NA") << '\n';
}

inline void run_trends(StageContext& ctx) {
    auto& c = ctx.config();
    auto store = retrieve::DocumentStore::load(ctx.work("store"));
    ctx.upstream("store/documents.jsonl");
    ctx.upstream("store/index.bin");
    auto ids = retrieve::read_ids(ctx.upstream("ids.csv"), store);
    require(!ids.empty(), "no retrieved documents to build trends from");
    std::optional<std::pair<int, int>> range;
    if (c.has("trends.first_year") || c.has("trends.last_year")) {
        auto span = retrieve::year_span(store, ids);
        range = std::pair<int, int>{static_cast<int>(c.integer("trends.first_year", span.first)),
                                    static_cast<int>(c.integer("trends.last_year", span.second))};
    }
    auto ts = retrieve::yearly_trend(ids, store, range);
    retrieve::write_trend(ctx.output("trend.csv"), ts);
    std::set<std::string> cs = c.has("paths.cs_categories")
                                   ? category_set(ctx.input("cs_categories", "paths.cs_categories"))
                                   : retrieve::computer_science_categories();
    write_share(ctx.output("cs_share.csv"),
                          retrieve::cross_classification_share(ids, store, cs, std::pair{ts.years.front(), ts.years.back()}));
    if (c.has("paths.areas")) {
        auto map = retrieve::read_area_map(ctx.input("areas", "paths.areas"));
        auto weighted = retrieve::area_shares(ids, store, map, retrieve::AreaCounting::weighted);
        auto multi = retrieve::area_shares(ids, store, map, retrieve::AreaCounting::multi);
        auto out = open_output(ctx.output("areas.csv"));
        out << "area,weighted,multi\n";
        for (const auto& [a, w] : weighted)
            out << csv::quote(a) << ',' << format_double(w) << ',' << format_double(multi[a]) << '\n';
    }
    auto countries = retrieve::country_counts(ids, store);
    if (!countries.empty()) {
        auto out = open_output(ctx.output("countries.csv"));
        out << "country,documents\n";
        for (const auto& [k, n] : countries)
            out << csv::quote(k) << ',' << n << '\n';
    }
}

inline void run_novelty(StageContext& ctx) {
    auto& c = ctx.config();
    auto refs = novelty::read_references(ctx.input("references", "paths.references"));
    auto cats = novelty::read_journal_categories(ctx.input("journal_categories", "paths.journal_categories"));
    std::set<std::string> cs = c.has("paths.cs_categories")
                                   ? category_set(ctx.input("cs_categories", "paths.cs_categories"))
                                   : retrieve::computer_science_categories();
    auto hs = category_set(ctx.input("hs_categories", "paths.hs_categories"));
    novelty::NoveltyConfig nc;
    nc.reuse_threshold = static_cast<std::uint64_t>(c.integer("novelty.reuse_threshold", 5));
    nc.reuse_years = static_cast<int>(c.integer("novelty.reuse_years", 3));
    nc.window_years = static_cast<int>(c.integer("novelty.window_years", 3));
    nc.threads = static_cast<unsigned>(c.integer("novelty.threads", 1));
    if (c.has("novelty.data_end"))
        nc.data_end = static_cast<int>(c.integer("novelty.data_end", 0));
    novelty::NoveltyIndex idx(refs, nc);
    novelty::ScopeFilter filter(cats, cs, hs);
    novelty::NoveltyDiagnostics diag;
    auto scores = idx.score_all(filter, &diag);
    novelty::write_scores(ctx.output("novelty.csv"), scores);
    ctx.note("scored", diag.papers_scored);
    ctx.note("skipped_censored", diag.papers_skipped_censored);
    ctx.note("zero_profile_pairs", diag.zero_profile_pairs);
}

inline void run_atypicality(StageContext& ctx) {
    auto& c = ctx.config();
    atypicality::CitationNetwork net(atypicality::read_edges(ctx.input("references", "paths.references")));
    atypicality::NullConfig nc;
    nc.n_nulls = static_cast<std::size_t>(c.integer("atypicality.nulls", 50));
    nc.swap_factor = c.real("atypicality.swap_factor", 10.0);
    nc.threads = static_cast<unsigned>(c.integer("atypicality.threads", 1));
    nc.seed = derive_seed(c.seed(), "atypicality", 0);
    auto z = atypicality::pair_zscores(net, nc);
    auto rep = atypicality::score_papers(net, z);
    atypicality::write_report(ctx.output("atypicality.csv"), rep);
    atypicality::write_pair_scores(ctx.output("pair_z.csv"), net, z);
    ctx.note("undefined_pairs", rep.undefined_pairs);
    ctx.note("excluded_papers", rep.excluded_papers);
}

inline void run_tsclust(StageContext& ctx) {
    auto& c = ctx.config();
    auto series = tsclust::read_series(ctx.input("series", "paths.series"));
    tsclust::DtwOptions opt;
    opt.squared = c.flag("tsclust.squared", false);
    auto band = c.integer("tsclust.band", -1);
    if (band >= 0)
        opt.band = static_cast<std::size_t>(band);
    auto d = tsclust::distance_matrix(series, opt, c.flag("tsclust.normalize", false),
                                      static_cast<unsigned>(c.integer("tsclust.threads", 1)));
    tsclust::PamConfig pc;
    pc.seed = derive_seed(c.seed(), "tsclust", 0);
    pc.max_iter = static_cast<std::size_t>(c.integer("tsclust.max_iter", 100));
    auto k = static_cast<std::size_t>(c.integer("tsclust.k", 2));
    auto cl = tsclust::kmedoids(d, k, pc);
    tsclust::write_labels(ctx.output("ts_labels.csv"), series, cl);
    tsclust::write_distance_matrix(ctx.output("ts_dtw.tsv"), series, d);
    write_json(ctx.output("ts_envelopes.json"), tsclust::envelopes(series, cl));
    auto out = open_output(ctx.output("ts_silhouette.csv"));
    out << "k,silhouette\n";
    for (const auto& [kk, s] : tsclust::silhouette_profile(d, pc))
        out << kk << ',' << format_double(s) << '\n';
    ctx.note("total_cost", cl.total_cost);
}

// One model section: [model.NAME].
inline econometrics::FitRequest model_request(Config& c, const std::string& section, const csv::Table& table) {
    using namespace econometrics;
    FitRequest req;
    req.kind = parse_model(c.required(section + ".kind"));
    req.newton.max_iter = static_cast<std::size_t>(c.integer(section + ".max_iter", 200));
    RoleSpec spec;
    spec.response = c.required(section + ".response");
    spec.covariates = c.list(section + ".covariates");
    spec.fixed_effects = c.list(section + ".fixed_effects");
    spec.cluster = c.str(section + ".cluster", "");
    if (req.kind == ModelKind::mnlogit) {
        spec.response_kind = ResponseKind::categorical;
        spec.levels = c.list(section + ".levels");
        req.reference = c.required(section + ".reference");
    }
    req.mean = build_design(table, spec);
    if (req.kind == ModelKind::tobit)
        req.censor_point = c.real(section + ".censor_point", 0.0);
    if (req.kind == ModelKind::negbin) {
        auto disp = c.list(section + ".dispersion");
        RoleSpec ds;
        ds.response = spec.response;
        ds.covariates = disp;
        ds.fixed_effects = c.list(section + ".dispersion_fixed_effects");
        req.dispersion = build_design(table, ds);
    }
    return req;
}

inline ojson fit_json(const econometrics::FitResult& f) {
    ojson j;
    j["model"] = econometrics::to_string(f.kind);
    j["n"] = f.n;
    j["loglik"] = f.loglik;
    j["iterations"] = f.iterations;
    j["converged"] = f.converged;
    return j;
}

inline void run_fit(StageContext& ctx) {
    using namespace econometrics;
    auto& c = ctx.config();
    auto table = csv::read_table(ctx.input("analysis", "paths.analysis"));
    auto sections = c.sections_with_prefix("model.");
    require(!sections.empty(), "fit needs at least one [model.NAME] section");
    ojson summary = ojson::object();
    for (const auto& section : sections) {
        const auto name = section.substr(6);
        auto req = model_request(c, section, table);
        auto f = fit(req);
        Vector se = f.se();
        auto j = fit_json(f);
        auto reps = static_cast<std::size_t>(c.integer(section + ".bootstrap", 0));
        if (reps > 0) {
            BootstrapConfig bc;
            bc.replications = reps;
            bc.seed = derive_seed(c.seed(), "fit.bootstrap." + name, 0);
            bc.threads = static_cast<unsigned>(c.integer("fit.threads", 1));
            auto b = bootstrap_se(req, bc);
            se = b.se;
            j["bootstrap"] = {{"replications", reps}, {"used", b.replications}, {"failed", b.failed},
                              {"warnings", b.warnings}};
        }
        {
            auto out = open_output(ctx.output("fit_" + name + ".csv"));
            write_coefficients(out, f, se);
        }
        auto drop = c.list(section + ".lr_drop");
        if (!drop.empty()) {
            auto restricted = req;
            std::vector<Eigen::Index> keep;
            std::vector<std::string> names;
            for (std::size_t i = 0; i < req.mean.names.size(); ++i) {
                const auto& n = req.mean.names[i];
                bool dropped = std::any_of(drop.begin(), drop.end(), [&](const std::string& d) {
                    return n == d || n.rfind(d + "=", 0) == 0;
                });
                if (!dropped) {
                    keep.push_back(static_cast<Eigen::Index>(i));
                    names.push_back(n);
                }
            }
            restricted.mean.x = req.mean.x(Eigen::all, keep);
            restricted.mean.names = names;
            auto fr = fit(restricted);
            auto lr = lr_test(fr, f);
            j["lr_test"] = {{"dropped", drop}, {"statistic", lr.statistic}, {"df", lr.df}, {"p_value", lr.p_value}};
        }
        auto margins = c.list(section + ".margins");
        if (!margins.empty()) {
            ojson mj = ojson::array();
            std::vector<std::string> cats = {""};
            if (f.kind == ModelKind::mnlogit) {
                cats.clear();
                for (std::size_t l = 0; l < f.levels.size(); ++l)
                    cats.push_back(f.levels[l]);
            }
            for (const auto& col : margins)
                for (const auto& cat : cats) {
                    ojson m;
                    m["column"] = col;
                    if (!cat.empty())
                        m["category"] = cat;
                    m["median_row"] = marginal_effect(f, req.mean, col, EvalRow::median_row, cat);
                    m["mean_row"] = marginal_effect(f, req.mean, col, EvalRow::mean_row, cat);
                    mj.push_back(m);
                }
            j["margins"] = mj;
        }
        summary[name] = j;
    }
    write_json(ctx.output("fit_summary.json"), summary);
}

inline void run_match(StageContext& ctx) {
    using namespace econometrics;
    auto& c = ctx.config();
    auto table = csv::read_table(ctx.input("analysis", "paths.analysis"));
    auto treat_col = c.required("match.treatment");
    auto outcomes = c.list("match.outcomes");
    require(!outcomes.empty(), "match needs at least one outcome column");
    auto numeric = [&](const std::string& col) {
        auto j = table.column(col);
        Vector v(static_cast<Eigen::Index>(table.rows.size()));
        for (std::size_t i = 0; i < table.rows.size(); ++i)
            v(static_cast<Eigen::Index>(i)) = parse_double(table.rows[i][j], col);
        return v;
    };
    Vector t = numeric(treat_col);
    std::vector<std::pair<std::string, Vector>> ys;
    for (const auto& o : outcomes)
        ys.emplace_back(o, numeric(o));
    std::ofstream out(ctx.output("att.csv"), std::ios::binary);
    out << "mode,outcome,att,se,matched,unmatched\n";
    for (const auto& mode : c.list("match.modes", "exact,psm")) {
        MatchSpec spec;
        spec.seed = derive_seed(c.seed(), "match", 0);
        if (mode == "exact") {
            spec.mode = MatchMode::exact;
            auto keys = c.list("match.keys");
            require(!keys.empty(), "exact matching needs match.keys");
            for (const auto& r : table.rows) {
                std::string k;
                for (const auto& key : keys)
                    k += r[table.column(key)] + '\x1f';
                spec.keys.push_back(k);
            }
        } else if (mode == "psm") {
            spec.mode = MatchMode::psm;
            RoleSpec rs;
            rs.response = treat_col;
            rs.covariates = c.list("match.covariates");
            rs.fixed_effects = c.list("match.fixed_effects");
            spec.covariates = build_design(table, rs);
        } else {
            fail("unknown matching mode '" + mode + "'");
        }
        auto m = match_and_att(t, ys, spec);
        for (const auto& a : m.outcomes)
            out << mode << ',' << a.outcome << ',' << format_double(a.att) << ',' << format_double(a.se) << ','
                << a.matched << ',' << a.unmatched << '\n';
    }
}

inline void run_report(StageContext& ctx) {
    ojson rep;
    auto trend = csv::read_table(ctx.upstream("trend.csv"));
    auto share = csv::read_table(ctx.upstream("cs_share.csv"));
    rep["trend"] = table_json(trend);
    rep["cross_classification"] = table_json(share);
    rep["envelopes"] = read_json(ctx.upstream("ts_envelopes.json"));
    auto summary = read_json(ctx.upstream("fit_summary.json"));
    ojson regs = ojson::object();
    for (const auto& [name, _] : summary.items()) {
        auto rel = "fit_" + name + ".csv";
        auto t = csv::read_table(ctx.upstream(rel));
        regs[name] = {{"summary", summary[name]}, {"coefficients", table_json(t)}};
        csv::write_table(ctx.output("report/" + rel), t);
    }
    rep["regressions"] = regs;
    csv::write_table(ctx.output("report/trend.csv"), trend);
    csv::write_table(ctx.output("report/cross_classification.csv"), share);
    write_json(ctx.output("report/envelopes.json"), rep["envelopes"]);
    write_json(ctx.output("report/report.json"), rep);
}

// ---------------------------------------------------------------- driver

struct StageRun {
    Stage stage;
    ojson manifest;
    double seconds = 0.0;
};

inline StageRun run(Stage stage, Config& cfg) {
    auto work = cfg.work_dir();
    if (auto miss = missing_prerequisite(work, stage))
        throw Error(ErrorKind::prerequisite, std::string("stage '") + to_string(stage) + "' needs the outputs of '" +
                                                 to_string(*miss) + "'; run '" + to_string(*miss) + "' first");
    auto t0 = std::chrono::steady_clock::now();
    StageContext ctx(cfg, stage);
    cfg.take_echo();
    auto seed = cfg.seed();
    switch (stage) {
    case Stage::prepare: run_prepare(ctx); break;
    case Stage::phrases: run_phrases(ctx); break;
    case Stage::train: run_train(ctx); break;
    case Stage::cluster: run_cluster(ctx); break;
    case Stage::terms: run_terms(ctx); break;
    case Stage::retrieve: run_retrieve(ctx); break;
    case Stage::trends: run_trends(ctx); break;
    case Stage::novelty: run_novelty(ctx); break;
    case Stage::atypicality: run_atypicality(ctx); break;
    case Stage::tsclust: run_tsclust(ctx); break;
    case Stage::fit: run_fit(ctx); break;
    case Stage::match: run_match(ctx); break;
    case Stage::report: run_report(ctx); break;
    }
    StageRun r{stage, ctx.manifest(seed), 0.0};
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    {
        std::ofstream m((work / "manifest.jsonl").string(), std::ios::app | std::ios::binary);
        m << r.manifest.dump() << '\n';
    }
    {
        std::ofstream t((work / "timings.jsonl").string(), std::ios::app | std::ios::binary);
        t << ojson{{"stage", to_string(stage)}, {"seconds", r.seconds}}.dump() << '\n';
    }
    return r;
}

inline std::vector<StageRun> run_all(Config& cfg) {
    std::vector<StageRun> out;
    for (auto s : all_stages())
        out.push_back(run(s, cfg));
    return out;
}

// ---------------------------------------------------------------- generators

inline void write_references(const std::string& path, const std::vector<atypicality::EdgeRecord>& edges) {
    auto out = open_output(path);
    out << "paper_id,year,journal_id,cited_year\n";
    for (const auto& e : edges)
        out << e.paper_id << ',' << e.year << ',' << e.journal_id << ',' << e.cited_year << '\n';
}

// kind: corpus | citations | analysis; params are key=value strings.
inline std::vector<std::string> gen_synthetic(const std::string& kind, const fs::path& out_dir, std::uint64_t seed,
                                              const std::map<std::string, std::string>& params = {}) {
    fs::create_directories(out_dir);
    auto num = [&](const std::string& k, double def) {
        auto it = params.find(k);
        return it == params.end() ? def : parse_double(it->second, k);
    };
    std::vector<std::string> written;
    auto file = [&](const std::string& name) {
        written.push_back(name);
        return (out_dir / name).string();
    };
    if (kind == "corpus") {
        synth::DocumentCorpusConfig c;
        c.docs = static_cast<std::size_t>(num("docs", static_cast<double>(c.docs)));
        c.first_year = static_cast<int>(num("first_year", c.first_year));
        c.last_year = static_cast<int>(num("last_year", c.last_year));
        c.dl_share_end = num("dl_share_end", c.dl_share_end);
        c.words_per_topic = static_cast<std::size_t>(num("words_per_topic", static_cast<double>(c.words_per_topic)));
        c.abstract_length = static_cast<std::size_t>(num("abstract_length", static_cast<double>(c.abstract_length)));
        c.seed = seed;
        corpus::write_jsonl(file("corpus.jsonl"), synth::document_corpus(c));
        synth::TopicCorpusConfig tc;
        tc.seed = seed;
        tc.docs = static_cast<std::size_t>(num("topic_docs", static_cast<double>(tc.docs)));
        tc.words_per_topic = static_cast<std::size_t>(num("topic_words", static_cast<double>(tc.words_per_topic)));
        auto topics = synth::topic_corpus(tc);
        corpus::write_streams(file("topics_streams.txt"), topics.streams);
        auto out = open_output(file("topics_words.tsv"));
        for (const auto& [w, t] : topics.word_topic)
            out << w << '\t' << t << '\n';
    } else if (kind == "citations") {
        synth::CitationConfig c;
        c.seed = seed;
        c.background_journals = static_cast<std::size_t>(num("journals", static_cast<double>(c.background_journals)));
        c.first_year = static_cast<int>(num("first_year", c.first_year));
        c.last_year = static_cast<int>(num("last_year", c.last_year));
        c.focal_year = static_cast<int>(num("focal_year", c.focal_year));
        c.papers_per_year = static_cast<std::size_t>(num("papers_per_year", static_cast<double>(c.papers_per_year)));
        c.planted = static_cast<std::size_t>(num("planted", static_cast<double>(c.planted)));
        c.reuse = static_cast<std::size_t>(num("reuse", static_cast<double>(c.reuse)));
        c.decoys = static_cast<std::size_t>(num("decoys", static_cast<double>(c.decoys)));
        c.decoy_reuse = static_cast<std::size_t>(num("decoy_reuse", static_cast<double>(c.decoy_reuse)));
        auto data = synth::citation_data(c);
        write_references(file("references.csv"), data.edges);
        {
            auto out = open_output(file("journal_categories.csv"));
            out << "journal_id,category\n";
            for (const auto& [j, cat] : data.journal_categories)
                out << j << ',' << csv::quote(cat) << '\n';
        }
        ojson planted = {{"focal_year", c.focal_year}, {"planted", data.planted_pairs}, {"decoys", data.decoy_pairs},
                         {"reuse", c.reuse}, {"decoy_reuse", c.decoy_reuse}};
        write_json(file("planted.json"), planted);
        synth::SeriesConfig sc;
        sc.seed = seed;
        synth::write_series(file("series.csv"), synth::share_series(sc));
    } else if (kind == "analysis") {
        synth::AnalysisConfig c;
        c.seed = seed;
        c.rows = static_cast<std::size_t>(num("rows", static_cast<double>(c.rows)));
        c.journals = static_cast<std::size_t>(num("journals", static_cast<double>(c.journals)));
        c.beta_dl_mean = num("beta_dl_mean", c.beta_dl_mean);
        auto data = synth::analysis_data(c);
        csv::write_table(file("analysis.csv"), data.table);
        write_json(file("truth.json"), data.truth);
    } else {
        fail("unknown generator kind '" + kind + "' (corpus, citations, analysis)");
    }
    return written;
}

} // namespace dlmap::pipeline
