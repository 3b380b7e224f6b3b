// Acceptance runner: one PASS/FAIL line per criterion. Criterion 13 is
// printed as REPORT and never affects the exit status.

#include "dlmap/pipeline.hpp"
#include "oracles.hpp"
#include "simulate.hpp"

#include <boost/math/distributions/normal.hpp>

#include <chrono>
#include <functional>
#include <iomanip>
#include <iostream>

using namespace dlmap;
namespace fs = std::filesystem;
namespace pl = dlmap::pipeline;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

std::string fmt(double x, int prec = 3) {
    std::ostringstream s;
    s << std::setprecision(prec) << x;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const fs::path source = DLMAP_SOURCE_DIR;

// ---- 1 -------------------------------------------------------------------

Verdict sgns_gradients() {
    auto t0 = std::chrono::steady_clock::now();
    Rng r(101);
    const std::size_t V = 40, D = 16, K = 15;
    const double h = 1e-5;
    double worst = 0;
    auto rel = [](const std::vector<double>& a, const std::vector<double>& b) {
        double num = 0, den = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            num += (a[i] - b[i]) * (a[i] - b[i]);
            den += a[i] * a[i] + b[i] * b[i];
        }
        return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
    };
    for (int trial = 0; trial < 100; ++trial) {
        auto m = oracle::random_model(V, D, r);
        std::size_t c = r.below(V), ctx = r.below(V);
        std::vector<std::size_t> neg(K);
        for (auto& n : neg)
            n = r.below(V);
        auto g = embed::pair_objective<double>(c, ctx, neg, m);
        auto central = [&](double& x) {
            double x0 = x;
            x = x0 + h;
            double lp = oracle::sgns_loss(m, c, ctx, neg);
            x = x0 - h;
            double lm = oracle::sgns_loss(m, c, ctx, neg);
            x = x0;
            return (lp - lm) / (2 * h);
        };
        std::vector<double> fd(D);
        for (std::size_t d = 0; d < D; ++d)
            fd[d] = central(m.input[c * D + d]);
        worst = std::max(worst, rel(g.center, fd));
        for (const auto& [row, grad] : g.outputs) {
            for (std::size_t d = 0; d < D; ++d)
                fd[d] = central(m.output[row * D + d]);
            worst = std::max(worst, rel(grad, fd));
        }
    }
    double secs = seconds_since(t0);
    return {worst < 1e-4 && secs < 5.0, "max relative error " + fmt(worst) + " over 100 configurations, " +
                                            fmt(secs, 2) + " s"};
}

// ---- 2 -------------------------------------------------------------------

Verdict negative_sampler() {
    std::vector<std::uint64_t> counts(100);
    for (std::size_t i = 0; i < counts.size(); ++i)
        counts[i] = 1 + (i * 37) % 500;
    embed::NegativeSampler s(counts);
    double z = 0;
    for (auto c : counts)
        z += std::pow(static_cast<double>(c), 0.75);
    Rng r(102);
    std::vector<double> hits(counts.size(), 0);
    const int n = 1000000;
    for (int i = 0; i < n; ++i)
        ++hits[s.sample(r)];
    double worst = 0;
    for (std::size_t i = 0; i < counts.size(); ++i)
        worst = std::max(worst, std::abs(hits[i] / n - std::pow(static_cast<double>(counts[i]), 0.75) / z));
    return {worst < 0.005, "max |p_hat - p| = " + fmt(worst)};
}

// ---- 3 -------------------------------------------------------------------

Verdict planted_topics() {
    auto t0 = std::chrono::steady_clock::now();
    auto streams = corpus::read_streams((source / "fixtures" / "topics_streams.txt").string());
    std::map<std::string, std::size_t> topic;
    for (const auto& line : read_lines((source / "fixtures" / "topics_words.tsv").string())) {
        auto f = split(line, '\t');
        if (f.size() == 2)
            topic[f[0]] = static_cast<std::size_t>(parse_int(f[1], "topic"));
    }
    corpus::Vocabulary vocab(corpus::count_tokens(streams));
    embed::TrainingConfig cfg;
    cfg.dim = 32;
    cfg.epochs = 10;
    cfg.seed = 103;
    auto m = embed::train<float>(streams, vocab, cfg);
    const std::size_t V = m.size();
    double intra = 0, inter = 0;
    double ni = 0, nx = 0;
    for (std::size_t i = 0; i < V; ++i)
        for (std::size_t j = i + 1; j < V; ++j) {
            double c = embed::row_cosine<float>(m.input_row(i), m.input_row(j));
            if (topic.at(m.vocab.token(i)) == topic.at(m.vocab.token(j))) {
                intra += c;
                ++ni;
            } else {
                inter += c;
                ++nx;
            }
        }
    double margin = intra / ni - inter / nx;
    termcluster::Matrix x(static_cast<Eigen::Index>(V), static_cast<Eigen::Index>(m.dim));
    for (std::size_t i = 0; i < V; ++i)
        for (std::size_t d = 0; d < m.dim; ++d)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = m.input_row(i)[d];
    auto km = termcluster::kmeans(termcluster::unit_rows(x), 2);
    std::map<std::pair<std::size_t, std::size_t>, double> table;
    for (std::size_t i = 0; i < V; ++i)
        table[{km.labels[i], topic.at(m.vocab.token(i))}] += 1;
    double majority = 0;
    for (std::size_t c = 0; c < 2; ++c)
        majority += std::max(table[{c, 0}], table[{c, 1}]);
    double purity = majority / static_cast<double>(V);
    double secs = seconds_since(t0);
    return {margin >= 0.2 && purity >= 0.95 && secs < 120,
            "V=" + std::to_string(V) + ", intra-inter cosine " + fmt(margin) + ", k-means purity " + fmt(purity, 4) +
                ", " + fmt(secs, 3) + " s"};
}

// ---- 4 -------------------------------------------------------------------

Verdict phrase_scores() {
    std::size_t corpora = 0, bigrams = 0;
    bool exact = true;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto streams = oracle::random_streams(seed, 50 * seed, 5 + seed);
        corpus::Vocabulary vocab(corpus::count_tokens(streams));
        auto table = corpus::score_phrases(streams, vocab, {});
        auto want = oracle::phrase_scores(streams, corpus::PhraseConfig{}.delta);
        exact = exact && table.scores.size() == want.size();
        for (const auto& [b, s] : want) {
            auto it = table.scores.find(b);
            exact = exact && it != table.scores.end() && it->second == s;
        }
        ++corpora;
        bigrams += want.size();
    }
    Rng r(104);
    std::vector<corpus::TokenStream> streams;
    for (int d = 0; d < 200; ++d) {
        corpus::TokenStream s;
        s.doc_id = std::to_string(d);
        for (int i = 0; i < 100; ++i)
            s.tokens.push_back("f" + std::to_string(r.below(600)));
        auto at = static_cast<std::ptrdiff_t>(r.below(96));
        s.tokens.insert(s.tokens.begin() + at, {"alpha", "beta", "gamma", "delta"});
        streams.push_back(std::move(s));
    }
    corpus::Vocabulary vocab(corpus::count_tokens(streams));
    corpus::paste_phrases(streams, vocab, {});
    bool planted = vocab.count("alpha_beta_gamma_delta") == 200 && !vocab.contains("alpha");
    return {exact && planted, std::to_string(corpora) + " corpora (50..1000 tokens), " + std::to_string(bigrams) +
                                  " bigram scores " + (exact ? "identical" : "DIFFER") + "; planted 4-gram " +
                                  (planted ? "pasted in all 200 documents" : "not recovered")};
}

// ---- 5 -------------------------------------------------------------------

Verdict gap_statistic() {
    int hits = 0;
    std::string chosen;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto x = oracle::blobs(300, 8, 3, 1.0, 1050 + seed);
        termcluster::GapConfig gc;
        gc.k_max = 8;
        gc.n_refs = 10;
        gc.kmeans.restarts = 3;
        gc.kmeans.seed = seed;
        auto k = termcluster::gap_statistic(x, gc).chosen_k;
        hits += k == 3;
        chosen += (chosen.empty() ? "" : ",") + std::to_string(k);
    }
    return {hits >= 9, "chosen_k = 3 in " + std::to_string(hits) + "/10 seeds (" + chosen + ")"};
}

// ---- 6 -------------------------------------------------------------------

Verdict retrieval() {
    auto docs = oracle::random_store_docs(10000, 106);
    retrieve::DocumentStore store(docs);
    Rng r(107);
    int equal = 0;
    std::size_t hits = 0;
    for (int list = 0; list < 50; ++list) {
        std::vector<std::string> terms;
        for (std::uint64_t t = 0, nt = 1 + r.below(4); t < nt; ++t) {
            std::string term;
            for (std::uint64_t w = 0, nw = 1 + r.below(3); w < nw; ++w)
                term += (w ? "_" : "") + oracle::search_words[r.below(oracle::search_words.size())];
            terms.push_back(term);
        }
        auto got = retrieve::retrieve(store, terms);
        equal += got == oracle::brute_force(docs, terms);
        hits += got.size();
    }
    double worst = 0;
    bool defined_ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::uint64_t> counts(5 + r.below(25));
        for (auto& c : counts)
            c = r.below(10) == 0 ? 0 : 1 + r.below(5000);
        auto ts = retrieve::trend_from_counts(1990, counts);
        for (std::size_t i = 0; i < counts.size(); ++i) {
            double sum = 0;
            int n = 0;
            if (i >= 3)
                for (std::size_t t = i - 2; t <= i; ++t)
                    if (counts[t - 1] > 0) {
                        sum += static_cast<double>(counts[t]) / static_cast<double>(counts[t - 1]) - 1.0;
                        ++n;
                    }
            if (n == 0) {
                defined_ok = defined_ok && !ts.growth[i];
            } else {
                defined_ok = defined_ok && ts.growth[i].has_value();
                if (ts.growth[i])
                    worst = std::max(worst, std::abs(*ts.growth[i] - sum / n));
            }
        }
    }
    return {equal == 50 && worst <= 1e-12 && defined_ok,
            std::to_string(equal) + "/50 term lists equal the full scan (" + std::to_string(hits) +
                " hits); growth max deviation " + fmt(worst)};
}

// ---- 7 -------------------------------------------------------------------

Verdict novelty_oracle() {
    bool exact = true, nested = true, exercised = true;
    std::size_t compared = 0;
    std::string counts;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto f = oracle::novelty_fixture(seed);
        std::vector<std::size_t> novel;
        for (std::uint64_t threshold : {3u, 5u, 10u}) {
            novelty::NoveltyConfig cfg;
            cfg.reuse_threshold = threshold;
            auto got = novelty::NoveltyIndex(f.records, cfg).score_all(oracle::filter_for(f));
            auto want = oracle::novelty(f.papers, f.info, threshold);
            exact = exact && got.size() == want.size();
            std::size_t n = 0;
            for (std::size_t i = 0; exact && i < got.size(); ++i) {
                const auto& g = got[i];
                const auto& w = want[i];
                exact = g.paper_id == w.id && g.dummy_all == w.dummy[0] && g.dummy_nocs == w.dummy[1] &&
                        g.dummy_onlyhs == w.dummy[2] && g.weighted_all == w.weighted[0] &&
                        g.weighted_nocs == w.weighted[1] && g.weighted_onlyhs == w.weighted[2];
                nested = nested && g.weighted_onlyhs <= g.weighted_nocs && g.weighted_nocs <= g.weighted_all;
                n += g.dummy_all;
                ++compared;
            }
            novel.push_back(n);
        }
        // Each higher threshold must drop at least one planted pair.
        exercised = exercised && novel[2] > 0 && novel[1] > novel[2] && novel[0] > novel[1];
        counts += (counts.empty() ? "" : " ") + std::to_string(novel[0]) + "/" + std::to_string(novel[1]) + "/" +
                  std::to_string(novel[2]);
    }
    return {exact && nested && exercised,
            std::to_string(compared) + " paper-threshold rows " + (exact ? "identical" : "DIFFER") +
                ", nesting " + (nested ? "holds" : "VIOLATED") + ", novel papers at 3/5/10 per seed: " + counts};
}

// ---- 8 -------------------------------------------------------------------

Verdict atypicality_null() {
    using namespace dlmap::atypicality;
    CitationNetwork net(oracle::random_edges(60, 12, 108));
    auto base = marginals(net.edges());
    int preserved = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed)
        preserved += marginals(randomize_edges(net, seed)) == base;

    CitationNetwork small(oracle::six_paper_network());
    auto exact = oracle::exhaustive_null(small);
    NullConfig cfg;
    cfg.n_nulls = 10000;
    cfg.seed = 109;
    auto z = pair_zscores(small, cfg);
    double worst = 0;
    std::size_t compared = 0;
    bool defined = true;
    for (const auto& p : z.pairs) {
        const auto& m = exact.at(novelty::pair_key(p.pair.lo, p.pair.hi));
        if (m.var <= 1e-12)
            continue;
        defined = defined && p.z.has_value();
        if (!p.z)
            continue;
        worst = std::max(worst, std::abs(*p.z - (static_cast<double>(p.observed) - m.mean) / std::sqrt(m.var)));
        ++compared;
    }

    Rng r(110);
    std::vector<PaperZSummary> s(5000);
    for (auto& x : s) {
        x.median_z = r.normal();
        x.p10_z = x.median_z - std::abs(r.normal());
    }
    assign_quadrants(s);
    double hn = 0;
    for (const auto& x : s)
        hn += x.high_novelty;
    hn /= static_cast<double>(s.size());
    return {preserved == 100 && defined && compared > 0 && worst <= 0.1 && std::abs(hn - 0.5) <= 0.01,
            "marginals preserved " + std::to_string(preserved) + "/100; max |z_mc - z_exact| " + fmt(worst) +
                " over " + std::to_string(compared) + " pairs; high-novelty share " + fmt(hn, 4)};
}

// ---- 9 -------------------------------------------------------------------

Verdict dtw_kmedoids() {
    using namespace dlmap::tsclust;
    Rng r(111);
    auto series = [&](std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v)
            x = r.normal();
        return v;
    };
    int exact = 0;
    for (int t = 0; t < 300; ++t) {
        auto a = series(1 + r.below(6)), b = series(1 + r.below(6));
        DtwOptions o;
        o.squared = t % 2;
        exact += dtw(a, b, o) == oracle::dtw_paths(a, b, o.squared);
    }
    int sym = 0;
    for (int t = 0; t < 1000; ++t) {
        auto a = series(2 + r.below(20)), b = series(2 + r.below(20));
        sym += dtw(a, b) == dtw(b, a) && dtw(a, a) == 0.0;
    }
    bool monotone = true;
    {
        std::vector<TimeSeries> s;
        for (int i = 0; i < 30; ++i)
            s.push_back({"s" + std::to_string(i), 2000, series(8)});
        auto d = distance_matrix(s);
        for (std::size_t k = 1; k <= 5; ++k) {
            auto c = kmedoids(d, k);
            for (std::size_t i = 1; i < c.cost_trace.size(); ++i)
                monotone = monotone && c.cost_trace[i] <= c.cost_trace[i - 1];
        }
    }
    double worst_ari = 1.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        synth::SeriesConfig sc;
        sc.seed = 1110 + seed;
        auto s = synth::share_series(sc);
        auto c = kmedoids(distance_matrix(s), 2);
        std::vector<std::size_t> truth;
        for (const auto& x : s)
            truth.push_back(x.id[0] == 'R');
        worst_ari = std::min(worst_ari, oracle::adjusted_rand(truth, c.labels));
    }
    return {exact == 300 && sym == 1000 && monotone && worst_ari >= 0.95,
            std::to_string(exact) + "/300 DTW values equal path enumeration; " + std::to_string(sym) +
                "/1000 symmetric and zero on self; PAM cost " + (monotone ? "non-increasing" : "INCREASED") +
                "; worst ARI " + fmt(worst_ari, 4) + " over 5 seeds"};
}

// ---- 10 ------------------------------------------------------------------

Verdict econometric_recovery() {
    using namespace dlmap::econometrics;
    auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = 20000;
    double worst_ratio = 0;
    bool converged = true;
    for (auto s : {sim::probit(n, 201), sim::tobit(n, 202), sim::negbin(n, 203), sim::mnlogit(n, 204)}) {
        auto f = fit(s.request);
        converged = converged && f.converged;
        auto se = f.se();
        for (Eigen::Index i = 0; i < s.truth.size(); ++i)
            worst_ratio = std::max(worst_ratio, std::abs(f.coef(i) - s.truth(i)) / se(i));
    }

    auto p = sim::probit(n, 205);
    auto fp = fit_probit(sim::constant_design(p.request.mean.y));
    boost::math::normal normal;
    double probit_gap = std::abs(fp.coef(0) - boost::math::quantile(normal, p.request.mean.y.mean()));
    auto nb = sim::negbin(n, 206);
    auto fn = fit_negbin(sim::constant_design(nb.request.mean.y));
    double nb_gap = std::abs(fn.coef(0) - std::log(nb.request.mean.y.mean()));
    auto t = sim::tobit(n, 207, -1e6);
    auto ft = fit_tobit(t.request.mean, -1e6);
    const auto& d = t.request.mean;
    Vector ols = (d.x.transpose() * d.x).ldlt().solve(d.x.transpose() * d.y);
    double tobit_gap = (ft.coef.head(ols.size()) - ols).cwiseAbs().maxCoeff();
    double s2 = (d.y - d.x * ols).squaredNorm() / static_cast<double>(d.rows());
    tobit_gap = std::max(tobit_gap, std::abs(ft.coef(ols.size()) - 0.5 * std::log(s2)));

    double worst_boot = 0;
    for (auto s : {sim::probit(n, 208), sim::tobit(n, 209)}) {
        auto f = fit(s.request);
        BootstrapConfig bc;
        bc.replications = 500;
        bc.seed = 210;
        auto b = bootstrap_se(s.request, bc);
        Vector se = f.se();
        for (Eigen::Index i = 0; i < se.size(); ++i)
            worst_boot = std::max(worst_boot, std::abs(b.se(i) / se(i) - 1.0));
    }
    double secs = seconds_since(t0);
    bool ok = converged && worst_ratio < 3.0 && probit_gap <= 1e-8 && nb_gap <= 1e-8 && tobit_gap <= 1e-6 &&
              worst_boot <= 0.15 && secs < 600;
    return {ok, "worst |b - truth|/SE " + fmt(worst_ratio) + "; identities: probit " + fmt(probit_gap) + ", NB " +
                    fmt(nb_gap) + ", Tobit-OLS " + fmt(tobit_gap) + "; bootstrap SE worst deviation " +
                    fmt(100 * worst_boot) + "%; " + fmt(secs, 3) + " s"};
}

// ---- 11 ------------------------------------------------------------------

Verdict matching() {
    using namespace dlmap::econometrics;
    const double tau = 0.625;
    int exact_ok = 0, psm_ok = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto m = sim::additive_matching(tau, 300 + seed);
        MatchSpec exact;
        exact.keys = m.keys;
        exact_ok += match_and_att(m.treatment, {{"y", m.outcome}}, exact).outcomes[0].att == tau;
        MatchSpec psm;
        psm.mode = MatchMode::psm;
        psm.covariates = m.covariates;
        psm.seed = seed;
        psm_ok += match_and_att(m.treatment, {{"y", m.outcome}}, psm).outcomes[0].att == tau;
    }
    return {exact_ok == 10 && psm_ok == 10, "ATT == tau exactly in " + std::to_string(exact_ok) + "/10 (exact) and " +
                                                std::to_string(psm_ok) + "/10 (PSM) datasets"};
}

// ---- 12 ------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "timings.jsonl") {
            std::ifstream in(e.path(), std::ios::binary);
            out[fs::relative(e.path(), dir).string()] = {std::istreambuf_iterator<char>(in), {}};
        }
    return out;
}

fs::path run_pipeline(const std::string& name) {
    auto work = fs::temp_directory_path() / ("dlmap_acceptance_" + name);
    fs::remove_all(work);
    auto cfg = pl::Config::load((source / "fixtures" / "pipeline.ini").string(), {"run.work=" + work.string()});
    pl::run_all(cfg);
    return work;
}

fs::path first_run;

Verdict determinism() {
    first_run = run_pipeline("a");
    auto second = run_pipeline("b");
    auto a = snapshot(first_run), b = snapshot(second);
    std::size_t same = 0;
    for (const auto& [rel, bytes] : a)
        same += b.count(rel) && b.at(rel) == bytes;
    bool ok = a.size() == b.size() && same == a.size() && a.count("manifest.jsonl");
    return {ok, std::to_string(same) + "/" + std::to_string(a.size()) +
                    " files byte-identical across two full runs (manifest.jsonl included)"};
}

// ---- 13 ------------------------------------------------------------------

std::map<std::string, double> estimates(const fs::path& file) {
    auto t = csv::read_table(file.string());
    std::map<std::string, double> out;
    for (const auto& r : t.rows)
        out[r[t.column("term")]] = parse_double(r[t.column("estimate")], "estimate");
    return out;
}

Verdict sign_pattern() {
    if (first_run.empty() || !fs::exists(first_run / "fit_summary.json"))
        first_run = run_pipeline("a");
    auto probit = estimates(first_run / "fit_novelty_probit.csv");
    auto tobit = estimates(first_run / "fit_novelty_tobit.csv");
    auto nb = estimates(first_run / "fit_citations_nb.csv");
    bool pattern = probit.at("dl") < 0 && tobit.at("dl") < 0 && nb.at("dl") > 0 && nb.at("dispersion:dl") > 0;
    return {pattern, std::string("bundled synthetic fixture: novelty DL (probit ") + fmt(probit.at("dl")) +
                         ", tobit " + fmt(tobit.at("dl")) + "), citations DL mean " + fmt(nb.at("dl")) +
                         ", dispersion " + fmt(nb.at("dispersion:dl")) + "; expected sign pattern " +
                         (pattern ? "present" : "absent")};
}

} // namespace

int main() {
    struct Criterion {
        int id;
        std::string name;
        std::function<Verdict()> check;
        bool gated = true;
    };
    const std::vector<Criterion> criteria = {
        {1, "SGNS gradient suite", sgns_gradients},
        {2, "negative-sampler distribution", negative_sampler},
        {3, "planted-topic embedding", planted_topics},
        {4, "phrase-score oracle", phrase_scores},
        {5, "gap statistic", gap_statistic},
        {6, "retrieval oracle", retrieval},
        {7, "novelty oracle", novelty_oracle},
        {8, "atypicality", atypicality_null},
        {9, "DTW / k-medoids", dtw_kmedoids},
        {10, "econometrics recovery", econometric_recovery},
        {11, "matching", matching},
        {12, "end-to-end determinism", determinism},
        {13, "qualitative sign pattern", sign_pattern, false},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const char* tag = !c.gated ? "REPORT" : (v.pass ? "PASS" : "FAIL");
        std::cout << std::left << std::setw(7) << tag << std::right << std::setw(2) << c.id << "  " << c.name
                  << ": " << v.detail << std::endl;
        failed += c.gated && !v.pass;
    }
    std::cout << (failed ? std::to_string(failed) + " gated criterion(s) failed" : "all gated criteria pass")
              << std::endl;
    return failed ? 1 : 0;
}
