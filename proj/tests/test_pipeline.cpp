#include "dlmap/pipeline.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

using namespace dlmap;
namespace pl = dlmap::pipeline;
namespace fs = std::filesystem;

namespace {

const fs::path fixtures = fs::path(DLMAP_SOURCE_DIR) / "fixtures";
const fs::path ini = fixtures / "pipeline.ini";

fs::path scratch(const std::string& name) {
    auto d = fs::temp_directory_path() / ("dlmap_pl_" + name);
    fs::remove_all(d);
    return d;
}

pl::Config config(const fs::path& work, std::vector<std::string> extra = {}) {
    extra.insert(extra.begin(), "run.work=" + work.string());
    return pl::Config::load(ini.string(), extra);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Relative path -> bytes, skipping wall-clock timings.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "timings.jsonl")
            out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

std::vector<nlohmann::ordered_json> manifest_lines(const fs::path& work) {
    std::vector<nlohmann::ordered_json> out;
    for (const auto& l : read_lines((work / "manifest.jsonl").string()))
        if (!l.empty())
            out.push_back(nlohmann::ordered_json::parse(l));
    return out;
}

// A complete run shared by the tests that only read or copy it.
const fs::path& baseline() {
    static const fs::path dir = [] {
        auto d = scratch("baseline");
        auto cfg = config(d);
        pl::run_all(cfg);
        return d;
    }();
    return dir;
}

fs::path copy_of_baseline(const std::string& name) {
    auto d = scratch(name);
    fs::copy(baseline(), d, fs::copy_options::recursive);
    return d;
}

int cli(const std::string& args) {
    auto cmd = std::string(DLMAP_CLI) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST(Prerequisites, TermsBeforeTrainNamesEarliestMissingStage) {
    auto work = scratch("prereq");
    auto cfg = config(work);
    try {
        pl::run(pl::Stage::terms, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::prerequisite);
        EXPECT_NE(std::string(e.what()).find("'prepare'"), std::string::npos) << e.what();
    }
    pl::run(pl::Stage::prepare, cfg);
    pl::run(pl::Stage::phrases, cfg);
    try {
        pl::run(pl::Stage::terms, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("'train'"), std::string::npos) << e.what();
    }
}

TEST(EndToEnd, TwoRunsAreByteIdentical) {
    auto other = scratch("second");
    auto cfg = config(other);
    pl::run_all(cfg);
    auto a = snapshot(baseline()), b = snapshot(other);
    ASSERT_EQ(a.size(), b.size());
    for (const auto& [rel, bytes] : a) {
        ASSERT_TRUE(b.count(rel)) << rel;
        EXPECT_TRUE(bytes == b.at(rel)) << rel;
    }
}

TEST(Manifest, ChainsDigestsAndEchoesParameters) {
    auto lines = manifest_lines(baseline());
    ASSERT_EQ(lines.size(), pl::all_stages().size());
    std::map<std::string, std::string> produced;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& m = lines[i];
        EXPECT_EQ(m["stage"], pl::to_string(pl::all_stages()[i]));
        EXPECT_EQ(m["seed"], 7);
        EXPECT_EQ(m["params"]["run.seed"], "7");
        for (const auto& [rel, digest] : m["outputs"].items()) {
            EXPECT_EQ(digest, pl::sha256_file((baseline() / rel).string())) << rel;
            produced["work/" + rel] = digest;
        }
        for (const auto& [name, digest] : m["inputs"].items())
            if (name.rfind("work/", 0) == 0) {
                ASSERT_TRUE(produced.count(name)) << m["stage"] << " reads " << name;
                EXPECT_EQ(produced[name], digest);
            }
    }
    EXPECT_EQ(lines[2]["params"]["train.dim"], "24");
    EXPECT_EQ(lines[2]["params"].count("train.seed"), 0u);
}

TEST(Manifest, DigestMatchesKnownVector) {
    auto p = scratch("abc.txt");
    {
        std::ofstream out(p);
        out << "abc";
    }
    EXPECT_EQ(pl::sha256_file(p.string()), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Resume, DeletedOutputsAreReproducedExactly) {
    auto work = copy_of_baseline("resume");
    auto before = snapshot(work);
    std::vector<pl::Stage> redo = {pl::Stage::train, pl::Stage::tsclust, pl::Stage::fit, pl::Stage::match};
    for (auto s : redo)
        for (const auto& m : pl::stage_markers(s))
            fs::remove(work / m);
    fs::remove(work / "model.bin");
    auto cfg = config(work);
    for (auto s : redo)
        pl::run(s, cfg);
    auto after = snapshot(work);
    for (const auto& [rel, bytes] : before) {
        if (rel == "manifest.jsonl")
            continue;
        EXPECT_TRUE(after.count(rel) && after.at(rel) == bytes) << rel;
    }
    auto lines = manifest_lines(work);
    auto first = manifest_lines(baseline());
    for (std::size_t i = 0; i < redo.size(); ++i) {
        const auto& rerun = lines[first.size() + i];
        auto idx = static_cast<std::size_t>(redo[i]);
        EXPECT_EQ(rerun, first[idx]) << pl::to_string(redo[i]);
    }
}

// Mutation audit: a key that changes a stage's outputs must be in that
// stage's echo, and a key nobody reads must not change anything.
TEST(Echo, EveryOutputAffectingMutationIsEchoed) {
    struct Mutation {
        pl::Stage stage;
        std::string key, value;
    };
    const std::vector<Mutation> mutations = {
        {pl::Stage::phrases, "phrases.threshold", "20"},
        {pl::Stage::train, "train.window", "3"},
        {pl::Stage::train, "run.seed", "8"},
        {pl::Stage::cluster, "cluster.k", "3"},
        {pl::Stage::terms, "terms.max_terms", "5"},
        {pl::Stage::trends, "trends.first_year", "2005"},
        {pl::Stage::novelty, "novelty.reuse_threshold", "2"},
        {pl::Stage::novelty, "novelty.reuse_years", "1"},
        {pl::Stage::atypicality, "atypicality.nulls", "10"},
        {pl::Stage::atypicality, "atypicality.swap_factor", "3"},
        {pl::Stage::tsclust, "tsclust.k", "3"},
        {pl::Stage::tsclust, "tsclust.squared", "true"},
        {pl::Stage::fit, "model.novelty_probit.covariates", "dl, log_refs"},
        {pl::Stage::fit, "model.novelty_tobit.censor_point", "-0.5"},
        {pl::Stage::match, "match.keys", "journal"},
    };
    auto first = manifest_lines(baseline());
    for (const auto& mu : mutations) {
        auto work = copy_of_baseline("mutation");
        auto cfg = config(work, {mu.key + "=" + mu.value});
        auto r = pl::run(mu.stage, cfg);
        const auto& base = first[static_cast<std::size_t>(mu.stage)];
        EXPECT_NE(r.manifest["outputs"].dump(), base["outputs"].dump()) << mu.key << " made no difference";
        ASSERT_TRUE(r.manifest["params"].contains(mu.key)) << mu.key << " missing from the echo";
        EXPECT_EQ(r.manifest["params"][mu.key], mu.value);
    }
    auto work = copy_of_baseline("mutation");
    auto cfg = config(work, {"novelty.unused=3"});
    auto r = pl::run(pl::Stage::novelty, cfg);
    EXPECT_EQ(r.manifest.dump(), first[static_cast<std::size_t>(pl::Stage::novelty)].dump());
}

TEST(Report, EmitsTablesAndPlotData) {
    const auto report = baseline() / "report";
    for (const char* f : {"trend.csv", "cross_classification.csv", "envelopes.json", "report.json",
                          "fit_novelty_probit.csv", "fit_novelty_tobit.csv", "fit_citations_nb.csv", "fit_quadrant.csv"})
        EXPECT_TRUE(fs::exists(report / f)) << f;
    auto j = nlohmann::json::parse(slurp(report / "report.json"));
    EXPECT_TRUE(j.is_object());
    auto env = nlohmann::json::parse(slurp(report / "envelopes.json"));
    EXPECT_FALSE(env.empty());
}

TEST(Stages, PlantedPhraseIsDetectedAndSeedsTheTerms) {
    auto phrases = csv::read_table((baseline() / "phrases.tsv").string(), '\t');
    bool found = false;
    for (const auto& r : phrases.rows)
        found = found || (r[phrases.column("first")] == "deep" && r[phrases.column("second")] == "learning");
    EXPECT_TRUE(found);
    auto terms = read_lines((baseline() / "terms.txt").string());
    EXPECT_NE(std::find(terms.begin(), terms.end(), "deep_learning"), terms.end());
}

TEST(Stages, PlantedFirstEverPairsCountedByNovelty) {
    auto planted = nlohmann::json::parse(slurp(fixtures / "planted.json"));
    auto t = csv::read_table((baseline() / "novelty.csv").string());
    const int focal = planted["focal_year"];
    std::size_t novel = 0;
    for (const auto& r : t.rows)
        novel += parse_int(r[t.column("year")], "year") == focal && r[t.column("novelty_dummy_all")] == "1";
    EXPECT_EQ(novel, planted["planted"].size());
}

TEST(Stages, FitRecoversPlantedCitationEffect) {
    auto truth = nlohmann::json::parse(slurp(fixtures / "truth.json"));
    auto t = csv::read_table((baseline() / "fit_citations_nb.csv").string());
    for (const auto& r : t.rows) {
        auto term = r[t.column("term")];
        if (!truth["negbin"].contains(term))
            continue;
        double est = parse_double(r[t.column("estimate")], "estimate"), se = parse_double(r[t.column("se")], "se");
        EXPECT_LT(std::abs(est - truth["negbin"][term].get<double>()), 3 * se) << term;
    }
}

TEST(Gen, RegenerationReproducesShippedFixtures) {
    auto out = scratch("gen");
    for (const char* kind : {"corpus", "citations", "analysis"})
        for (const auto& f : pl::gen_synthetic(kind, out, 1))
            EXPECT_TRUE(slurp(out / f) == slurp(fixtures / f)) << f;
    EXPECT_THROW(pl::gen_synthetic("nonsense", out, 1), Error);
}

TEST(Config, OverridesBeatFileValuesAndPathsAreRelativeToTheFile) {
    auto cfg = pl::Config::load(ini.string(), {"train.dim=8"});
    EXPECT_EQ(cfg.integer("train.dim", 0), 8);
    EXPECT_EQ(cfg.integer("train.epochs", 0), 4);
    EXPECT_EQ(fs::path(cfg.path("paths.corpus")), (fixtures / "corpus.jsonl").lexically_normal());
    EXPECT_EQ(cfg.str("model.novelty_probit.kind", ""), "probit");
    EXPECT_THROW(cfg.set("nodot=1"), Error);
    EXPECT_THROW(cfg.flag("paths.corpus", false), Error);
}

TEST(Cli, ExitCodes) {
    auto work = scratch("cli");
    auto base = "-c " + ini.string() + " --set run.work=" + work.string();
    EXPECT_EQ(cli(base + " terms"), 4);
    EXPECT_EQ(cli("terms"), 2);
    EXPECT_EQ(cli(base + " nonsense"), 2);
    EXPECT_EQ(cli(base + " --set paths.corpus=missing.jsonl prepare"), 2);
    EXPECT_EQ(cli(base + " --set model.novelty_probit.max_iter=1 fit"), 3);
    EXPECT_EQ(cli(base + " prepare"), 0);
    EXPECT_EQ(cli("gen corpus --out " + (work / "gen").string() + " --seed 2 --param docs=50"), 0);
    EXPECT_TRUE(fs::exists(work / "gen" / "corpus.jsonl"));
}
