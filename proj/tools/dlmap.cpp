#include "dlmap/pipeline.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>

using namespace dlmap;
namespace pl = dlmap::pipeline;

namespace {

struct Globals {
    std::string config;
    std::vector<std::string> overrides;
};

pl::Config load_config(const Globals& g, std::vector<std::string> extra = {}) {
    auto ov = g.overrides;
    ov.insert(ov.end(), extra.begin(), extra.end());
    if (g.config.empty())
        throw Error(ErrorKind::validation, "--config is required");
    return pl::Config::load(g.config, ov);
}

void print_run(const pl::StageRun& r) {
    std::cout << pl::to_string(r.stage) << ": " << r.manifest["outputs"].size() << " output(s) in "
              << std::fixed << std::setprecision(3) << r.seconds << std::defaultfloat << " s\n";
}

int direct_retrieve(const std::string& terms_path, const std::string& store_dir, const std::string& corpus_path,
                    const std::string& out) {
    namespace fs = std::filesystem;
    std::optional<retrieve::DocumentStore> store;
    if (fs::exists(fs::path(store_dir) / "index.bin")) {
        store = retrieve::DocumentStore::load(store_dir);
    } else {
        require(!corpus_path.empty(), "store '" + store_dir + "' has no index; pass --corpus to build it");
        store.emplace(corpus::read_jsonl(corpus_path));
        store->save(store_dir);
    }
    auto terms = termcluster::read_terms(terms_path).terms;
    auto ids = store->retrieve_indices(terms);
    retrieve::write_ids(out, *store, ids);
    std::cout << "retrieve: " << ids.size() << " of " << store->size() << " documents\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep-learning domain delineation and impact toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("-c,--config", g.config, "INI run configuration");
    app.add_option("--set", g.overrides, "override a config value: section.key=value")->take_all();

    std::map<std::string, CLI::App*> stage_cmds;
    for (auto s : pl::all_stages()) {
        auto name = pl::to_string(s);
        stage_cmds[name] = app.add_subcommand(name, std::string("run the ") + name + " stage");
    }
    auto* all = app.add_subcommand("all", "run every stage in order");

    // train flags mirror the config keys.
    std::optional<long long> dim, window, negatives, epochs, seed;
    auto* train = stage_cmds["train"];
    train->add_option("--dim", dim);
    train->add_option("--window", window);
    train->add_option("--negatives", negatives);
    train->add_option("--epochs", epochs);
    train->add_option("--seed", seed);

    std::string terms_path, store_dir, corpus_path, ids_out;
    auto* retr = stage_cmds["retrieve"];
    retr->add_option("--terms", terms_path, "term list (direct mode)");
    retr->add_option("--store", store_dir, "store directory (direct mode)");
    retr->add_option("--corpus", corpus_path, "JSON-lines corpus to build the store from");
    retr->add_option("--out", ids_out, "output id CSV (direct mode)");

    auto* gen = app.add_subcommand("gen", "write synthetic fixtures");
    std::string gen_kind, gen_out;
    std::uint64_t gen_seed = 1;
    std::vector<std::string> gen_params;
    gen->add_option("kind", gen_kind, "corpus | citations | analysis")->required();
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", gen_seed);
    gen->add_option("--param", gen_params, "generator parameter key=value")->take_all();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            std::map<std::string, std::string> params;
            for (const auto& p : gen_params) {
                auto eq = p.find('=');
                require(eq != std::string::npos, "--param must look like key=value");
                params[p.substr(0, eq)] = p.substr(eq + 1);
            }
            for (const auto& f : pl::gen_synthetic(gen_kind, gen_out, gen_seed, params))
                std::cout << (std::filesystem::path(gen_out) / f).string() << '\n';
            return 0;
        }
        if (retr->parsed() && !terms_path.empty()) {
            require(!store_dir.empty() && !ids_out.empty(), "direct retrieve needs --terms, --store and --out");
            return direct_retrieve(terms_path, store_dir, corpus_path, ids_out);
        }
        if (all->parsed()) {
            auto cfg = load_config(g);
            for (const auto& r : pl::run_all(cfg))
                print_run(r);
            return 0;
        }
        for (auto s : pl::all_stages()) {
            if (!stage_cmds[pl::to_string(s)]->parsed())
                continue;
            std::vector<std::string> extra;
            if (s == pl::Stage::train) {
                if (dim) extra.push_back("train.dim=" + std::to_string(*dim));
                if (window) extra.push_back("train.window=" + std::to_string(*window));
                if (negatives) extra.push_back("train.negatives=" + std::to_string(*negatives));
                if (epochs) extra.push_back("train.epochs=" + std::to_string(*epochs));
                if (seed) extra.push_back("run.seed=" + std::to_string(*seed));
            }
            auto cfg = load_config(g, extra);
            print_run(pl::run(s, cfg));
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
