// Novelty dummies and weighted scores for a reference table.
//
//   sample_novelty_scores references.csv journal_categories.csv [threshold]

#include "dlmap/novelty.hpp"
#include "dlmap/retrieve.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace dlmap;
    if (argc < 3) {
        std::cerr << "usage: " << argv[0] << " references.csv journal_categories.csv [threshold]\n";
        return 2;
    }
    try {
        novelty::NoveltyConfig cfg;
        if (argc > 3)
            cfg.reuse_threshold = static_cast<std::uint64_t>(parse_int(argv[3], "threshold"));
        novelty::NoveltyIndex index(novelty::read_references(argv[1]), cfg);
        // Health categories are taken to be everything that is not CS here.
        auto journals = novelty::read_journal_categories(argv[2]);
        auto cs = retrieve::computer_science_categories();
        std::set<std::string> hs;
        for (const auto& [j, cats] : journals)
            for (const auto& c : cats)
                if (!cs.count(c))
                    hs.insert(c);
        novelty::ScopeFilter filter(journals, {cs.begin(), cs.end()}, hs);
        novelty::NoveltyDiagnostics diag;
        auto scores = index.score_all(filter, &diag);
        std::size_t novel = 0;
        for (const auto& s : scores)
            novel += s.dummy_all;
        std::cout << novel << " of " << diag.papers_scored << " scored papers are novel ("
                  << diag.papers_skipped_censored << " skipped as censored)\n";
        for (const auto& s : scores)
            if (s.dummy_all)
                std::cout << s.paper_id << '\t' << s.year << '\t' << s.weighted_all << '\t' << s.weighted_onlyhs << '\n';
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    }
}
