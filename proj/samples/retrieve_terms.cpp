// Build a store from a JSONL export and count matches per year for a term
// list.
//
//   sample_retrieve_terms corpus.jsonl terms.txt

#include "dlmap/retrieve.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace dlmap;
    if (argc != 3) {
        std::cerr << "usage: " << argv[0] << " corpus.jsonl terms.txt\n";
        return 2;
    }
    try {
        retrieve::DocumentStore store(corpus::read_jsonl(argv[1]));
        auto terms = read_word_list(argv[2]);
        auto ids = store.retrieve_indices(terms);
        std::cout << ids.size() << " of " << store.size() << " documents match\n";
        auto trend = retrieve::yearly_trend(ids, store);
        for (std::size_t i = 0; i < trend.years.size(); ++i) {
            std::cout << trend.years[i] << '\t' << trend.counts[i];
            if (trend.growth[i])
                std::cout << '\t' << *trend.growth[i];
            std::cout << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    }
}
