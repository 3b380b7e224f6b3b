// Probit and negative binomial fits on an analysis table, printed as
// coefficient tables.
//
//   sample_fit_models analysis.csv

#include "dlmap/csv.hpp"
#include "dlmap/econometrics.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace dlmap;
    using namespace dlmap::econometrics;
    if (argc != 2) {
        std::cerr << "usage: " << argv[0] << " analysis.csv\n";
        return 2;
    }
    try {
        auto table = csv::read_table(argv[1]);
        RoleSpec spec;
        spec.response = "novelty_dummy";
        spec.covariates = {"dl", "log_refs", "jif"};
        spec.fixed_effects = {"year"};
        auto probit = fit_probit(build_design(table, spec));
        std::cout << "probit, n = " << probit.n << '\n';
        write_coefficients(std::cout, probit, probit.se());

        spec.response = "citations";
        RoleSpec disp;
        disp.response = "citations";
        disp.covariates = {"dl"};
        auto nb = fit_negbin(build_design(table, spec), build_design(table, disp));
        std::cout << "\nnegative binomial, log-likelihood " << nb.loglik << '\n';
        write_coefficients(std::cout, nb, nb.se());
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    }
}
