#include "dlmap/common.hpp"
#include "dlmap/csv.hpp"
#include "dlmap/rng.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>

using namespace dlmap;

TEST(Strings, SplitKeepsEmptyFields) {
    auto f = split("a,,b,", ',');
    ASSERT_EQ(f.size(), 4u);
    EXPECT_EQ(f[1], "");
    EXPECT_EQ(f[3], "");
    EXPECT_EQ(trim("  x y \t"), "x y");
}

TEST(Strings, DoubleRoundTrip) {
    for (double v : {0.1, -3.0, 1e-300, 123456.789, 2.0 / 3.0})
        EXPECT_EQ(parse_double(format_double(v), "v"), v);
    EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "NA");
    EXPECT_THROW(parse_double("1.5x", "v"), Error);
    EXPECT_THROW(parse_int("", "n"), Error);
}

TEST(Quantile, MatchesType7) {
    // Hand-computed linear interpolation at (n-1)p.
    std::vector<double> v = {4, 1, 3, 2};
    EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
    EXPECT_NEAR(quantile(v, 0.1), 1.3, 1e-15);
    EXPECT_DOUBLE_EQ(quantile({7.0}, 0.1), 7.0);
}

TEST(CompensatedSum, RecoversSmallTerms) {
    CompensatedSum s;
    s.add(1.0);
    for (int i = 0; i < 1000; ++i)
        s.add(1e-16);
    EXPECT_NEAR(s.value() - 1.0, 1e-13, 1e-15);
}

TEST(Csv, QuotedRoundTrip) {
    auto dir = std::filesystem::temp_directory_path() / "dlmap_csv_test";
    std::filesystem::create_directories(dir);
    csv::Table t;
    t.header = {"name", "note"};
    t.rows = {{"Computer Science, Theory & Methods", "say \"hi\""}, {"plain", ""}};
    auto path = (dir / "t.csv").string();
    csv::write_table(path, t);
    auto back = csv::read_table(path);
    EXPECT_EQ(back.header, t.header);
    EXPECT_EQ(back.rows, t.rows);
    EXPECT_EQ(back.column("note"), 1u);
    EXPECT_THROW(back.column("nope"), Error);
}

TEST(Rng, SeedsAreReproducibleAndStreamsDiffer) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i)
        EXPECT_EQ(a.below(1000), b.below(1000));
    EXPECT_NE(derive_seed(1, "x", 0), derive_seed(1, "x", 1));
    EXPECT_NE(derive_seed(1, "x", 0), derive_seed(1, "y", 0));
    EXPECT_EQ(derive_seed(9, "tag", 3), derive_seed(9, "tag", 3));
}

TEST(Rng, NegativeBinomialMoments) {
    Rng r(7);
    const double mu = 4.0, alpha = 0.5;
    const int n = 200000;
    double s = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
        double x = static_cast<double>(r.negative_binomial(mu, alpha));
        s += x;
        ss += x * x;
    }
    double mean = s / n, var = ss / n - mean * mean;
    EXPECT_NEAR(mean, mu, 0.05);
    EXPECT_NEAR(var, mu + alpha * mu * mu, 0.3);
}

TEST(Rng, BelowIsUniform) {
    Rng r(3);
    std::vector<int> c(5, 0);
    for (int i = 0; i < 50000; ++i)
        ++c[r.below(5)];
    for (int k : c)
        EXPECT_NEAR(k / 50000.0, 0.2, 0.01);
}

TEST(ParallelFor, CoversEveryIndexAndPropagates) {
    std::vector<std::atomic<int>> hit(100);
    parallel_for(100, 4, [&](std::size_t i) { hit[i]++; });
    for (auto& h : hit)
        EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(parallel_for(10, 3,
                              [](std::size_t i) {
                                  if (i == 7)
                                      fail("boom");
                              }),
                 Error);
}
