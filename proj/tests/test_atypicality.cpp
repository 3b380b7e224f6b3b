#include "dlmap/atypicality.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace dlmap;
using namespace dlmap::atypicality;
using oracle::random_edges;
using oracle::six_paper_network;

TEST(Network, LayoutIndependentOfInputOrder) {
    auto e = random_edges(30, 8, 1);
    CitationNetwork a(e);
    std::reverse(e.begin(), e.end());
    CitationNetwork b(e);
    EXPECT_EQ(a.edges(), b.edges());
    EXPECT_EQ(a.papers(), b.papers());
}

TEST(Network, ConflictingYearsRejected) {
    std::vector<EdgeRecord> e = {{"p", 2000, "j", 1999}, {"p", 2001, "k", 1999}};
    EXPECT_THROW(CitationNetwork{e}, Error);
}

TEST(Randomize, PreservesAllThreeMarginals) {
    CitationNetwork net(random_edges(60, 12, 2));
    auto base = marginals(net.edges());
    bool changed = false;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        auto e = randomize_edges(net, seed);
        EXPECT_EQ(marginals(e), base) << "seed " << seed;
        changed = changed || e != net.edges();
    }
    EXPECT_TRUE(changed);
}

TEST(Randomize, ZeroSwapFactorIsIdentity) {
    CitationNetwork net(random_edges(10, 4, 3));
    EXPECT_EQ(randomize_edges(net, 1, 0.0), net.edges());
}

TEST(ZScores, MonteCarloMatchesExhaustiveNull) {
    CitationNetwork net(six_paper_network());
    auto exact = oracle::exhaustive_null(net);
    NullConfig cfg;
    cfg.n_nulls = 10000;
    auto z = pair_zscores(net, cfg);
    std::size_t compared = 0;
    for (const auto& p : z.pairs) {
        auto k = pair_key(p.pair.lo, p.pair.hi);
        const auto& m = exact.at(k);
        if (m.var <= 1e-12)
            continue;
        ASSERT_TRUE(p.z.has_value());
        double ez = (static_cast<double>(p.observed) - m.mean) / std::sqrt(m.var);
        EXPECT_NEAR(*p.z, ez, 0.1);
        ++compared;
    }
    EXPECT_GT(compared, 5u);
}

TEST(ZScores, DoublingSwapsStaysWithinMonteCarloNoise) {
    CitationNetwork net(six_paper_network());
    NullConfig a;
    a.n_nulls = 4000;
    auto b = a;
    b.swap_factor = 2 * a.swap_factor;
    b.seed = 2;
    auto x = pair_zscores(net, a), y = pair_zscores(net, b);
    ASSERT_EQ(x.pairs.size(), y.pairs.size());
    for (std::size_t i = 0; i < x.pairs.size(); ++i) {
        ASSERT_EQ(x.pairs[i].z.has_value(), y.pairs[i].z.has_value());
        if (!x.pairs[i].z)
            continue;
        EXPECT_NEAR(*x.pairs[i].z, *y.pairs[i].z, 0.15);
    }
}

TEST(ZScores, ThreadCountDoesNotChangeMoments) {
    CitationNetwork net(random_edges(40, 10, 4));
    NullConfig a;
    a.n_nulls = 30;
    auto b = a;
    b.threads = 3;
    auto x = pair_zscores(net, a), y = pair_zscores(net, b);
    ASSERT_EQ(x.pairs.size(), y.pairs.size());
    for (std::size_t i = 0; i < x.pairs.size(); ++i) {
        EXPECT_EQ(x.pairs[i].null_mean, y.pairs[i].null_mean);
        EXPECT_EQ(x.pairs[i].null_sd, y.pairs[i].null_sd);
    }
}

TEST(ZScores, SingleEdgeStrataGiveUndefinedZ) {
    std::vector<EdgeRecord> e = {{"a", 2000, "J1", 1990}, {"a", 2000, "J2", 1991}};
    CitationNetwork net(e);
    auto z = pair_zscores(net, {});
    ASSERT_EQ(z.pairs.size(), 1u);
    EXPECT_FALSE(z.pairs[0].z.has_value());
    EXPECT_EQ(z.undefined, 1u);
    auto rep = score_papers(net, z);
    EXPECT_EQ(rep.excluded_papers, 1u);
    EXPECT_TRUE(rep.papers.empty());
}

TEST(Quadrants, HalfThePopulationIsHighNovelty) {
    Rng r(5);
    std::vector<PaperZSummary> s(5000);
    for (auto& x : s) {
        x.median_z = r.normal();
        x.p10_z = x.median_z - std::abs(r.normal());
    }
    auto t = assign_quadrants(s);
    double hn = 0, hc = 0;
    for (const auto& x : s) {
        hn += x.high_novelty;
        hc += x.high_conventionality;
        EXPECT_NE(x.quadrant, Quadrant::unset);
    }
    EXPECT_NEAR(hn / 5000, 0.5, 0.01);
    EXPECT_NEAR(hc / 5000, 0.5, 0.01);
    EXPECT_LT(t.median_of_p10, t.median_of_medians);
}

TEST(Quadrants, SummaryUsesMedianAndTenthPercentile) {
    auto s = summarize_paper({5, 1, 3, 2, 4});
    EXPECT_DOUBLE_EQ(s.median_z, 3.0);
    EXPECT_DOUBLE_EQ(s.p10_z, 1.4);
    EXPECT_THROW(summarize_paper({}), Error);
}
