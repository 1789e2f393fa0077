#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qgraph/gaps.hpp"
#include "qgraph/spectrum.hpp"

using namespace qg;
using std::numbers::pi;

TEST(Collapse, MergesDegenerateLevels) {
  const auto c = collapse_multiplicities({1.0, 4.0, 4.0 + 1e-14, 9.0});
  ASSERT_EQ(c.values.size(), 3u);
  EXPECT_EQ(c.members[1], (std::vector<int>{2, 3}));
  EXPECT_THROW(collapse_multiplicities({2.0, 1.0}), InputError);
}

TEST(GapFit, IntervalSpectrum) {
  std::vector<double> l;
  for (int k = 1; k <= 100; ++k) l.push_back(k * k * pi * pi);
  const auto r = fit_gap_constants(l, 1);
  EXPECT_NEAR(r.delta, 3 * pi * pi, 1e-9);
  EXPECT_EQ(r.d_tilde, 0.0);
  EXPECT_TRUE(r.violations.empty());
}

TEST(GapFit, ClusteredNeedsLargerM) {
  std::vector<double> l;
  for (int k = 1; k <= 20; ++k) {
    l.push_back(k * k);
    l.push_back(k * k + 1e-3 / std::pow(k, 4));
  }
  EXPECT_FALSE(fit_gap_constants(l, 1).violations.empty());
  const auto r = search_gap_constants(l, 4);
  EXPECT_EQ(r.M, 2);
  EXPECT_TRUE(r.violations.empty());
  EXPECT_GT(r.delta, 1.0);
  EXPECT_GT(r.d_tilde, 1.0);
  EXPECT_LT(r.d_tilde, 2.0);
}

TEST(GapFit, RejectsShortOrUnorderedInput) {
  EXPECT_THROW(fit_gap_constants({1.0, 2.0}, 1), InputError);
  EXPECT_THROW(fit_gap_constants({1.0, 3.0, 2.0, 5.0}, 1), InputError);
}

TEST(Partition, ClassesAndHypothesisFailures) {
  const auto p = partition_classes({1.0, 1.1, 5.0, 9.0, 9.2}, 1.0, 2);
  ASSERT_EQ(p.classes.size(), 3u);
  EXPECT_EQ(p.size(0), 2);
  EXPECT_EQ(p.max_size(), 2);
  EXPECT_THROW(partition_classes({1.0, 1.1, 1.2, 5.0}, 1.0, 2), HypothesisError);
}

TEST(SecularRoots, TwoStarRootsAreEquallySpaced) {
  const std::vector<double> L = {1.0, std::sqrt(2.0)};
  const auto r = star_secular_roots(L, 50);
  for (int n = 1; n <= 50; ++n) EXPECT_NEAR(r[n - 1], n * pi / (L[0] + L[1]), 1e-11);
}

TEST(SecularRoots, ThreeStarRootsSolveEquation) {
  const std::vector<double> L = {1.0, std::sqrt(2.0), std::sqrt(3.0)};
  const auto r = star_secular_roots(L, 60);
  for (std::size_t i = 1; i < r.size(); ++i) EXPECT_GT(r[i], r[i - 1]);
  for (double x : r) {
    double f = 0.0;
    for (std::size_t l = 0; l < L.size(); ++l) {
      double p = std::sin(x * L[l]);
      for (std::size_t m = 0; m < L.size(); ++m)
        if (m != l) p *= std::cos(x * L[m]);
      f += p;
    }
    EXPECT_LT(std::abs(f), 1e-10);
  }
}

TEST(SmallDivisors, IrrationalPassesRationalFlagged) {
  const std::vector<double> irr = {1.0, std::sqrt(2.0)}, rat = {1.0, 0.5};
  EXPECT_FALSE(small_divisor_check(star_secular_roots(irr, 200), irr, 0.1).flagged);
  EXPECT_TRUE(small_divisor_check(star_secular_roots(rat, 200), rat, 0.1).flagged);
}

TEST(MergedGaps, CoincidentFamiliesFlagged) {
  EXPECT_FALSE(merged_gap_bound({1.0}, {std::sqrt(2.0)}, 1.0, 100).flagged);
  EXPECT_TRUE(merged_gap_bound({1.0}, {2.0}, 1.0, 100).flagged);
}

TEST(Interlacing, TadpoleAgainstDecoupled) {
  const auto g = make_tadpole(EdgeLength::exact("1"), EdgeLength::exact("sqrt(2)"));
  const auto b = compute_spectrum(g, 61);
  const auto mu = dirichlet_decoupled_spectrum(g, 60);
  EXPECT_TRUE(interlacing_violations(b.lambdas(), mu).empty());
  // A shifted sequence must fail.
  std::vector<double> shifted = mu;
  for (auto& x : shifted) x *= 2.0;
  EXPECT_FALSE(interlacing_violations(b.lambdas(), shifted).empty());
}

TEST(GapReport, JsonListsOnlyMergedLevels) {
  const auto r = search_gap_constants({1.0, 4.0, 4.0, 9.0, 16.0, 25.0}, 2);
  const auto j = to_json(r);
  ASSERT_TRUE(j.contains("collapse_map"));
  EXPECT_EQ(j["collapse_map"].size(), 1u);
}
