#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles/quadrature.hpp"
#include "qgraph/moments.hpp"

using namespace qg;

TEST(DividedDifferences, TwoNodeMatrix) {
  const auto F = divided_difference_matrix({0.0, 0.1});
  EXPECT_NEAR(F(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(F(0, 1), -10.0, 1e-12);
  EXPECT_EQ(F(1, 0), 0.0);
  EXPECT_NEAR(F(1, 1), 10.0, 1e-12);
}

TEST(DividedDifferences, ThreeNodeMatrixAndInverse) {
  DividedDifferenceBlock b;
  b.nodes = {0.0, 1.0, 3.0};
  b.F = divided_difference_matrix(b.nodes);
  // Column k holds the coefficients of the divided difference [h_0..h_k].
  EXPECT_NEAR(b.F(0, 2), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(b.F(1, 2), -1.0 / 2.0, 1e-15);
  EXPECT_NEAR(b.F(2, 2), 1.0 / 6.0, 1e-15);
  EXPECT_LT((b.F * b.inverse() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(DividedDifferences, CoincidentNodesRejected) {
  EXPECT_THROW(divided_difference_matrix({1.0, 1.0}), InputError);
}

TEST(Blocks, ApplyAndInverseRoundTrip) {
  const std::vector<double> l = {1.0, 1.01, 4.0, 9.0, 9.001, 16.0};
  const auto bl = build_blocks(l, partition_classes(l, 1.0, 2));
  ASSERT_EQ(bl.size(), 4u);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd x(6);
  for (auto& v : x) v = cplx(nd(rng), nd(rng));
  EXPECT_LT((apply_F_inverse(bl, apply_F(bl, x)) - x).norm(), 1e-10 * x.norm());
  EXPECT_LT((apply_F(bl, x) - dense_F(bl).cast<cplx>() * x).norm(), 1e-12 * x.norm());
  EXPECT_THROW(apply_F(bl, Eigen::VectorXcd::Zero(5)), InputError);
}

TEST(Blocks, TraceBoundDominatesRatio) {
  std::vector<double> l;
  for (int k = 1; k <= 12; ++k) {
    l.push_back(k * k);
    l.push_back(k * k + 1.0 / k);
  }
  const auto bl = build_blocks(l, partition_classes(l, 1.0, 2));
  const double C = block_trace_bound(bl, 1.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXcd x(l.size());
    for (auto& v : x) v = cplx(nd(rng), nd(rng));
    EXPECT_LE(apply_F(bl, x).squaredNorm(), C * std::pow(h_norm(x, 1.0), 2) * (1 + 1e-12));
  }
}

TEST(Blocks, PartitionMustCoverSequence) {
  ClassPartition p;
  p.classes = {{1, 2}};
  EXPECT_THROW(build_blocks({1.0, 2.0, 3.0}, p), InputError);
}

TEST(Moments, SmallProblemMatchesQuadrature) {
  MomentProblem p{{0.0, 1.0, 2.0}, {1.0, 0.0, 0.0}, 10.0};
  const auto s = solve_moments(p);
  EXPECT_LT(s.residual, 1e-12);
  EXPECT_LT(s.max_imag, 1e-12);
  for (std::size_t k = 0; k < 3; ++k) {
    const cplx m = oracle::integrate_composite([&](double t) { return s(t) * std::exp(cplx(0.0, p.omegas[k] * t)); },
                                               0.0, p.T, 40);
    EXPECT_LT(std::abs(m - p.targets[k]), 1e-11);
  }
  const auto am = signal_moments(s, p.omegas);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_LT(std::abs(am[k] - p.targets[k]), 1e-12);
}

TEST(Moments, MinimumNormAmongSolutions) {
  MomentProblem p{{0.5, 1.7, 3.1}, {cplx(0.2, -0.1), cplx(0.0, 0.3), cplx(-0.4, 0.0)}, 8.0};
  const auto s = solve_moments(p);
  const double n0 = signal_l2_norm(s);
  const double n_direct = std::sqrt(
      oracle::integrate_composite([&](double t) { return cplx(s(t) * s(t)); }, 0.0, p.T, 40).real());
  EXPECT_NEAR(n0, n_direct, 1e-10);
  // Constraining one more frequency shrinks the solution set, so the minimum norm cannot drop.
  const double w = 7.3;
  MomentProblem q = p;
  q.omegas.push_back(w);
  q.targets.push_back(0.25);
  const auto s2 = solve_moments(q);
  const auto m2 = signal_moments(s2, p.omegas);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_LT(std::abs(m2[k] - p.targets[k]), 1e-12);
  EXPECT_GE(signal_l2_norm(s2), n0 * (1 - 1e-12));
}

TEST(Moments, InputValidation) {
  EXPECT_THROW(solve_moments({{-1.0, 1.0}, {1.0, 1.0}, 1.0}), InputError);
  EXPECT_THROW(solve_moments({{0.0, 1.0}, {cplx(1.0, 1.0), 1.0}, 1.0}), InputError);
  EXPECT_THROW(solve_moments({{2.0, 1.0}, {1.0, 1.0}, 1.0}), InputError);
  EXPECT_THROW(solve_moments({{1.0}, {1.0}, 0.0}), InputError);
}

TEST(Moments, IllConditionedGramIsHypothesisFailure) {
  EXPECT_THROW(solve_moments({{0.0, 1e-4, 2e-4, 3e-4}, {1.0, 0.0, 0.0, 0.0}, 1.0}), HypothesisError);
}

TEST(Moments, ShortHorizonWarns) {
  const auto s = solve_moments({{0.0, 1.0, 2.0}, {1.0, 0.0, 0.0}, 3.0});
  EXPECT_FALSE(s.warnings.empty());
  const auto t = solve_moments({{0.0, 1.0, 2.0}, {1.0, 0.0, 0.0}, 10.0});
  EXPECT_TRUE(t.warnings.empty());
}

TEST(MomentBound, SingleFrequencyRatio) {
  Eigen::VectorXcd a(1);
  a << cplx(0.3, 0.4);
  EXPECT_NEAR(moment_ratio({2.0}, 5.0, a), std::sqrt(5.0), 1e-12);
}

TEST(MomentBound, LadderNondecreasingAndDeterministic) {
  std::vector<double> l;
  for (int k = 1; k <= 5; ++k) l.push_back(k * k);
  const auto a = moment_bound_ladder(l, {1, 2, 4, 8}, 100, 3);
  const auto b = moment_bound_ladder(l, {1, 2, 4, 8}, 100, 3);
  for (std::size_t i = 1; i < a.C.size(); ++i) EXPECT_GE(a.C[i], a.C[i - 1]);
  EXPECT_EQ(a.C, b.C);
  EXPECT_THROW(moment_bound_ladder(l, {2, 1}, 10, 3), InputError);
}

TEST(Export, JsonAndCsv) {
  const auto s = solve_moments({{0.0, 1.0, 2.0}, {1.0, 0.0, 0.0}, 10.0});
  const auto j = to_json(s);
  EXPECT_EQ(j["T"].get<double>(), 10.0);
  const auto path = std::filesystem::temp_directory_path() / "qg_signal_test.csv";
  write_signal_csv(s, path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.substr(0, 1), "t");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, static_cast<int>(s.t.size()));
  std::filesystem::remove(path);
}
