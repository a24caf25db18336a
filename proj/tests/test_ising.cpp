#include <gtest/gtest.h>

#include <cmath>

#include <treeising/ising.hpp>

#include "fixtures.hpp"

using namespace treeising;
using fixtures::path;
using fixtures::random_tree;
using fixtures::regular_tree;

TEST(FTheta, BasicValues) {
  EXPECT_DOUBLE_EQ(f_theta(kInf, 0.7), 0.7);
  EXPECT_DOUBLE_EQ(f_theta(-kInf, 0.7), -0.7);
  EXPECT_DOUBLE_EQ(f_theta(0.0, 0.7), 0.0);
  EXPECT_NEAR(f_theta(1.3, 0.4), std::atanh(std::tanh(0.4) * std::tanh(1.3)), 1e-15);
  // Large arguments stay accurate where atanh of a value near 1 would not.
  EXPECT_NEAR(f_theta(40.0, 0.5), 0.5, 1e-15);
  EXPECT_NEAR(f_theta(-3.0, 2.0), -f_theta(3.0, 2.0), 1e-15);
}

TEST(PairCorrelation, Examples) {
  EXPECT_NEAR(pair_correlation(0.0, 0.0, 0.8), std::tanh(0.8), 1e-15);
  EXPECT_NEAR(pair_correlation(kInf, kInf, 0.8), 1.0, 1e-15);
  EXPECT_NEAR(pair_correlation(kInf, -kInf, 0.8), -1.0, 1e-15);
  EXPECT_NEAR(pair_correlation(0.3, 0.5, 0.0), std::tanh(0.3) * std::tanh(0.5), 1e-15);
  EXPECT_THROW(pair_correlation(0.0, 0.0, -1.0), ising_error);
}

TEST(TreeMessages, MatchBruteForceOnRandomTrees) {
  Rng rng(2024);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng.below(13);
    const auto tree = random_tree(n, rng);
    const double beta = 2.0 * rng.uniform();
    std::vector<double> h(n);
    for (auto& x : h) {
      const double u = rng.uniform();
      x = u < 0.1 ? kInf : (u < 0.15 ? -kInf : 2.0 * rng.uniform() - 1.0);
    }
    const auto mf = tree_messages(tree, beta, h);
    const auto ex = brute_force_measure(IsingSpec(tree, beta, h));
    for (Vertex v = 0; v < n; ++v) EXPECT_NEAR(mf.magnetization(v), ex.magnetization[v], 1e-10) << "rep " << rep;
    const auto& parent = mf.rooting.parent;
    for (std::size_t e = 0; e < ex.edges.size(); ++e) {
      auto [a, b] = ex.edges[e];
      if (parent[a] == b) std::swap(a, b);
      ASSERT_EQ(parent[b], a);
      EXPECT_NEAR(mf.edge_correlation(b), ex.edge_correlation[e], 1e-10) << "rep " << rep;
    }
  }
}

TEST(TreeMessages, StarWithPlusLeaves) {
  const auto s = fixtures::star(3);
  const double beta = 0.6;
  const auto mf = boundary_messages(s, beta, 1, 0.0, Boundary::Plus);
  EXPECT_NEAR(mf.total_field(0), 3 * beta, 1e-15);
  EXPECT_NEAR(mf.magnetization(0), std::tanh(3 * beta), 1e-15);
}

TEST(TreeMessages, FreeZeroFieldIsSymmetric) {
  Rng rng(3);
  const auto tree = random_tree(30, rng);
  const auto mf = boundary_messages(tree, 1.2, 100, 0.0, Boundary::Free);
  for (double m : mf.magnetizations()) EXPECT_EQ(m, 0.0);
}

TEST(TreeMessages, RegularDepthTwoAgainstBruteForce) {
  const auto tree = regular_tree(3, 2);
  ASSERT_EQ(tree.size(), 10u);
  for (double B : {0.0, 0.2}) {
    const auto h = boundary_fields(tree, 2, B);
    const auto ex = brute_force_measure(IsingSpec(tree, 1.0, h));
    const auto mf = tree_messages(tree, 1.0, h);
    EXPECT_NEAR(mf.magnetization(0), ex.magnetization[0], 1e-12);
    EXPECT_NEAR(root_magnetization(tree, 1.0, h), ex.magnetization[0], 1e-12);
    const int kids[] = {3, 2};
    EXPECT_NEAR(spherical_summary(kids, 1.0, B).root_magnetization, ex.magnetization[0], 1e-12);
  }
  std::vector<double> neg(tree.size(), 0.0);
  neg[4] = -0.1;
  EXPECT_THROW(root_magnetization(tree, 1.0, neg), ising_error);
}

TEST(TreeMessages, RejectsBadInput) {
  const auto p = path(4);
  std::vector<double> h(3, 0.0);
  EXPECT_THROW(tree_messages(p, 1.0, h), ising_error);
  h.resize(4);
  EXPECT_THROW(tree_messages(p, -0.1, h), ising_error);
  EXPECT_THROW(tree_messages(fixtures::cycle(4), 1.0, h), ising_error);
  EXPECT_THROW(brute_force_measure(IsingSpec(path(21), 1.0)), ising_error);
}

TEST(SphericalSummary, EdgeCorrelationMatchesMessages) {
  const auto tree = regular_tree(3, 4);
  const auto mf = boundary_messages(tree, 0.9, 4, 0.1, Boundary::Plus);
  const int kids[] = {3, 2, 2, 2};
  const auto s = spherical_summary(kids, 0.9, 0.1);
  EXPECT_NEAR(s.root_magnetization, mf.magnetization(0), 1e-14);
  EXPECT_NEAR(s.edge_correlation, mf.edge_correlation(1), 1e-14);
}

TEST(Dlr, TreeMeasureSatisfiesDlr) {
  Rng rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    const auto tree = random_tree(10, rng);
    std::vector<double> h(10);
    for (auto& x : h) x = rng.uniform() - 0.5;
    const IsingSpec spec(tree, 0.8, h);
    EXPECT_LT(dlr_window_check(spec, 1), 1e-12);
    EXPECT_LT(dlr_window_check(spec, 2), 1e-12);
  }
  const IsingSpec free_spec(fixtures::cycle(8), 0.0, std::vector<double>(8, 0.3));
  EXPECT_LT(dlr_window_check(free_spec, 1), 1e-12);
}

TEST(Dlr, TiltedMeasureIsDetected) {
  const auto p = path(6);
  const IsingSpec spec(p, 0.8);
  auto mu = full_measure(spec);
  // Couple the root with the far end: this term reaches outside the window.
  double z = 0.0;
  for (std::size_t c = 0; c < mu.size(); ++c) {
    const double s0 = (c & 1u) ? 1.0 : -1.0, s5 = ((c >> 5) & 1u) ? 1.0 : -1.0;
    mu[c] *= std::exp(0.5 * s0 * s5);
    z += mu[c];
  }
  for (auto& x : mu) x /= z;
  EXPECT_GT(dlr_window_discrepancy(spec, 1, mu), 1e-3);
}

TEST(CovarianceDecay, BoundedByTanhPowers) {
  const auto tree = regular_tree(3, 3);
  for (double beta : {0.3, 0.8, 1.5}) {
    const auto c = covariance_decay_check(tree, beta, 3);
    EXPECT_LE(c.max_ratio, 1.0 + 1e-10) << beta;
    EXPECT_GE(c.min_cov, -1e-14) << beta;
  }
}

TEST(CovarianceDecay, FreeChainIsExactlyGeometric) {
  const auto p = path(8);
  const double beta = 0.7;
  const auto c = covariance_decay_check(p, beta, 100);
  for (Vertex j = 0; j < 8; ++j) EXPECT_NEAR(c.covariance[j], std::pow(std::tanh(beta), j), 1e-13);
  EXPECT_NEAR(c.max_ratio, 1.0, 1e-12);
}

TEST(Ghs, ConcaveInUniformScaling) {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const auto tree = random_tree(25, rng);
    std::vector<double> h(25);
    for (auto& x : h) x = rng.uniform() < 0.3 ? rng.uniform() : 0.0;
    h[rng.below(25)] += 0.2;
    EXPECT_LE(ghs_concavity_check(tree, 0.2 + rng.uniform(), h, 5.0, 0.05), 1e-12);
  }
}

TEST(Griffiths, MonotoneInBetaFieldsAndDepth) {
  Rng rng(9);
  const auto tree = random_tree(40, rng);
  std::vector<double> h(40);
  for (auto& x : h) x = 0.3 * rng.uniform();
  double prev = -1.0;
  for (double beta = 0.0; beta <= 2.0; beta += 0.1) {
    const double m = root_magnetization(tree, beta, h);
    EXPECT_GE(m, prev - 1e-15);
    prev = m;
  }
  auto h2 = h;
  for (auto& x : h2) x += 0.05;
  EXPECT_GE(root_magnetization(tree, 0.7, h2), root_magnetization(tree, 0.7, h));

  const auto reg = regular_tree(3, 9);
  prev = 2.0;
  for (int t = 1; t <= 9; ++t) {
    const double m = boundary_messages(reg, 1.0, t, 0.0, Boundary::Plus).magnetization(0);
    EXPECT_LE(m, prev + 1e-15);
    prev = m;
  }
}

TEST(FlipSymmetry, MinusIsNegatedPlus) {
  Rng rng(11);
  const auto tree = random_tree(30, rng);
  const auto plus = boundary_messages(tree, 0.9, 3, 0.2, Boundary::Plus);
  const auto minus = boundary_messages(tree, 0.9, 3, -0.2, Boundary::Minus);
  for (Vertex v = 0; v < 30; ++v) EXPECT_NEAR(minus.magnetization(v), -plus.magnetization(v), 1e-15);
}

TEST(HCont, GapVanishesAtEqualBetaAndStaysBounded) {
  EXPECT_NEAR(h_cont_gap(3, 1.0, 1.0, 50), 0.0, 1e-15);
  double worst = 0.0;
  for (int ell = 1; ell <= 200; ++ell) worst = std::max(worst, std::abs(h_cont_gap(3, 0.8, 1.0, ell)));
  EXPECT_LT(worst, 1.0);
  EXPECT_THROW(h_cont_gap(3, 0.5, 1.0, 5), ising_error);
  EXPECT_THROW(h_cont_gap(3, 1.0, 0.9, 5), ising_error);
}

TEST(HCont, TailFieldIsTheRegularFixedPoint) {
  const double h = tail_plus_field(2, 1.0);
  EXPECT_NEAR(h, 1.8291361594235163, 1e-12);
  EXPECT_NEAR(tail_plus_field(2, 0.4), 0.0, 1e-6);
}
