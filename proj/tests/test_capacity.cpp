#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <treeising/capacity.hpp>
#include <treeising/ensembles.hpp>

#include "fixtures.hpp"

using namespace treeising;

namespace {

const OffspringLaw P34 = OffspringLaw::single_type({{3, 0.5}, {4, 0.5}});

// Series-parallel recursion for the ray-load program: a vertex whose subtree
// rays all end at the same depth has capacity
//   K_u = sum_children (theta^{-2|e|} + K_v^{-2})^{-1/2},  K_leaf = inf.
double capa3_recursion(const RootedGraph& tree, double theta) {
  const auto r = root_tree(tree);
  std::vector<double> K(tree.size(), 0.0);
  for (auto it = r.order.rbegin(); it != r.order.rend(); ++it) {
    const Vertex v = *it;
    const bool leaf = v != r.order.front() && tree.degree(v) == 1;
    if (leaf) K[v] = kInf;
    if (v == r.parent[v]) continue;
    const double R2 = std::pow(theta, -2.0 * r.depth[v]);
    const double inv = std::isinf(K[v]) ? 0.0 : 1.0 / (K[v] * K[v]);
    K[r.parent[v]] += 1.0 / std::sqrt(R2 + inv);
  }
  return K[r.order.front()];
}

std::vector<std::size_t> level_sizes(const RootedGraph& tree) {
  const auto d = bfs_distances(tree, tree.root());
  std::vector<std::size_t> z(static_cast<std::size_t>(*std::max_element(d.begin(), d.end())) + 1, 0);
  for (int x : d) ++z[static_cast<std::size_t>(x)];
  return z;
}

}  // namespace

TEST(SSum, RegularTreeIsLinear) {
  const auto z = regular_profile(3, 12);
  const auto s = s_t_sum(z, 0.5);
  for (std::size_t t = 0; t < s.size(); ++t) EXPECT_NEAR(s[t], 4.0 * static_cast<double>(t) / 9.0, 1e-12);
  EXPECT_NEAR(linear_growth_slope(s), 4.0 / 9.0, 1e-12);
  const std::vector<std::size_t> root_only{1};
  EXPECT_EQ(s_t_sum(root_only, 0.5), std::vector<double>{0.0});
  EXPECT_THROW(s_t_sum(z, 0.0), std::invalid_argument);
}

TEST(SSum, MixedDegreeTreesGrowAboutLinearly) {
  const double theta = 1.0 / branching_number(P34);
  const UmgwSampler sampler(P34);
  Rng rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    const auto tree = sampler(10, rng);
    const auto s = s_t_sum(generation_sizes(tree), theta);
    for (std::size_t k = 1; k < s.size(); ++k) EXPECT_GT(s[k], s[k - 1]);
    const double slope = linear_growth_slope(s);
    EXPECT_GT(slope, 0.0);
    EXPECT_LT(slope, 2.0);
  }
}

TEST(PruneToRays, DropsShortBranches) {
  // Depth-3 leaves 3 and 7 hang below vertex 1; the branch 0-4-5 is short.
  const std::vector<Edge> e{{0, 1}, {1, 2}, {2, 3}, {0, 4}, {4, 5}, {1, 6}, {6, 7}};
  const auto tree = RootedGraph::from_edges(8, e);
  const auto p = prune_to_rays(tree, 3);
  EXPECT_EQ(p.to_parent, (std::vector<Vertex>{0, 1, 2, 6, 3, 7}));
  EXPECT_TRUE(p.tree.is_tree());
  const auto q = prune_to_rays(tree, 2);
  EXPECT_EQ(q.tree.size(), 6u);
  EXPECT_THROW(prune_to_rays(tree, 4), graph_error);
}

TEST(Capa3, SingleRayAndStar) {
  const double theta = 0.6;
  for (int t : {1, 3, 6}) {
    double s = 0.0;
    for (int k = 1; k <= t; ++k) s += std::pow(theta, -2.0 * k);
    const auto r = capa3_solve(fixtures::path(static_cast<std::size_t>(t) + 1), theta);
    EXPECT_NEAR(r.value, 1.0 / std::sqrt(s), 1e-9) << t;
  }
  const auto star = capa3_solve(fixtures::star(5), theta);
  EXPECT_NEAR(star.value, 5 * theta, 1e-9);
}

TEST(Capa3, MatchesRecursionOracle) {
  const UmgwSampler sampler(P34);
  const double theta = 1.0 / branching_number(P34);
  Rng rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    const int t = 2 + static_cast<int>(rng.below(5));
    const auto pruned = prune_to_rays(sampler(t, rng), t);
    const double oracle = capa3_recursion(pruned.tree, theta);
    const auto r = capa3_solve(pruned.tree, theta);
    EXPECT_LE(r.gap, 1e-3);
    EXPECT_LE(r.value, oracle + 1e-9);
    EXPECT_GE(r.upper, oracle - 1e-9);
    EXPECT_NEAR(r.value, oracle, 1e-3);
    EXPECT_LT(flow_conservation_error(pruned.tree, r.flow), 1e-9);
    EXPECT_LE(r.max_ray_load, 1.0 + 1e-9);
  }
}

TEST(Capa3, ConditionalGradientAlonePassesTheSameOracle) {
  const UmgwSampler sampler(P34);
  const double theta = 1.0 / branching_number(P34);
  Rng rng(16);
  Capa3Options opt;
  opt.reweighting = false;
  for (int rep = 0; rep < 5; ++rep) {
    const int t = 2 + static_cast<int>(rng.below(3));
    const auto pruned = prune_to_rays(sampler(t, rng), t);
    const auto r = capa3_solve(pruned.tree, theta, opt);
    EXPECT_LE(r.gap, 1e-3);
    EXPECT_NEAR(r.value, capa3_recursion(pruned.tree, theta), 1e-3);
  }
}

TEST(Capa3, RegularTreeFlowIsUniform) {
  const auto tree = fixtures::regular_tree(3, 5);
  const auto r = capa3_solve(tree, 0.5);
  EXPECT_NEAR(r.value, capa3_recursion(tree, 0.5), 1e-3);
  // Uniform flow splitting gives capacity S^{-1/2} exactly on a regular tree.
  const auto s = s_t_sum(regular_profile(3, 5), 0.5);
  EXPECT_NEAR(capa3_recursion(tree, 0.5), 1.0 / std::sqrt(s.back()), 1e-12);
}

TEST(Capa3, BoundedByInverseRootS) {
  const UmgwSampler sampler(P34);
  const double theta = 1.0 / branching_number(P34);
  Rng rng(14);
  for (int rep = 0; rep < 10; ++rep) {
    const int t = 3 + static_cast<int>(rng.below(4));
    const auto pruned = prune_to_rays(sampler(t, rng), t);
    const auto r = capa3_solve(pruned.tree, theta);
    const auto s = s_t_sum(level_sizes(pruned.tree), theta);
    EXPECT_LE(r.value, 1.0 / std::sqrt(s.back()) + 1e-9);
  }
}

TEST(Capa3, LargeTreeConvergesWithinTolerance) {
  const UmgwSampler sampler(P34);
  Rng rng(15);
  const auto pruned = prune_to_rays(sampler(10, rng), 10);
  Capa3Options opt;
  opt.tol = 1e-9;
  const auto r = capa3_solve(pruned.tree, 1.0 / branching_number(P34), opt);
  EXPECT_LE(r.gap, 1e-9);
  EXPECT_NEAR(r.value, capa3_recursion(pruned.tree, 1.0 / branching_number(P34)), 1e-9);
}

TEST(Capa3, RejectsMixedLeafDepths) {
  const std::vector<Edge> e{{0, 1}, {1, 2}, {0, 3}};
  EXPECT_THROW(capa3_solve(RootedGraph::from_edges(4, e), 0.5), graph_error);
  EXPECT_THROW(capa3_solve(fixtures::path(3), 0.0), std::invalid_argument);
}

TEST(Capa3, FlowCsv) {
  const auto r = capa3_solve(fixtures::path(2), 0.5);
  std::ostringstream os;
  write_flow_csv(os, fixtures::path(2), r);
  EXPECT_EQ(os.str().substr(0, 37), "child,parent,depth,flow,resistance\n1,");
}

TEST(Envelope, KappaZeroAndSmallFields) {
  for (double theta : {0.2, 0.5, 0.9}) {
    EXPECT_LE(f_envelope_check(theta, 0.0), 0.0);
    // f(h) / (theta h) -> 1 as h -> 0, so the supremum approaches 0 from below.
    EXPECT_GT(f_envelope_check(theta, 0.0, 1e-4, 10), -1e-6);
  }
}

TEST(Envelope, MaximalKappa) {
  const double theta = 0.5;
  const double kmax = max_admissible_kappa(theta);
  EXPECT_GT(kmax, 0.0);
  EXPECT_LE(f_envelope_check(theta, kmax), 1e-15);
  EXPECT_GT(f_envelope_check(theta, 1.05 * kmax), 0.0);
  EXPECT_THROW(f_envelope_check(1.0, 0.1), std::invalid_argument);
}
