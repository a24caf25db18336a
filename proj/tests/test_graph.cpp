#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include <treeising/ensembles.hpp>
#include <treeising/graph.hpp>
#include <treeising/random.hpp>

using namespace treeising;

namespace {

RootedGraph path(std::size_t n, Vertex root = 0) {
  std::vector<Edge> e;
  for (Vertex i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return RootedGraph::from_edges(n, e, root);
}

RootedGraph cycle(std::size_t n) {
  std::vector<Edge> e;
  for (Vertex i = 0; i < n; ++i) e.emplace_back(i, static_cast<Vertex>((i + 1) % n));
  return RootedGraph::from_edges(n, e);
}

RootedGraph random_tree(std::size_t n, Rng& rng) {
  std::vector<Edge> e;
  for (Vertex v = 1; v < n; ++v) e.emplace_back(static_cast<Vertex>(rng.below(v)), v);
  return RootedGraph::from_edges(n, e);
}

RootedGraph relabel(const RootedGraph& g, const std::vector<Vertex>& perm) {
  std::vector<Edge> e;
  for (const auto& [a, b] : g.edges()) e.emplace_back(perm[a], perm[b]);
  return RootedGraph::from_edges(g.size(), e, perm[g.root()]);
}

std::vector<Vertex> random_perm(std::size_t n, Rng& rng) {
  std::vector<Vertex> p(n);
  std::iota(p.begin(), p.end(), 0);
  shuffle(std::span<Vertex>(p), rng);
  return p;
}

}  // namespace

TEST(RootedGraph, AdjacencySymmetricWithLoopsAndMultiEdges) {
  const std::vector<Edge> e{{0, 1}, {0, 1}, {1, 1}, {1, 2}};
  const auto g = RootedGraph::from_edges(3, e);
  EXPECT_EQ(g.degree(0), 2u);
  EXPECT_EQ(g.degree(1), 5u);
  EXPECT_EQ(g.loop_count(), 1u);
  EXPECT_EQ(g.multi_edge_count(), 1u);
  for (Vertex v = 0; v < 3; ++v)
    for (Vertex w : g.neighbors(v)) {
      const auto nv = std::count(g.neighbors(v).begin(), g.neighbors(v).end(), w);
      const auto nw = std::count(g.neighbors(w).begin(), g.neighbors(w).end(), v);
      EXPECT_EQ(nv, nw);
    }
}

TEST(RootedGraph, RejectsOutOfRange) {
  const std::vector<Edge> e{{0, 3}};
  EXPECT_THROW(RootedGraph::from_edges(3, e), graph_error);
  EXPECT_THROW(RootedGraph::from_edges(3, {}, 5), graph_error);
  EXPECT_THROW(RootedGraph::from_edges(2, {}, 0, std::vector<int>{0}), graph_error);
  EXPECT_THROW(RootedNetwork(path(2), SpinConfig{1}), graph_error);
  EXPECT_THROW(RootedNetwork(path(2), SpinConfig{1, 0}), graph_error);
}

TEST(Ball, PathRadiusOne) {
  const auto b = ball(path(3), 0, 1);
  EXPECT_EQ(b.graph.size(), 2u);
  EXPECT_EQ(b.graph.edge_count(), 1u);
  EXPECT_EQ(b.to_parent[0], 0u);
}

TEST(Ball, RadiusZero) {
  const auto b = ball(cycle(5), 3, 0);
  EXPECT_EQ(b.graph.size(), 1u);
  EXPECT_EQ(b.graph.edge_count(), 0u);
  EXPECT_EQ(b.to_parent[0], 3u);
}

TEST(Ball, RegularTreeCounts) {
  const auto law = OffspringLaw::single_type({{3, 1.0}});
  Rng rng(1);
  const auto tree = umgw_sample(law, 3, rng);
  EXPECT_EQ(ball(tree, tree.root(), 2).graph.size(), 10u);
  EXPECT_EQ(tree.size(), 22u);
}

TEST(Ball, OutOfRange) {
  EXPECT_THROW(ball(path(3), 7, 1), graph_error);
  EXPECT_THROW(ball(path(3), 0, -1), graph_error);
}

TEST(Ball, ContainsExactlyVerticesWithinRadius) {
  Rng rng(5);
  const auto law = OffspringLaw::single_type({{3, 1.0}});
  const auto g = config_model_sample(law, 60, rng).graph;
  for (Vertex v = 0; v < 10; ++v)
    for (int t = 0; t <= 3; ++t) {
      const auto b = ball(g, v, t);
      const auto d = bfs_distances(g, v);
      std::size_t inside = 0;
      for (int x : d) inside += (x >= 0 && x <= t);
      EXPECT_EQ(b.graph.size(), inside);
      for (std::size_t u = 0; u < b.to_parent.size(); ++u) EXPECT_LE(d[b.to_parent[u]], t);
      std::size_t internal = 0;
      for (const auto& [a, c] : g.edges())
        if (d[a] >= 0 && d[a] <= t && d[c] >= 0 && d[c] <= t) ++internal;
      EXPECT_EQ(b.graph.edge_count(), internal);
    }
}

TEST(Ball, NestedRadiiAgree) {
  Rng rng(7);
  for (int rep = 0; rep < 30; ++rep) {
    const auto g = random_tree(25, rng);
    const Vertex v = static_cast<Vertex>(rng.below(25));
    for (int t = 0; t < 4; ++t) {
      const auto big = ball(g, v, t + 1);
      const auto small = ball(big.graph, 0, t);
      EXPECT_EQ(canonical_code(small.graph), canonical_code(ball(g, v, t).graph));
    }
  }
}

TEST(CanonicalCode, RelabeledPathsAgree) {
  const auto p = path(4, 1);
  const auto q = relabel(p, {3, 0, 2, 1});
  EXPECT_EQ(canonical_code(p), canonical_code(q));
}

TEST(CanonicalCode, RootPlacementMatters) {
  const auto end_rooted = path(3, 0);
  const auto mid_rooted = path(3, 1);
  const std::vector<Edge> star_edges{{0, 1}, {0, 2}};
  const auto star = RootedGraph::from_edges(3, star_edges, 0);
  EXPECT_NE(canonical_code(end_rooted), canonical_code(star));
  EXPECT_EQ(canonical_code(mid_rooted), canonical_code(star));
}

TEST(CanonicalCode, FourRootedTreesOnFourVertices) {
  const std::vector<Edge> p4{{0, 1}, {1, 2}, {2, 3}};
  const std::vector<Edge> star{{0, 1}, {0, 2}, {0, 3}};
  std::set<std::string> codes;
  for (Vertex r = 0; r < 4; ++r) {
    codes.insert(canonical_code(RootedGraph::from_edges(4, p4, r)));
    codes.insert(canonical_code(RootedGraph::from_edges(4, star, r)));
  }
  EXPECT_EQ(codes.size(), 4u);
}

TEST(CanonicalCode, RandomRelabelingsAgree) {
  Rng rng(11);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 2 + rng.below(30);
    auto g = random_tree(n, rng).rerooted(static_cast<Vertex>(rng.below(n)));
    EXPECT_EQ(canonical_code(g), canonical_code(relabel(g, random_perm(n, rng))));
  }
}

TEST(CanonicalCode, DistinguishesDifferentDegreeProfiles) {
  Rng rng(12);
  int compared = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 2 + rng.below(12);
    const auto a = random_tree(n, rng);
    const auto b = random_tree(n, rng);
    auto profile = [](const RootedGraph& g) {
      const auto d = bfs_distances(g, g.root());
      std::vector<std::pair<int, std::size_t>> p;
      for (Vertex v = 0; v < g.size(); ++v) p.emplace_back(d[v], g.degree(v));
      std::sort(p.begin(), p.end());
      return p;
    };
    if (profile(a) != profile(b)) {
      ++compared;
      EXPECT_NE(canonical_code(a), canonical_code(b));
    }
  }
  EXPECT_GT(compared, 100);
}

TEST(CanonicalCode, SmallNonTreeGraphs) {
  Rng rng(13);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 3 + rng.below(6);
    std::vector<Edge> e;
    for (int k = 0; k < static_cast<int>(n) + 2; ++k)
      e.emplace_back(static_cast<Vertex>(rng.below(n)), static_cast<Vertex>(rng.below(n)));
    const auto g = RootedGraph::from_edges(n, e, static_cast<Vertex>(rng.below(n)));
    SpinConfig marks(n);
    for (auto& m : marks) m = rng.coin() ? 1 : -1;
    const auto perm = random_perm(n, rng);
    const auto h = relabel(g, perm);
    SpinConfig hm(n);
    for (Vertex v = 0; v < n; ++v) hm[perm[v]] = marks[v];
    EXPECT_EQ(canonical_code(g, &marks), canonical_code(h, &hm));
  }
  // Triangle rooted anywhere vs path of three: differ.
  EXPECT_NE(canonical_code(cycle(3)), canonical_code(path(3, 1)));
  // Root on the triangle vs root on the pendant vertex.
  const std::vector<Edge> lollipop{{0, 1}, {1, 2}, {2, 0}, {2, 3}};
  EXPECT_NE(canonical_code(RootedGraph::from_edges(4, lollipop, 0)), canonical_code(RootedGraph::from_edges(4, lollipop, 3)));
  EXPECT_EQ(canonical_code(RootedGraph::from_edges(4, lollipop, 0)), canonical_code(RootedGraph::from_edges(4, lollipop, 1)));
}

TEST(CanonicalCode, MarksAndTypesDistinguish) {
  const auto p = path(2);
  SpinConfig a{1, -1}, b{-1, 1};
  EXPECT_NE(canonical_code(p, &a), canonical_code(p, &b));
  const std::vector<Edge> e{{0, 1}};
  EXPECT_NE(canonical_code(RootedGraph::from_edges(2, e, 0, std::vector<int>{0, 1})),
            canonical_code(RootedGraph::from_edges(2, e, 0, std::vector<int>{1, 0})));
  EXPECT_EQ(canonical_code(RootedNetwork(p, a)), canonical_code(p, &a));
}

TEST(CanonicalCode, SizeGuard) {
  EXPECT_THROW(canonical_code(cycle(13)), graph_error);
  EXPECT_NO_THROW(canonical_code(cycle(12)));
  EXPECT_NO_THROW(canonical_code(path(200)));
}

TEST(UniformSparseness, Examples) {
  const auto law = OffspringLaw::single_type({{3, 1.0}});
  Rng rng(3);
  const auto g = config_model_sample(law, 100, rng).graph;
  EXPECT_DOUBLE_EQ(uniform_sparseness_stat(g, 4), 0.0);
  EXPECT_DOUBLE_EQ(uniform_sparseness_stat(g, 0), 3.0);
  const std::vector<Edge> star{{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}};
  EXPECT_DOUBLE_EQ(uniform_sparseness_stat(RootedGraph::from_edges(6, star), 5), 5.0 / 6.0);
}

TEST(EmpiricalBallLaw, Cycle) {
  const auto law = empirical_ball_law(cycle(6), 1);
  ASSERT_EQ(law.size(), 1u);
  EXPECT_DOUBLE_EQ(law.begin()->second, 1.0);
  EXPECT_EQ(law.begin()->first, canonical_code(path(3, 1)));
}

TEST(EmpiricalBallLaw, Path) {
  const auto law = empirical_ball_law(path(3), 1);
  ASSERT_EQ(law.size(), 2u);
  EXPECT_NEAR(law.at(canonical_code(path(2, 0))), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(law.at(canonical_code(path(3, 1))), 1.0 / 3.0, 1e-15);
}

TEST(EmpiricalBallLaw, ConfigurationModelIsLocallyTreeLike) {
  const auto law3 = OffspringLaw::single_type({{3, 1.0}});
  Rng rng(17);
  const auto g = config_model_sample(law3, 10000, rng).graph;
  const auto law = empirical_ball_law(g, 2);
  const auto t3 = umgw_sample(law3, 2, rng);
  double sum = 0.0;
  for (const auto& [c, p] : law) sum += p;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_GE(law.at(canonical_code(t3)), 0.9);
}

TEST(TotalVariation, Basic) {
  BallLaw p{{"a", 0.5}, {"b", 0.5}};
  BallLaw q{{"a", 0.25}, {"c", 0.75}};
  EXPECT_DOUBLE_EQ(total_variation(p, q), 0.75);
  EXPECT_DOUBLE_EQ(total_variation(p, p), 0.0);
}

TEST(GraphIo, RoundTrip) {
  const std::vector<Edge> e{{0, 1}, {0, 1}, {2, 2}, {1, 3}};
  const auto g = RootedGraph::from_edges(4, e, 2, std::vector<int>{0, 1, 1, 0});
  std::stringstream ss;
  write_graph(ss, g);
  const auto h = read_graph(ss);
  EXPECT_TRUE(g == h);
  std::stringstream out;
  write_graph(out, h);
  std::stringstream again;
  write_graph(again, g);
  EXPECT_EQ(out.str(), again.str());
}

TEST(GraphIo, RejectsMalformed) {
  std::stringstream bad("3 1\n0 9\n");
  EXPECT_THROW(read_graph(bad), graph_error);
  std::stringstream short_edges("3 2\n0 1\n");
  EXPECT_THROW(read_graph(short_edges), graph_error);
}
