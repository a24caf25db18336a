#pragma once

// Small graph builders shared by the test binaries.

#include <vector>

#include <treeising/graph.hpp>
#include <treeising/random.hpp>

namespace fixtures {

using treeising::Edge;
using treeising::RootedGraph;
using treeising::Vertex;

inline RootedGraph path(std::size_t n, Vertex root = 0) {
  std::vector<Edge> e;
  for (Vertex i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return RootedGraph::from_edges(n, e, root);
}

inline RootedGraph cycle(std::size_t n) {
  std::vector<Edge> e;
  for (Vertex i = 0; i < n; ++i) e.emplace_back(i, static_cast<Vertex>((i + 1) % n));
  return RootedGraph::from_edges(n, e);
}

inline RootedGraph complete(std::size_t n) {
  std::vector<Edge> e;
  for (Vertex a = 0; a < n; ++a)
    for (Vertex b = a + 1; b < n; ++b) e.emplace_back(a, b);
  return RootedGraph::from_edges(n, e);
}

inline RootedGraph star(std::size_t leaves) {
  std::vector<Edge> e;
  for (Vertex v = 1; v <= leaves; ++v) e.emplace_back(0, v);
  return RootedGraph::from_edges(leaves + 1, e);
}

/// Uniform attachment tree rooted at 0.
inline RootedGraph random_tree(std::size_t n, treeising::Rng& rng) {
  std::vector<Edge> e;
  for (Vertex v = 1; v < n; ++v) e.emplace_back(static_cast<Vertex>(rng.below(v)), v);
  return RootedGraph::from_edges(n, e);
}

/// Depth-t ball of the k-regular tree (root has k children, others k - 1).
inline RootedGraph regular_tree(int k, int depth) {
  std::vector<Edge> e;
  std::vector<Vertex> level{0};
  Vertex next = 1;
  for (int d = 0; d < depth; ++d) {
    std::vector<Vertex> nl;
    for (Vertex v : level) {
      const int c = d == 0 ? k : k - 1;
      for (int j = 0; j < c; ++j) {
        e.emplace_back(v, next);
        nl.push_back(next++);
      }
    }
    level = std::move(nl);
  }
  return RootedGraph::from_edges(next, e);
}

}  // namespace fixtures
