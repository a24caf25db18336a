#pragma once

// Configuration-model graphs and unimodular multi-type Galton-Watson trees.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "graph.hpp"
#include "offspring.hpp"
#include "random.hpp"

namespace treeising {

/// Where padding half-edges (added to equalize (i,j)/(j,i) counts) attach.
enum class PaddingPolicy {
  UniformExisting,  ///< a uniformly chosen existing permanent vertex of the right type
  FreshVertex,      ///< a new permanent vertex carrying just that half-edge
};

struct ConfigModelOptions {
  PaddingPolicy padding = PaddingPolicy::UniformExisting;
};

struct ConfigModelSample {
  RootedGraph graph;
  std::vector<int> star;         ///< per vertex: index into law.P[type], or -1 for fresh padding vertices
  std::size_t padding = 0;       ///< half-edges added to balance directed counts
  std::size_t discarded = 0;     ///< (i,i) half-edges left unmatched by odd parity
};

/// Builds floor(n theta(i) P_i(k)) typed stars, pads directed half-edge
/// counts, then matches (i,j) half-edges uniformly with (j,i) half-edges.
inline ConfigModelSample config_model_sample(const OffspringLaw& law, std::size_t n, Rng& rng,
                                             const ConfigModelOptions& options = {}) {
  law.validate();
  if (n == 0) throw law_error("config_model_sample: n must be positive");
  const std::size_t q = law.type_count();
  ConfigModelSample out;
  std::vector<int> types;
  // half[i][j]: permanent endpoints of (i,j) half-edges.
  std::vector<std::vector<std::vector<Vertex>>> half(q, std::vector<std::vector<Vertex>>(q));
  std::vector<std::vector<Vertex>> of_type(q);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t s = 0; s < law.P[i].size(); ++s) {
      const auto& [k, p] = law.P[i][s];
      const auto count = static_cast<std::size_t>(std::floor(static_cast<double>(n) * law.theta[i] * p + 1e-9));
      for (std::size_t c = 0; c < count; ++c) {
        const auto v = static_cast<Vertex>(types.size());
        types.push_back(static_cast<int>(i));
        out.star.push_back(static_cast<int>(s));
        of_type[i].push_back(v);
        for (std::size_t j = 0; j < q; ++j)
          for (int e = 0; e < k[j]; ++e) half[i][j].push_back(v);
      }
    }
  if (types.empty()) throw law_error("config_model_sample: no stars at n = " + std::to_string(n) + " (infeasible type counts)");

  auto pad = [&](std::size_t i, std::size_t j, std::size_t deficit) {
    for (std::size_t d = 0; d < deficit; ++d) {
      Vertex v = 0;
      if (options.padding == PaddingPolicy::UniformExisting) {
        if (of_type[i].empty())
          throw law_error("config_model_sample: padding needs a vertex of type " + std::to_string(i) + " but none exists");
        v = of_type[i][rng.below(of_type[i].size())];
      } else {
        v = static_cast<Vertex>(types.size());
        types.push_back(static_cast<int>(i));
        out.star.push_back(-1);
        of_type[i].push_back(v);
      }
      half[i][j].push_back(v);
      ++out.padding;
    }
  };
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = i + 1; j < q; ++j) {
      const std::size_t a = half[i][j].size(), b = half[j][i].size();
      if (a < b) pad(i, j, b - a);
      else if (b < a) pad(j, i, a - b);
    }

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < q; ++i) {
    auto& self = half[i][i];
    shuffle(std::span<Vertex>(self), rng);
    for (std::size_t e = 0; e + 1 < self.size(); e += 2) edges.emplace_back(self[e], self[e + 1]);
    out.discarded += self.size() % 2;
    for (std::size_t j = i + 1; j < q; ++j) {
      auto& left = half[i][j];
      auto& right = half[j][i];
      shuffle(std::span<Vertex>(right), rng);
      for (std::size_t e = 0; e < left.size(); ++e) edges.emplace_back(left[e], right[e]);
    }
  }
  const std::size_t nv = types.size();
  out.graph = q > 1 ? RootedGraph::from_edges(nv, edges, 0, std::move(types)) : RootedGraph::from_edges(nv, edges, 0);
  return out;
}

/// Redraws config_model_sample until the multigraph has no loops or
/// multi-edges (the uniform simple graph with the same star counts).
inline ConfigModelSample config_model_sample_simple(const OffspringLaw& law, std::size_t n, Rng& rng,
                                                    const ConfigModelOptions& options = {},
                                                    std::size_t max_attempts = 10000,
                                                    std::size_t* attempts = nullptr) {
  for (std::size_t a = 1; a <= max_attempts; ++a) {
    auto s = config_model_sample(law, n, rng, options);
    if (s.graph.loop_count() == 0 && s.graph.multi_edge_count() == 0) {
      if (attempts) *attempts = a;
      return s;
    }
  }
  throw law_error("config_model_sample_simple: no simple graph within " + std::to_string(max_attempts) + " attempts");
}

/// Removes loops and collapses parallel edges; reports how many were removed.
struct ErasedGraph {
  RootedGraph graph;
  std::size_t loops_removed = 0;
  std::size_t multi_edges_removed = 0;
};

inline ErasedGraph erase_loops_and_multi_edges(const RootedGraph& g) {
  ErasedGraph out;
  std::vector<Edge> kept;
  Edge prev{static_cast<Vertex>(-1), static_cast<Vertex>(-1)};
  for (const auto& e : g.edges()) {
    if (e.first == e.second) {
      ++out.loops_removed;
      continue;
    }
    if (e == prev) {
      ++out.multi_edges_removed;
      continue;
    }
    kept.push_back(e);
    prev = e;
  }
  std::optional<std::vector<int>> types;
  if (g.typed()) types = g.types();
  out.graph = RootedGraph::from_edges(g.size(), kept, g.root(), std::move(types));
  return out;
}

/// Draws depth-truncated UMGW trees: root type ~ theta, root offspring ~ P,
/// later vertices of type i with parent type j reproduce by rho_{i,j}.
class UmgwSampler {
 public:
  explicit UmgwSampler(OffspringLaw law) : law_(std::move(law)), kernel_(size_bias(law_)) {
    law_.validate();
    root_type_ = DiscreteSampler(law_.theta);
    for (const auto& row : law_.P) {
      std::vector<double> w;
      for (const auto& wc : row) w.push_back(wc.prob);
      root_offspring_.emplace_back(w);
    }
    for (const auto& dist : kernel_.rho) {
      std::vector<double> w;
      for (const auto& wc : dist) w.push_back(wc.prob);
      offspring_.emplace_back(w);
    }
  }

  const OffspringLaw& law() const noexcept { return law_; }
  const SizeBiasedKernel& kernel() const noexcept { return kernel_; }

  RootedGraph operator()(int depth, Rng& rng) const {
    if (depth < 0) throw std::invalid_argument("umgw_sample: negative depth");
    const bool typed = law_.type_count() > 1;
    std::vector<int> types{static_cast<int>(root_type_(rng))};
    std::vector<int> level{0};
    std::vector<Vertex> parent{0};
    std::vector<Edge> edges;
    for (std::size_t v = 0; v < types.size(); ++v) {
      if (level[v] >= depth) continue;
      const CountVector* k = nullptr;
      const int ti = types[v];
      if (v == 0) {
        k = &law_.P[static_cast<std::size_t>(ti)][root_offspring_[static_cast<std::size_t>(ti)](rng)].k;
      } else {
        const int idx = kernel_.pair_index[static_cast<std::size_t>(ti)][static_cast<std::size_t>(types[parent[v]])];
        k = &kernel_.rho[static_cast<std::size_t>(idx)][offspring_[static_cast<std::size_t>(idx)](rng)].k;
      }
      for (std::size_t j = 0; j < k->size(); ++j)
        for (int c = 0; c < (*k)[j]; ++c) {
          const auto w = static_cast<Vertex>(types.size());
          types.push_back(static_cast<int>(j));
          level.push_back(level[v] + 1);
          parent.push_back(static_cast<Vertex>(v));
          edges.emplace_back(static_cast<Vertex>(v), w);
        }
    }
    const std::size_t n = types.size();
    if (typed) return RootedGraph::from_edges(n, edges, 0, std::move(types));
    return RootedGraph::from_edges(n, edges, 0);
  }

 private:
  OffspringLaw law_;
  SizeBiasedKernel kernel_;
  DiscreteSampler root_type_;
  std::vector<DiscreteSampler> root_offspring_;
  std::vector<DiscreteSampler> offspring_;
};

inline RootedGraph umgw_sample(const OffspringLaw& law, int depth, Rng& rng) { return UmgwSampler(law)(depth, rng); }

/// Generation sizes |dT(k)|, k = 0..depth, of a rooted tree.
inline std::vector<std::size_t> generation_sizes(const RootedGraph& tree) {
  const auto dist = bfs_distances(tree, tree.root());
  std::vector<std::size_t> sizes;
  for (int d : dist) {
    if (d < 0) continue;
    if (static_cast<std::size_t>(d) >= sizes.size()) sizes.resize(static_cast<std::size_t>(d) + 1, 0);
    ++sizes[static_cast<std::size_t>(d)];
  }
  return sizes;
}

/// For single-type laws with one-point support the UMGW tree is spherically
/// symmetric: children per vertex at level 0, 1, ..., depth-1.
inline std::optional<std::vector<int>> deterministic_profile(const OffspringLaw& law, int depth) {
  if (!law.deterministic()) return std::nullopt;
  int root_children = 0;
  for (const auto& [k, p] : law.P[0])
    if (p > 0) root_children = k[0];
  std::vector<int> profile;
  for (int d = 0; d < depth; ++d) profile.push_back(d == 0 ? root_children : std::max(root_children - 1, 0));
  return profile;
}

}  // namespace treeising
