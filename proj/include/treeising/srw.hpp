#pragma once

// Continuous-time simple random walk occupation weights and the y / J / A / F
// functionals built from them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "graph.hpp"
#include "ising.hpp"
#include "limits.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace treeising {

inline constexpr int kInfiniteRadius = -1;

/// a_{i,j} = (1/l) int_0^l P_i(X_s = j, s <= theta_r) ds for the edge-rate-1
/// walk killed on leaving B_i(r).
struct OccupationWeights {
  Vertex center = 0;
  double l = 0.0;
  int r = kInfiniteRadius;
  std::vector<Vertex> vertices;  ///< B_i(r), center first
  std::vector<double> weight;    ///< indexed by graph vertex, zero outside the ball

  double total() const {
    double s = 0.0;
    for (Vertex v : vertices) s += weight[v];
    return s;
  }
  double operator[](Vertex j) const { return weight.at(j); }
};

/// w_k = P(N > k) / mu for N ~ Poisson(mu), k = 0, 1, ...; the series is cut
/// where the neglected mass is far below 1e-12.
inline std::vector<double> uniformization_weights(double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("uniformization_weights: mu must be positive");
  const auto kmax = static_cast<std::size_t>(std::ceil(mu + 12.0 * std::sqrt(mu) + 40.0));
  std::vector<double> pmf(kmax + 2);
  const double lmu = std::log(mu);
  for (std::size_t k = 0; k < pmf.size(); ++k)
    pmf[k] = std::exp(-mu + static_cast<double>(k) * lmu - std::lgamma(static_cast<double>(k) + 1.0));
  // Tail sums from the top keep small survival probabilities accurate.
  std::vector<double> w(kmax + 1);
  double tail = pmf[kmax + 1];
  for (std::size_t k = kmax + 1; k-- > 0;) {
    w[k] = tail / mu;
    tail += pmf[k];
  }
  if (mu < 1e-3) w[0] = -std::expm1(-mu) / mu;
  while (w.size() > 1 && w.back() < 1e-300) w.pop_back();
  return w;
}

inline OccupationWeights occupation_weights(const RootedGraph& g, Vertex i, double l, int r = kInfiniteRadius) {
  if (!(l > 0.0)) throw std::invalid_argument("occupation_weights: l must be positive");
  if (i >= g.size()) throw graph_error("occupation_weights: center out of range");
  OccupationWeights out;
  out.center = i;
  out.l = l;
  out.r = r;
  out.weight.assign(g.size(), 0.0);
  const auto dist = bfs_distances(g, i, r);
  out.vertices.push_back(i);
  for (Vertex v = 0; v < g.size(); ++v)
    if (v != i && dist[v] >= 0 && (r < 0 || dist[v] <= r)) out.vertices.push_back(v);
  const std::size_t m = out.vertices.size();
  std::vector<int> local(g.size(), -1);
  for (std::size_t a = 0; a < m; ++a) local[out.vertices[a]] = static_cast<int>(a);

  double lambda = 0.0;
  for (Vertex v : out.vertices) lambda = std::max(lambda, static_cast<double>(g.degree(v)));
  if (lambda == 0.0) {
    out.weight[i] = 1.0;
    return out;
  }
  std::vector<double> stay(m);
  for (std::size_t a = 0; a < m; ++a) stay[a] = 1.0 - static_cast<double>(g.degree(out.vertices[a])) / lambda;

  const auto w = uniformization_weights(lambda * l);
  std::vector<double> pi(m, 0.0), next(m), acc(m, 0.0);
  pi[0] = 1.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    for (std::size_t a = 0; a < m; ++a) acc[a] += w[k] * pi[a];
    if (k + 1 == w.size()) break;
    for (std::size_t a = 0; a < m; ++a) next[a] = stay[a] * pi[a];
    for (std::size_t a = 0; a < m; ++a) {
      if (pi[a] == 0.0) continue;
      const double share = pi[a] / lambda;
      for (Vertex u : g.neighbors(out.vertices[a]))
        if (local[u] >= 0) next[static_cast<std::size_t>(local[u])] += share;
    }
    std::swap(pi, next);
  }
  for (std::size_t a = 0; a < m; ++a) out.weight[out.vertices[a]] = acc[a];
  return out;
}

/// Unkilled weights from every center.
inline std::vector<OccupationWeights> occupation_matrix(const RootedGraph& g, double l) {
  std::vector<OccupationWeights> rows(g.size());
  parallel_for(g.size(), [&](std::size_t i) { rows[i] = occupation_weights(g, static_cast<Vertex>(i), l); });
  return rows;
}

/// y_i = sum_j x_j a_{i,j}.
inline double y_weighted_average(const OccupationWeights& a, const SpinConfig& x) {
  if (x.size() != a.weight.size()) throw std::invalid_argument("y_weighted_average: config size mismatch");
  double y = 0.0;
  for (Vertex v : a.vertices) y += x[v] * a.weight[v];
  return y;
}

/// Magnetizations of the Ising measure on B_i(t) with every vertex outside
/// the ball clamped to +1 (outside entries are 1). Tree-shaped windows use
/// messages, other windows brute force up to kMaxEnumeration vertices.
inline std::vector<double> plus_window_magnetizations(const RootedGraph& g, Vertex i, int t, double beta) {
  const auto bv = ball(g, i, t);
  std::vector<double> fields(bv.graph.size());
  for (Vertex u = 0; u < fields.size(); ++u)
    fields[u] = beta * static_cast<double>(g.degree(bv.to_parent[u]) - bv.graph.degree(u));
  std::vector<double> local;
  if (bv.graph.is_tree()) {
    local = tree_messages(bv.graph, beta, fields).magnetizations();
  } else if (bv.graph.size() <= kMaxEnumeration) {
    local = brute_force_measure(IsingSpec(bv.graph, beta, fields)).magnetization;
  } else {
    throw ising_error("plus_window_magnetizations: window is neither a tree nor small enough to enumerate");
  }
  std::vector<double> m(g.size(), 1.0);
  for (Vertex u = 0; u < local.size(); ++u) m[bv.to_parent[u]] = local[u];
  return m;
}

struct JAF {
  int J = 0, A = 0, F = 0;
  double y = 0.0;
  double plus_mean = 0.0;  ///< nu_{+,B_i(t)} <y_i>
};

/// J = 1{y <= -eta}, A = 1{|E_plus y| >= 2 eta}, F = J A.
inline JAF functionals_JAF(const OccupationWeights& a, const SpinConfig& x, double eta,
                           std::span<const double> window_magnetization) {
  if (window_magnetization.size() != a.weight.size())
    throw std::invalid_argument("functionals_JAF: magnetization size mismatch");
  JAF out;
  out.y = y_weighted_average(a, x);
  for (Vertex v : a.vertices) out.plus_mean += window_magnetization[v] * a.weight[v];
  out.J = out.y <= -eta ? 1 : 0;
  out.A = std::abs(out.plus_mean) >= 2.0 * eta ? 1 : 0;
  out.F = out.J * out.A;
  return out;
}

/// Fraction of vertices with y_i > -eta, given precomputed unkilled weights.
inline double u_n_small_check(std::span<const OccupationWeights> rows, const SpinConfig& x, double eta) {
  long sum = 0;
  for (auto s : x) sum += s;
  if (sum < 0) throw std::invalid_argument("u_n_small_check: requires sum of spins >= 0");
  if (rows.size() != x.size()) throw std::invalid_argument("u_n_small_check: one row per vertex required");
  for (const auto& row : rows)
    if (row.r != kInfiniteRadius) throw std::invalid_argument("u_n_small_check: weights must be unkilled");
  std::size_t good = 0;
  for (const auto& row : rows) good += y_weighted_average(row, x) > -eta;
  return static_cast<double>(good) / static_cast<double>(rows.size());
}

inline double u_n_small_check(const RootedGraph& g, const SpinConfig& x, double l, double eta) {
  const auto rows = occupation_matrix(g, l);
  return u_n_small_check(rows, x, eta);
}

/// rho_o^{l,T}: occupation-weighted plus-boundary magnetizations of the tree
/// whose depth-t frontier is clamped plus.
inline double rho_l(const RootedGraph& tree, double beta, double l, int t_depth, double B = 0.0) {
  const auto m = boundary_messages(tree, beta, t_depth, B, Boundary::Plus).magnetizations();
  const auto a = occupation_weights(tree, tree.root(), l);
  double rho = 0.0;
  for (Vertex v : a.vertices) rho += a.weight[v] * m[v];
  return rho;
}

struct TauSamples {
  std::vector<double> tau;   ///< time of the r-th jump
  std::vector<double> exit;  ///< exit time from B_i(r), +inf if later than the horizon
  Estimate tau_mean;
  Estimate killed_mass;      ///< E[(1 - exit / l)^+]
};

/// Simulates the jump chain with Exp(1)/degree holding times.
inline TauSamples tau_r_simulate(const RootedGraph& g, Vertex i, int r, std::size_t n_trials, std::uint64_t seed,
                                 double horizon) {
  if (r < 0) throw std::invalid_argument("tau_r_simulate: r must be non-negative");
  if (!(horizon > 0.0)) throw std::invalid_argument("tau_r_simulate: horizon must be positive");
  const auto dist = bfs_distances(g, i);
  TauSamples out;
  out.tau.assign(n_trials, kInf);
  out.exit.assign(n_trials, kInf);
  parallel_for(n_trials, [&](std::size_t trial) {
    Rng rng = Rng::stream(seed, trial);
    Vertex pos = i;
    double time = 0.0;
    int jumps = 0;
    if (r == 0) out.tau[trial] = 0.0;
    while (true) {
      const std::size_t deg = g.degree(pos);
      if (deg == 0) break;
      time += rng.exponential() / static_cast<double>(deg);
      pos = g.neighbors(pos)[rng.below(deg)];
      ++jumps;
      if (jumps == r) out.tau[trial] = time;
      if (time <= horizon && std::isinf(out.exit[trial]) && dist[pos] > r) out.exit[trial] = time;
      if (jumps >= r && (time > horizon || !std::isinf(out.exit[trial]))) break;
    }
  });
  std::vector<double> killed(n_trials);
  for (std::size_t k = 0; k < n_trials; ++k) killed[k] = std::max(0.0, 1.0 - out.exit[k] / horizon);
  out.tau_mean = summarize(out.tau);
  out.killed_mass = summarize(killed);
  return out;
}

}  // namespace treeising
