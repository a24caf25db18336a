#pragma once

// Heat-bath Glauber dynamics, sign-conditioned sampling of nu_{n,+}, and
// Monte Carlo estimators for edge correlations and ball spin laws.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "graph.hpp"
#include "ising.hpp"
#include "limits.hpp"
#include "random.hpp"

namespace treeising {

struct ChainState {
  const RootedGraph* graph = nullptr;
  double beta = 0.0;
  double B = 0.0;
  SpinConfig spins;
  std::uint64_t sweeps = 0;
  Rng rng;
  long magnetization = 0;  ///< sum of spins, maintained incrementally

  ChainState(const RootedGraph& g, double b, double field, Rng r, bool random_start = true)
      : graph(&g), beta(b), B(field), spins(g.size(), 1), rng(r) {
    if (beta < 0.0) throw ising_error("ChainState: beta must be non-negative");
    if (random_start)
      for (auto& s : spins) s = rng.coin() ? 1 : -1;
    magnetization = 0;
    for (auto s : spins) magnetization += s;
  }

  bool consistent() const {
    long m = 0;
    for (auto s : spins) m += s;
    return m == magnetization;
  }
};

/// n random-scan heat-bath updates. Self-loops do not enter the local field.
inline void glauber_sweep(ChainState& st) {
  const auto& g = *st.graph;
  const std::size_t n = g.size();
  for (std::size_t u = 0; u < n; ++u) {
    const auto i = static_cast<Vertex>(st.rng.below(n));
    int s = 0;
    for (Vertex j : g.neighbors(i))
      if (j != i) s += st.spins[j];
    const double p_plus = 1.0 / (1.0 + std::exp(-2.0 * (st.beta * s + st.B)));
    const std::int8_t x = st.rng.uniform() < p_plus ? 1 : -1;
    st.magnetization += x - st.spins[i];
    st.spins[i] = x;
  }
  ++st.sweeps;
}

/// Reverses every spin. nu_n is invariant under this move when B = 0.
inline void global_flip(ChainState& st) {
  for (auto& s : st.spins) s = static_cast<std::int8_t>(-s);
  st.magnetization = -st.magnetization;
}

/// s x with s = sign(sum x), or a fair coin when the sum is 0.
inline SpinConfig sample_conditioned_plus(const SpinConfig& x, long sum, Rng& rng) {
  int s = sum > 0 ? 1 : sum < 0 ? -1 : (rng.coin() ? 1 : -1);
  SpinConfig out(x);
  if (s < 0)
    for (auto& v : out) v = static_cast<std::int8_t>(-v);
  return out;
}

inline SpinConfig sample_conditioned_plus(ChainState& st) {
  if (st.B != 0.0) throw ising_error("sample_conditioned_plus: requires B = 0");
  return sample_conditioned_plus(st.spins, st.magnetization, st.rng);
}

enum class Sampler { Unconditioned, PlusConditioned };

struct ChainOptions {
  std::size_t burn_in = 200;
  std::size_t thin = 1;            ///< sweeps between recorded samples
  bool symmetrize = true;          ///< random global flip after each sweep (B = 0 only)
  std::size_t check_every = 1000;  ///< magnetization consistency spot check
};

/// Runs a chain and calls visit(x) on n_samples recorded configurations
/// (sign-conditioned if requested).
template <class Visit>
void run_chain(const RootedGraph& g, double beta, double B, Sampler sampler, std::size_t n_samples, Rng rng,
               const ChainOptions& opt, Visit&& visit) {
  if (sampler == Sampler::PlusConditioned && B != 0.0) throw ising_error("plus-conditioned sampler requires B = 0");
  ChainState st(g, beta, B, rng);
  const bool flip = opt.symmetrize && B == 0.0;
  auto advance = [&] {
    glauber_sweep(st);
    if (flip && st.rng.coin()) global_flip(st);
    if (opt.check_every && st.sweeps % opt.check_every == 0 && !st.consistent())
      throw std::logic_error("glauber: running magnetization drifted");
  };
  for (std::size_t s = 0; s < opt.burn_in; ++s) advance();
  for (std::size_t k = 0; k < n_samples; ++k) {
    for (std::size_t s = 0; s < std::max<std::size_t>(opt.thin, 1); ++s) advance();
    if (sampler == Sampler::PlusConditioned) visit(sample_conditioned_plus(st));
    else visit(st.spins);
  }
}

struct ChainEstimate {
  double mean = 0.0;
  double se = 0.0;       ///< batch means
  std::size_t samples = 0;
  double ess = 0.0;      ///< sample variance / se^2
};

/// Batch-means summary of a correlated series.
inline ChainEstimate batch_summary(std::span<const double> xs, std::size_t batches = 50) {
  ChainEstimate e;
  e.samples = xs.size();
  if (xs.empty()) return e;
  const auto s = summarize(xs);
  e.mean = s.mean;
  batches = std::min(batches, xs.size());
  const std::size_t len = xs.size() / batches;
  if (batches < 2 || len == 0) {
    e.se = s.se;
    e.ess = static_cast<double>(xs.size());
    return e;
  }
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double acc = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) acc += xs[i];
    means[b] = acc / static_cast<double>(len);
  }
  const auto bm = summarize(means);
  const double var = s.se * s.se * static_cast<double>(xs.size());
  e.se = std::max(bm.se, s.se);
  e.ess = e.se > 0.0 ? var / (e.se * e.se) : static_cast<double>(xs.size());
  return e;
}

/// Monte Carlo (1/n) sum over edges (loops included) of <x_i x_j>.
inline ChainEstimate edge_corr_avg(const RootedGraph& g, double beta, Sampler sampler, std::size_t n_samples,
                                   std::uint64_t seed, const ChainOptions& opt = {}, double B = 0.0) {
  const auto edges = g.edges();
  std::vector<double> series;
  series.reserve(n_samples);
  run_chain(g, beta, B, sampler, n_samples, Rng::stream(seed, 0), opt, [&](const SpinConfig& x) {
    long acc = 0;
    for (const auto& [a, b] : edges) acc += x[a] * x[b];
    series.push_back(static_cast<double>(acc) / static_cast<double>(g.size()));
  });
  return batch_summary(series);
}

/// Monte Carlo mean spin over all vertices.
inline ChainEstimate mean_spin(const RootedGraph& g, double beta, Sampler sampler, std::size_t n_samples, std::uint64_t seed,
                               const ChainOptions& opt = {}, double B = 0.0) {
  std::vector<double> series;
  series.reserve(n_samples);
  run_chain(g, beta, B, sampler, n_samples, Rng::stream(seed, 0), opt, [&](const SpinConfig& x) {
    long acc = 0;
    for (auto s : x) acc += s;
    series.push_back(static_cast<double>(acc) / static_cast<double>(g.size()));
  });
  return batch_summary(series);
}

// ---------------------------------------------------------------------------
// Ball spin laws.

struct BallMarginal {
  BallLaw law;                 ///< marked canonical code -> frequency
  double excluded_fraction = 0.0;  ///< non-tree balls
  std::size_t observations = 0;
};

namespace detail {
struct CachedBall {
  BallView view;
  bool tree = false;
};

inline std::vector<CachedBall> cache_balls(const RootedGraph& g, std::span<const Vertex> centers, int t) {
  std::vector<CachedBall> out;
  out.reserve(centers.size());
  for (Vertex v : centers) {
    CachedBall c{ball(g, v, t), false};
    c.tree = c.view.graph.is_tree();
    out.push_back(std::move(c));
  }
  return out;
}

inline std::string marked_code(const BallView& b, const SpinConfig& x) {
  SpinConfig marks(b.graph.size());
  for (Vertex u = 0; u < marks.size(); ++u) marks[u] = x[b.to_parent[u]];
  return canonical_code(b.graph, &marks);
}
}  // namespace detail

/// Joint empirical law of (ball shape, spins on the ball) at the given
/// centers (all vertices if empty), pooled over n_samples configurations.
inline BallMarginal ball_marginal_estimate(const RootedGraph& g, double beta, Sampler sampler, int t, std::size_t n_samples,
                                           std::uint64_t seed, std::vector<Vertex> centers = {},
                                           const ChainOptions& opt = {}) {
  if (centers.empty())
    for (Vertex v = 0; v < g.size(); ++v) centers.push_back(v);
  const auto balls = detail::cache_balls(g, centers, t);
  std::size_t trees = 0;
  for (const auto& b : balls) trees += b.tree;
  BallMarginal out;
  out.excluded_fraction = 1.0 - static_cast<double>(trees) / static_cast<double>(balls.size());
  std::map<std::string, double> counts;
  run_chain(g, beta, 0.0, sampler, n_samples, Rng::stream(seed, 1), opt, [&](const SpinConfig& x) {
    for (const auto& b : balls)
      if (b.tree) counts[detail::marked_code(b.view, x)] += 1.0;
  });
  double total = 0.0;
  for (const auto& [code, c] : counts) total += c;
  for (const auto& [code, c] : counts) out.law[code] = c / total;
  out.observations = static_cast<std::size_t>(total);
  return out;
}

enum class BallMixture { Plus, Symmetric };

/// Predicted (shape, spin) law for the tree-shaped balls at the given
/// centers: each ball vertex v gets boundary field (deg_G(v) - deg_ball(v)) f(h),
/// where h is the plus cavity field of the outside subtrees. Shapes are
/// weighted by their empirical frequency among tree-shaped balls.
inline BallLaw ball_spin_law_prediction(const RootedGraph& g, double beta, int t, double cavity_field, BallMixture mixture,
                                        std::vector<Vertex> centers = {}) {
  if (centers.empty())
    for (Vertex v = 0; v < g.size(); ++v) centers.push_back(v);
  const auto balls = detail::cache_balls(g, centers, t);
  std::map<std::string, std::pair<double, const BallView*>> shapes;
  double trees = 0.0;
  for (const auto& b : balls) {
    if (!b.tree) continue;
    trees += 1.0;
    auto& slot = shapes[canonical_code(b.view.graph)];
    slot.first += 1.0;
    slot.second = &b.view;
  }
  const double boundary = f_theta(cavity_field, beta);
  BallLaw law;
  for (const auto& [shape, entry] : shapes) {
    const BallView& bv = *entry.second;
    std::vector<double> fields(bv.graph.size());
    for (Vertex u = 0; u < fields.size(); ++u)
      fields[u] = static_cast<double>(g.degree(bv.to_parent[u]) - bv.graph.degree(u)) * boundary;
    const auto ex = brute_force_measure(IsingSpec(bv.graph, beta, fields));
    const double w = entry.first / trees;
    for (std::size_t c = 0; c < ex.prob.size(); ++c) {
      auto x = ex.config(c);
      if (mixture == BallMixture::Plus) {
        law[canonical_code(bv.graph, &x)] += w * ex.prob[c];
      } else {
        law[canonical_code(bv.graph, &x)] += 0.5 * w * ex.prob[c];
        for (auto& s : x) s = static_cast<std::int8_t>(-s);
        law[canonical_code(bv.graph, &x)] += 0.5 * w * ex.prob[c];
      }
    }
  }
  return law;
}

// ---------------------------------------------------------------------------
// Free entropy.

inline double free_entropy(const IsingSpec& spec) {
  return brute_force_measure(spec).log_z / static_cast<double>(spec.graph.size());
}

struct FreeEntropyDerivative {
  double central_difference = 0.0;
  double edge_sum = 0.0;  ///< (1/n) sum over edges of <x_i x_j>
};

inline FreeEntropyDerivative d_beta_free_entropy(const IsingSpec& spec, double step = 1e-4) {
  if (spec.beta < step) throw ising_error("d_beta_free_entropy: beta must be at least the step");
  IsingSpec lo = spec, hi = spec;
  lo.beta -= step;
  hi.beta += step;
  FreeEntropyDerivative d;
  d.central_difference = (free_entropy(hi) - free_entropy(lo)) / (2.0 * step);
  const auto ex = brute_force_measure(spec);
  for (double c : ex.edge_correlation) d.edge_sum += c;
  d.edge_sum /= static_cast<double>(spec.graph.size());
  return d;
}

}  // namespace treeising
