#pragma once

// Limit quantities: regular-tree fixed points, U(beta, B) and rho_mu
// estimators over sampled trees, and population dynamics for the cavity
// field recursion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ensembles.hpp"
#include "ising.hpp"
#include "offspring.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace treeising {

struct FixedPointResult {
  double h_star = 0.0;
  double m_star = 0.0;
  long iterations = 0;
  double residual = 0.0;
};

/// Iterates h <- (k-1) f(h) from +inf until the step is below tol.
inline FixedPointResult regular_fixed_point(int k, double beta, double tol = 1e-14, long max_iter = 100000000) {
  if (k < 1) throw ising_error("regular_fixed_point: degree must be positive");
  if (beta < 0.0) throw ising_error("regular_fixed_point: beta must be non-negative");
  FixedPointResult r;
  const double c = k - 1;
  // At or below beta_c the iteration tends to 0, possibly very slowly.
  if (c * std::tanh(beta) <= 1.0) {
    r.iterations = 0;
    return r;
  }
  double h = kInf;
  for (r.iterations = 1; r.iterations <= max_iter; ++r.iterations) {
    const double next = c * f_theta(h, beta);
    const double step = std::abs(next - h);
    h = next;
    if (step < tol) break;
  }
  r.h_star = h;
  r.m_star = std::tanh(h);
  r.residual = std::abs(h - c * f_theta(h, beta));
  return r;
}

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t samples = 0;
};

inline Estimate summarize(std::span<const double> xs) {
  Estimate e;
  e.samples = xs.size();
  if (xs.empty()) return e;
  double s = 0.0;
  for (double x : xs) s += x;
  e.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double v = 0.0;
    for (double x : xs) v += (x - e.mean) * (x - e.mean);
    v /= static_cast<double>(xs.size() - 1);
    e.se = std::sqrt(v / static_cast<double>(xs.size()));
  }
  return e;
}

namespace detail {

inline int deterministic_degree(const OffspringLaw& law) {
  for (const auto& [k, p] : law.P[0])
    if (p > 0) return k[0];
  return 0;
}

// Per-tree value of the plus-boundary measure at depth t.
template <class Fn>
Estimate tree_average(const OffspringLaw& law, int depth, std::size_t n_trees, std::uint64_t seed, Fn&& per_tree) {
  if (n_trees == 0) throw std::invalid_argument("estimator: n_trees must be positive");
  const UmgwSampler sampler(law);
  std::vector<double> values(n_trees);
  parallel_for(n_trees, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    values[i] = per_tree(sampler(depth, rng));
  });
  return summarize(values);
}

}  // namespace detail

/// (1/2) E sum_{i in do} nu_+ <x_o x_i> on depth-t truncations. Deterministic
/// single-type laws are evaluated exactly on the spherical tree (se = 0).
inline Estimate U_estimate(const OffspringLaw& law, double beta, double B, int depth, std::size_t n_trees,
                           std::uint64_t seed) {
  if (depth < 1) throw ising_error("U_estimate: depth must be at least 1");
  if (beta < 0.0 || B < 0.0) throw ising_error("U_estimate: beta and B must be non-negative");
  if (auto profile = deterministic_profile(law, depth)) {
    const auto s = spherical_summary(*profile, beta, B);
    return {0.5 * (*profile)[0] * s.edge_correlation, 0.0, 1};
  }
  return detail::tree_average(law, depth, n_trees, seed, [&](const RootedGraph& tree) {
    const auto mf = boundary_messages(tree, beta, depth, B, Boundary::Plus);
    double acc = 0.0;
    for (Vertex w : tree.neighbors(tree.root())) acc += mf.edge_correlation(w);
    return 0.5 * acc;
  });
}

/// E nu_+ <x_o> on depth-t truncations.
inline Estimate rho_mu_estimate(const OffspringLaw& law, double beta, int depth, std::size_t n_trees, std::uint64_t seed,
                                double B = 0.0) {
  if (depth < 1) throw ising_error("rho_mu_estimate: depth must be at least 1");
  if (auto profile = deterministic_profile(law, depth)) return {spherical_summary(*profile, beta, B).root_magnetization, 0.0, 1};
  return detail::tree_average(law, depth, n_trees, seed, [&](const RootedGraph& tree) {
    return boundary_messages(tree, beta, depth, B, Boundary::Plus).magnetization(tree.root());
  });
}

struct DepthLimit {
  double value = 0.0;
  int depth = 0;
  bool converged = false;
};

/// For a deterministic law, increases the depth until consecutive plus-boundary
/// values (root magnetization, or U if `edge` is set) differ by less than tol.
inline DepthLimit deterministic_depth_limit(const OffspringLaw& law, double beta, double B, bool edge, double tol = 1e-8,
                                            int max_depth = 100000) {
  if (!law.deterministic()) throw law_error("deterministic_depth_limit: law is not deterministic");
  const int k = detail::deterministic_degree(law);
  // Successive depths need one more recursion step each.
  DepthLimit out;
  double h = kInf;  // cavity field of a depth-1 vertex at depth t
  auto value_from = [&](double hc) {
    const double root = B + k * f_theta(hc, beta);
    if (!edge) return std::tanh(root);
    const double cav = B + (k - 1) * f_theta(hc, beta);
    return 0.5 * k * pair_correlation(cav, hc, beta);
  };
  double prev = value_from(h);
  for (int t = 2; t <= max_depth; ++t) {
    h = B + std::max(k - 1, 0) * f_theta(h, beta);
    const double cur = value_from(h);
    out.depth = t;
    out.value = cur;
    if (std::abs(cur - prev) < tol) {
      out.converged = true;
      break;
    }
    prev = cur;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Population dynamics.

struct ParticlePool {
  std::vector<double> h;
  std::uint64_t generation = 0;
  std::uint64_t stream = 0;  ///< substream id; pools sharing it share randomness

  std::size_t size() const noexcept { return h.size(); }

  static ParticlePool plus(std::size_t n, std::uint64_t stream = 0) { return {std::vector<double>(n, kInf), 0, stream}; }
  static ParticlePool constant(std::size_t n, double value, std::uint64_t stream = 0) {
    return {std::vector<double>(n, value), 0, stream};
  }
};

/// Law of the degree K of a neighbor of the root (size-biased degree).
struct DegreeLaw {
  std::vector<int> k;
  std::vector<double> p;

  int min() const { return *std::min_element(k.begin(), k.end()); }
  double mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) m += k[i] * p[i];
    return m;
  }
};

inline DegreeLaw size_biased_degree(const OffspringLaw& law) {
  if (law.type_count() != 1) throw law_error("size_biased_degree: single-type law required");
  DegreeLaw out;
  double mean = 0.0;
  for (const auto& [k, p] : law.P[0]) mean += k[0] * p;
  if (!(mean > 0.0)) throw law_error("size_biased_degree: mean degree is zero");
  for (const auto& [k, p] : law.P[0])
    if (k[0] > 0 && p > 0.0) {
      out.k.push_back(k[0]);
      out.p.push_back(k[0] * p / mean);
    }
  return out;
}

/// One resampling step of h' = sum_{l < K-1} f(h_l). Particle i draws from
/// Rng::stream(seed, pool.stream, pool.generation, i).
inline ParticlePool pop_dynamics_step(const ParticlePool& pool, const DegreeLaw& K, double beta, std::uint64_t seed) {
  if (pool.h.empty()) throw std::invalid_argument("pop_dynamics_step: empty pool");
  if (beta < 0.0) throw ising_error("pop_dynamics_step: beta must be non-negative");
  const DiscreteSampler degree(K.p);
  const std::size_t n = pool.size();
  ParticlePool next{std::vector<double>(n), pool.generation + 1, pool.stream};
  parallel_for(n, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, pool.stream, pool.generation, i);
    const int children = K.k[degree(rng)] - 1;
    double acc = 0.0;
    for (int c = 0; c < children; ++c) acc += f_theta(pool.h[rng.below(n)], beta);
    next.h[i] = acc;
  });
  return next;
}

/// Empirical W1 between equal-size pools (sorted copies are compared).
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("wasserstein1: pools must have equal positive size");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isinf(a[i]) || std::isinf(b[i])) {
      if (a[i] == b[i]) continue;
      return kInf;
    }
    acc += std::abs(a[i] - b[i]);
  }
  return acc / static_cast<double>(a.size());
}

inline double quantile_sorted(std::span<const double> sorted, double q) {
  const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(sorted.size() - 1)));
  return sorted[idx];
}

struct PoolTraceRow {
  std::uint64_t t = 0;
  double w1 = 0.0;  ///< to the previous generation
  double mean_h = 0.0;
  double q05 = 0.0, q50 = 0.0, q95 = 0.0;
};

inline void write_pool_trace(std::ostream& os, std::span<const PoolTraceRow> rows) {
  os << "t,W1,mean_h,q05,q50,q95\n";
  const auto old = os.precision(17);
  for (const auto& r : rows) os << r.t << ',' << r.w1 << ',' << r.mean_h << ',' << r.q05 << ',' << r.q50 << ',' << r.q95 << '\n';
  os.precision(old);
}

struct PopOptions {
  std::size_t max_steps = 200;
  double w1_tol = 5e-3;
  std::size_t min_steps = 1;
};

struct PopResult {
  ParticlePool pool;  ///< sorted
  std::vector<PoolTraceRow> trace;
  bool converged = false;
};

/// Runs pop_dynamics_step from `init` until the W1 distance between
/// consecutive sorted pools drops below w1_tol.
inline PopResult pop_converge(const OffspringLaw& law, double beta, ParticlePool init, std::uint64_t seed,
                              const PopOptions& opt = {}) {
  const auto K = size_biased_degree(law);
  PopResult out;
  std::sort(init.h.begin(), init.h.end());
  out.pool = std::move(init);
  for (std::size_t step = 1; step <= opt.max_steps; ++step) {
    auto next = pop_dynamics_step(out.pool, K, beta, seed);
    std::sort(next.h.begin(), next.h.end());
    PoolTraceRow row;
    row.t = next.generation;
    row.w1 = wasserstein1(out.pool.h, next.h);
    double s = 0.0;
    for (double x : next.h) s += x;
    row.mean_h = s / static_cast<double>(next.size());
    row.q05 = quantile_sorted(next.h, 0.05);
    row.q50 = quantile_sorted(next.h, 0.50);
    row.q95 = quantile_sorted(next.h, 0.95);
    out.trace.push_back(row);
    out.pool = std::move(next);
    if (step >= opt.min_steps && row.w1 < opt.w1_tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

/// atanh(1/(d_min - 1)), the threshold of the uniqueness lemma for the
/// dominating initialization.
inline double beta_star(const OffspringLaw& law) {
  const int d = size_biased_degree(law).min();
  if (d < 3) throw law_error("beta_star: minimum degree must be at least 3");
  return std::atanh(1.0 / (d - 1));
}

struct DominationRow {
  std::uint64_t t = 0;
  double gap = 0.0;      ///< mean of sorted(A) - sorted(B)
  double min_diff = 0.0; ///< min over quantiles of sorted(A) - sorted(B)
};

struct LemmaRecursionResult {
  PopResult plus;                     ///< from +inf at beta
  PopResult dominating;               ///< from the beta0 plus pool, same randomness as `plus`
  PopResult independent;              ///< from +inf at beta, independent randomness
  std::vector<DominationRow> domination;
  double w1_final = 0.0;              ///< dominating vs independent plus run
  double w1_crn = 0.0;                ///< dominating vs plus (common randomness)
  bool domination_monotone = false;
  bool domination_holds = false;
};

/// Plus initialization versus the h^{beta0,+} initialization at beta.
/// `steps` generations are run for each chain; the beta0 pool is produced by
/// pop_converge at beta0.
inline LemmaRecursionResult lemma_recursion(const OffspringLaw& law, double beta, double beta0, std::size_t n,
                                            std::uint64_t seed, const PopOptions& opt = {}) {
  if (!(beta >= beta0)) throw ising_error("lemma_recursion: requires beta >= beta0");
  if (!(beta0 > beta_star(law))) throw ising_error("lemma_recursion: beta0 must exceed atanh(1/(d_min - 1))");
  const auto K = size_biased_degree(law);
  LemmaRecursionResult out;
  auto pre = pop_converge(law, beta0, ParticlePool::plus(n, 1), seed, opt);

  // Common-randomness pair: both pools use stream 2 with aligned generations.
  ParticlePool a = ParticlePool::plus(n, 2);
  ParticlePool b{pre.pool.h, 0, 2};
  std::sort(b.h.begin(), b.h.end());
  out.plus.pool = a;
  out.dominating.pool = b;
  out.domination_holds = true;
  out.domination_monotone = true;
  double prev_gap = kInf;
  auto record = [](PopResult& r, ParticlePool next) {
    std::sort(next.h.begin(), next.h.end());
    PoolTraceRow row;
    row.t = next.generation;
    row.w1 = wasserstein1(r.pool.h, next.h);
    double s = 0.0;
    for (double x : next.h) s += x;
    row.mean_h = s / static_cast<double>(next.size());
    row.q05 = quantile_sorted(next.h, 0.05);
    row.q50 = quantile_sorted(next.h, 0.50);
    row.q95 = quantile_sorted(next.h, 0.95);
    r.trace.push_back(row);
    r.pool = std::move(next);
    return row.w1;
  };
  for (std::size_t step = 1; step <= opt.max_steps; ++step) {
    const double wa = record(out.plus, pop_dynamics_step(out.plus.pool, K, beta, seed));
    const double wb = record(out.dominating, pop_dynamics_step(out.dominating.pool, K, beta, seed));
    DominationRow row;
    row.t = step;
    double s = 0.0, mn = kInf;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = out.plus.pool.h[i] - out.dominating.pool.h[i];
      s += d;
      mn = std::min(mn, d);
    }
    row.gap = s / static_cast<double>(n);
    row.min_diff = mn;
    out.domination.push_back(row);
    // Rounding in f can flip the order by an ulp once both pools coincide.
    if (mn < -1e-12) out.domination_holds = false;
    if (row.gap > prev_gap && row.gap > 1e-12) out.domination_monotone = false;
    prev_gap = row.gap;
    if (step >= opt.min_steps && wa < opt.w1_tol && wb < opt.w1_tol) {
      out.plus.converged = out.dominating.converged = true;
      break;
    }
  }
  out.independent = pop_converge(law, beta, ParticlePool::plus(n, 3), seed, opt);
  out.w1_final = wasserstein1(out.dominating.pool.h, out.independent.pool.h);
  out.w1_crn = wasserstein1(out.dominating.pool.h, out.plus.pool.h);
  return out;
}

}  // namespace treeising
