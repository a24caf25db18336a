#pragma once

// Edge-expansion certificates: exhaustive subset enumeration, a spectral
// lower bound, and the entropy-rate predictor for configuration models.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "graph.hpp"
#include "ising.hpp"
#include "offspring.hpp"

namespace treeising {

inline constexpr std::size_t kMaxExactExpansion = 24;

struct ExpansionReport {
  std::string method;  ///< "exact", "spectral" or "entropy-predictor"
  double delta1 = 0.0, delta2 = 0.5;
  double lambda = 0.0;
  std::vector<Vertex> witness;
  double lambda2 = 0.0;  ///< spectral method only
};

inline void to_json(nlohmann::json& j, const ExpansionReport& r) {
  j = nlohmann::json{{"method", r.method}, {"delta1", r.delta1}, {"delta2", r.delta2}, {"lambda", r.lambda}};
  if (r.method == "exact") j["witness"] = r.witness;
  if (r.method == "spectral") j["lambda2"] = r.lambda2;
}

/// Minimum of |dS| / |S| over all S with delta1 n <= |S| <= delta2 n
/// (|dS| counts edges with exactly one endpoint in S, loops never count).
inline ExpansionReport expansion_exact(const RootedGraph& g, double delta1, double delta2) {
  const std::size_t n = g.size();
  if (n > kMaxExactExpansion) throw graph_error("expansion_exact: more than 24 vertices");
  if (!(delta1 >= 0.0 && delta1 <= delta2 && delta2 <= 1.0)) throw std::invalid_argument("expansion_exact: bad window");
  ExpansionReport rep;
  rep.method = "exact";
  rep.delta1 = delta1;
  rep.delta2 = delta2;
  const auto lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(delta1 * static_cast<double>(n) - 1e-12)));
  const auto hi = static_cast<std::size_t>(std::floor(delta2 * static_cast<double>(n) + 1e-12));
  if (lo > hi) throw std::invalid_argument("expansion_exact: window contains no subset size");
  // Gray-code walk with an incrementally maintained boundary count.
  std::uint32_t mask = 0;
  long boundary = 0;
  std::size_t size = 0;
  double best = kInf;
  std::uint32_t best_mask = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t step = 1; step < total; ++step) {
    const auto v = static_cast<Vertex>(std::countr_zero(step));
    const bool entering = !((mask >> v) & 1u);
    for (Vertex u : g.neighbors(v)) {
      if (u == v) continue;
      const bool u_in = (mask >> u) & 1u;
      boundary += (entering != u_in) ? 1 : -1;
    }
    mask ^= std::uint32_t{1} << v;
    size += entering ? 1 : -1;
    if (size >= lo && size <= hi) {
      const double ratio = static_cast<double>(boundary) / static_cast<double>(size);
      if (ratio < best) {
        best = ratio;
        best_mask = mask;
      }
    }
  }
  rep.lambda = best;
  for (Vertex v = 0; v < n; ++v)
    if ((best_mask >> v) & 1u) rep.witness.push_back(v);
  return rep;
}

/// Second-smallest eigenvalue of the Laplacian D - A (loops ignored).
inline double laplacian_lambda2(const RootedGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  if (n < 2) return 0.0;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (Vertex v = 0; v < g.size(); ++v)
    for (Vertex u : g.neighbors(v))
      if (u != v) {
        L(v, v) += 1.0;
        L(v, u) -= 1.0;
      }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues()(1));
}

/// |dS| >= lambda2 |S| (1 - |S|/n) >= lambda2 (1 - delta2) |S| for |S| <= delta2 n.
inline ExpansionReport expansion_spectral(const RootedGraph& g, double delta1 = 0.0, double delta2 = 0.5) {
  ExpansionReport rep;
  rep.method = "spectral";
  rep.delta1 = delta1;
  rep.delta2 = delta2;
  if (!g.connected()) return rep;
  rep.lambda2 = laplacian_lambda2(g);
  rep.lambda = rep.lambda2 * (1.0 - delta2);
  return rep;
}

// ---------------------------------------------------------------------------
// Entropy-rate predictor.

/// H(p) = -p log p - (1-p) log(1-p).
inline double binary_entropy(double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("binary_entropy: p outside [0, 1]");
  auto term = [](double x) { return x > 0.0 ? -x * std::log(x) : 0.0; };
  return term(p) + term(1.0 - p);
}

namespace detail {
inline double weighted_entropy(double alpha, double delta) {
  if (alpha <= 0.0) return 0.0;
  return alpha * binary_entropy(std::clamp(delta / alpha, 0.0, 1.0));
}
}  // namespace detail

struct EntropyTerms {
  double N = 0.0;       ///< sum alpha H(delta / alpha)
  double Q = 0.0;       ///< -(1/2) sum over ordered (i, j) of alpha^ H(delta^ / alpha^)
  double bound = 0.0;   ///< -(1/6) sum over (i, j) of alpha^ H(delta^ / alpha^)
  double size = 0.0;    ///< |delta|
  std::vector<std::vector<double>> alpha_hat, delta_hat;
};

/// delta[i][s] is the density of selected vertices of type i with the s-th
/// offspring vector of P_i; it must lie in [0, theta(i) P_i(k)].
inline EntropyTerms entropy_terms(const OffspringLaw& law, const std::vector<std::vector<double>>& delta) {
  const std::size_t q = law.type_count();
  if (delta.size() != q) throw std::invalid_argument("entropy_terms: one delta row per type");
  EntropyTerms t;
  t.alpha_hat.assign(q, std::vector<double>(q, 0.0));
  t.delta_hat = t.alpha_hat;
  for (std::size_t i = 0; i < q; ++i) {
    if (delta[i].size() != law.P[i].size()) throw std::invalid_argument("entropy_terms: delta row length mismatch");
    for (std::size_t s = 0; s < law.P[i].size(); ++s) {
      const auto& [k, p] = law.P[i][s];
      if (total(k) <= 2) throw law_error("entropy_predictor: offspring vectors must have at least 3 entries in total");
      const double alpha = law.theta[i] * p;
      const double d = delta[i][s];
      if (d < -1e-15 || d > alpha + 1e-15) throw std::invalid_argument("entropy_terms: delta outside [0, alpha]");
      t.N += detail::weighted_entropy(alpha, d);
      t.size += d;
      for (std::size_t j = 0; j < q; ++j) {
        t.alpha_hat[i][j] += k[j] * alpha;
        t.delta_hat[i][j] += k[j] * d;
      }
    }
  }
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < q; ++j) {
      const double h = detail::weighted_entropy(t.alpha_hat[i][j], t.delta_hat[i][j]);
      t.Q -= 0.5 * h;
      t.bound -= h / 6.0;
    }
  return t;
}

/// -(a/6) H(d/a) + (a/2) H(2 eps / a), the single-type bound with eps cross edges.
inline double epsilon_bound(double alpha_hat, double delta_hat, double eps) {
  if (!(alpha_hat > 0.0)) throw std::invalid_argument("epsilon_bound: alpha_hat must be positive");
  if (eps < 0.0 || 2.0 * eps > alpha_hat) throw std::invalid_argument("epsilon_bound: eps outside [0, alpha_hat / 2]");
  return -alpha_hat / 6.0 * binary_entropy(std::clamp(delta_hat / alpha_hat, 0.0, 1.0)) +
         alpha_hat / 2.0 * binary_entropy(2.0 * eps / alpha_hat);
}

struct EntropyPrediction {
  double sup_bound = -kInf;    ///< sup over the window of the (eps-corrected) bound
  double sup_n_plus_q = -kInf; ///< sup over the window of N + Q
  double max_excess = -kInf;   ///< sup of (N + Q) - bound; <= 0 when the bound dominates
  std::vector<std::vector<double>> argmax;
  std::size_t profiles = 0;
};

/// Scans delta = s * alpha with s on a grid of `grid` points per coordinate in
/// [0, 1], keeping profiles with delta0 <= |delta| <= 1/2. eps > 0 is only
/// defined for single-type laws.
inline EntropyPrediction entropy_predictor(const OffspringLaw& law, double delta0, double eps = 0.0, std::size_t grid = 41) {
  law.validate();
  if (eps > 0.0 && law.type_count() != 1) throw law_error("entropy_predictor: eps > 0 needs a single-type law");
  if (grid < 2) throw std::invalid_argument("entropy_predictor: grid needs at least 2 points");
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < law.type_count(); ++i)
    for (std::size_t s = 0; s < law.P[i].size(); ++s) coords.emplace_back(i, s);
  double combos = std::pow(static_cast<double>(grid), static_cast<double>(coords.size()));
  if (combos > 5e6) throw std::invalid_argument("entropy_predictor: grid too fine for this many offspring atoms");
  EntropyPrediction out;
  std::vector<std::size_t> idx(coords.size(), 0);
  std::vector<std::vector<double>> delta(law.type_count());
  for (std::size_t i = 0; i < law.type_count(); ++i) delta[i].assign(law.P[i].size(), 0.0);
  while (true) {
    double size = 0.0;
    for (std::size_t c = 0; c < coords.size(); ++c) {
      const auto [i, s] = coords[c];
      const double frac = static_cast<double>(idx[c]) / static_cast<double>(grid - 1);
      delta[i][s] = frac * law.theta[i] * law.P[i][s].prob;
      size += delta[i][s];
    }
    if (size >= delta0 - 1e-12 && size <= 0.5 + 1e-12) {
      const auto t = entropy_terms(law, delta);
      double b = t.bound;
      if (eps > 0.0) b = epsilon_bound(t.alpha_hat[0][0], t.delta_hat[0][0], eps);
      ++out.profiles;
      if (b > out.sup_bound) {
        out.sup_bound = b;
        out.argmax = delta;
      }
      out.sup_n_plus_q = std::max(out.sup_n_plus_q, t.N + t.Q);
      out.max_excess = std::max(out.max_excess, t.N + t.Q - t.bound);
    }
    std::size_t c = 0;
    while (c < idx.size() && ++idx[c] == grid) idx[c++] = 0;
    if (c == idx.size()) break;
  }
  return out;
}

/// Largest eps (bisection) at which the single-type eps-corrected sup stays negative.
inline double epsilon0(const OffspringLaw& law, double delta0, std::size_t grid = 41) {
  if (law.type_count() != 1) throw law_error("epsilon0: single-type law required");
  double alpha_hat = 0.0;
  for (const auto& [k, p] : law.P[0]) alpha_hat += k[0] * p;
  double lo = 0.0, hi = alpha_hat / 2.0;
  if (entropy_predictor(law, delta0, 0.0, grid).sup_bound >= 0.0) return 0.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid > 0.0 && entropy_predictor(law, delta0, mid, grid).sup_bound < 0.0) lo = mid;
    else hi = mid;
  }
  return lo;
}

}  // namespace treeising
