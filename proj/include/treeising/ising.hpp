#pragma once

// Exact Ising computations: cavity messages on trees (plus / minus / free /
// field boundary conditions), spherically symmetric trees, and brute-force
// enumeration on small graphs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "graph.hpp"

namespace treeising {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class ising_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {
// log(2 cosh x) without overflow.
inline double log2cosh(double x) noexcept {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a));
}
}  // namespace detail

/// Clipped atanh; arguments at or beyond +-(1 - 1e-15) are pulled inside.
inline double safe_atanh(double x) noexcept {
  constexpr double lim = 1.0 - 1e-15;
  return std::atanh(std::clamp(x, -lim, lim));
}

/// f(h) = atanh(tanh(beta) tanh(h)). Odd in h, f(+-inf) = +-beta.
inline double f_theta(double h, double beta) noexcept {
  if (std::isinf(h)) return h > 0 ? beta : -beta;
  if (beta == 0.0 || h == 0.0) return 0.0;
  const double r = std::tanh(beta) * std::tanh(h);
  if (std::abs(r) < 0.5) return std::atanh(r);
  // 1 +- tanh(b)tanh(h) = cosh(b +- h) / (cosh b cosh h)
  return 0.5 * (detail::log2cosh(beta + h) - detail::log2cosh(beta - h));
}

/// F(theta, r) = (theta + r) / (1 + theta r): two-site correlation under
/// exp(beta x1 x2 + H1 x1 + H2 x2) with r = tanh(H1) tanh(H2).
inline double edge_correlation_formula(double theta, double r) noexcept { return (theta + r) / (1.0 + theta * r); }

/// Exact <x1 x2> of a single edge at inverse temperature beta whose endpoints
/// carry cavity fields h1, h2.
inline double pair_correlation(double h1, double h2, double beta) {
  if (beta < 0.0) throw ising_error("pair_correlation: beta must be non-negative");
  return edge_correlation_formula(std::tanh(beta), std::tanh(h1) * std::tanh(h2));
}

/// Parent pointers and BFS order of a tree rooted at its root.
struct TreeRooting {
  std::vector<Vertex> parent;  ///< parent[root] == root
  std::vector<Vertex> order;   ///< BFS order, root first
  std::vector<int> depth;
};

inline TreeRooting root_tree(const RootedGraph& tree) {
  if (!tree.is_tree()) throw ising_error("expected a tree");
  TreeRooting r;
  const std::size_t n = tree.size();
  r.parent.assign(n, static_cast<Vertex>(n));
  r.depth.assign(n, 0);
  r.order.reserve(n);
  r.order.push_back(tree.root());
  r.parent[tree.root()] = tree.root();
  for (std::size_t k = 0; k < r.order.size(); ++k) {
    const Vertex v = r.order[k];
    for (Vertex w : tree.neighbors(v))
      if (r.parent[w] == n) {
        r.parent[w] = v;
        r.depth[w] = r.depth[v] + 1;
        r.order.push_back(w);
      }
  }
  return r;
}

/// Cavity fields on both orientations of every tree edge.
///   up[v]   = h_{v -> parent(v)}
///   down[v] = h_{parent(v) -> v}
/// with h_{v->u} = B_v + sum_{w in dv \ u} f(h_{w->v}).
struct MessageField {
  double beta = 0.0;
  TreeRooting rooting;
  std::vector<double> field;
  std::vector<double> up;
  std::vector<double> down;
  std::vector<double> incoming;  ///< sum over all neighbors w of f(h_{w->v})

  Vertex root() const { return rooting.order.front(); }

  /// Full local field at v.
  double total_field(Vertex v) const { return field[v] + incoming[v]; }

  double magnetization(Vertex v) const { return std::tanh(total_field(v)); }

  /// <x_v x_parent(v)>.
  double edge_correlation(Vertex v) const {
    if (v == root()) throw ising_error("edge_correlation: root has no parent edge");
    return edge_correlation_formula(std::tanh(beta), std::tanh(up[v]) * std::tanh(down[v]));
  }

  std::vector<double> magnetizations() const {
    std::vector<double> m(field.size());
    for (Vertex v = 0; v < m.size(); ++v) m[v] = magnetization(v);
    return m;
  }
};

/// Leaf-to-root sweep, then (if both_directions) root-to-leaf sweep.
/// fields may contain +-inf for clamped vertices.
inline MessageField tree_messages(const RootedGraph& tree, double beta, std::span<const double> fields,
                                  bool both_directions = true) {
  if (beta < 0.0) throw ising_error("tree_messages: beta must be non-negative");
  if (fields.size() != tree.size()) throw ising_error("tree_messages: one field per vertex required");
  MessageField mf;
  mf.beta = beta;
  mf.rooting = root_tree(tree);
  mf.field.assign(fields.begin(), fields.end());
  const std::size_t n = tree.size();
  mf.up.assign(n, 0.0);
  mf.down.assign(n, 0.0);
  std::vector<double> from_children(n, 0.0);
  const auto& order = mf.rooting.order;
  const auto& parent = mf.rooting.parent;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Vertex v = *it;
    mf.up[v] = mf.field[v] + from_children[v];
    if (v != parent[v]) from_children[parent[v]] += f_theta(mf.up[v], beta);
  }
  mf.incoming = from_children;
  if (!both_directions) return mf;
  for (const Vertex v : order) {
    if (v == parent[v]) continue;
    const Vertex p = parent[v];
    // incoming[p] already includes the message from p's own parent (BFS order).
    mf.down[v] = mf.field[p] + (mf.incoming[p] - f_theta(mf.up[v], beta));
    if (std::isinf(mf.field[p])) mf.down[v] = mf.field[p];
    mf.incoming[v] += f_theta(mf.down[v], beta);
  }
  mf.down[order.front()] = 0.0;
  return mf;
}

enum class Boundary { Plus, Minus, Free };

/// Per-vertex fields: B everywhere, clamped at the depth-t frontier for Plus.
inline std::vector<double> boundary_fields(const RootedGraph& tree, int t, double B, Boundary bc = Boundary::Plus) {
  const auto dist = bfs_distances(tree, tree.root());
  std::vector<double> h(tree.size(), B);
  if (bc == Boundary::Free) return h;
  for (Vertex v = 0; v < tree.size(); ++v)
    if (dist[v] == t) h[v] = bc == Boundary::Plus ? kInf : -kInf;
  return h;
}

/// Message field for the depth-t plus / minus / free measure with uniform field B.
/// The minus measure is the plus measure for -B, spin-reversed.
inline MessageField boundary_messages(const RootedGraph& tree, double beta, int t, double B, Boundary bc) {
  if (bc != Boundary::Minus) return tree_messages(tree, beta, boundary_fields(tree, t, B, bc));
  MessageField mf = tree_messages(tree, beta, boundary_fields(tree, t, -B, Boundary::Plus));
  for (auto* vec : {&mf.field, &mf.up, &mf.down, &mf.incoming})
    for (auto& x : *vec) x = -x;
  return mf;
}

/// Depth of the deepest vertex.
inline int tree_height(const RootedGraph& tree) {
  const auto d = bfs_distances(tree, tree.root());
  return *std::max_element(d.begin(), d.end());
}

/// Root magnetization m({H_v}) of the tree with non-negative per-vertex fields.
inline double root_magnetization(const RootedGraph& tree, double beta, std::span<const double> fields) {
  for (double h : fields)
    if (h < 0.0 || std::isnan(h)) throw ising_error("root_magnetization: fields must be non-negative");
  const auto mf = tree_messages(tree, beta, fields, false);
  return std::tanh(mf.up[tree.root()]);
}

// ---------------------------------------------------------------------------
// Spherically symmetric trees: every vertex at level d has children[d] children.

/// Cavity field toward the parent at each level 0..t, frontier (level t) = frontier_field.
inline std::vector<double> spherical_messages(std::span<const int> children, double beta, double B,
                                              double frontier_field = kInf) {
  const std::size_t t = children.size();
  std::vector<double> h(t + 1);
  h[t] = frontier_field;
  for (std::size_t d = t; d-- > 0;) h[d] = B + children[d] * f_theta(h[d + 1], beta);
  return h;
}

struct SphericalSummary {
  double root_field = 0.0;       ///< total field at the root
  double root_magnetization = 0.0;
  double child_field = 0.0;      ///< h_{child -> root}
  double root_cavity = 0.0;      ///< h_{root -> child}
  double edge_correlation = 0.0; ///< <x_o x_child>
};

inline SphericalSummary spherical_summary(std::span<const int> children, double beta, double B,
                                          double frontier_field = kInf) {
  const auto h = spherical_messages(children, beta, B, frontier_field);
  SphericalSummary s;
  s.root_field = h[0];
  s.root_magnetization = std::tanh(h[0]);
  if (!children.empty() && children[0] > 0) {
    s.child_field = h[1];
    s.root_cavity = B + (children[0] - 1) * f_theta(h[1], beta);
    s.edge_correlation = pair_correlation(s.root_cavity, s.child_field, beta);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Brute-force enumeration.

inline constexpr std::size_t kMaxEnumeration = 20;

/// Graph, inverse temperature and per-vertex fields (+-inf clamps a spin).
struct IsingSpec {
  RootedGraph graph;
  double beta = 0.0;
  std::vector<double> fields;

  IsingSpec() = default;
  IsingSpec(RootedGraph g, double b, std::vector<double> h = {}) : graph(std::move(g)), beta(b), fields(std::move(h)) {
    if (fields.empty()) fields.assign(graph.size(), 0.0);
    validate();
  }

  void validate() const {
    if (beta < 0.0 || std::isnan(beta)) throw ising_error("IsingSpec: beta must be non-negative");
    if (fields.size() != graph.size()) throw ising_error("IsingSpec: one field per vertex required");
  }
};

struct ExactIsing {
  std::vector<Vertex> free_vertices;  ///< bit b of a config index is free_vertices[b]
  SpinConfig base;                    ///< clamped spins set, free spins +1
  std::vector<double> prob;           ///< over the 2^|free| configurations
  double log_z = 0.0;                 ///< log sum over free configs; infinite clamp terms dropped
  std::vector<double> magnetization;
  std::vector<Edge> edges;
  std::vector<double> edge_correlation;

  SpinConfig config(std::size_t index) const {
    SpinConfig x = base;
    for (std::size_t b = 0; b < free_vertices.size(); ++b) x[free_vertices[b]] = (index >> b) & 1u ? 1 : -1;
    return x;
  }

  template <class Fn>
  double expect(Fn&& fn) const {
    double acc = 0.0;
    for (std::size_t c = 0; c < prob.size(); ++c)
      if (prob[c] > 0.0) acc += prob[c] * fn(config(c));
    return acc;
  }

  double correlation(Vertex a, Vertex b) const {
    return expect([&](const SpinConfig& x) { return static_cast<double>(x[a] * x[b]); });
  }

  double covariance(Vertex a, Vertex b) const { return correlation(a, b) - magnetization[a] * magnetization[b]; }
};

inline double ising_energy(const IsingSpec& spec, const std::vector<Edge>& edges, const SpinConfig& x) {
  double e = 0.0;
  for (const auto& [a, b] : edges) e += spec.beta * x[a] * x[b];
  for (Vertex v = 0; v < x.size(); ++v)
    if (std::isfinite(spec.fields[v])) e += spec.fields[v] * x[v];
  return e;
}

/// Exact Gibbs measure by enumerating all free spins (at most kMaxEnumeration).
inline ExactIsing brute_force_measure(const IsingSpec& spec) {
  spec.validate();
  const std::size_t n = spec.graph.size();
  ExactIsing ex;
  ex.base.assign(n, 1);
  for (Vertex v = 0; v < n; ++v) {
    if (std::isinf(spec.fields[v])) ex.base[v] = spec.fields[v] > 0 ? 1 : -1;
    else ex.free_vertices.push_back(v);
  }
  if (ex.free_vertices.size() > kMaxEnumeration)
    throw ising_error("brute_force_measure: " + std::to_string(ex.free_vertices.size()) + " free spins exceed the limit of " +
                      std::to_string(kMaxEnumeration));
  ex.edges = spec.graph.edges();
  const std::size_t count = std::size_t{1} << ex.free_vertices.size();
  std::vector<double> logw(count);
  double mx = -kInf;
  for (std::size_t c = 0; c < count; ++c) {
    logw[c] = ising_energy(spec, ex.edges, ex.config(c));
    mx = std::max(mx, logw[c]);
  }
  double z = 0.0;
  ex.prob.resize(count);
  for (std::size_t c = 0; c < count; ++c) {
    ex.prob[c] = std::exp(logw[c] - mx);
    z += ex.prob[c];
  }
  for (auto& p : ex.prob) p /= z;
  ex.log_z = mx + std::log(z);
  ex.magnetization.assign(n, 0.0);
  ex.edge_correlation.assign(ex.edges.size(), 0.0);
  for (std::size_t c = 0; c < count; ++c) {
    const auto x = ex.config(c);
    const double p = ex.prob[c];
    for (Vertex v = 0; v < n; ++v) ex.magnetization[v] += p * x[v];
    for (std::size_t e = 0; e < ex.edges.size(); ++e) ex.edge_correlation[e] += p * x[ex.edges[e].first] * x[ex.edges[e].second];
  }
  return ex;
}

/// Largest |nu(x_W | x_rest) - nu~(x_W | x_shell)| where W = B_o(t), the shell
/// is at distance t+1, nu is the supplied measure over configurations of all
/// vertices (index bit v = spin of v) and nu~ the finite-window Ising law on
/// the radius-(t+1) ball with fields on W.
inline double dlr_window_discrepancy(const IsingSpec& spec, int t, std::span<const double> measure) {
  spec.validate();
  const std::size_t n = spec.graph.size();
  if (n > kMaxEnumeration) throw ising_error("dlr_window_check: graph exceeds the enumeration limit");
  for (double h : spec.fields)
    if (!std::isfinite(h)) throw ising_error("dlr_window_check: clamped fields are not supported");
  if (measure.size() != (std::size_t{1} << n)) throw ising_error("dlr_window_check: measure has the wrong length");
  const auto dist = bfs_distances(spec.graph, spec.graph.root());
  std::size_t window_mask = 0;
  std::vector<Vertex> window;
  for (Vertex v = 0; v < n; ++v)
    if (dist[v] >= 0 && dist[v] <= t) {
      window_mask |= std::size_t{1} << v;
      window.push_back(v);
    }
  // Energy terms involving W: edges with at least one endpoint in W (all such
  // edges lie inside the radius-(t+1) ball) and fields on W.
  std::vector<Edge> touching;
  for (const auto& [a, b] : spec.graph.edges())
    if (((window_mask >> a) & 1u) || ((window_mask >> b) & 1u)) touching.emplace_back(a, b);
  auto local_energy = [&](std::size_t c) {
    double e = 0.0;
    auto s = [&](Vertex v) { return ((c >> v) & 1u) ? 1.0 : -1.0; };
    for (const auto& [a, b] : touching) e += spec.beta * s(a) * s(b);
    for (Vertex v : window) e += spec.fields[v] * s(v);
    return e;
  };
  const std::size_t wcount = std::size_t{1} << window.size();
  auto embed = [&](std::size_t outside, std::size_t local) {
    std::size_t c = outside;
    for (std::size_t b = 0; b < window.size(); ++b)
      if ((local >> b) & 1u) c |= std::size_t{1} << window[b];
    return c;
  };
  const std::size_t full = (std::size_t{1} << n) - 1;
  double worst = 0.0;
  std::vector<double> cond(wcount), ideal(wcount);
  for (std::size_t outside = 0; outside <= full; ++outside) {
    if (outside & window_mask) continue;
    double mass = 0.0, mx = -kInf;
    for (std::size_t l = 0; l < wcount; ++l) {
      const std::size_t c = embed(outside, l);
      cond[l] = measure[c];
      mass += cond[l];
      ideal[l] = local_energy(c);
      mx = std::max(mx, ideal[l]);
    }
    if (!(mass > 0.0)) continue;
    double z = 0.0;
    for (auto& w : ideal) z += (w = std::exp(w - mx));
    for (std::size_t l = 0; l < wcount; ++l) worst = std::max(worst, std::abs(cond[l] / mass - ideal[l] / z));
  }
  return worst;
}

/// Full-configuration probability vector of the exact measure (no clamps).
inline std::vector<double> full_measure(const IsingSpec& spec) {
  auto ex = brute_force_measure(spec);
  if (ex.free_vertices.size() != spec.graph.size()) throw ising_error("full_measure: clamped fields are not supported");
  // free_vertices is 0..n-1 in order, so config indices coincide.
  return std::move(ex.prob);
}

inline double dlr_window_check(const IsingSpec& spec, int t) { return dlr_window_discrepancy(spec, t, full_measure(spec)); }

struct CovarianceDecay {
  double max_ratio = 0.0;  ///< max_j Cov(x_o, x_j) / tanh(beta)^{|j|}
  double min_cov = 0.0;
  std::vector<double> covariance;  ///< per vertex
};

/// Exact plus-measure covariances Cov(x_o, x_j) on a tree whose depth-`depth`
/// frontier is clamped plus.
inline CovarianceDecay covariance_decay_check(const RootedGraph& tree, double beta, int depth, double B = 0.0) {
  const IsingSpec spec(tree, beta, boundary_fields(tree, depth, B, Boundary::Plus));
  const auto ex = brute_force_measure(spec);
  const auto dist = bfs_distances(tree, tree.root());
  const double gamma = std::tanh(beta);
  CovarianceDecay out;
  out.covariance.assign(tree.size(), 0.0);
  out.min_cov = kInf;
  for (Vertex j = 0; j < tree.size(); ++j) {
    const double c = ex.covariance(tree.root(), j);
    out.covariance[j] = c;
    out.min_cov = std::min(out.min_cov, c);
    const double bound = std::pow(gamma, dist[j]);
    if (bound > 0.0) out.max_ratio = std::max(out.max_ratio, c / bound);
    else if (c > 0.0) out.max_ratio = kInf;
  }
  return out;
}

/// Largest second difference of lambda -> m({lambda H_v}) over an evenly spaced grid.
inline double ghs_concavity_check(const RootedGraph& tree, double beta, std::span<const double> fields, double lambda_max,
                                  double step) {
  if (!(step > 0.0) || lambda_max < 0.0) throw ising_error("ghs_concavity_check: bad grid");
  const auto points = static_cast<std::size_t>(std::floor(lambda_max / step + 1e-9)) + 1;
  std::vector<double> m(points);
  std::vector<double> scaled(fields.size());
  for (std::size_t k = 0; k < points; ++k) {
    const double lam = static_cast<double>(k) * step;
    for (std::size_t v = 0; v < fields.size(); ++v) scaled[v] = lam * fields[v];
    m[k] = root_magnetization(tree, beta, scaled);
  }
  double worst = -kInf;
  for (std::size_t k = 1; k + 1 < points; ++k) worst = std::max(worst, m[k - 1] - 2.0 * m[k] + m[k + 1]);
  return points >= 3 ? worst : 0.0;
}

/// Plus-boundary cavity field of an infinite spherically symmetric tail whose
/// vertices have `children` children each, i.e. the fixed point reached from +inf.
inline double tail_plus_field(int children, double beta, double tol = 1e-14, int max_iter = 10000000) {
  double h = kInf;
  for (int it = 0; it < max_iter; ++it) {
    const double next = children * f_theta(h, beta);
    if (std::abs(next - h) < tol) return next;
    h = next;
  }
  return h;
}

/// ell [m_ell({h^beta}) - m_ell({h^beta0})] on the k-regular tree: root
/// magnetization at beta of the depth-ell tree whose frontier carries the
/// plus cavity fields of the infinite tree at beta (resp. beta0).
inline double h_cont_gap(int k, double beta0, double beta, int ell) {
  if (k < 3) throw ising_error("h_cont_gap: degree must be at least 3");
  if (!(beta >= beta0)) throw ising_error("h_cont_gap: requires beta >= beta0");
  if (!((k - 1) * std::tanh(beta0) > 1.0))
    throw ising_error("h_cont_gap: beta0 must exceed atanh(1/(k-1))");
  std::vector<int> children(static_cast<std::size_t>(ell), k - 1);
  if (ell > 0) children[0] = k;
  const double hb = tail_plus_field(k - 1, beta);
  const double hb0 = tail_plus_field(k - 1, beta0);
  const double m_beta = spherical_summary(children, beta, 0.0, hb).root_magnetization;
  const double m_beta0 = spherical_summary(children, beta, 0.0, hb0).root_magnetization;
  return ell * (m_beta - m_beta0);
}

}  // namespace treeising
