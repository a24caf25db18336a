#pragma once

// S_T(t) sums, T_t pruning, the capa_3 convex flow program and the f_theta
// envelope used in the capacity argument.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "ensembles.hpp"
#include "graph.hpp"
#include "ising.hpp"

namespace treeising {

/// Partial sums S(0..t), S(k) = S(k-1) + theta^{-2k} / z_k^2 for generation
/// sizes z_0..z_t. With theta = 1/br this is sum br^{2k} |dT(k)|^{-2}.
inline std::vector<double> s_t_sum(std::span<const std::size_t> sizes, double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("s_t_sum: theta must be positive");
  std::vector<double> s(std::max<std::size_t>(sizes.size(), 1), 0.0);
  double scale = 1.0;
  for (std::size_t k = 1; k < sizes.size(); ++k) {
    scale /= theta * theta;
    const double z = static_cast<double>(sizes[k]);
    s[k] = s[k - 1] + (z > 0.0 ? scale / (z * z) : kInf);
  }
  return s;
}

/// k-regular generation sizes k (k-1)^{j-1}, j = 0..t.
inline std::vector<std::size_t> regular_profile(int k, int t) {
  std::vector<std::size_t> z{1};
  for (int j = 1; j <= t; ++j) z.push_back(j == 1 ? static_cast<std::size_t>(k) : z.back() * static_cast<std::size_t>(k - 1));
  return z;
}

/// Least-squares slope of S against t over k = 1..t.
inline double linear_growth_slope(std::span<const double> s) {
  if (s.size() < 3) return 0.0;
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 1; k < s.size(); ++k) {
    const double x = static_cast<double>(k);
    n += 1;
    sx += x;
    sy += s[k];
    sxx += x * x;
    sxy += x * s[k];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct PrunedTree {
  RootedGraph tree;            ///< T_t, relabeled in BFS order, root 0
  std::vector<Vertex> to_parent;
};

/// Keeps the vertices lying on some root ray of length t.
inline PrunedTree prune_to_rays(const RootedGraph& tree, int t) {
  const auto rooting = root_tree(tree);
  const std::size_t n = tree.size();
  std::vector<char> keep(n, 0);
  bool any = false;
  for (Vertex v = 0; v < n; ++v)
    if (rooting.depth[v] == t) {
      any = true;
      for (Vertex u = v;; u = rooting.parent[u]) {
        if (keep[u]) break;
        keep[u] = 1;
        if (u == rooting.parent[u]) break;
      }
    }
  if (!any) throw graph_error("prune_to_rays: no vertex at depth " + std::to_string(t));
  PrunedTree out;
  std::vector<Vertex> local(n, static_cast<Vertex>(n));
  for (Vertex v : rooting.order)
    if (keep[v]) {
      local[v] = static_cast<Vertex>(out.to_parent.size());
      out.to_parent.push_back(v);
    }
  std::vector<Edge> edges;
  for (Vertex v : rooting.order)
    if (keep[v] && v != rooting.parent[v]) edges.emplace_back(local[rooting.parent[v]], local[v]);
  out.tree = RootedGraph::from_edges(out.to_parent.size(), edges, 0);
  return out;
}

struct Capa3Options {
  double tol = 1e-3;           ///< stop when upper - lower <= tol
  std::size_t max_iter = 200000;
  bool reweighting = true;     ///< false: conditional gradient only
};

struct Capa3Result {
  double value = 0.0;          ///< strength of the returned feasible flow (lower bound)
  double upper = 0.0;          ///< dual certificate
  double gap = 0.0;
  std::size_t iterations = 0;
  double max_ray_load = 0.0;   ///< V of the returned flow (<= 1)
  std::vector<double> flow;    ///< per vertex: flow on the edge from its parent (root: strength)
  std::vector<double> resistance;  ///< per vertex: theta^{-depth}
};

/// Flow conservation residual: max over internal vertices of |in - sum out|.
inline double flow_conservation_error(const RootedGraph& tree, std::span<const double> flow) {
  const auto r = root_tree(tree);
  std::vector<double> out(tree.size(), 0.0);
  for (Vertex v : r.order)
    if (v != r.parent[v]) out[r.parent[v]] += flow[v];
  double worst = 0.0;
  for (Vertex v = 0; v < tree.size(); ++v)
    if (tree.degree(v) > (v == r.order.front() ? 0u : 1u)) worst = std::max(worst, std::abs(flow[v] - out[v]));
  return worst;
}

/// max over root-to-leaf rays of sum (flow(e) R(e))^2.
inline double max_ray_load(const RootedGraph& tree, std::span<const double> flow, double theta) {
  const auto r = root_tree(tree);
  std::vector<double> load(tree.size(), 0.0);
  double worst = 0.0;
  for (Vertex v : r.order) {
    if (v == r.parent[v]) continue;
    const double R = std::pow(theta, -r.depth[v]);
    load[v] = load[r.parent[v]] + (flow[v] * R) * (flow[v] * R);
    if (tree.degree(v) == 1) worst = std::max(worst, load[v]);
  }
  return worst;
}

/// capa_3(T_t) = sup |flow| subject to every ray load <= 1, via ray weights
/// lambda of the dual
///   max_lambda min_{unit flow} sum_e theta^{-2|e|} Lambda(e) flow(e)^2,
/// Lambda(e) = lambda-mass of rays through e. At the optimum Lambda equals the
/// minimizing flow, so the main step is the damped reweighting
/// Lambda <- sqrt(Lambda flow). Conditional-gradient steps take over if the
/// reweighting stalls. Every iterate yields a feasible flow (lower bound) and
/// a dual value (upper bound).
inline Capa3Result capa3_solve(const RootedGraph& tree, double theta, const Capa3Options& opt = {}) {
  if (!(theta > 0.0)) throw std::invalid_argument("capa3_solve: theta must be positive");
  const auto rt = root_tree(tree);
  const std::size_t n = tree.size();
  const Vertex root = rt.order.front();
  std::vector<Vertex> leaves;
  int t = -1;
  for (Vertex v : rt.order)
    if (v != root && tree.degree(v) == 1) {
      leaves.push_back(v);
      if (t < 0) t = rt.depth[v];
      else if (t != rt.depth[v]) throw graph_error("capa3_solve: leaves at mixed depths (prune to T_t first)");
    }
  Capa3Result res;
  res.resistance.assign(n, 1.0);
  std::vector<double> c(n, 0.0);
  for (Vertex v = 0; v < n; ++v) {
    res.resistance[v] = std::pow(theta, -rt.depth[v]);
    c[v] = res.resistance[v] * res.resistance[v];
  }
  res.flow.assign(n, 0.0);
  if (leaves.empty()) return res;  // single vertex: no ray, capa 0 by convention

  std::vector<std::vector<Vertex>> children(n);
  for (Vertex v : rt.order)
    if (v != root) children[rt.parent[v]].push_back(v);

  // Lambda(e) per child vertex, starting from uniform ray weights.
  std::vector<double> Lam(n, 0.0);
  for (Vertex y : leaves)
    for (Vertex u = y; u != root; u = rt.parent[u]) Lam[u] += 1.0 / static_cast<double>(leaves.size());

  std::vector<double> Reff(n, 0.0);  // effective resistance below v (leaves: 0)
  std::vector<double> branch(n, 0.0);  // r_e + Reff(child) for edge into v
  auto solve_resistances = [&] {
    for (auto it = rt.order.rbegin(); it != rt.order.rend(); ++it) {
      const Vertex v = *it;
      if (children[v].empty()) {
        Reff[v] = 0.0;
      } else {
        double g = 0.0;
        for (Vertex w : children[v]) g += 1.0 / branch[w];
        Reff[v] = 1.0 / g;
      }
      if (v != root) branch[v] = c[v] * Lam[v] + Reff[v];
    }
  };
  std::vector<double> flow(n), q(n);
  auto solve_flow = [&] {
    flow[root] = 1.0;
    q[root] = 0.0;
    for (Vertex v : rt.order) {
      if (children[v].empty()) continue;
      double g = 0.0;
      for (Vertex w : children[v]) g += 1.0 / branch[w];
      for (Vertex w : children[v]) {
        flow[w] = flow[v] * (1.0 / branch[w]) / g;
        q[w] = q[v] + c[w] * flow[w] * flow[w];
      }
    }
  };

  double best_lo = 0.0, best_hi = kInf;
  double last_gap = kInf;
  int stalled = 0;
  std::vector<double> best_flow;
  std::vector<Vertex> path;
  std::vector<double> off;  // off-path conductance at each path vertex
  for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
    solve_resistances();
    solve_flow();
    const double R = Reff[root];
    Vertex ystar = leaves.front();
    for (Vertex y : leaves)
      if (q[y] > q[ystar]) ystar = y;
    const double V = q[ystar];
    if (V > 0.0 && 1.0 / std::sqrt(V) > best_lo) {
      best_lo = 1.0 / std::sqrt(V);
      best_flow = flow;
    }
    if (R > 0.0) best_hi = std::min(best_hi, 1.0 / std::sqrt(R));
    if (best_hi - best_lo <= opt.tol) break;

    stalled = best_hi - best_lo < 0.999 * last_gap ? 0 : stalled + 1;
    last_gap = std::min(last_gap, best_hi - best_lo);
    if (opt.reweighting && stalled < 20) {
      for (Vertex v = 0; v < n; ++v) Lam[v] = std::sqrt(Lam[v] * flow[v]);
      continue;
    }

    // Exact line search along lambda <- (1 - g) lambda + g e_y*. Subtrees off
    // the chosen ray only rescale, so R(g) is evaluated along the ray.
    path.clear();
    for (Vertex u = ystar; u != root; u = rt.parent[u]) path.push_back(u);
    path.push_back(root);  // leaf first
    off.assign(path.size(), 0.0);
    for (std::size_t p = 1; p < path.size(); ++p) {
      double g = 0.0;
      for (Vertex w : children[path[p]])
        if (w != path[p - 1]) g += 1.0 / branch[w];
      off[p] = g;
    }
    auto R_of = [&](double gam) {
      double below = 0.0;  // effective resistance under path[p-1]
      for (std::size_t p = 1; p < path.size(); ++p) {
        const Vertex on = path[p - 1];
        const double r_on = c[on] * ((1.0 - gam) * Lam[on] + gam);
        const double g_on = 1.0 / (r_on + below);
        const double g_off = (1.0 - gam) > 0.0 ? off[p] / (1.0 - gam) : (off[p] > 0.0 ? kInf : 0.0);
        below = 1.0 / (g_on + g_off);
      }
      return below;
    };
    double a = 0.0, b = 1.0;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = R_of(x1), f2 = R_of(x2);
    for (int it = 0; it < 80 && b - a > 1e-15; ++it) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + phi * (b - a);
        f2 = R_of(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - phi * (b - a);
        f1 = R_of(x1);
      }
    }
    const double gam = 0.5 * (a + b);
    if (!(R_of(gam) > R)) {
      // No ascent along the vertex direction: lambda is optimal to precision.
      break;
    }
    for (Vertex v = 0; v < n; ++v) Lam[v] *= (1.0 - gam);
    for (Vertex u = ystar; u != root; u = rt.parent[u]) Lam[u] += gam;
  }
  const double V = max_ray_load(tree, best_flow, theta);
  const double scale = 1.0 / std::sqrt(V);
  for (Vertex v = 0; v < n; ++v) res.flow[v] = best_flow[v] * scale;
  res.value = scale;
  res.upper = best_hi;
  res.gap = best_hi - best_lo;
  res.max_ray_load = max_ray_load(tree, res.flow, theta);
  return res;
}

/// Per-edge CSV: child, parent, depth, flow, resistance.
inline void write_flow_csv(std::ostream& os, const RootedGraph& tree, const Capa3Result& res) {
  const auto r = root_tree(tree);
  const auto old = os.precision(17);
  os << "child,parent,depth,flow,resistance\n";
  for (Vertex v : r.order)
    if (v != r.parent[v]) os << v << ',' << r.parent[v] << ',' << r.depth[v] << ',' << res.flow[v] << ',' << res.resistance[v] << '\n';
  os.precision(old);
}

/// sup over h in (0, h_max] (points evenly spaced) of
/// f(h) sqrt(1 + (kappa h)^2) / (theta h) - 1; <= 0 means the envelope holds.
inline double f_envelope_check(double theta, double kappa, double h_max = 50.0, std::size_t points = 5000) {
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("f_envelope_check: theta must lie in (0, 1)");
  const double beta = std::atanh(theta);
  double worst = -kInf;
  for (std::size_t k = 1; k <= points; ++k) {
    const double h = h_max * static_cast<double>(k) / static_cast<double>(points);
    const double ratio = f_theta(h, beta) * std::sqrt(1.0 + (kappa * h) * (kappa * h)) / (theta * h);
    worst = std::max(worst, ratio - 1.0);
  }
  return worst;
}

/// Largest kappa (by bisection) whose envelope holds on the grid.
inline double max_admissible_kappa(double theta, double h_max = 50.0, std::size_t points = 5000) {
  double lo = 0.0, hi = 1.0;
  while (f_envelope_check(theta, hi, h_max, points) <= 1e-15) hi *= 2.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f_envelope_check(theta, mid, h_max, points) <= 1e-15) lo = mid;
    else hi = mid;
  }
  return lo;
}

}  // namespace treeising
