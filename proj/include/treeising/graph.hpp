#pragma once

// Rooted (multi)graphs, balls, rooted-isomorphism codes and ball statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace treeising {

using Vertex = std::uint32_t;
using Edge = std::pair<Vertex, Vertex>;
/// One +1/-1 mark per vertex.
using SpinConfig = std::vector<std::int8_t>;

inline constexpr std::size_t kMaxCanonicalNonTree = 12;

class graph_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finite multigraph on vertices 0..n-1 with a distinguished root and
/// optional vertex types. A loop at v is stored as two copies of v in
/// neighbors(v), so it contributes 2 to the degree.
class RootedGraph {
 public:
  RootedGraph() = default;

  static RootedGraph from_edges(std::size_t n, std::span<const Edge> edges, Vertex root = 0,
                                std::optional<std::vector<int>> types = std::nullopt) {
    RootedGraph g;
    g.adj_.resize(n);
    for (const auto& [a, b] : edges) {
      if (a >= n || b >= n) throw graph_error("edge endpoint out of range");
      g.adj_[a].push_back(b);
      g.adj_[b].push_back(a);
    }
    for (auto& list : g.adj_) std::sort(list.begin(), list.end());
    g.edge_count_ = edges.size();
    if (n > 0 && root >= n) throw graph_error("root out of range");
    g.root_ = root;
    if (types) {
      if (types->size() != n) throw graph_error("type vector length differs from vertex count");
      g.types_ = std::move(*types);
    }
    return g;
  }

  std::size_t size() const noexcept { return adj_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  Vertex root() const noexcept { return root_; }
  std::span<const Vertex> neighbors(Vertex v) const { return adj_.at(v); }
  std::size_t degree(Vertex v) const { return adj_.at(v).size(); }

  bool typed() const noexcept { return !types_.empty(); }
  int type(Vertex v) const { return typed() ? types_.at(v) : 0; }
  const std::vector<int>& types() const noexcept { return types_; }

  RootedGraph rerooted(Vertex v) const {
    if (v >= size()) throw graph_error("root out of range");
    RootedGraph g = *this;
    g.root_ = v;
    return g;
  }

  /// Edge list with a <= b; each loop and each parallel copy listed once.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count_);
    for (Vertex v = 0; v < size(); ++v) {
      std::size_t loops = 0;
      for (Vertex w : adj_[v]) {
        if (w > v) out.emplace_back(v, w);
        if (w == v) ++loops;
      }
      for (std::size_t k = 0; k < loops / 2; ++k) out.emplace_back(v, v);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::size_t loop_count() const {
    std::size_t twice = 0;
    for (Vertex v = 0; v < size(); ++v)
      twice += static_cast<std::size_t>(std::count(adj_[v].begin(), adj_[v].end(), v));
    return twice / 2;
  }

  /// Number of edges beyond the first between each vertex pair.
  std::size_t multi_edge_count() const {
    std::size_t extra = 0;
    for (Vertex v = 0; v < size(); ++v) {
      for (std::size_t k = 1; k < adj_[v].size(); ++k)
        if (adj_[v][k] == adj_[v][k - 1] && adj_[v][k] > v) ++extra;
    }
    return extra;
  }

  bool connected() const {
    if (size() == 0) return true;
    std::vector<char> seen(size(), 0);
    std::vector<Vertex> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const Vertex v = stack.back();
      stack.pop_back();
      for (Vertex w : adj_[v])
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          stack.push_back(w);
        }
    }
    return count == size();
  }

  bool is_tree() const { return size() > 0 && edge_count_ + 1 == size() && loop_count() == 0 && connected(); }

  friend bool operator==(const RootedGraph&, const RootedGraph&) = default;

 private:
  std::vector<std::vector<Vertex>> adj_;
  std::size_t edge_count_ = 0;
  Vertex root_ = 0;
  std::vector<int> types_;
};

/// A rooted graph with one +/-1 mark per vertex.
struct RootedNetwork {
  RootedGraph graph;
  SpinConfig marks;

  RootedNetwork(RootedGraph g, SpinConfig x) : graph(std::move(g)), marks(std::move(x)) {
    if (marks.size() != graph.size()) throw graph_error("marks length differs from vertex count");
    for (auto m : marks)
      if (m != 1 && m != -1) throw graph_error("marks must be +1 or -1");
  }
};

/// Graph distances from v, truncated at max_radius (unreached vertices get -1).
inline std::vector<int> bfs_distances(const RootedGraph& g, Vertex v, int max_radius = -1) {
  if (v >= g.size()) throw graph_error("vertex out of range");
  std::vector<int> dist(g.size(), -1);
  std::queue<Vertex> q;
  dist[v] = 0;
  q.push(v);
  while (!q.empty()) {
    const Vertex u = q.front();
    q.pop();
    if (max_radius >= 0 && dist[u] >= max_radius) continue;
    for (Vertex w : g.neighbors(u))
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        q.push(w);
      }
  }
  return dist;
}

/// Induced subgraph on B_v(t), rooted at the center (local id 0).
struct BallView {
  Vertex center = 0;
  int radius = 0;
  RootedGraph graph;
  std::vector<Vertex> to_parent;  ///< local id -> parent-graph id
  std::vector<int> depth;         ///< distance of each local vertex from the center
};

inline BallView ball(const RootedGraph& g, Vertex v, int t) {
  if (v >= g.size()) throw graph_error("ball: vertex out of range");
  if (t < 0) throw graph_error("ball: negative radius");
  BallView view;
  view.center = v;
  view.radius = t;
  std::vector<Vertex> local(g.size(), 0);
  std::vector<char> inside(g.size(), 0);
  std::queue<Vertex> q;
  q.push(v);
  inside[v] = 1;
  view.to_parent.push_back(v);
  view.depth.push_back(0);
  while (!q.empty()) {
    const Vertex u = q.front();
    q.pop();
    const int du = view.depth[local[u]];
    if (du == t) continue;
    for (Vertex w : g.neighbors(u))
      if (!inside[w]) {
        inside[w] = 1;
        local[w] = static_cast<Vertex>(view.to_parent.size());
        view.to_parent.push_back(w);
        view.depth.push_back(du + 1);
        q.push(w);
      }
  }
  std::vector<Edge> edges;
  for (Vertex lu = 0; lu < view.to_parent.size(); ++lu) {
    std::size_t loops = 0;
    for (Vertex w : g.neighbors(view.to_parent[lu])) {
      if (!inside[w]) continue;
      if (local[w] > lu) edges.emplace_back(lu, local[w]);
      if (local[w] == lu) ++loops;
    }
    for (std::size_t k = 0; k < loops / 2; ++k) edges.emplace_back(lu, lu);
  }
  std::optional<std::vector<int>> types;
  if (g.typed()) {
    types.emplace();
    for (Vertex p : view.to_parent) types->push_back(g.type(p));
  }
  view.graph = RootedGraph::from_edges(view.to_parent.size(), edges, 0, std::move(types));
  return view;
}

namespace detail {

inline std::string vertex_label(const RootedGraph& g, const SpinConfig* marks, Vertex v) {
  std::string s;
  if (g.typed()) s += std::to_string(g.type(v));
  if (marks) s += (*marks)[v] > 0 ? '+' : '-';
  return s;
}

inline std::string tree_code(const RootedGraph& g, const SpinConfig* marks) {
  const std::size_t n = g.size();
  std::vector<Vertex> order;
  std::vector<Vertex> parent(n, static_cast<Vertex>(n));
  order.reserve(n);
  order.push_back(g.root());
  parent[g.root()] = g.root();
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Vertex v = order[k];
    for (Vertex w : g.neighbors(v))
      if (parent[w] == n) {
        parent[w] = v;
        order.push_back(w);
      }
  }
  std::vector<std::string> code(n);
  std::vector<std::vector<std::string>> child_codes(n);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Vertex v = *it;
    auto& kids = child_codes[v];
    std::sort(kids.begin(), kids.end());
    std::string c = "(" + vertex_label(g, marks, v);
    for (auto& k : kids) c += k;
    c += ')';
    kids.clear();
    kids.shrink_to_fit();
    if (v != g.root()) child_codes[parent[v]].push_back(std::move(c));
    else code[v] = std::move(c);
  }
  return "T" + code[g.root()];
}

inline std::string small_graph_code(const RootedGraph& g, const SpinConfig* marks) {
  const std::size_t n = g.size();
  const auto dist = bfs_distances(g, g.root());
  // Isomorphism-invariant vertex signature; permutations only mix equal signatures.
  std::vector<std::string> sig(n);
  for (Vertex v = 0; v < n; ++v) {
    std::ostringstream os;
    os << dist[v] << '/' << vertex_label(g, marks, v) << '/' << g.degree(v);
    sig[v] = os.str();
  }
  std::vector<std::string> refined(n);
  for (Vertex v = 0; v < n; ++v) {
    std::vector<std::string> nb;
    for (Vertex w : g.neighbors(v)) nb.push_back(sig[w]);
    std::sort(nb.begin(), nb.end());
    std::string s = sig[v] + '[';
    for (auto& x : nb) s += x + ',';
    refined[v] = s + ']';
  }
  std::vector<Vertex> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Vertex a, Vertex b) {
    if ((a == g.root()) != (b == g.root())) return a == g.root();
    return refined[a] < refined[b];
  });
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && refined[order[j]] == refined[order[i]] && order[i] != g.root()) ++j;
    cells.emplace_back(i, j);
    i = j;
  }
  for (auto [lo, hi] : cells) std::sort(order.begin() + lo, order.begin() + hi);

  std::vector<std::vector<std::uint8_t>> mult(n, std::vector<std::uint8_t>(n, 0));
  for (Vertex v = 0; v < n; ++v)
    for (Vertex w : g.neighbors(v)) ++mult[v][w];

  std::string best;
  std::string current(n * n, '\0');
  for (;;) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) current[a * n + b] = static_cast<char>('0' + mult[order[a]][order[b]]);
    if (best.empty() || current < best) best = current;
    // Odometer over per-cell permutations.
    std::size_t c = 0;
    for (; c < cells.size(); ++c) {
      auto [lo, hi] = cells[c];
      if (std::next_permutation(order.begin() + lo, order.begin() + hi)) break;
    }
    if (c == cells.size()) break;
  }
  std::string head = "G" + std::to_string(n) + ":";
  for (Vertex v : order) head += refined[v] + ";";
  return head + "|" + best;
}

}  // namespace detail

/// Byte string equal for two rooted graphs iff they are rooted-isomorphic
/// (respecting types, and marks when given). Non-trees are limited to
/// kMaxCanonicalNonTree vertices.
inline std::string canonical_code(const RootedGraph& g, const SpinConfig* marks = nullptr) {
  if (marks && marks->size() != g.size()) throw graph_error("canonical_code: marks length mismatch");
  if (g.size() == 0) return "E";
  if (g.is_tree()) return detail::tree_code(g, marks);
  if (g.size() > kMaxCanonicalNonTree)
    throw graph_error("canonical_code: non-tree graph with " + std::to_string(g.size()) +
                      " vertices exceeds the exhaustive labeling limit");
  return detail::small_graph_code(g, marks);
}

inline std::string canonical_code(const RootedNetwork& net) { return canonical_code(net.graph, &net.marks); }

/// (1/n) sum_i deg(i) 1{deg(i) >= ell}.
inline double uniform_sparseness_stat(const RootedGraph& g, std::size_t ell) {
  if (g.size() == 0) return 0.0;
  double acc = 0.0;
  for (Vertex v = 0; v < g.size(); ++v)
    if (g.degree(v) >= ell) acc += static_cast<double>(g.degree(v));
  return acc / static_cast<double>(g.size());
}

using BallLaw = std::map<std::string, double>;

/// Law of the isomorphism class of B_v(t) for v uniform in g.
inline BallLaw empirical_ball_law(const RootedGraph& g, int t) {
  BallLaw law;
  if (g.size() == 0) return law;
  const double w = 1.0 / static_cast<double>(g.size());
  for (Vertex v = 0; v < g.size(); ++v) law[canonical_code(ball(g, v, t).graph)] += w;
  return law;
}

inline double total_variation(const BallLaw& p, const BallLaw& q) {
  double acc = 0.0;
  auto a = p.begin();
  auto b = q.begin();
  while (a != p.end() || b != q.end()) {
    if (b == q.end() || (a != p.end() && a->first < b->first)) {
      acc += std::abs(a->second);
      ++a;
    } else if (a == p.end() || b->first < a->first) {
      acc += std::abs(b->second);
      ++b;
    } else {
      acc += std::abs(a->second - b->second);
      ++a;
      ++b;
    }
  }
  return 0.5 * acc;
}

// Text format:
//   n m [typed]
//   i j            (m lines; loops as "i i", parallel edges repeated)
//   type i q       (typed graphs only)
//   root r         (only when r != 0)

inline void write_graph(std::ostream& os, const RootedGraph& g) {
  os << g.size() << ' ' << g.edge_count() << (g.typed() ? " typed" : "") << '\n';
  for (const auto& [a, b] : g.edges()) os << a << ' ' << b << '\n';
  if (g.typed())
    for (Vertex v = 0; v < g.size(); ++v) os << "type " << v << ' ' << g.type(v) << '\n';
  if (g.root() != 0) os << "root " << g.root() << '\n';
}

inline RootedGraph read_graph(std::istream& is) {
  std::string line;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      const auto p = line.find_first_not_of(" \t\r");
      if (p != std::string::npos && line[p] != '#') return true;
    }
    return false;
  };
  if (!next_line()) throw graph_error("graph file: missing header");
  std::istringstream head(line);
  std::size_t n = 0, m = 0;
  std::string flag;
  if (!(head >> n >> m)) throw graph_error("graph file: malformed header '" + line + "'");
  const bool typed = static_cast<bool>(head >> flag) && flag == "typed";
  if (!flag.empty() && flag != "typed") throw graph_error("graph file: unknown header flag '" + flag + "'");
  std::vector<Edge> edges;
  edges.reserve(m);
  std::optional<std::vector<int>> types;
  if (typed) types.emplace(n, -1);
  Vertex root = 0;
  while (next_line()) {
    std::istringstream ls(line);
    std::string first;
    ls >> first;
    if (first == "type") {
      long v = -1, q = -1;
      if (!typed || !(ls >> v >> q) || v < 0 || static_cast<std::size_t>(v) >= n || q < 0)
        throw graph_error("graph file: bad type line '" + line + "'");
      (*types)[static_cast<std::size_t>(v)] = static_cast<int>(q);
    } else if (first == "root") {
      long r = -1;
      if (!(ls >> r) || r < 0 || static_cast<std::size_t>(r) >= n) throw graph_error("graph file: bad root line");
      root = static_cast<Vertex>(r);
    } else {
      long a = -1, b = -1;
      std::istringstream es(line);
      if (!(es >> a >> b) || a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n)
        throw graph_error("graph file: bad edge line '" + line + "'");
      edges.emplace_back(static_cast<Vertex>(a), static_cast<Vertex>(b));
    }
  }
  if (edges.size() != m) throw graph_error("graph file: header says " + std::to_string(m) + " edges, found " +
                                           std::to_string(edges.size()));
  if (types && std::find(types->begin(), types->end(), -1) != types->end())
    throw graph_error("graph file: typed graph with unlabeled vertex");
  return RootedGraph::from_edges(n, edges, root, std::move(types));
}

}  // namespace treeising
