#pragma once

// Multi-type offspring laws and their size-biased kernels.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace treeising {

/// Offspring-type count vector k: k[j] children of type j.
using CountVector = std::vector<int>;

struct WeightedCount {
  CountVector k;
  double prob = 0.0;
};

inline int total(const CountVector& k) { return std::accumulate(k.begin(), k.end(), 0); }

class law_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Type weights theta over a finite type set Q and per-type finitely
/// supported laws P_i over count vectors.
struct OffspringLaw {
  std::vector<std::string> type_names;
  std::vector<double> theta;
  std::vector<std::vector<WeightedCount>> P;

  std::size_t type_count() const noexcept { return theta.size(); }

  /// A(i,j) = sum_k P_i(k) k_j.
  double mean(std::size_t i, std::size_t j) const {
    double a = 0.0;
    for (const auto& [k, p] : P.at(i)) a += p * k.at(j);
    return a;
  }

  /// Mean degree of a theta-distributed vertex.
  double mean_degree() const {
    double d = 0.0;
    for (std::size_t i = 0; i < type_count(); ++i)
      for (const auto& [k, p] : P[i]) d += theta[i] * p * total(k);
    return d;
  }

  int min_degree() const {
    int d = std::numeric_limits<int>::max();
    for (const auto& row : P)
      for (const auto& [k, p] : row)
        if (p > 0) d = std::min(d, total(k));
    return d;
  }

  bool deterministic() const {
    if (type_count() != 1) return false;
    int support = 0;
    for (const auto& [k, p] : P[0]) support += p > 0;
    return support == 1;
  }

  /// Throws law_error describing the first violated invariant.
  void validate(double tol = 1e-12) const {
    const std::size_t q = type_count();
    if (q == 0) throw law_error("offspring law: empty type set");
    if (P.size() != q) throw law_error("offspring law: P has " + std::to_string(P.size()) + " rows for " +
                                       std::to_string(q) + " types");
    if (!type_names.empty() && type_names.size() != q) throw law_error("offspring law: Q/theta length mismatch");
    double ts = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      if (!(theta[i] > 0.0)) throw law_error("offspring law: theta[" + std::to_string(i) + "] must be positive");
      ts += theta[i];
    }
    if (std::abs(ts - 1.0) > 1e-9) throw law_error("offspring law: theta sums to " + std::to_string(ts));
    for (std::size_t i = 0; i < q; ++i) {
      if (P[i].empty()) throw law_error("offspring law: P[" + std::to_string(i) + "] is empty");
      double s = 0.0;
      for (const auto& [k, p] : P[i]) {
        if (k.size() != q) throw law_error("offspring law: count vector of wrong length in P[" + std::to_string(i) + "]");
        for (int c : k)
          if (c < 0) throw law_error("offspring law: negative count in P[" + std::to_string(i) + "]");
        if (!(p >= 0.0)) throw law_error("offspring law: negative probability in P[" + std::to_string(i) + "]");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-9) throw law_error("offspring law: P[" + std::to_string(i) + "] sums to " + std::to_string(s));
    }
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = i + 1; j < q; ++j) {
        const double lhs = theta[i] * mean(i, j);
        const double rhs = theta[j] * mean(j, i);
        if (std::abs(lhs - rhs) > tol * std::max(1.0, std::max(lhs, rhs)))
          throw law_error("offspring law: balance theta(i)A(i,j) = theta(j)A(j,i) fails for (" + std::to_string(i) +
                          "," + std::to_string(j) + ")");
      }
  }

  /// Single-type law from (degree, probability) pairs.
  static OffspringLaw single_type(const std::vector<std::pair<int, double>>& degrees) {
    OffspringLaw law;
    law.type_names = {"0"};
    law.theta = {1.0};
    law.P.resize(1);
    for (auto [k, p] : degrees) law.P[0].push_back({{k}, p});
    return law;
  }

  /// Poisson(mean) truncated where the remaining tail drops below `tail`, renormalized.
  static std::vector<double> truncated_poisson(double mean, double tail = 1e-8) {
    if (!(mean >= 0.0)) throw law_error("poisson: mean must be non-negative");
    std::vector<double> pmf;
    double cum = 0.0;
    for (int k = 0;; ++k) {
      const double p = std::exp(-mean + k * std::log(std::max(mean, 1e-300)) - std::lgamma(k + 1.0));
      pmf.push_back(k == 0 ? std::exp(-mean) : p);
      cum += pmf.back();
      if (1.0 - cum < tail && k >= mean) break;
    }
    for (auto& p : pmf) p /= cum;
    return pmf;
  }

  static OffspringLaw poisson(double mean, double tail = 1e-8) {
    const auto pmf = truncated_poisson(mean, tail);
    std::vector<std::pair<int, double>> d;
    for (std::size_t k = 0; k < pmf.size(); ++k) d.emplace_back(static_cast<int>(k), pmf[k]);
    return single_type(d);
  }

  /// Random q-partite recipe: theta uniform, P_i(k) = prod_{l != i} Poi(k_l) with
  /// Poisson mean 2 alpha q / (q - 1), and k_i = 0.
  static OffspringLaw q_partite(int q, double alpha, double tail = 1e-8) {
    if (q < 2) throw law_error("q_partite: q must be at least 2");
    const auto pmf = truncated_poisson(2.0 * alpha * q / (q - 1), tail);
    OffspringLaw law;
    law.theta.assign(static_cast<std::size_t>(q), 1.0 / q);
    law.P.resize(static_cast<std::size_t>(q));
    for (int i = 0; i < q; ++i) {
      law.type_names.push_back(std::to_string(i));
      CountVector k(static_cast<std::size_t>(q), 0);
      // Odometer over coordinates l != i.
      for (;;) {
        double p = 1.0;
        for (int l = 0; l < q; ++l)
          if (l != i) p *= pmf[static_cast<std::size_t>(k[l])];
        law.P[i].push_back({k, p});
        int l = 0;
        for (; l < q; ++l) {
          if (l == i) continue;
          if (++k[l] < static_cast<int>(pmf.size())) break;
          k[l] = 0;
        }
        if (l == q) break;
      }
    }
    return law;
  }
};

inline void to_json(nlohmann::json& j, const OffspringLaw& law) {
  j = nlohmann::json::object();
  j["Q"] = law.type_names.empty() ? nlohmann::json(law.type_count()) : nlohmann::json(law.type_names);
  j["theta"] = law.theta;
  nlohmann::json P = nlohmann::json::object();
  for (std::size_t i = 0; i < law.type_count(); ++i) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [k, p] : law.P[i]) rows.push_back(nlohmann::json::array({k, p}));
    P[law.type_names.empty() ? std::to_string(i) : law.type_names[i]] = rows;
  }
  j["P"] = P;
}

inline void from_json(const nlohmann::json& j, OffspringLaw& law) {
  law = OffspringLaw{};
  if (!j.is_object()) throw law_error("offspring law JSON: expected an object");
  for (const char* key : {"Q", "theta", "P"})
    if (!j.contains(key)) throw law_error(std::string("offspring law JSON: missing field '") + key + "'");
  const auto& Q = j.at("Q");
  if (Q.is_number_integer()) {
    const auto q = Q.get<long>();
    if (q <= 0) throw law_error("offspring law JSON: Q must be positive");
    for (long i = 0; i < q; ++i) law.type_names.push_back(std::to_string(i));
  } else if (Q.is_array()) {
    law.type_names = Q.get<std::vector<std::string>>();
  } else {
    throw law_error("offspring law JSON: Q must be an integer or an array of names");
  }
  const auto& theta = j.at("theta");
  if (!theta.is_array()) throw law_error("offspring law JSON: theta must be an array");
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (!theta[i].is_number()) throw law_error("offspring law JSON: theta[" + std::to_string(i) + "] must be a number");
  law.theta = theta.get<std::vector<double>>();
  if (law.theta.size() != law.type_names.size()) throw law_error("offspring law JSON: theta length differs from |Q|");
  law.P.resize(law.type_names.size());
  const auto& P = j.at("P");
  if (!P.is_object()) throw law_error("offspring law JSON: P must be an object keyed by type");
  for (std::size_t i = 0; i < law.type_names.size(); ++i) {
    const auto& name = law.type_names[i];
    if (!P.contains(name)) throw law_error("offspring law JSON: P." + name + " missing");
    const auto& rows = P.at(name);
    if (!rows.is_array()) throw law_error("offspring law JSON: P." + name + " must be an array of [k, prob] rows");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows[r];
      const std::string where = "P." + name + "[" + std::to_string(r) + "]";
      if (!row.is_array() || row.size() != 2) throw law_error("offspring law JSON: " + where + " must be [k, prob]");
      if (!row[1].is_number()) throw law_error("offspring law JSON: " + where + "[1] must be a number");
      if (!row[0].is_number_integer() && !row[0].is_array()) throw law_error("offspring law JSON: " + where + "[0] must be a count or count vector");
      WeightedCount wc;
      if (row[0].is_number_integer()) wc.k = {row[0].get<int>()};
      else wc.k = row[0].get<CountVector>();
      wc.prob = row[1].get<double>();
      law.P[i].push_back(std::move(wc));
    }
  }
  law.validate();
}

/// Size-biased kernel rho_{i,j}(k) = P_i(k + e_j)(k_j + 1)/A(i,j) on the pairs
/// Q_A = {(i,j) : A(i,j) > 0}, with its mean matrix A_rho over Q_A.
struct SizeBiasedKernel {
  std::size_t type_count = 0;
  std::vector<std::pair<int, int>> pairs;
  std::vector<std::vector<int>> pair_index;  ///< [i][j] -> index into pairs, -1 if A(i,j) = 0
  std::vector<std::vector<WeightedCount>> rho;
  std::vector<std::vector<double>> mean_matrix;

  const std::vector<WeightedCount>& law(int i, int j) const {
    const int idx = pair_index.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j));
    if (idx < 0)
      throw law_error("size-biased kernel: A(" + std::to_string(i) + "," + std::to_string(j) + ") = 0");
    return rho[static_cast<std::size_t>(idx)];
  }

  double probability(int i, int j, const CountVector& k) const {
    for (const auto& wc : law(i, j))
      if (wc.k == k) return wc.prob;
    return 0.0;
  }
};

inline SizeBiasedKernel size_bias(const OffspringLaw& law) {
  const std::size_t q = law.type_count();
  SizeBiasedKernel K;
  K.type_count = q;
  K.pair_index.assign(q, std::vector<int>(q, -1));
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < q; ++j) {
      const double a = law.mean(i, j);
      if (!(a > 0.0)) continue;
      std::vector<WeightedCount> dist;
      for (const auto& [k, p] : law.P[i]) {
        if (k[j] == 0 || p == 0.0) continue;
        CountVector km = k;
        --km[j];
        dist.push_back({std::move(km), p * k[j] / a});
      }
      std::sort(dist.begin(), dist.end(), [](const auto& x, const auto& y) { return x.k < y.k; });
      K.pair_index[i][j] = static_cast<int>(K.pairs.size());
      K.pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
      K.rho.push_back(std::move(dist));
    }
  const std::size_t m = K.pairs.size();
  K.mean_matrix.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < m; ++a) {
    const auto [i1, j1] = K.pairs[a];
    for (std::size_t b = 0; b < m; ++b) {
      const auto [i2, j2] = K.pairs[b];
      if (j2 != i1) continue;
      double s = 0.0;
      for (const auto& [k, p] : K.rho[a]) s += p * k[static_cast<std::size_t>(i2)];
      K.mean_matrix[a][b] = s;
    }
  }
  return K;
}

/// Some rho_{i,j} puts mass on a count vector with ||k|| != 1.
inline bool non_singular(const SizeBiasedKernel& kernel) {
  for (const auto& dist : kernel.rho)
    for (const auto& [k, p] : dist)
      if (p > 0.0 && total(k) != 1) return true;
  return false;
}

/// True when some power A^r (r up to Wielandt's bound) is entrywise positive.
inline bool positive_regular(const std::vector<std::vector<double>>& A) {
  const std::size_t m = A.size();
  if (m == 0) return false;
  std::vector<std::vector<char>> base(m, std::vector<char>(m)), power;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) base[a][b] = A[a][b] > 0.0;
  power = base;
  const std::size_t bound = m * m - 2 * m + 2;
  for (std::size_t r = 1; r <= bound; ++r) {
    bool all = true;
    for (const auto& row : power)
      for (char c : row) all = all && c;
    if (all) return true;
    std::vector<std::vector<char>> next(m, std::vector<char>(m, 0));
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t c = 0; c < m; ++c)
        if (power[a][c])
          for (std::size_t b = 0; b < m; ++b) next[a][b] = next[a][b] || base[c][b];
    power = std::move(next);
  }
  return false;
}

/// Perron root of the kernel's mean matrix by power iteration.
inline double spectral_radius(const SizeBiasedKernel& kernel, double rel_tol = 1e-10) {
  const auto& A = kernel.mean_matrix;
  for (const auto& row : A)
    for (double x : row)
      if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
  if (!positive_regular(A)) throw law_error("spectral_radius: mean matrix is not positive regular");
  const std::size_t m = A.size();
  std::vector<double> v(m, 1.0), w(m);
  double r = 0.0;
  for (int it = 0; it < 1000000; ++it) {
    for (std::size_t a = 0; a < m; ++a) {
      w[a] = 0.0;
      for (std::size_t b = 0; b < m; ++b) w[a] += A[a][b] * v[b];
    }
    const double norm = std::accumulate(w.begin(), w.end(), 0.0);
    const double prev = std::accumulate(v.begin(), v.end(), 0.0);
    const double next_r = norm / prev;
    for (std::size_t a = 0; a < m; ++a) v[a] = w[a] / norm;
    if (it > 0 && std::abs(next_r - r) <= rel_tol * next_r) return next_r;
    r = next_r;
  }
  return r;
}

/// Branching number of the UMGW tree (conditioned on survival): r(A_rho).
inline double branching_number(const OffspringLaw& law) { return spectral_radius(size_bias(law)); }

/// Critical inverse temperature with tanh(beta_c) br = 1; +infinity when br <= 1.
inline double beta_c(double br) {
  if (!(br > 1.0)) return std::numeric_limits<double>::infinity();
  return std::atanh(1.0 / br);
}

}  // namespace treeising
