// Subtask-recognition diagnostics: k-means over subtask vectors and the
// adjusted mutual information between clusters and ground-truth goals.

#pragma once

#include "smaug/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <vector>

namespace smaug::cli {

struct KMeansResult {
  std::vector<int> labels;
  std::vector<std::vector<double>> centers;
  double inertia = 0.0;
};

namespace detail {

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

inline KMeansResult kmeans_once(const std::vector<std::vector<double>>& x, int k, std::mt19937_64& rng,
                                int max_iter) {
  const std::size_t n = x.size();
  KMeansResult r;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  r.centers.push_back(x[pick(rng)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x[i], r.centers[0]);
  while (static_cast<int>(r.centers.size()) < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t chosen = 0;
    if (total > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (chosen = 0; chosen + 1 < n; ++chosen) {
        u -= d2[chosen];
        if (u < 0.0) break;
      }
    } else {
      chosen = pick(rng);
    }
    r.centers.push_back(x[chosen]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x[i], r.centers.back()));
  }

  r.labels.assign(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    r.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = squared_distance(x[i], r.centers[static_cast<std::size_t>(c)]);
        if (d < best_d) best_d = d, best = c;
      }
      changed = changed || r.labels[i] != best;
      r.labels[i] = best;
      r.inertia += best_d;
    }
    if (!changed) break;
    std::vector<std::vector<double>> sum(static_cast<std::size_t>(k), std::vector<double>(x[0].size(), 0.0));
    std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(r.labels[i]);
      ++count[c];
      for (std::size_t j = 0; j < x[i].size(); ++j) sum[c][j] += x[i][j];
    }
    for (std::size_t c = 0; c < sum.size(); ++c) {
      if (count[c] == 0) continue;  // empty cluster keeps its center
      for (auto& v : sum[c]) v /= static_cast<double>(count[c]);
      r.centers[c] = sum[c];
    }
  }
  return r;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding; the best of n_init restarts by inertia.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& x, int k, std::uint64_t seed, int n_init = 10,
                           int max_iter = 300) {
  if (x.empty()) throw ArgumentError("kmeans: no points");
  if (k < 1) throw ArgumentError("kmeans: k must be >= 1");
  for (const auto& p : x)
    if (p.size() != x[0].size()) throw DimensionError("kmeans: points have different dimensions");
  k = std::min<int>(k, static_cast<int>(x.size()));
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, n_init); ++r) {
    auto cand = detail::kmeans_once(x, k, rng, max_iter);
    if (cand.inertia < best.inertia) best = std::move(cand);
  }
  return best;
}

/// Adjusted mutual information with arithmetic-mean normalization and the
/// exact hypergeometric expected mutual information. Natural logarithms.
inline double adjusted_mutual_information(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw DimensionError("adjusted_mutual_information: label vectors differ in length");
  const std::size_t n = a.size();
  if (n == 0) throw ArgumentError("adjusted_mutual_information: no labels");

  std::map<int, std::size_t> ia, ib;
  for (int v : a) ia.emplace(v, ia.size());
  for (int v : b) ib.emplace(v, ib.size());
  const std::size_t R = ia.size(), C = ib.size();
  if (R == 1 && C == 1) return 1.0;
  if (R == 1 || C == 1) return 0.0;

  std::vector<std::vector<double>> table(R, std::vector<double>(C, 0.0));
  for (std::size_t i = 0; i < n; ++i) table[ia[a[i]]][ib[b[i]]] += 1.0;
  std::vector<double> rows(R, 0.0), cols(C, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) rows[r] += table[r][c], cols[c] += table[r][c];
  const double N = static_cast<double>(n);

  double mi = 0.0;
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c)
      if (table[r][c] > 0) mi += table[r][c] / N * std::log(N * table[r][c] / (rows[r] * cols[c]));

  auto entropy = [&](const std::vector<double>& m) {
    double h = 0.0;
    for (double v : m)
      if (v > 0) h -= v / N * std::log(v / N);
    return h;
  };
  const double ha = entropy(rows), hb = entropy(cols);

  double emi = 0.0;
  const double lgN = std::lgamma(N + 1.0);
  for (double ai : rows) {
    for (double bj : cols) {
      const double lo = std::max(1.0, ai + bj - N), hi = std::min(ai, bj);
      for (double nij = lo; nij <= hi; nij += 1.0) {
        const double term = nij / N * std::log(N * nij / (ai * bj));
        const double log_p = std::lgamma(ai + 1) + std::lgamma(bj + 1) + std::lgamma(N - ai + 1) +
                             std::lgamma(N - bj + 1) - lgN - std::lgamma(nij + 1) - std::lgamma(ai - nij + 1) -
                             std::lgamma(bj - nij + 1) - std::lgamma(N - ai - bj + nij + 1);
        emi += term * std::exp(log_p);
      }
    }
  }

  double denom = 0.5 * (ha + hb) - emi;
  const double eps = std::numeric_limits<double>::epsilon();
  denom = denom < 0 ? std::min(denom, -eps) : std::max(denom, eps);
  double numer = mi - emi;
  numer = numer < 0 ? std::min(numer, -eps) : std::max(numer, eps);
  return numer / denom;
}

/// Clusters the vectors into k groups and scores the clustering against goals.
inline double alignment_score(const std::vector<std::vector<double>>& z, const std::vector<int>& goals, int k,
                              std::uint64_t seed, int n_init = 10) {
  if (z.size() != goals.size()) throw DimensionError("alignment_score: vectors and goals differ in count");
  const auto clusters = kmeans(z, k, seed, n_init);
  return adjusted_mutual_information(clusters.labels, goals);
}

}  // namespace smaug::cli
