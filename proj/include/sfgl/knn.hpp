#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sfgl/csr.hpp"
#include "sfgl/graph.hpp"
#include "sfgl/parallel.hpp"

namespace sfgl {

namespace detail {

struct RowView {
  const std::size_t* idx;
  const double* val;
  std::size_t len;
};

inline RowView row_of(const SparseFeatureMatrix& m, std::size_t r) {
  return {m.col_idx.data() + m.row_ptr[r], m.values.data() + m.row_ptr[r],
          m.row_ptr[r + 1] - m.row_ptr[r]};
}

inline double dot(RowView a, RowView b) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.len && j < b.len) {
    if (a.idx[i] < b.idx[j]) ++i;
    else if (b.idx[j] < a.idx[i]) ++j;
    else s += a.val[i++] * b.val[j++];
  }
  return s;
}

inline double sq_norm(RowView a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.len; ++i) s += a.val[i] * a.val[i];
  return s;
}

inline double sq_euclidean(RowView a, RowView b) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.len || j < b.len) {
    if (j == b.len || (i < a.len && a.idx[i] < b.idx[j])) {
      s += a.val[i] * a.val[i];
      ++i;
    } else if (i == a.len || b.idx[j] < a.idx[i]) {
      s += b.val[j] * b.val[j];
      ++j;
    } else {
      double d = a.val[i++] - b.val[j++];
      s += d * d;
    }
  }
  return s;
}

inline double manhattan_dist(RowView a, RowView b) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.len || j < b.len) {
    if (j == b.len || (i < a.len && a.idx[i] < b.idx[j])) {
      s += std::abs(a.val[i]);
      ++i;
    } else if (i == a.len || b.idx[j] < a.idx[i]) {
      s += std::abs(b.val[j]);
      ++j;
    } else {
      s += std::abs(a.val[i++] - b.val[j++]);
    }
  }
  return s;
}

}  // namespace detail

// Similarity score, higher = more similar. Distances are negated so the
// ordering convention is uniform across metrics. A zero-norm vector under
// cosine scores 0 against everything (its direction is undefined).
inline double similarity(const SparseFeatureMatrix& a, std::size_t i,
                         const SparseFeatureMatrix& b, std::size_t j, Metric metric) {
  if (a.n_cols != b.n_cols)
    fail(errc::shape, "similarity: dimension mismatch " + std::to_string(a.n_cols) +
                          " vs " + std::to_string(b.n_cols));
  if (i >= a.n_rows || j >= b.n_rows) fail(errc::bounds, "similarity: row out of range");
  auto u = detail::row_of(a, i);
  auto v = detail::row_of(b, j);
  switch (metric) {
    case Metric::cosine: {
      double nu = detail::sq_norm(u), nv = detail::sq_norm(v);
      if (nu == 0.0 || nv == 0.0) return 0.0;
      return detail::dot(u, v) / (std::sqrt(nu) * std::sqrt(nv));
    }
    case Metric::euclidean:
      return -std::sqrt(detail::sq_euclidean(u, v));
    case Metric::manhattan:
      return -detail::manhattan_dist(u, v);
  }
  fail(errc::config, "bad metric");
}

inline double similarity(const SparseFeatureMatrix& m, std::size_t i, std::size_t j,
                         Metric metric) {
  return similarity(m, i, m, j, metric);
}

// Exhaustive exact top-k selection per row. Ties resolve to the lower
// candidate index, so the result is deterministic and matches brute force.
inline DirectedKnnGraph build_knn_graph(const SparseFeatureMatrix& f, std::size_t k,
                                        Metric metric) {
  f.validate();
  if (f.n_rows < 2) fail(errc::contract, "build_knn_graph needs at least 2 rows");
  if (k == 0) fail(errc::contract, "build_knn_graph needs k >= 1");
  if (k >= f.n_rows) {
    warn("k=" + std::to_string(k) + " clamped to n-1=" + std::to_string(f.n_rows - 1));
    k = f.n_rows - 1;
  }

  std::size_t n = f.n_rows;
  std::vector<double> norm;
  if (metric == Metric::cosine) {
    norm.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      norm[i] = std::sqrt(detail::sq_norm(detail::row_of(f, i)));
  }

  DirectedKnnGraph g;
  g.n_nodes = n;
  g.k = k;
  g.metric = metric;
  g.out_adj.assign(n, {});

  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(n - 1);
    for (std::size_t i = lo; i < hi; ++i) {
      cand.clear();
      auto u = detail::row_of(f, i);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        auto v = detail::row_of(f, j);
        double score;
        switch (metric) {
          case Metric::cosine:
            score = (norm[i] == 0.0 || norm[j] == 0.0)
                        ? 0.0
                        : detail::dot(u, v) / (norm[i] * norm[j]);
            break;
          case Metric::euclidean:
            score = -std::sqrt(detail::sq_euclidean(u, v));
            break;
          default:
            score = -detail::manhattan_dist(u, v);
        }
        cand.emplace_back(score, j);
      }
      auto better = [](const std::pair<double, std::size_t>& a,
                       const std::pair<double, std::size_t>& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      };
      std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), better);
      auto& nb = g.out_adj[i];
      nb.resize(k);
      for (std::size_t t = 0; t < k; ++t) nb[t] = cand[t].second;
      std::sort(nb.begin(), nb.end());
    }
  });
  return g;
}

}  // namespace sfgl
