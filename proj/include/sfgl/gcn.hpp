#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sfgl/csr.hpp"
#include "sfgl/error.hpp"
#include "sfgl/graph.hpp"
#include "sfgl/labels.hpp"
#include "sfgl/parallel.hpp"
#include "sfgl/rng.hpp"

namespace sfgl {

// Row-major dense matrix.
template <typename T>
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<T> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, T(0)) {}

  T* row(std::size_t i) { return a.data() + i * cols; }
  const T* row(std::size_t i) const { return a.data() + i * cols; }
  T& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  const T& at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  bool all_finite() const {
    for (auto v : a)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

// Symmetric propagation operator D^-1/2 (A+I) D^-1/2 in CSR form,
// diagonal entry present for every node.
struct NormalizedAdjacency {
  std::size_t n_nodes = 0;
  std::vector<std::size_t> ptr, idx;
  std::vector<double> val;
};

inline NormalizedAdjacency normalize_adjacency(const UndirectedGraph& g) {
  try {
    g.validate();
  } catch (const Error& e) {
    fail(errc::contract, std::string("normalize_adjacency: ") + e.what());
  }
  std::size_t n = g.n_nodes;
  std::vector<double> inv_sqrt(n);
  for (std::size_t u = 0; u < n; ++u)
    inv_sqrt[u] = 1.0 / std::sqrt(static_cast<double>(g.adj[u].size()) + 1.0);

  NormalizedAdjacency a;
  a.n_nodes = n;
  a.ptr.assign(n + 1, 0);
  for (std::size_t u = 0; u < n; ++u) a.ptr[u + 1] = a.ptr[u] + g.adj[u].size() + 1;
  a.idx.resize(a.ptr[n]);
  a.val.resize(a.ptr[n]);
  for (std::size_t u = 0; u < n; ++u) {
    std::size_t p = a.ptr[u];
    bool placed_diag = false;
    for (auto v : g.adj[u]) {
      if (!placed_diag && u < v) {
        a.idx[p] = u;
        a.val[p++] = inv_sqrt[u] * inv_sqrt[u];
        placed_diag = true;
      }
      a.idx[p] = v;
      a.val[p++] = inv_sqrt[u] * inv_sqrt[v];
    }
    if (!placed_diag) {
      a.idx[p] = u;
      a.val[p++] = inv_sqrt[u] * inv_sqrt[u];
    }
  }
  return a;
}

namespace detail {

// Y = A * X with 64-bit row accumulation; deterministic per-row order.
template <typename TIn, typename TOut>
void spmm(const NormalizedAdjacency& A, const Mat<TIn>& x, Mat<TOut>& y) {
  if (x.rows != A.n_nodes) fail(errc::shape, "spmm: row mismatch");
  y = Mat<TOut>(x.rows, x.cols);
  std::size_t d = x.cols;
  parallel_for(A.n_nodes, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> acc(d);
    for (std::size_t i = lo; i < hi; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t p = A.ptr[i]; p < A.ptr[i + 1]; ++p) {
        double w = A.val[p];
        const TIn* xr = x.row(A.idx[p]);
        for (std::size_t c = 0; c < d; ++c) acc[c] += w * static_cast<double>(xr[c]);
      }
      TOut* yr = y.row(i);
      for (std::size_t c = 0; c < d; ++c) yr[c] = static_cast<TOut>(acc[c]);
    }
  });
}

// Y = F * W (sparse rows times dense weights), 64-bit accumulation.
template <typename TW, typename TOut>
void feat_matmul(const SparseFeatureMatrix& f, const Mat<TW>& w, Mat<TOut>& y) {
  if (w.rows != f.n_cols) fail(errc::shape, "feat_matmul: dimension mismatch");
  y = Mat<TOut>(f.n_rows, w.cols);
  std::size_t d = w.cols;
  parallel_for(f.n_rows, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> acc(d);
    for (std::size_t i = lo; i < hi; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t p = f.row_ptr[i]; p < f.row_ptr[i + 1]; ++p) {
        double v = f.values[p];
        const TW* wr = w.row(f.col_idx[p]);
        for (std::size_t c = 0; c < d; ++c) acc[c] += v * static_cast<double>(wr[c]);
      }
      TOut* yr = y.row(i);
      for (std::size_t c = 0; c < d; ++c) yr[c] = static_cast<TOut>(acc[c]);
    }
  });
}

// Y = X * W [+ bias], 64-bit accumulation.
template <typename TIn, typename TW, typename TOut>
void dense_matmul(const Mat<TIn>& x, const Mat<TW>& w, const std::vector<TW>* bias,
                  Mat<TOut>& y) {
  if (x.cols != w.rows) fail(errc::shape, "dense_matmul: dimension mismatch");
  y = Mat<TOut>(x.rows, w.cols);
  std::size_t k = x.cols, d = w.cols;
  parallel_for(x.rows, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> acc(d);
    for (std::size_t i = lo; i < hi; ++i) {
      if (bias)
        for (std::size_t c = 0; c < d; ++c) acc[c] = static_cast<double>((*bias)[c]);
      else
        std::fill(acc.begin(), acc.end(), 0.0);
      const TIn* xr = x.row(i);
      for (std::size_t t = 0; t < k; ++t) {
        double v = static_cast<double>(xr[t]);
        if (v == 0.0) continue;
        const TW* wr = w.row(t);
        for (std::size_t c = 0; c < d; ++c) acc[c] += v * static_cast<double>(wr[c]);
      }
      TOut* yr = y.row(i);
      for (std::size_t c = 0; c < d; ++c) yr[c] = static_cast<TOut>(acc[c]);
    }
  });
}

// Y = X^T * H accumulated sequentially (deterministic), X sparse.
template <typename TIn, typename TOut>
void feat_t_matmul(const SparseFeatureMatrix& f, const Mat<TIn>& h, Mat<TOut>& y) {
  if (h.rows != f.n_rows) fail(errc::shape, "feat_t_matmul: row mismatch");
  std::size_t d = h.cols;
  Mat<double> acc(f.n_cols, d);
  for (std::size_t i = 0; i < f.n_rows; ++i) {
    const TIn* hr = h.row(i);
    for (std::size_t p = f.row_ptr[i]; p < f.row_ptr[i + 1]; ++p) {
      double v = f.values[p];
      double* ar = acc.row(f.col_idx[p]);
      for (std::size_t c = 0; c < d; ++c) ar[c] += v * static_cast<double>(hr[c]);
    }
  }
  y = Mat<TOut>(f.n_cols, d);
  for (std::size_t i = 0; i < y.a.size(); ++i) y.a[i] = static_cast<TOut>(acc.a[i]);
}

// Y = X^T * H, both dense.
template <typename TA, typename TB, typename TOut>
void dense_t_matmul(const Mat<TA>& x, const Mat<TB>& h, Mat<TOut>& y) {
  if (x.rows != h.rows) fail(errc::shape, "dense_t_matmul: row mismatch");
  Mat<double> acc(x.cols, h.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const TA* xr = x.row(i);
    const TB* hr = h.row(i);
    for (std::size_t r = 0; r < x.cols; ++r) {
      double v = static_cast<double>(xr[r]);
      if (v == 0.0) continue;
      double* ar = acc.row(r);
      for (std::size_t c = 0; c < h.cols; ++c) ar[c] += v * static_cast<double>(hr[c]);
    }
  }
  y = Mat<TOut>(x.cols, h.cols);
  for (std::size_t i = 0; i < y.a.size(); ++i) y.a[i] = static_cast<TOut>(acc.a[i]);
}

}  // namespace detail

struct GcnHyper {
  std::size_t hidden = 128;
  double learning_rate = 0.001;
  double dropout = 0.5;
  double weight_decay = 0.0005;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
};

template <typename T>
struct GcnParams {
  Mat<T> w1;           // d_in x hidden
  std::vector<T> b1;   // hidden
  Mat<T> w2;           // hidden x n_classes
  std::vector<T> b2;   // n_classes
  GcnHyper hyper;

  std::size_t d_in() const { return w1.rows; }
  std::size_t hidden() const { return w1.cols; }
  std::size_t n_classes() const { return w2.cols; }

  void validate() const {
    if (w1.cols != w2.rows || b1.size() != w1.cols || b2.size() != w2.cols)
      fail(errc::shape, "parameter shapes are inconsistent");
    if (!w1.all_finite() || !w2.all_finite())
      fail(errc::contract, "non-finite parameter");
  }

  // Seeded Glorot-uniform weights, zero biases.
  static GcnParams glorot(std::size_t d_in, std::size_t hidden, std::size_t n_classes,
                          GcnHyper hyper) {
    GcnParams p;
    p.hyper = hyper;
    p.w1 = Mat<T>(d_in, hidden);
    p.b1.assign(hidden, T(0));
    p.w2 = Mat<T>(hidden, n_classes);
    p.b2.assign(n_classes, T(0));
    Rng rng(mix_seed(hyper.seed, 0));
    double lim1 = std::sqrt(6.0 / static_cast<double>(d_in + hidden));
    for (auto& v : p.w1.a) v = static_cast<T>(rng.uniform(-lim1, lim1));
    double lim2 = std::sqrt(6.0 / static_cast<double>(hidden + n_classes));
    for (auto& v : p.w2.a) v = static_cast<T>(rng.uniform(-lim2, lim2));
    return p;
  }
};

template <typename T>
struct ForwardCache {
  Mat<T> pre1;    // A F W1 + b1
  Mat<T> a1d;     // dropout(relu(pre1))
  Mat<T> s2;      // A a1d
  Mat<T> logits;  // s2 W2 + b2
  Mat<T> z;       // row softmax
  std::vector<std::uint8_t> mask;  // dropout keep mask (training only)
};

// Z = softmax(A relu(A F W1 + b1) W2 + b2). Dropout (inverted scaling
// 1/(1-p)) is applied to the hidden activations only when a training rng
// is supplied.
template <typename T>
void gcn_forward(const GcnParams<T>& params, const NormalizedAdjacency& adj,
                 const SparseFeatureMatrix& f, Rng* dropout_rng, ForwardCache<T>& cache) {
  params.validate();
  if (f.n_rows != adj.n_nodes) fail(errc::shape, "gcn_forward: graph/feature row mismatch");
  if (f.n_cols != params.w1.rows)
    fail(errc::shape, "gcn_forward: feature dimension " + std::to_string(f.n_cols) +
                          " does not match W1 rows " + std::to_string(params.w1.rows));

  std::size_t n = f.n_rows, h = params.hidden();

  Mat<T> t1;
  detail::feat_matmul(f, params.w1, t1);
  detail::spmm(adj, t1, cache.pre1);
  for (std::size_t i = 0; i < n; ++i) {
    T* r = cache.pre1.row(i);
    for (std::size_t c = 0; c < h; ++c) r[c] = static_cast<T>(r[c] + params.b1[c]);
  }
  if (!cache.pre1.all_finite()) fail(errc::numeric, "non-finite value in layer1");

  cache.a1d = cache.pre1;
  for (auto& v : cache.a1d.a)
    if (v < T(0)) v = T(0);

  double p = params.hyper.dropout;
  if (dropout_rng) {
    if (p < 0.0 || p >= 1.0) fail(errc::config, "dropout must be in [0, 1)");
    cache.mask.assign(n * h, 1);
    if (p > 0.0) {
      double scale = 1.0 / (1.0 - p);
      for (std::size_t i = 0; i < cache.mask.size(); ++i) {
        if (dropout_rng->next_double() < p) {
          cache.mask[i] = 0;
          cache.a1d.a[i] = T(0);
        } else {
          cache.a1d.a[i] = static_cast<T>(static_cast<double>(cache.a1d.a[i]) * scale);
        }
      }
    }
  } else {
    cache.mask.clear();
  }

  detail::spmm(adj, cache.a1d, cache.s2);
  detail::dense_matmul(cache.s2, params.w2, &params.b2, cache.logits);
  if (!cache.logits.all_finite()) fail(errc::numeric, "non-finite value in layer2");

  std::size_t nc = params.n_classes();
  cache.z = Mat<T>(n, nc);
  for (std::size_t i = 0; i < n; ++i) {
    const T* lr = cache.logits.row(i);
    double mx = static_cast<double>(lr[0]);
    for (std::size_t c = 1; c < nc; ++c) mx = std::max(mx, static_cast<double>(lr[c]));
    double sum = 0.0;
    T* zr = cache.z.row(i);
    for (std::size_t c = 0; c < nc; ++c) {
      double e = std::exp(static_cast<double>(lr[c]) - mx);
      zr[c] = static_cast<T>(e);
      sum += e;
    }
    for (std::size_t c = 0; c < nc; ++c) zr[c] = static_cast<T>(static_cast<double>(zr[c]) / sum);
  }
  if (!cache.z.all_finite()) fail(errc::numeric, "non-finite value in softmax");
}

template <typename T>
Mat<T> gcn_predict(const GcnParams<T>& params, const NormalizedAdjacency& adj,
                   const SparseFeatureMatrix& f) {
  ForwardCache<T> cache;
  gcn_forward(params, adj, f, nullptr, cache);
  return std::move(cache.z);
}

// Mean negative log-likelihood over the labeled set plus L2 weight decay
// on the weight matrices (classification loss to be minimized).
template <typename T>
double gcn_loss(const Mat<T>& z, const Split& split, const LabelTable& labels,
                const GcnParams<T>& params) {
  if (split.labeled_idx.empty()) fail(errc::contract, "gcn_loss: no labeled nodes");
  double nll = 0.0;
  for (auto i : split.labeled_idx) {
    if (i >= z.rows) fail(errc::bounds, "gcn_loss: labeled index out of range");
    std::int64_t y = labels.labels[i];
    if (y == LabelTable::unknown)
      fail(errc::contract, "gcn_loss: labeled node " + std::to_string(i) +
                               " has unknown label");
    nll -= std::log(static_cast<double>(z.at(i, static_cast<std::size_t>(y))));
  }
  nll /= static_cast<double>(split.labeled_idx.size());
  double reg = 0.0;
  for (auto v : params.w1.a) reg += static_cast<double>(v) * static_cast<double>(v);
  for (auto v : params.w2.a) reg += static_cast<double>(v) * static_cast<double>(v);
  return nll + 0.5 * params.hyper.weight_decay * reg;
}

struct Gradients {
  Mat<double> w1, w2;
  std::vector<double> b1, b2;
};

// Analytic gradients of gcn_loss at the cached forward point.
template <typename T>
Gradients gcn_backward(const GcnParams<T>& params, const NormalizedAdjacency& adj,
                       const SparseFeatureMatrix& f, const Split& split,
                       const LabelTable& labels, const ForwardCache<T>& cache) {
  std::size_t n = f.n_rows, h = params.hidden(), nc = params.n_classes();
  double m = static_cast<double>(split.labeled_idx.size());

  Mat<double> dlogits(n, nc);
  for (auto i : split.labeled_idx) {
    std::int64_t y = labels.labels[i];
    if (y == LabelTable::unknown)
      fail(errc::contract, "gcn_backward: labeled node has unknown label");
    const T* zr = cache.z.row(i);
    double* dr = dlogits.row(i);
    for (std::size_t c = 0; c < nc; ++c) dr[c] = static_cast<double>(zr[c]) / m;
    dr[static_cast<std::size_t>(y)] -= 1.0 / m;
  }

  Gradients g;
  g.b2.assign(nc, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* dr = dlogits.row(i);
    for (std::size_t c = 0; c < nc; ++c) g.b2[c] += dr[c];
  }
  detail::dense_t_matmul(cache.s2, dlogits, g.w2);
  for (std::size_t i = 0; i < g.w2.a.size(); ++i)
    g.w2.a[i] += params.hyper.weight_decay * static_cast<double>(params.w2.a[i]);

  Mat<double> w2t(nc, h);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < nc; ++c)
      w2t.at(c, r) = static_cast<double>(params.w2.at(r, c));
  Mat<double> ds2;
  detail::dense_matmul(dlogits, w2t, static_cast<const std::vector<double>*>(nullptr), ds2);

  Mat<double> da1d;
  detail::spmm(adj, ds2, da1d);

  // undo dropout, gate by relu activity
  double scale = 1.0 / (1.0 - params.hyper.dropout);
  bool dropped = !cache.mask.empty() && params.hyper.dropout > 0.0;
  Mat<double> dpre1(n, h);
  for (std::size_t i = 0; i < n * h; ++i) {
    double d = da1d.a[i];
    if (dropped) d = cache.mask[i] ? d * scale : 0.0;
    dpre1.a[i] = static_cast<double>(cache.pre1.a[i]) > 0.0 ? d : 0.0;
  }

  g.b1.assign(h, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* dr = dpre1.row(i);
    for (std::size_t c = 0; c < h; ++c) g.b1[c] += dr[c];
  }

  Mat<double> h2;
  detail::spmm(adj, dpre1, h2);
  detail::feat_t_matmul(f, h2, g.w1);
  for (std::size_t i = 0; i < g.w1.a.size(); ++i)
    g.w1.a[i] += params.hyper.weight_decay * static_cast<double>(params.w1.a[i]);

  return g;
}

template <typename T>
struct TrainResult {
  GcnParams<T> params;
  std::vector<double> loss_history;       // evaluation-mode loss per epoch
  std::vector<double> train_acc_history;  // labeled-set accuracy per epoch
  std::vector<double> val_acc_history;    // present when the split has val_idx
  std::size_t best_epoch = 0;
};

namespace detail {

template <typename T>
double accuracy_from(const Mat<T>& z, const LabelTable& labels,
                     const std::vector<std::size_t>& idx) {
  if (idx.empty()) fail(errc::contract, "accuracy over an empty index set");
  std::size_t correct = 0;
  for (auto i : idx) {
    std::int64_t y = labels.labels[i];
    if (y == LabelTable::unknown)
      fail(errc::contract, "node " + std::to_string(i) + " has unknown label");
    const T* zr = z.row(i);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < z.cols; ++c)
      if (zr[c] > zr[arg]) arg = c;  // ties resolve to the lowest class id
    if (arg == static_cast<std::size_t>(y)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

struct AdamState {
  std::vector<double> m, v;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

template <typename T>
void adam_step(std::vector<T>& param, const std::vector<double>& grad, AdamState& st,
               double lr, std::size_t t) {
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * grad[i];
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * grad[i] * grad[i];
    double mhat = st.m[i] / c1;
    double vhat = st.v[i] / c2;
    param[i] = static_cast<T>(static_cast<double>(param[i]) -
                              lr * mhat / (std::sqrt(vhat) + eps));
  }
}

}  // namespace detail

// Full-batch Adam training. Per-epoch histories are recorded from
// evaluation-mode forwards; with a validation split the returned
// parameters are the best-validation snapshot, otherwise the final ones.
template <typename T>
TrainResult<T> train_gcn(const SparseFeatureMatrix& f, const NormalizedAdjacency& adj,
                         const LabelTable& labels, const Split& split, GcnHyper hyper) {
  labels.validate();
  split.validate(labels.n_nodes);
  if (split.labeled_idx.empty()) fail(errc::contract, "train_gcn: no labeled nodes");
  if (labels.n_classes < 2) fail(errc::contract, "train_gcn: need at least 2 classes");

  TrainResult<T> result;
  result.params = GcnParams<T>::glorot(f.n_cols, hyper.hidden, labels.n_classes, hyper);
  auto& p = result.params;

  detail::AdamState st_w1(p.w1.a.size()), st_b1(p.b1.size());
  detail::AdamState st_w2(p.w2.a.size()), st_b2(p.b2.size());
  Rng dropout_rng(mix_seed(hyper.seed, 1));

  GcnParams<T> best = p;
  double best_val = -1.0;
  std::size_t best_epoch = 0;

  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    ForwardCache<T> cache;
    try {
      gcn_forward(p, adj, f, &dropout_rng, cache);
    } catch (const Error& e) {
      if (e.kind() == errc::numeric)
        fail(errc::training, "diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      throw;
    }
    Gradients g = gcn_backward(p, adj, f, split, labels, cache);

    detail::adam_step(p.w1.a, g.w1.a, st_w1, hyper.learning_rate, epoch);
    detail::adam_step(p.b1, g.b1, st_b1, hyper.learning_rate, epoch);
    detail::adam_step(p.w2.a, g.w2.a, st_w2, hyper.learning_rate, epoch);
    detail::adam_step(p.b2, g.b2, st_b2, hyper.learning_rate, epoch);

    ForwardCache<T> eval;
    try {
      gcn_forward(p, adj, f, nullptr, eval);
    } catch (const Error& e) {
      if (e.kind() == errc::numeric)
        fail(errc::training, "diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      throw;
    }
    double loss = gcn_loss(eval.z, split, labels, p);
    if (!std::isfinite(loss))
      fail(errc::training, "loss is not finite at epoch " + std::to_string(epoch));
    result.loss_history.push_back(loss);
    result.train_acc_history.push_back(detail::accuracy_from(eval.z, labels, split.labeled_idx));
    if (!split.val_idx.empty()) {
      double va = detail::accuracy_from(eval.z, labels, split.val_idx);
      result.val_acc_history.push_back(va);
      if (va > best_val) {
        best_val = va;
        best = p;
        best_epoch = epoch;
      }
    }
  }

  if (!split.val_idx.empty()) {
    result.params = best;
    result.best_epoch = best_epoch;
  } else {
    result.best_epoch = hyper.epochs;
  }
  return result;
}

// Model-assigned labels for every node outside the labeled set.
struct PseudoLabels {
  std::vector<std::size_t> nodes;   // ascending
  std::vector<std::size_t> labels;  // argmax class per node
  std::vector<double> confidence;   // max softmax probability
};

template <typename T>
PseudoLabels pseudo_label(const GcnParams<T>& params, const SparseFeatureMatrix& f,
                          const NormalizedAdjacency& adj, const Split& split) {
  Mat<T> z = gcn_predict(params, adj, f);
  std::vector<char> labeled(f.n_rows, 0);
  for (auto i : split.labeled_idx) labeled[i] = 1;

  PseudoLabels out;
  for (std::size_t i = 0; i < f.n_rows; ++i) {
    if (labeled[i]) continue;
    const T* zr = z.row(i);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < z.cols; ++c)
      if (zr[c] > zr[arg]) arg = c;
    out.nodes.push_back(i);
    out.labels.push_back(arg);
    out.confidence.push_back(static_cast<double>(zr[arg]));
  }
  return out;
}

template <typename T>
double evaluate_accuracy(const GcnParams<T>& params, const SparseFeatureMatrix& f,
                         const NormalizedAdjacency& adj, const LabelTable& labels,
                         const std::vector<std::size_t>& idx) {
  Mat<T> z = gcn_predict(params, adj, f);
  return detail::accuracy_from(z, labels, idx);
}

// Central-difference verification of the analytic gradient on a small
// instance (64-bit arithmetic, dropout off). Returns the max relative
// error over every parameter.
inline double gradient_check(const SparseFeatureMatrix& f, const NormalizedAdjacency& adj,
                             const LabelTable& labels, const Split& split,
                             std::size_t hidden, std::uint64_t seed, double step = 1e-5) {
  if (f.n_rows > 16) fail(errc::contract, "gradient_check instances are capped at 16 nodes");
  GcnHyper hyper;
  hyper.hidden = hidden;
  hyper.dropout = 0.0;
  hyper.seed = seed;
  auto params = GcnParams<double>::glorot(f.n_cols, hidden, labels.n_classes, hyper);

  ForwardCache<double> cache;
  gcn_forward(params, adj, f, nullptr, cache);
  Gradients analytic = gcn_backward(params, adj, f, split, labels, cache);

  auto loss_at = [&]() {
    ForwardCache<double> c;
    gcn_forward(params, adj, f, nullptr, c);
    return gcn_loss(c.z, split, labels, params);
  };

  double max_rel = 0.0;
  auto check_span = [&](std::vector<double>& span, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < span.size(); ++i) {
      double keep = span[i];
      span[i] = keep + step;
      double fp = loss_at();
      span[i] = keep - step;
      double fm = loss_at();
      span[i] = keep;
      double fd = (fp - fm) / (2.0 * step);
      double rel = std::abs(grad[i] - fd) /
                   std::max({std::abs(grad[i]), std::abs(fd), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  };
  check_span(params.w1.a, analytic.w1.a);
  check_span(params.b1, analytic.b1);
  check_span(params.w2.a, analytic.w2.a);
  check_span(params.b2, analytic.b2);
  return max_rel;
}

// ---- checkpoint and pseudo-label files ----

// Checkpoint: shape header plus row-major weights at 9 significant digits
// (enough for an exact binary32 round-trip).
template <typename T>
void save_checkpoint(const GcnParams<T>& params, const std::string& path) {
  params.validate();
  auto out = detail::create_text(path);
  out << "SFGL-GCN v1 " << params.w1.rows << ' ' << params.w1.cols << ' '
      << params.w2.cols << '\n';
  auto write_mat = [&](const Mat<T>& m) {
    for (std::size_t r = 0; r < m.rows; ++r) {
      const T* row = m.row(r);
      for (std::size_t c = 0; c < m.cols; ++c)
        out << (c ? " " : "") << fmt_double(static_cast<double>(row[c]), 9);
      out << '\n';
    }
  };
  auto write_vec = [&](const std::vector<T>& v) {
    for (std::size_t c = 0; c < v.size(); ++c)
      out << (c ? " " : "") << fmt_double(static_cast<double>(v[c]), 9);
    out << '\n';
  };
  write_mat(params.w1);
  write_vec(params.b1);
  write_mat(params.w2);
  write_vec(params.b2);
  if (!out) fail(errc::io, "write failed for '" + path + "'");
}

inline GcnParams<float> load_checkpoint(const std::string& path) {
  auto in = detail::open_text(path);
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() {
    while (std::getline(in, line)) {
      ++lineno;
      if (!trim(line).empty()) return;
    }
    detail::parse_fail(path, lineno + 1, "unexpected end of file");
  };

  next_line();
  TokenScanner hs{trim(line)};
  std::string_view tok;
  std::uint64_t d_in = 0, hidden = 0, n_classes = 0;
  if (!hs.next(tok) || tok != "SFGL-GCN") detail::parse_fail(path, lineno, "bad magic");
  if (!hs.next(tok) || tok != "v1") detail::parse_fail(path, lineno, "unsupported version");
  if (!hs.next(tok) || !parse_u64(tok, d_in) || !hs.next(tok) || !parse_u64(tok, hidden) ||
      !hs.next(tok) || !parse_u64(tok, n_classes) || !hs.exhausted())
    detail::parse_fail(path, lineno, "bad shape header");

  GcnParams<float> p;
  p.w1 = Mat<float>(d_in, hidden);
  p.b1.assign(hidden, 0.0f);
  p.w2 = Mat<float>(hidden, n_classes);
  p.b2.assign(n_classes, 0.0f);
  p.hyper.hidden = hidden;

  auto read_row = [&](float* dst, std::size_t count) {
    next_line();
    TokenScanner sc{trim(line)};
    for (std::size_t c = 0; c < count; ++c) {
      double v = 0;
      if (!sc.next(tok) || !parse_double(tok, v))
        detail::parse_fail(path, lineno, "expected " + std::to_string(count) + " values");
      dst[c] = static_cast<float>(v);
    }
    if (!sc.exhausted()) detail::parse_fail(path, lineno, "trailing tokens");
  };
  for (std::size_t r = 0; r < d_in; ++r) read_row(p.w1.row(r), hidden);
  read_row(p.b1.data(), hidden);
  for (std::size_t r = 0; r < hidden; ++r) read_row(p.w2.row(r), n_classes);
  read_row(p.b2.data(), n_classes);
  p.validate();
  return p;
}

// TSV over all nodes: node_id, label, confidence, is_pseudo. True labels
// carry confidence 1 and is_pseudo=0.
inline void save_pseudo_labels_tsv(const PseudoLabels& pl, const LabelTable& labels,
                                   const Split& split, const std::string& path) {
  auto out = detail::create_text(path);
  std::vector<char> labeled(labels.n_nodes, 0);
  for (auto i : split.labeled_idx) labeled[i] = 1;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < labels.n_nodes; ++i) {
    if (labeled[i]) {
      out << i << '\t' << labels.labels[i] << "\t1\t0\n";
    } else {
      if (cursor >= pl.nodes.size() || pl.nodes[cursor] != i)
        fail(errc::contract, "pseudo labels do not cover node " + std::to_string(i));
      out << i << '\t' << pl.labels[cursor] << '\t' << fmt_double(pl.confidence[cursor])
          << "\t1\n";
      ++cursor;
    }
  }
  if (!out) fail(errc::io, "write failed for '" + path + "'");
}

}  // namespace sfgl
