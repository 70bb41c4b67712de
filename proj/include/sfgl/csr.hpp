#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include "sfgl/error.hpp"
#include "sfgl/text.hpp"

namespace sfgl {

enum class FeatureFormat { coo_text, dense_text };

inline const char* feature_format_name(FeatureFormat f) {
  return f == FeatureFormat::coo_text ? "coo-text" : "dense-text";
}

inline FeatureFormat parse_feature_format(const std::string& s) {
  if (s == "coo-text") return FeatureFormat::coo_text;
  if (s == "dense-text") return FeatureFormat::dense_text;
  fail(errc::config, "unknown feature format '" + s + "' (expected coo-text or dense-text)");
}

// Row-compressed node-by-feature matrix. Column indices are strictly
// increasing within each row and all values are finite.
struct SparseFeatureMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_ptr;  // length n_rows+1
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  std::size_t nnz() const { return col_idx.size(); }

  void validate() const {
    if (row_ptr.size() != n_rows + 1)
      fail(errc::contract, "row_ptr length must be n_rows+1");
    if (row_ptr.front() != 0 || row_ptr.back() != col_idx.size())
      fail(errc::contract, "row_ptr must start at 0 and end at nnz");
    if (col_idx.size() != values.size())
      fail(errc::contract, "col_idx and values length mismatch");
    for (std::size_t r = 0; r < n_rows; ++r) {
      if (row_ptr[r] > row_ptr[r + 1])
        fail(errc::contract, "row_ptr must be non-decreasing");
      for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
        if (col_idx[p] >= n_cols)
          fail(errc::bounds, "column index " + std::to_string(col_idx[p]) +
                                 " out of range in row " + std::to_string(r));
        if (p > row_ptr[r] && col_idx[p - 1] >= col_idx[p])
          fail(errc::contract, "column indices must be strictly increasing in row " +
                                   std::to_string(r));
        if (!std::isfinite(values[p]))
          fail(errc::contract, "non-finite value in row " + std::to_string(r));
      }
    }
  }

  // Build from (row, col, value) triplets; duplicates are rejected.
  static SparseFeatureMatrix from_coo(std::size_t n_rows, std::size_t n_cols,
                                      std::vector<std::tuple<std::size_t, std::size_t, double>> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) {
                return std::tie(std::get<0>(a), std::get<1>(a)) <
                       std::tie(std::get<0>(b), std::get<1>(b));
              });
    SparseFeatureMatrix m;
    m.n_rows = n_rows;
    m.n_cols = n_cols;
    m.row_ptr.assign(n_rows + 1, 0);
    m.col_idx.reserve(entries.size());
    m.values.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      auto [r, c, v] = entries[i];
      if (r >= n_rows)
        fail(errc::bounds, "row index " + std::to_string(r) + " out of range");
      if (c >= n_cols)
        fail(errc::bounds, "column index " + std::to_string(c) + " out of range");
      if (i > 0 && std::get<0>(entries[i - 1]) == r && std::get<1>(entries[i - 1]) == c)
        fail(errc::parse, "duplicate entry at (" + std::to_string(r) + "," +
                              std::to_string(c) + ")");
      if (!std::isfinite(v))
        fail(errc::parse, "non-finite value at (" + std::to_string(r) + "," +
                              std::to_string(c) + ")");
      m.row_ptr[r + 1]++;
      m.col_idx.push_back(c);
      m.values.push_back(v);
    }
    for (std::size_t r = 0; r < n_rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    return m;
  }

  // Dense row-major input; zeros are not stored.
  static SparseFeatureMatrix from_dense(std::size_t n_rows, std::size_t n_cols,
                                        const std::vector<double>& rowmajor) {
    if (rowmajor.size() != n_rows * n_cols)
      fail(errc::shape, "dense buffer size does not match n_rows*n_cols");
    SparseFeatureMatrix m;
    m.n_rows = n_rows;
    m.n_cols = n_cols;
    m.row_ptr.assign(n_rows + 1, 0);
    for (std::size_t r = 0; r < n_rows; ++r) {
      for (std::size_t c = 0; c < n_cols; ++c) {
        double v = rowmajor[r * n_cols + c];
        if (!std::isfinite(v))
          fail(errc::contract, "non-finite value in dense row " + std::to_string(r));
        if (v != 0.0) {
          m.col_idx.push_back(c);
          m.values.push_back(v);
          m.row_ptr[r + 1]++;
        }
      }
    }
    for (std::size_t r = 0; r < n_rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    return m;
  }
};

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& path, std::size_t lineno,
                                    const std::string& what) {
  fail(errc::parse, path + ":" + std::to_string(lineno) + ": " + what);
}

inline std::ifstream open_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io, "cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream create_text(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::io, "cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

inline SparseFeatureMatrix load_features(const std::string& path, FeatureFormat format) {
  auto in = detail::open_text(path);
  std::string line;
  std::size_t lineno = 0;

  auto next_line = [&](bool required) {
    while (std::getline(in, line)) {
      ++lineno;
      if (!trim(line).empty()) return true;
    }
    if (required) detail::parse_fail(path, lineno + 1, "unexpected end of file");
    return false;
  };

  next_line(true);
  TokenScanner header{trim(line)};
  std::string_view tok;
  std::uint64_t n_rows = 0, n_cols = 0, nnz = 0;
  if (!header.next(tok) || !parse_u64(tok, n_rows))
    detail::parse_fail(path, lineno, "expected row count in header");
  if (!header.next(tok) || !parse_u64(tok, n_cols))
    detail::parse_fail(path, lineno, "expected column count in header");

  if (format == FeatureFormat::coo_text) {
    if (!header.next(tok) || !parse_u64(tok, nnz))
      detail::parse_fail(path, lineno, "expected nnz in header");
    if (!header.exhausted()) detail::parse_fail(path, lineno, "trailing tokens in header");
    std::vector<std::tuple<std::size_t, std::size_t, double>> entries;
    entries.reserve(nnz);
    for (std::uint64_t i = 0; i < nnz; ++i) {
      next_line(true);
      TokenScanner sc{trim(line)};
      std::uint64_t r = 0, c = 0;
      double v = 0;
      if (!sc.next(tok) || !parse_u64(tok, r))
        detail::parse_fail(path, lineno, "expected row index");
      if (!sc.next(tok) || !parse_u64(tok, c))
        detail::parse_fail(path, lineno, "expected column index");
      if (!sc.next(tok) || !parse_double(tok, v))
        detail::parse_fail(path, lineno, "expected value");
      if (!sc.exhausted()) detail::parse_fail(path, lineno, "trailing tokens");
      if (r >= n_rows)
        fail(errc::bounds, path + ":" + std::to_string(lineno) + ": row index " +
                               std::to_string(r) + " >= " + std::to_string(n_rows));
      if (c >= n_cols)
        fail(errc::bounds, path + ":" + std::to_string(lineno) + ": column index " +
                               std::to_string(c) + " >= " + std::to_string(n_cols));
      if (!std::isfinite(v)) detail::parse_fail(path, lineno, "non-finite value");
      entries.emplace_back(r, c, v);
    }
    if (next_line(false)) detail::parse_fail(path, lineno, "more lines than declared nnz");
    return SparseFeatureMatrix::from_coo(n_rows, n_cols, std::move(entries));
  }

  if (!header.exhausted()) detail::parse_fail(path, lineno, "trailing tokens in header");
  std::vector<double> buf;
  buf.reserve(n_rows * n_cols);
  for (std::uint64_t r = 0; r < n_rows; ++r) {
    next_line(true);
    TokenScanner sc{trim(line)};
    for (std::uint64_t c = 0; c < n_cols; ++c) {
      double v = 0;
      if (!sc.next(tok) || !parse_double(tok, v))
        detail::parse_fail(path, lineno, "expected " + std::to_string(n_cols) +
                                             " values, found " + std::to_string(c));
      if (!std::isfinite(v)) detail::parse_fail(path, lineno, "non-finite value");
      buf.push_back(v);
    }
    if (!sc.exhausted()) detail::parse_fail(path, lineno, "trailing tokens");
  }
  if (next_line(false)) detail::parse_fail(path, lineno, "more lines than declared rows");
  return SparseFeatureMatrix::from_dense(n_rows, n_cols, buf);
}

inline void save_features(const SparseFeatureMatrix& m, const std::string& path,
                          FeatureFormat format) {
  m.validate();
  auto out = detail::create_text(path);
  if (format == FeatureFormat::coo_text) {
    out << m.n_rows << ' ' << m.n_cols << ' ' << m.nnz() << '\n';
    for (std::size_t r = 0; r < m.n_rows; ++r)
      for (std::size_t p = m.row_ptr[r]; p < m.row_ptr[r + 1]; ++p)
        out << r << ' ' << m.col_idx[p] << ' ' << fmt_double(m.values[p]) << '\n';
  } else {
    out << m.n_rows << ' ' << m.n_cols << '\n';
    for (std::size_t r = 0; r < m.n_rows; ++r) {
      std::size_t p = m.row_ptr[r];
      for (std::size_t c = 0; c < m.n_cols; ++c) {
        double v = (p < m.row_ptr[r + 1] && m.col_idx[p] == c) ? m.values[p++] : 0.0;
        out << (c ? " " : "") << fmt_double(v);
      }
      out << '\n';
    }
  }
  if (!out) fail(errc::io, "write failed for '" + path + "'");
}

// Smoothed IDF reweighting: value(r,c) = count(r,c) * (ln((1+N)/(1+df_c)) + 1).
// The sparsity pattern is preserved verbatim.
inline SparseFeatureMatrix tfidf_transform(const SparseFeatureMatrix& f) {
  f.validate();
  std::vector<std::size_t> df(f.n_cols, 0);
  for (std::size_t p = 0; p < f.nnz(); ++p) {
    if (f.values[p] < 0.0)
      fail(errc::domain, "tfidf_transform requires non-negative counts");
    if (f.values[p] != 0.0) df[f.col_idx[p]]++;
  }
  SparseFeatureMatrix out = f;
  double n = static_cast<double>(f.n_rows);
  for (std::size_t p = 0; p < out.nnz(); ++p) {
    double idf = std::log((1.0 + n) / (1.0 + static_cast<double>(df[out.col_idx[p]]))) + 1.0;
    out.values[p] = f.values[p] * idf;
  }
  return out;
}

}  // namespace sfgl
