#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "sfgl/csr.hpp"
#include "sfgl/error.hpp"
#include "sfgl/rng.hpp"
#include "sfgl/text.hpp"

namespace sfgl {

// Per-node class assignment; nodes absent from the label file stay unknown.
struct LabelTable {
  static constexpr std::int64_t unknown = -1;

  std::size_t n_nodes = 0;
  std::size_t n_classes = 0;
  std::vector<std::int64_t> labels;  // class id in [0, n_classes) or unknown

  std::size_t known_count() const {
    std::size_t n = 0;
    for (auto l : labels)
      if (l != unknown) ++n;
    return n;
  }

  void validate() const {
    if (labels.size() != n_nodes) fail(errc::contract, "labels length must equal n_nodes");
    for (std::size_t i = 0; i < n_nodes; ++i)
      if (labels[i] != unknown &&
          (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes))
        fail(errc::bounds, "label of node " + std::to_string(i) + " out of range");
  }
};

// Label file: one "node_id class_id" pair per line. When n_nodes is 0 the
// node count is inferred as max id + 1.
inline LabelTable load_labels(const std::string& path, std::size_t n_nodes = 0) {
  auto in = detail::open_text(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::pair<std::size_t, std::int64_t>> pairs;
  std::size_t max_node = 0;
  std::int64_t max_class = -1;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = trim(line);
    if (body.empty()) continue;
    TokenScanner sc{body};
    std::string_view tok;
    std::uint64_t node = 0;
    std::int64_t cls = 0;
    if (!sc.next(tok) || !parse_u64(tok, node))
      detail::parse_fail(path, lineno, "expected node id");
    if (!sc.next(tok) || !parse_i64(tok, cls) || cls < 0)
      detail::parse_fail(path, lineno, "expected non-negative class id");
    if (!sc.exhausted()) detail::parse_fail(path, lineno, "trailing tokens");
    if (n_nodes != 0 && node >= n_nodes)
      fail(errc::bounds, path + ":" + std::to_string(lineno) + ": node id " +
                             std::to_string(node) + " >= " + std::to_string(n_nodes));
    pairs.emplace_back(node, cls);
    max_node = std::max(max_node, static_cast<std::size_t>(node));
    max_class = std::max(max_class, cls);
  }
  LabelTable t;
  t.n_nodes = n_nodes != 0 ? n_nodes : (pairs.empty() ? 0 : max_node + 1);
  t.n_classes = static_cast<std::size_t>(max_class + 1);
  t.labels.assign(t.n_nodes, LabelTable::unknown);
  for (auto [node, cls] : pairs) {
    if (t.labels[node] != LabelTable::unknown)
      fail(errc::parse, path + ": node " + std::to_string(node) + " labeled twice");
    t.labels[node] = cls;
  }
  return t;
}

enum class SplitStrategy { uniform, per_class_balanced };

inline const char* split_strategy_name(SplitStrategy s) {
  return s == SplitStrategy::uniform ? "uniform" : "per-class-balanced";
}

inline SplitStrategy parse_split_strategy(const std::string& s) {
  if (s == "uniform") return SplitStrategy::uniform;
  if (s == "per-class-balanced") return SplitStrategy::per_class_balanced;
  fail(errc::config, "unknown split strategy '" + s + "'");
}

struct Split {
  std::vector<std::size_t> labeled_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
  std::uint64_t seed = 0;

  void validate(std::size_t n_nodes) const {
    std::vector<char> seen(n_nodes, 0);
    auto mark = [&](const std::vector<std::size_t>& idx, const char* name) {
      for (auto i : idx) {
        if (i >= n_nodes) fail(errc::bounds, std::string(name) + " index out of range");
        if (seen[i]) fail(errc::contract, "split sets are not disjoint");
        seen[i] = 1;
      }
    };
    mark(labeled_idx, "labeled");
    mark(val_idx, "val");
    mark(test_idx, "test");
  }
};

// Seeded sampling of a labeled set of exactly m nodes; the remaining
// known-label nodes become validation (first val_budget of them) and test.
inline Split make_split(const LabelTable& labels, std::size_t m, SplitStrategy strategy,
                        std::uint64_t seed, std::size_t val_budget = 0) {
  labels.validate();
  std::vector<std::size_t> known;
  for (std::size_t i = 0; i < labels.n_nodes; ++i)
    if (labels.labels[i] != LabelTable::unknown) known.push_back(i);
  if (m == 0) fail(errc::config, "label budget must be positive");
  if (m > known.size())
    fail(errc::config, "label budget " + std::to_string(m) + " exceeds " +
                           std::to_string(known.size()) + " known labels");

  Rng rng(seed);
  Split split;
  split.seed = seed;
  std::vector<std::size_t> remaining;

  if (strategy == SplitStrategy::uniform) {
    rng.shuffle(known);
    split.labeled_idx.assign(known.begin(), known.begin() + m);
    remaining.assign(known.begin() + m, known.end());
  } else {
    std::size_t c = labels.n_classes;
    if (c == 0 || m % c != 0)
      fail(errc::config, "per-class-balanced budget " + std::to_string(m) +
                             " not divisible by " + std::to_string(c) + " classes");
    std::size_t per = m / c;
    for (std::size_t cls = 0; cls < c; ++cls) {
      std::vector<std::size_t> pool;
      for (auto i : known)
        if (static_cast<std::size_t>(labels.labels[i]) == cls) pool.push_back(i);
      if (pool.size() < per)
        fail(errc::config, "class " + std::to_string(cls) + " has only " +
                               std::to_string(pool.size()) + " known labels, need " +
                               std::to_string(per));
      rng.shuffle(pool);
      split.labeled_idx.insert(split.labeled_idx.end(), pool.begin(), pool.begin() + per);
      remaining.insert(remaining.end(), pool.begin() + per, pool.end());
    }
  }

  if (val_budget > remaining.size())
    fail(errc::config, "validation budget exceeds remaining labeled nodes");
  rng.shuffle(remaining);
  split.val_idx.assign(remaining.begin(), remaining.begin() + val_budget);
  split.test_idx.assign(remaining.begin() + val_budget, remaining.end());

  std::sort(split.labeled_idx.begin(), split.labeled_idx.end());
  std::sort(split.val_idx.begin(), split.val_idx.end());
  std::sort(split.test_idx.begin(), split.test_idx.end());
  if (split.test_idx.empty()) warn("split has an empty test set");

  std::vector<char> covered(labels.n_classes, 0);
  for (auto i : split.labeled_idx) covered[static_cast<std::size_t>(labels.labels[i])] = 1;
  for (std::size_t cls = 0; cls < labels.n_classes; ++cls)
    if (!covered[cls])
      warn("class " + std::to_string(cls) + " has no labeled node in this split");

  return split;
}

}  // namespace sfgl
