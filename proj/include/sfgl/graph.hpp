#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sfgl/error.hpp"
#include "sfgl/text.hpp"

namespace sfgl {

enum class Metric { cosine, euclidean, manhattan };

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::cosine: return "cosine";
    case Metric::euclidean: return "euclidean";
    case Metric::manhattan: return "manhattan";
  }
  return "?";
}

inline Metric parse_metric(const std::string& s) {
  if (s == "cosine") return Metric::cosine;
  if (s == "euclidean") return Metric::euclidean;
  if (s == "manhattan") return Metric::manhattan;
  fail(errc::config, "unknown metric '" + s + "' (expected cosine, euclidean or manhattan)");
}

// Exact-k out-adjacency. Every node has exactly min(k, n_nodes-1)
// out-neighbors, sorted ascending, no self-loops.
struct DirectedKnnGraph {
  std::size_t n_nodes = 0;
  std::size_t k = 0;
  Metric metric = Metric::cosine;
  std::vector<std::vector<std::size_t>> out_adj;

  std::size_t out_degree_each() const { return std::min(k, n_nodes - 1); }

  std::size_t n_directed_edges() const {
    std::size_t n = 0;
    for (const auto& nb : out_adj) n += nb.size();
    return n;
  }

  void validate() const {
    if (n_nodes < 2) fail(errc::contract, "graph needs at least 2 nodes");
    if (out_adj.size() != n_nodes) fail(errc::contract, "out_adj length mismatch");
    std::size_t want = out_degree_each();
    for (std::size_t u = 0; u < n_nodes; ++u) {
      const auto& nb = out_adj[u];
      if (nb.size() != want)
        fail(errc::contract, "node " + std::to_string(u) + " has out-degree " +
                                 std::to_string(nb.size()) + ", expected " +
                                 std::to_string(want));
      for (std::size_t i = 0; i < nb.size(); ++i) {
        if (nb[i] >= n_nodes) fail(errc::bounds, "neighbor index out of range");
        if (nb[i] == u) fail(errc::contract, "self-loop at node " + std::to_string(u));
        if (i > 0 && nb[i - 1] >= nb[i])
          fail(errc::contract, "neighbors of node " + std::to_string(u) + " not sorted");
      }
    }
  }
};

// Simple undirected graph (mutual sorted adjacency, no self-loops).
struct UndirectedGraph {
  std::size_t n_nodes = 0;
  std::vector<std::vector<std::size_t>> adj;

  std::size_t n_edges() const {
    std::size_t s = 0;
    for (const auto& nb : adj) s += nb.size();
    return s / 2;
  }

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> d(n_nodes);
    for (std::size_t u = 0; u < n_nodes; ++u) d[u] = adj[u].size();
    return d;
  }

  void validate() const {
    if (adj.size() != n_nodes) fail(errc::contract, "adjacency length mismatch");
    for (std::size_t u = 0; u < n_nodes; ++u) {
      const auto& nb = adj[u];
      for (std::size_t i = 0; i < nb.size(); ++i) {
        std::size_t v = nb[i];
        if (v >= n_nodes) fail(errc::bounds, "neighbor index out of range");
        if (v == u) fail(errc::contract, "self-loop at node " + std::to_string(u));
        if (i > 0 && nb[i - 1] >= nb[i])
          fail(errc::contract, "neighbors of node " + std::to_string(u) + " not sorted");
        if (!std::binary_search(adj[v].begin(), adj[v].end(), u))
          fail(errc::contract, "edge " + std::to_string(u) + "-" + std::to_string(v) +
                                   " is not mutual");
      }
    }
  }

  // Build from directed pairs: both orientations collapse to one edge,
  // self-loops are dropped with a warning.
  static UndirectedGraph from_pairs(std::size_t n_nodes,
                                    const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    UndirectedGraph g;
    if (n_nodes == 0)
      for (auto [u, v] : pairs) n_nodes = std::max(n_nodes, std::max(u, v) + 1);
    g.n_nodes = n_nodes;
    g.adj.assign(n_nodes, {});
    std::size_t self_loops = 0;
    for (auto [u, v] : pairs) {
      if (u >= n_nodes || v >= n_nodes) fail(errc::bounds, "edge endpoint out of range");
      if (u == v) {
        ++self_loops;
        continue;
      }
      g.adj[u].push_back(v);
      g.adj[v].push_back(u);
    }
    if (self_loops) warn(std::to_string(self_loops) + " self-loop(s) dropped");
    for (auto& nb : g.adj) {
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    return g;
  }
};

// Degree centralities of a directed KNN graph. in_degree counts all
// incoming edges; nonreciprocal_in only those without the reverse edge,
// which is the variant satisfying sum = 2|E| - k|V|.
struct DegreeReport {
  std::vector<std::size_t> in_degree;
  std::vector<std::size_t> out_degree;
  std::vector<std::size_t> undirected_degree;
  std::vector<std::size_t> nonreciprocal_in;
  std::size_t n_undirected_edges = 0;
};

inline DegreeReport degree_report(const DirectedKnnGraph& g) {
  g.validate();
  std::size_t n = g.n_nodes;
  DegreeReport r;
  r.in_degree.assign(n, 0);
  r.out_degree.assign(n, 0);
  r.undirected_degree.assign(n, 0);
  r.nonreciprocal_in.assign(n, 0);

  std::vector<std::vector<std::size_t>> in_adj(n);
  for (std::size_t u = 0; u < n; ++u) {
    r.out_degree[u] = g.out_adj[u].size();
    for (auto v : g.out_adj[u]) in_adj[v].push_back(u);  // u ascending => sorted
  }
  for (std::size_t v = 0; v < n; ++v) {
    r.in_degree[v] = in_adj[v].size();
    for (auto u : in_adj[v])
      if (!std::binary_search(g.out_adj[v].begin(), g.out_adj[v].end(), u))
        r.nonreciprocal_in[v]++;
    // distinct-neighbor count = |out ∪ in| by merge
    const auto& a = g.out_adj[v];
    const auto& b = in_adj[v];
    std::size_t i = 0, j = 0, distinct = 0;
    while (i < a.size() || j < b.size()) {
      if (j == b.size() || (i < a.size() && a[i] < b[j])) ++i;
      else if (i == a.size() || b[j] < a[i]) ++j;
      else { ++i; ++j; }
      ++distinct;
    }
    r.undirected_degree[v] = distinct;
  }
  std::size_t total = 0;
  for (auto d : r.undirected_degree) total += d;
  r.n_undirected_edges = total / 2;
  return r;
}

inline UndirectedGraph symmetrize(const DirectedKnnGraph& g) {
  g.validate();
  UndirectedGraph u;
  u.n_nodes = g.n_nodes;
  u.adj.assign(g.n_nodes, {});
  for (std::size_t a = 0; a < g.n_nodes; ++a)
    for (auto b : g.out_adj[a]) {
      u.adj[a].push_back(b);
      u.adj[b].push_back(a);
    }
  for (auto& nb : u.adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return u;
}

// ---- file formats ----

// Directed edge list, one "src dst" per line.
inline void save_edge_list(const DirectedKnnGraph& g, const std::string& path) {
  auto out = detail::create_text(path);
  for (std::size_t u = 0; u < g.n_nodes; ++u)
    for (auto v : g.out_adj[u]) out << u << ' ' << v << '\n';
  if (!out) fail(errc::io, "write failed for '" + path + "'");
}

inline void save_graph_sidecar(const DirectedKnnGraph& g, const std::string& path) {
  nlohmann::json j = {
      {"n_nodes", g.n_nodes},
      {"k", g.k},
      {"metric", metric_name(g.metric)},
      {"n_directed_edges", g.n_directed_edges()},
      {"n_undirected_edges", symmetrize(g).n_edges()},
  };
  auto out = detail::create_text(path);
  out << j.dump(2) << '\n';
  if (!out) fail(errc::io, "write failed for '" + path + "'");
}

inline std::vector<std::pair<std::size_t, std::size_t>> load_edge_list(
    const std::string& path, std::size_t n_nodes = 0) {
  auto in = detail::open_text(path);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = trim(line);
    if (body.empty()) continue;
    TokenScanner sc{body};
    std::string_view tok;
    std::uint64_t u = 0, v = 0;
    if (!sc.next(tok) || !parse_u64(tok, u))
      detail::parse_fail(path, lineno, "expected source node id");
    if (!sc.next(tok) || !parse_u64(tok, v))
      detail::parse_fail(path, lineno, "expected target node id");
    if (!sc.exhausted()) detail::parse_fail(path, lineno, "trailing tokens");
    if (n_nodes != 0 && (u >= n_nodes || v >= n_nodes))
      fail(errc::bounds, path + ":" + std::to_string(lineno) + ": node id out of range");
    pairs.emplace_back(u, v);
  }
  return pairs;
}

inline DirectedKnnGraph load_knn_graph(const std::string& edges_path,
                                       const std::string& sidecar_path) {
  nlohmann::json j;
  {
    auto in = detail::open_text(sidecar_path);
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      fail(errc::parse, sidecar_path + ": " + e.what());
    }
  }
  DirectedKnnGraph g;
  try {
    g.n_nodes = j.at("n_nodes").get<std::size_t>();
    g.k = j.at("k").get<std::size_t>();
    g.metric = parse_metric(j.at("metric").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse, sidecar_path + ": " + e.what());
  }
  g.out_adj.assign(g.n_nodes, {});
  for (auto [u, v] : load_edge_list(edges_path, g.n_nodes)) g.out_adj[u].push_back(v);
  for (auto& nb : g.out_adj) std::sort(nb.begin(), nb.end());
  g.validate();
  if (j.contains("n_directed_edges") &&
      j["n_directed_edges"].get<std::size_t>() != g.n_directed_edges())
    fail(errc::parse, edges_path + ": edge count disagrees with sidecar");
  return g;
}

// Undirected edge list, one "u v" per line with u < v.
inline void save_undirected_edges(const UndirectedGraph& g, const std::string& path) {
  auto out = detail::create_text(path);
  for (std::size_t u = 0; u < g.n_nodes; ++u)
    for (auto v : g.adj[u])
      if (u < v) out << u << ' ' << v << '\n';
  if (!out) fail(errc::io, "write failed for '" + path + "'");
}

inline void save_degree_csv(const DegreeReport& r, const std::string& path) {
  auto out = detail::create_text(path);
  out << "node,in,out,undirected,nonreciprocal_in\n";
  for (std::size_t i = 0; i < r.in_degree.size(); ++i)
    out << i << ',' << r.in_degree[i] << ',' << r.out_degree[i] << ','
        << r.undirected_degree[i] << ',' << r.nonreciprocal_in[i] << '\n';
  if (!out) fail(errc::io, "write failed for '" + path + "'");
}

enum class DegreeColumn { in, out, undirected, nonreciprocal_in };

inline DegreeColumn parse_degree_column(const std::string& s) {
  if (s == "in") return DegreeColumn::in;
  if (s == "out") return DegreeColumn::out;
  if (s == "undirected") return DegreeColumn::undirected;
  if (s == "nonreciprocal_in") return DegreeColumn::nonreciprocal_in;
  fail(errc::config, "unknown degree column '" + s + "'");
}

inline std::vector<std::size_t> select_degree_column(const DegreeReport& r, DegreeColumn c) {
  switch (c) {
    case DegreeColumn::in: return r.in_degree;
    case DegreeColumn::out: return r.out_degree;
    case DegreeColumn::undirected: return r.undirected_degree;
    case DegreeColumn::nonreciprocal_in: return r.nonreciprocal_in;
  }
  fail(errc::config, "bad degree column");
}

// Degree sample file: either the degree-report CSV (header "node,in,...")
// with a column selector, or a plain list of one integer per line.
inline std::vector<std::size_t> load_degree_file(const std::string& path, DegreeColumn column) {
  auto in = detail::open_text(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::size_t> degrees;
  bool csv = false;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = trim(line);
    if (body.empty()) continue;
    if (first) {
      first = false;
      if (body.rfind("node,", 0) == 0) {
        if (std::string(body) != "node,in,out,undirected,nonreciprocal_in")
          detail::parse_fail(path, lineno, "unrecognized degree CSV header");
        csv = true;
        continue;
      }
    }
    if (csv) {
      std::vector<std::string_view> fields;
      std::size_t start = 0;
      while (true) {
        std::size_t comma = body.find(',', start);
        fields.push_back(body.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      if (fields.size() != 5)
        detail::parse_fail(path, lineno, "expected 5 comma-separated fields");
      std::uint64_t v = 0;
      if (!parse_u64(fields[1 + static_cast<std::size_t>(column)], v))
        detail::parse_fail(path, lineno, "expected integer field");
      degrees.push_back(v);
    } else {
      TokenScanner sc{body};
      std::string_view tok;
      std::uint64_t v = 0;
      if (!sc.next(tok) || !parse_u64(tok, v))
        detail::parse_fail(path, lineno, "expected non-negative degree");
      if (!sc.exhausted()) detail::parse_fail(path, lineno, "trailing tokens");
      degrees.push_back(v);
    }
  }
  if (degrees.empty()) fail(errc::parse, path + ": no degrees found");
  return degrees;
}

}  // namespace sfgl
