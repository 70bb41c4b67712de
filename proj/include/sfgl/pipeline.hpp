#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sfgl/csr.hpp"
#include "sfgl/error.hpp"
#include "sfgl/gcn.hpp"
#include "sfgl/graph.hpp"
#include "sfgl/knn.hpp"
#include "sfgl/labels.hpp"
#include "sfgl/report.hpp"
#include "sfgl/scalefree.hpp"

namespace sfgl {

// Dense text-embedding matrix exchanged with an external finetuner.
struct EmbeddingMatrix {
  std::size_t n_nodes = 0;
  std::size_t d = 0;
  std::vector<double> a;  // row-major

  void validate() const {
    if (d < 1) fail(errc::contract, "embedding dimension must be >= 1");
    if (a.size() != n_nodes * d) fail(errc::shape, "embedding buffer size mismatch");
    for (auto v : a)
      if (!std::isfinite(v)) fail(errc::contract, "non-finite embedding value");
  }
};

// Embedding file: "SFGL-EMB v1 <n> <d>", then n rows of d floats.
inline EmbeddingMatrix import_embeddings(const std::string& path, std::size_t expected_n = 0) {
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
  std::uint64_t n = 0, d = 0;
  if (!hs.next(tok) || tok != "SFGL-EMB") detail::parse_fail(path, lineno, "bad magic");
  if (!hs.next(tok) || tok != "v1") detail::parse_fail(path, lineno, "unsupported version");
  if (!hs.next(tok) || !parse_u64(tok, n) || !hs.next(tok) || !parse_u64(tok, d) ||
      !hs.exhausted())
    detail::parse_fail(path, lineno, "bad header");
  if (expected_n != 0 && n != expected_n)
    fail(errc::contract, path + ": expected " + std::to_string(expected_n) +
                             " rows, found " + std::to_string(n));
  if (d < 1) detail::parse_fail(path, lineno, "embedding dimension must be >= 1");

  EmbeddingMatrix e;
  e.n_nodes = n;
  e.d = d;
  e.a.reserve(n * d);
  for (std::uint64_t r = 0; r < n; ++r) {
    next_line();
    TokenScanner sc{trim(line)};
    for (std::uint64_t c = 0; c < d; ++c) {
      double v = 0;
      if (!sc.next(tok) || !parse_double(tok, v))
        detail::parse_fail(path, lineno, "expected " + std::to_string(d) + " values");
      if (!std::isfinite(v)) detail::parse_fail(path, lineno, "non-finite value");
      e.a.push_back(v);
    }
    if (!sc.exhausted()) detail::parse_fail(path, lineno, "trailing tokens");
  }
  return e;
}

inline void export_embeddings(const EmbeddingMatrix& e, const std::string& path) {
  e.validate();
  auto out = detail::create_text(path);
  out << "SFGL-EMB v1 " << e.n_nodes << ' ' << e.d << '\n';
  for (std::size_t r = 0; r < e.n_nodes; ++r) {
    for (std::size_t c = 0; c < e.d; ++c)
      out << (c ? " " : "") << fmt_double(e.a[r * e.d + c]);
    out << '\n';
  }
  if (!out) fail(errc::io, "write failed for '" + path + "'");
}

// Dense embeddings reuse the sparse KNN/GCN paths with full rows.
inline SparseFeatureMatrix embeddings_as_features(const EmbeddingMatrix& e) {
  e.validate();
  return SparseFeatureMatrix::from_dense(e.n_nodes, e.d, e.a);
}

inline EmbeddingMatrix features_as_embeddings(const SparseFeatureMatrix& f) {
  f.validate();
  EmbeddingMatrix e;
  e.n_nodes = f.n_rows;
  e.d = f.n_cols;
  e.a.assign(f.n_rows * f.n_cols, 0.0);
  for (std::size_t r = 0; r < f.n_rows; ++r)
    for (std::size_t p = f.row_ptr[r]; p < f.row_ptr[r + 1]; ++p)
      e.a[r * f.n_cols + f.col_idx[p]] = f.values[p];
  return e;
}

// Per-node supervision table as stored in the pseudo-label TSV.
struct PseudoTable {
  std::vector<std::size_t> node;
  std::vector<std::size_t> label;
  std::vector<double> confidence;
  std::vector<char> is_pseudo;

  std::size_t n_true() const {
    return static_cast<std::size_t>(std::count(is_pseudo.begin(), is_pseudo.end(), 0));
  }
  std::size_t n_pseudo() const { return is_pseudo.size() - n_true(); }
};

// Reads "node_id<TAB>label<TAB>confidence<TAB>is_pseudo" rows.
inline PseudoTable load_pseudo_labels_tsv(const std::string& path) {
  auto in = detail::open_text(path);
  PseudoTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = trim(line);
    if (body.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = body.find('\t', start);
      fields.push_back(body.substr(start, tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) detail::parse_fail(path, lineno, "expected 4 tab-separated fields");
    std::uint64_t node = 0, label = 0, pseudo = 0;
    double conf = 0;
    if (!parse_u64(fields[0], node) || !parse_u64(fields[1], label) ||
        !parse_double(fields[2], conf) || !parse_u64(fields[3], pseudo) || pseudo > 1)
      detail::parse_fail(path, lineno, "bad pseudo-label row");
    if (!(conf >= 0.0 && conf <= 1.0))
      detail::parse_fail(path, lineno, "confidence out of [0,1]");
    t.node.push_back(node);
    t.label.push_back(label);
    t.confidence.push_back(conf);
    t.is_pseudo.push_back(static_cast<char>(pseudo));
  }
  return t;
}

// Finetune export: per-node supervision rows plus the loss weights an
// external finetuner needs (1/m for true labels, 1/n for pseudo labels).
inline void save_finetune_export(const PseudoTable& t, const std::string& path) {
  std::size_t m = t.n_true();
  std::size_t n = t.n_pseudo();
  if (m == 0) fail(errc::contract, "finetune export needs at least one true label");
  if (n == 0) fail(errc::contract, "finetune export needs at least one pseudo label");
  auto out = detail::create_text(path);
  out << "# SFGL-FT v1 m=" << m << " n=" << n << " w_true="
      << fmt_double(1.0 / static_cast<double>(m)) << " w_pseudo="
      << fmt_double(1.0 / static_cast<double>(n)) << '\n';
  for (std::size_t i = 0; i < t.node.size(); ++i)
    out << t.node[i] << '\t' << t.label[i] << '\t' << int(t.is_pseudo[i]) << '\t'
        << fmt_double(t.confidence[i]) << '\n';
  if (!out) fail(errc::io, "write failed for '" + path + "'");
}

inline void save_finetune_export(const PseudoLabels& pl, const LabelTable& labels,
                                 const Split& split, const std::string& path) {
  PseudoTable t;
  std::vector<char> labeled(labels.n_nodes, 0);
  for (auto i : split.labeled_idx) labeled[i] = 1;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < labels.n_nodes; ++i) {
    t.node.push_back(i);
    if (labeled[i]) {
      t.label.push_back(static_cast<std::size_t>(labels.labels[i]));
      t.confidence.push_back(1.0);
      t.is_pseudo.push_back(0);
    } else {
      if (cursor >= pl.nodes.size() || pl.nodes[cursor] != i)
        fail(errc::contract, "pseudo labels do not cover node " + std::to_string(i));
      t.label.push_back(pl.labels[cursor]);
      t.confidence.push_back(pl.confidence[cursor]);
      t.is_pseudo.push_back(1);
      ++cursor;
    }
  }
  save_finetune_export(t, path);
}

enum class PipelineMode { export_import, self_contained };

inline const char* pipeline_mode_name(PipelineMode m) {
  return m == PipelineMode::export_import ? "export-import" : "self-contained";
}

inline PipelineMode parse_pipeline_mode(const std::string& s) {
  if (s == "export-import") return PipelineMode::export_import;
  if (s == "self-contained") return PipelineMode::self_contained;
  fail(errc::config, "unknown mode '" + s + "' (expected export-import or self-contained)");
}

struct PipelineConfig {
  std::string features;
  std::string format = "coo-text";
  std::string labels;
  std::string edges;       // optional real edge list
  std::string embeddings;  // optional stage-b input override
  std::size_t k = 5;
  std::string metric = "cosine";
  std::size_t budget = 0;
  std::string strategy = "auto";  // auto | uniform | per-class-balanced
  std::size_t val_budget = 0;
  bool tfidf = false;
  GcnHyper hyper;
  std::size_t iterations = 1;
  std::string mode = "self-contained";
  std::string out = "out";
  std::vector<std::size_t> compare_ks;
};

// Flat key=value config file; '#' lines are comments.
inline PipelineConfig load_config(const std::string& path) {
  auto in = detail::open_text(path);
  PipelineConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos)
      detail::parse_fail(path, lineno, "expected key=value");
    std::string key{trim(body.substr(0, eq))};
    std::string value{trim(body.substr(eq + 1))};

    auto as_u64 = [&]() {
      std::uint64_t v = 0;
      if (!parse_u64(value, v)) detail::parse_fail(path, lineno, "expected integer for " + key);
      return v;
    };
    auto as_double = [&]() {
      double v = 0;
      if (!parse_double(value, v)) detail::parse_fail(path, lineno, "expected number for " + key);
      return v;
    };
    auto as_bool = [&]() {
      if (value == "1" || value == "true") return true;
      if (value == "0" || value == "false") return false;
      detail::parse_fail(path, lineno, "expected boolean for " + key);
    };

    if (key == "features") cfg.features = value;
    else if (key == "format") cfg.format = value;
    else if (key == "labels") cfg.labels = value;
    else if (key == "edges") cfg.edges = value;
    else if (key == "embeddings") cfg.embeddings = value;
    else if (key == "k") cfg.k = as_u64();
    else if (key == "metric") cfg.metric = value;
    else if (key == "budget") cfg.budget = as_u64();
    else if (key == "strategy") cfg.strategy = value;
    else if (key == "val_budget") cfg.val_budget = as_u64();
    else if (key == "tfidf") cfg.tfidf = as_bool();
    else if (key == "hidden") cfg.hyper.hidden = as_u64();
    else if (key == "learning_rate") cfg.hyper.learning_rate = as_double();
    else if (key == "dropout") cfg.hyper.dropout = as_double();
    else if (key == "weight_decay") cfg.hyper.weight_decay = as_double();
    else if (key == "epochs") cfg.hyper.epochs = as_u64();
    else if (key == "seed") cfg.hyper.seed = as_u64();
    else if (key == "iterations") cfg.iterations = as_u64();
    else if (key == "mode") cfg.mode = value;
    else if (key == "out") cfg.out = value;
    else if (key == "compare_ks") {
      cfg.compare_ks.clear();
      std::size_t start = 0;
      while (start <= value.size()) {
        auto comma = value.find(',', start);
        auto tok = trim(std::string_view(value).substr(
            start, comma == std::string::npos ? value.size() - start : comma - start));
        std::uint64_t v = 0;
        if (!parse_u64(tok, v)) detail::parse_fail(path, lineno, "expected integer list for " + key);
        cfg.compare_ks.push_back(v);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    } else {
      detail::parse_fail(path, lineno, "unknown config key '" + key + "'");
    }
  }
  return cfg;
}

// "auto" picks the balanced split when the budget divides evenly.
inline SplitStrategy resolve_strategy(const std::string& name, std::size_t budget,
                                      const LabelTable& labels) {
  if (name == "uniform") return SplitStrategy::uniform;
  if (name == "per-class-balanced") return SplitStrategy::per_class_balanced;
  if (name != "auto") fail(errc::config, "unknown strategy '" + name + "'");
  return (labels.n_classes > 0 && budget % labels.n_classes == 0)
             ? SplitStrategy::per_class_balanced
             : SplitStrategy::uniform;
}

namespace detail {

struct Dataset {
  SparseFeatureMatrix f;
  LabelTable labels;
  Split split;
  SplitStrategy strategy;
};

inline Dataset load_dataset(const PipelineConfig& cfg) {
  Dataset d;
  d.f = load_features(cfg.features, parse_feature_format(cfg.format));
  if (cfg.tfidf) d.f = tfidf_transform(d.f);
  d.labels = load_labels(cfg.labels, d.f.n_rows);
  d.strategy = resolve_strategy(cfg.strategy, cfg.budget, d.labels);
  d.split = make_split(d.labels, cfg.budget, d.strategy, cfg.hyper.seed, cfg.val_budget);
  return d;
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline json graph_stats_json(const DirectedKnnGraph& g, const DegreeReport& rep) {
  std::size_t max_in = 0;
  for (auto v : rep.in_degree) max_in = std::max(max_in, v);
  std::size_t zero_in = 0;
  for (auto v : rep.in_degree)
    if (v == 0) ++zero_in;
  return {{"n_nodes", g.n_nodes},
          {"k", g.k},
          {"metric", metric_name(g.metric)},
          {"n_directed_edges", g.n_directed_edges()},
          {"n_undirected_edges", rep.n_undirected_edges},
          {"max_in_degree", max_in},
          {"zero_in_degree_nodes", zero_in}};
}

inline json sample_fit_json(const DegreeSample& sample) {
  json out;
  try {
    PowerLawFit pl = fit_power_law(sample);
    out["powerlaw"] = pl;
    try {
      ExponentialFit ex = fit_exponential(sample, pl.theta_min);
      FitComparison cmp = compare_fits(pl, ex);
      out["exponential"] = ex;
      out["preferred"] = cmp.preferred;
      out["log_likelihood_ratio"] = cmp.log_likelihood_ratio;
    } catch (const Error& e) {
      out["exponential"] = {{"error", e.what()}};
    }
  } catch (const Error& e) {
    out["powerlaw"] = {{"error", e.what()}};
  }
  return out;
}

inline json indegree_fit_json(const DegreeReport& rep) {
  return sample_fit_json(DegreeSample{rep.in_degree});
}

// Fraction of pseudo-labels matching known true labels (test view).
inline json pseudo_accuracy_json(const PseudoLabels& pl, const LabelTable& labels) {
  std::size_t known = 0, correct = 0;
  for (std::size_t i = 0; i < pl.nodes.size(); ++i) {
    auto y = labels.labels[pl.nodes[i]];
    if (y == LabelTable::unknown) continue;
    ++known;
    if (static_cast<std::size_t>(y) == pl.labels[i]) ++correct;
  }
  json j = {{"n_pseudo", pl.nodes.size()}, {"n_with_known_label", known}};
  if (known > 0)
    j["pseudo_accuracy"] = static_cast<double>(correct) / static_cast<double>(known);
  return j;
}

inline json stage_a_config_echo(const PipelineConfig& cfg) {
  return {{"features", cfg.features}, {"format", cfg.format},
          {"labels", cfg.labels},     {"k", cfg.k},
          {"metric", cfg.metric},     {"budget", cfg.budget},
          {"strategy", cfg.strategy}, {"val_budget", cfg.val_budget},
          {"tfidf", cfg.tfidf},       {"hidden", cfg.hyper.hidden},
          {"learning_rate", cfg.hyper.learning_rate},
          {"dropout", cfg.hyper.dropout},
          {"weight_decay", cfg.hyper.weight_decay},
          {"epochs", cfg.hyper.epochs},
          {"seed", cfg.hyper.seed},   {"mode", cfg.mode},
          {"out", cfg.out}};
}

// Stage b deliberately echoes only the inputs it consumes, so that a
// self-contained run and an external-finetuner run over identical
// artifacts produce identical reports.
inline json stage_b_config_echo(const PipelineConfig& cfg, const std::string& emb_path,
                                const DirectedKnnGraph& g) {
  return {{"embeddings", emb_path},   {"graph_k", g.k},
          {"graph_metric", metric_name(g.metric)},
          {"labels", cfg.labels},     {"budget", cfg.budget},
          {"strategy", cfg.strategy}, {"val_budget", cfg.val_budget},
          {"hidden", cfg.hyper.hidden},
          {"learning_rate", cfg.hyper.learning_rate},
          {"dropout", cfg.hyper.dropout},
          {"weight_decay", cfg.hyper.weight_decay},
          {"epochs", cfg.hyper.epochs},
          {"seed", cfg.hyper.seed},   {"out", cfg.out}};
}

inline json train_metrics_json(const TrainResult<float>& tr) {
  json j = {{"final_loss", tr.loss_history.back()},
            {"final_train_accuracy", tr.train_acc_history.back()},
            {"loss_history", tr.loss_history},
            {"train_acc_history", tr.train_acc_history},
            {"best_epoch", tr.best_epoch}};
  if (!tr.val_acc_history.empty()) j["val_acc_history"] = tr.val_acc_history;
  return j;
}

inline void write_state(const PipelineConfig& cfg, const std::string& last_stage,
                        std::size_t iteration, const std::string& embeddings) {
  json state = {{"last_stage", last_stage},
                {"iteration", iteration},
                {"embeddings", embeddings},
                {"seed", cfg.hyper.seed},
                {"config_hash", config_hash(stage_a_config_echo(cfg))}};
  write_json_file(state, join_path(cfg.out, "pipeline_state.json"));
}

inline json read_state(const PipelineConfig& cfg) {
  std::string path = join_path(cfg.out, "pipeline_state.json");
  if (!std::filesystem::exists(path)) return json::object();
  return read_json_file(path);
}

}  // namespace detail

// Algorithm steps 1-4: graph construction, pseudo-labeler training,
// pseudo-label generation, finetune export. Self-contained mode also
// emits identity embeddings (the shallow features) for stage b.
inline json run_stage_a(const PipelineConfig& cfg) {
  std::string started = now_iso8601();
  auto t0 = std::chrono::steady_clock::now();
  PipelineMode mode = parse_pipeline_mode(cfg.mode);
  ensure_dir(cfg.out);

  detail::Dataset data = detail::load_dataset(cfg);
  DirectedKnnGraph g = build_knn_graph(data.f, cfg.k, parse_metric(cfg.metric));
  DegreeReport rep = degree_report(g);
  save_edge_list(g, detail::join_path(cfg.out, "graph.edges"));
  save_graph_sidecar(g, detail::join_path(cfg.out, "graph.json"));
  save_degree_csv(rep, detail::join_path(cfg.out, "degrees.csv"));

  NormalizedAdjacency adj = normalize_adjacency(symmetrize(g));
  TrainResult<float> tr = train_gcn<float>(data.f, adj, data.labels, data.split, cfg.hyper);
  save_checkpoint(tr.params, detail::join_path(cfg.out, "gcn_a.ckpt"));

  PseudoLabels pl = pseudo_label(tr.params, data.f, adj, data.split);
  save_pseudo_labels_tsv(pl, data.labels, data.split,
                         detail::join_path(cfg.out, "pseudo_labels.tsv"));
  save_finetune_export(pl, data.labels, data.split,
                       detail::join_path(cfg.out, "finetune_export.tsv"));

  std::string emb_path;
  if (mode == PipelineMode::self_contained) {
    emb_path = detail::join_path(cfg.out, "embeddings.emb");
    export_embeddings(features_as_embeddings(data.f), emb_path);
  }

  json result = {{"graph", detail::graph_stats_json(g, rep)},
                 {"in_degree_fit", detail::indegree_fit_json(rep)},
                 {"train", detail::train_metrics_json(tr)},
                 {"pseudo", detail::pseudo_accuracy_json(pl, data.labels)},
                 {"strategy_resolved", split_strategy_name(data.strategy)}};
  if (!data.split.test_idx.empty())
    result["test_accuracy"] =
        evaluate_accuracy(tr.params, data.f, adj, data.labels, data.split.test_idx);

  json config = detail::stage_a_config_echo(cfg);
  json report = {{"command", "run"},
                 {"stage", "a"},
                 {"config", config},
                 {"config_hash", config_hash(config)},
                 {"seed", cfg.hyper.seed},
                 {"result", result},
                 {"timestamps",
                  {{"started", started},
                   {"finished", now_iso8601()},
                   {"elapsed_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count()}}}};
  write_json_file(report, detail::join_path(cfg.out, "stage_a_report.json"));
  detail::write_state(cfg, "a", 0, emb_path);
  return report;
}

// Algorithm steps 8-10: train the final classifier on imported embeddings
// over the stage-a graph, using the true labels only.
inline json run_stage_b(const PipelineConfig& cfg) {
  std::string started = now_iso8601();
  auto t0 = std::chrono::steady_clock::now();
  ensure_dir(cfg.out);

  std::string edges_path = detail::join_path(cfg.out, "graph.edges");
  std::string sidecar_path = detail::join_path(cfg.out, "graph.json");
  if (!std::filesystem::exists(edges_path) || !std::filesystem::exists(sidecar_path))
    fail(errc::config, "missing artifact " + edges_path + " — run stage a first");

  std::string emb_path = cfg.embeddings;
  if (emb_path.empty()) emb_path = detail::join_path(cfg.out, "embeddings.emb");
  if (!std::filesystem::exists(emb_path))
    fail(errc::config, "embeddings required: " + emb_path +
                           " not found (run stage a in self-contained mode or set embeddings=)");

  DirectedKnnGraph g = load_knn_graph(edges_path, sidecar_path);
  EmbeddingMatrix e = import_embeddings(emb_path, g.n_nodes);
  SparseFeatureMatrix fe = embeddings_as_features(e);

  LabelTable labels = load_labels(cfg.labels, g.n_nodes);
  SplitStrategy strategy = resolve_strategy(cfg.strategy, cfg.budget, labels);
  Split split = make_split(labels, cfg.budget, strategy, cfg.hyper.seed, cfg.val_budget);

  GcnHyper hyper = cfg.hyper;
  hyper.seed = mix_seed(cfg.hyper.seed, 2);  // stage-b stream
  NormalizedAdjacency adj = normalize_adjacency(symmetrize(g));
  TrainResult<float> tr = train_gcn<float>(fe, adj, labels, split, hyper);
  save_checkpoint(tr.params, detail::join_path(cfg.out, "gcn_b.ckpt"));

  PseudoLabels preds = pseudo_label(tr.params, fe, adj, split);
  save_pseudo_labels_tsv(preds, labels, split,
                         detail::join_path(cfg.out, "predictions.tsv"));

  json result = {{"train", detail::train_metrics_json(tr)},
                 {"strategy_resolved", split_strategy_name(strategy)},
                 {"embedding_dim", e.d}};
  if (!split.test_idx.empty())
    result["test_accuracy"] = evaluate_accuracy(tr.params, fe, adj, labels, split.test_idx);

  json config = detail::stage_b_config_echo(cfg, emb_path, g);
  json report = {{"command", "run"},
                 {"stage", "b"},
                 {"config", config},
                 {"config_hash", config_hash(config)},
                 {"seed", cfg.hyper.seed},
                 {"result", result},
                 {"timestamps",
                  {{"started", started},
                   {"finished", now_iso8601()},
                   {"elapsed_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count()}}}};
  write_json_file(report, detail::join_path(cfg.out, "stage_b_report.json"));
  detail::write_state(cfg, "b", detail::read_state(cfg).value("iteration", 0), emb_path);
  return report;
}

// Algorithm 2: rebuild the graph on current embeddings, retrain the
// pseudo-labeler there, refresh the finetune export.
inline json run_iteration(const PipelineConfig& cfg) {
  std::string started = now_iso8601();
  auto t0 = std::chrono::steady_clock::now();
  ensure_dir(cfg.out);

  json state = detail::read_state(cfg);
  std::size_t iteration = state.value("iteration", 0) + 1;

  std::string emb_path = cfg.embeddings;
  if (emb_path.empty()) emb_path = state.value("embeddings", "");
  if (emb_path.empty()) emb_path = detail::join_path(cfg.out, "embeddings.emb");
  if (!std::filesystem::exists(emb_path))
    fail(errc::config, "embeddings required: " + emb_path + " not found");

  EmbeddingMatrix e = import_embeddings(emb_path);
  SparseFeatureMatrix fe = embeddings_as_features(e);
  LabelTable labels = load_labels(cfg.labels, fe.n_rows);
  SplitStrategy strategy = resolve_strategy(cfg.strategy, cfg.budget, labels);
  Split split = make_split(labels, cfg.budget, strategy, cfg.hyper.seed, cfg.val_budget);

  std::string iter_dir = detail::join_path(cfg.out, "iter" + std::to_string(iteration));
  ensure_dir(iter_dir);

  DirectedKnnGraph g = build_knn_graph(fe, cfg.k, parse_metric(cfg.metric));
  DegreeReport rep = degree_report(g);
  save_edge_list(g, detail::join_path(iter_dir, "graph.edges"));
  save_graph_sidecar(g, detail::join_path(iter_dir, "graph.json"));
  save_degree_csv(rep, detail::join_path(iter_dir, "degrees.csv"));

  GcnHyper hyper = cfg.hyper;
  hyper.seed = mix_seed(cfg.hyper.seed, 100 + iteration);
  NormalizedAdjacency adj = normalize_adjacency(symmetrize(g));
  TrainResult<float> tr = train_gcn<float>(fe, adj, labels, split, hyper);
  save_checkpoint(tr.params, detail::join_path(iter_dir, "gcn_a.ckpt"));

  PseudoLabels pl = pseudo_label(tr.params, fe, adj, split);
  save_pseudo_labels_tsv(pl, labels, split, detail::join_path(iter_dir, "pseudo_labels.tsv"));
  save_finetune_export(pl, labels, split, detail::join_path(iter_dir, "finetune_export.tsv"));

  json result = {{"iteration", iteration},
                 {"graph", detail::graph_stats_json(g, rep)},
                 {"in_degree_fit", detail::indegree_fit_json(rep)},
                 {"train", detail::train_metrics_json(tr)},
                 {"pseudo", detail::pseudo_accuracy_json(pl, labels)},
                 {"strategy_resolved", split_strategy_name(strategy)}};
  if (!split.test_idx.empty())
    result["test_accuracy"] = evaluate_accuracy(tr.params, fe, adj, labels, split.test_idx);

  json config = detail::stage_a_config_echo(cfg);
  config["embeddings"] = emb_path;
  json report = {{"command", "run"},
                 {"stage", "iterate"},
                 {"iteration", iteration},
                 {"config", config},
                 {"config_hash", config_hash(config)},
                 {"seed", cfg.hyper.seed},
                 {"result", result},
                 {"timestamps",
                  {{"started", started},
                   {"finished", now_iso8601()},
                   {"elapsed_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count()}}}};
  write_json_file(report, detail::join_path(iter_dir, "iterate_report.json"));
  detail::write_state(cfg, "iterate", iteration, emb_path);
  return report;
}

// Table-4 style comparison: identical GCNs on a supplied real edge list
// and on KNN graphs for the configured k values.
inline json run_real_graph_comparison(const PipelineConfig& cfg) {
  std::string started = now_iso8601();
  auto t0 = std::chrono::steady_clock::now();
  ensure_dir(cfg.out);
  if (cfg.edges.empty()) fail(errc::config, "compare-real requires edges=<real edge list>");
  if (!std::filesystem::exists(cfg.edges))
    fail(errc::config, "edge list '" + cfg.edges + "' not found");

  detail::Dataset data = detail::load_dataset(cfg);
  GcnHyper hyper = cfg.hyper;
  hyper.seed = mix_seed(cfg.hyper.seed, 3);  // shared by all graphs under comparison

  auto pairs = load_edge_list(cfg.edges, data.f.n_rows);
  UndirectedGraph real = UndirectedGraph::from_pairs(data.f.n_rows, pairs);
  NormalizedAdjacency adj_real = normalize_adjacency(real);
  TrainResult<float> tr_real = train_gcn<float>(data.f, adj_real, data.labels, data.split, hyper);

  json real_json = {{"n_undirected_edges", real.n_edges()},
                    {"final_train_accuracy", tr_real.train_acc_history.back()}};
  if (!data.split.test_idx.empty())
    real_json["test_accuracy"] =
        evaluate_accuracy(tr_real.params, data.f, adj_real, data.labels, data.split.test_idx);

  std::vector<std::size_t> ks = cfg.compare_ks.empty()
                                    ? std::vector<std::size_t>{cfg.k}
                                    : cfg.compare_ks;
  json knn_json = json::array();
  for (auto k : ks) {
    DirectedKnnGraph g = build_knn_graph(data.f, k, parse_metric(cfg.metric));
    NormalizedAdjacency adj = normalize_adjacency(symmetrize(g));
    TrainResult<float> tr = train_gcn<float>(data.f, adj, data.labels, data.split, hyper);
    json entry = {{"k", k},
                  {"n_undirected_edges", symmetrize(g).n_edges()},
                  {"final_train_accuracy", tr.train_acc_history.back()}};
    if (!data.split.test_idx.empty())
      entry["test_accuracy"] =
          evaluate_accuracy(tr.params, data.f, adj, data.labels, data.split.test_idx);
    knn_json.push_back(entry);
  }

  json config = detail::stage_a_config_echo(cfg);
  config["edges"] = cfg.edges;
  config["compare_ks"] = ks;
  json report = {{"command", "run"},
                 {"stage", "compare-real"},
                 {"config", config},
                 {"config_hash", config_hash(config)},
                 {"seed", cfg.hyper.seed},
                 {"result", {{"real", real_json}, {"knn", knn_json},
                             {"strategy_resolved", split_strategy_name(data.strategy)}}},
                 {"timestamps",
                  {{"started", started},
                   {"finished", now_iso8601()},
                   {"elapsed_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count()}}}};
  write_json_file(report, detail::join_path(cfg.out, "compare_real_report.json"));
  return report;
}

}  // namespace sfgl
