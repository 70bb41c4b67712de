#include <chrono>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sfgl/pipeline.hpp"

namespace fs = std::filesystem;
using sfgl::json;

namespace {

struct Timer {
  std::string started = sfgl::now_iso8601();
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  json stamps() const {
    return {{"started", started},
            {"finished", sfgl::now_iso8601()},
            {"elapsed_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - t0)
                               .count()}};
  }
};

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// User-supplied input paths are checked up front; a missing file is a
// usage error, not a runtime one.
void require_file(const std::string& flag, const std::string& path) {
  if (!path.empty() && !fs::exists(path))
    throw CLI::ValidationError(flag, "file not found: " + path);
}

// Sidecar convention: graph.edges -> graph.json next to it.
std::string sidecar_for(const std::string& edges, const std::string& explicit_path) {
  if (!explicit_path.empty()) return explicit_path;
  return (fs::path(edges).parent_path() / "graph.json").string();
}

void finish(const char* command, json config, std::uint64_t seed, json result,
            const Timer& t, const std::string& out_dir) {
  json report = {{"command", command},
                 {"config", std::move(config)},
                 {"config_hash", ""},
                 {"seed", seed},
                 {"result", std::move(result)},
                 {"timestamps", t.stamps()}};
  report["config_hash"] = sfgl::config_hash(report["config"]);
  sfgl::write_json_file(report, join(out_dir, "report.json"));
  emit(report);
}

sfgl::SparseFeatureMatrix load_node_features(const std::string& features,
                                             const std::string& format, bool tfidf,
                                             const std::string& embeddings,
                                             std::size_t expected_n) {
  if (!features.empty()) {
    auto f = sfgl::load_features(features, sfgl::parse_feature_format(format));
    if (tfidf) f = sfgl::tfidf_transform(f);
    if (expected_n != 0 && f.n_rows != expected_n)
      sfgl::fail(sfgl::errc::shape,
                 features + ": expected " + std::to_string(expected_n) + " rows, found " +
                     std::to_string(f.n_rows));
    return f;
  }
  return sfgl::embeddings_as_features(sfgl::import_embeddings(embeddings, expected_n));
}

// ---- build-graph ----

void add_build_graph(CLI::App& app) {
  struct Opts {
    std::string features, format = "coo-text", metric = "cosine", out = "out";
    std::size_t k = 5;
    bool tfidf = false;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("build-graph", "build a KNN graph from node features");
  sub->add_option("--features", o->features, "feature matrix file")->required();
  sub->add_option("--format", o->format, "coo-text | dense-text")
      ->check(CLI::IsMember({"coo-text", "dense-text"}));
  sub->add_option("--k", o->k, "neighbors per node")->check(CLI::PositiveNumber);
  sub->add_option("--metric", o->metric, "cosine | euclidean | manhattan")
      ->check(CLI::IsMember({"cosine", "euclidean", "manhattan"}));
  sub->add_flag("--tfidf", o->tfidf, "apply TF-IDF weighting first");
  sub->add_option("--out", o->out, "output directory");

  sub->callback([o]() {
    require_file("--features", o->features);
    Timer t;
    sfgl::ensure_dir(o->out);
    auto f = load_node_features(o->features, o->format, o->tfidf, "", 0);
    auto g = sfgl::build_knn_graph(f, o->k, sfgl::parse_metric(o->metric));
    auto rep = sfgl::degree_report(g);
    sfgl::save_edge_list(g, join(o->out, "graph.edges"));
    sfgl::save_graph_sidecar(g, join(o->out, "graph.json"));
    sfgl::save_degree_csv(rep, join(o->out, "degrees.csv"));
    json config = {{"features", o->features}, {"format", o->format}, {"k", o->k},
                   {"metric", o->metric},     {"tfidf", o->tfidf},   {"out", o->out}};
    finish("build-graph", config, 0, sfgl::detail::graph_stats_json(g, rep), t, o->out);
  });
}

// ---- degrees ----

void add_degrees(CLI::App& app) {
  struct Opts {
    std::string graph, sidecar, out = "out";
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("degrees", "degree report for an existing KNN graph");
  sub->add_option("--graph", o->graph, "edge list file")->required();
  sub->add_option("--sidecar", o->sidecar, "graph JSON sidecar (default: graph.json beside it)");
  sub->add_option("--out", o->out, "output directory");

  sub->callback([o]() {
    std::string sidecar = sidecar_for(o->graph, o->sidecar);
    require_file("--graph", o->graph);
    require_file("--sidecar", sidecar);
    Timer t;
    sfgl::ensure_dir(o->out);
    auto g = sfgl::load_knn_graph(o->graph, sidecar);
    auto rep = sfgl::degree_report(g);
    sfgl::save_degree_csv(rep, join(o->out, "degrees.csv"));

    std::size_t sum_nonrecip = 0;
    for (auto v : rep.nonreciprocal_in) sum_nonrecip += v;
    std::size_t identity_rhs = 2 * rep.n_undirected_edges - g.k * g.n_nodes;
    json result = sfgl::detail::graph_stats_json(g, rep);
    result["sum_nonreciprocal_in"] = sum_nonrecip;
    result["identity_rhs"] = identity_rhs;
    result["identity_holds"] = (sum_nonrecip == identity_rhs);

    json config = {{"graph", o->graph}, {"sidecar", sidecar}, {"out", o->out}};
    finish("degrees", config, 0, result, t, o->out);
  });
}

// ---- fit ----

void add_fit(CLI::App& app) {
  struct Opts {
    std::string degrees, graph, sidecar, column = "in", model = "powerlaw", out = "out";
    std::size_t theta_min = 0;  // 0 = auto (KS scan for powerlaw, 1 for exponential)
    unsigned bins = 10;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("fit", "fit degree-distribution models");
  auto* deg = sub->add_option("--degrees", o->degrees, "degree file (CSV report or one per line)");
  auto* gr = sub->add_option("--graph", o->graph, "edge list file");
  deg->excludes(gr);
  gr->excludes(deg);
  sub->add_option("--sidecar", o->sidecar, "graph JSON sidecar");
  sub->add_option("--column", o->column, "in | out | undirected | nonreciprocal_in")
      ->check(CLI::IsMember({"in", "out", "undirected", "nonreciprocal_in"}));
  sub->add_option("--model", o->model, "powerlaw | exponential | both")
      ->check(CLI::IsMember({"powerlaw", "exponential", "both"}));
  sub->add_option("--theta-min", o->theta_min, "fixed tail cutoff (default: select by KS)");
  sub->add_option("--bins-per-decade", o->bins, "log-binning resolution")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", o->out, "output directory");

  sub->callback([o, sub]() {
    if (!sub->count("--degrees") && !sub->count("--graph"))
      throw CLI::RequiredError("--degrees or --graph");
    Timer t;
    std::vector<std::size_t> degrees;
    json source;
    if (!o->degrees.empty()) {
      require_file("--degrees", o->degrees);
      degrees = sfgl::load_degree_file(o->degrees, sfgl::parse_degree_column(o->column));
      source = {{"degrees", o->degrees}, {"column", o->column}};
    } else {
      std::string sidecar = sidecar_for(o->graph, o->sidecar);
      require_file("--graph", o->graph);
      require_file("--sidecar", sidecar);
      auto g = sfgl::load_knn_graph(o->graph, sidecar);
      degrees = sfgl::select_degree_column(sfgl::degree_report(g),
                                           sfgl::parse_degree_column(o->column));
      source = {{"graph", o->graph}, {"sidecar", sidecar}, {"column", o->column}};
    }
    sfgl::ensure_dir(o->out);

    sfgl::DegreeSample sample{degrees};
    sfgl::save_histogram_csv(sfgl::log_binned_histogram(sample, o->bins),
                             join(o->out, "histogram.csv"));

    std::optional<std::size_t> theta;
    if (o->theta_min > 0) theta = o->theta_min;
    json fit;
    if (o->model == "powerlaw") {
      fit = sfgl::fit_power_law(sample, theta);
    } else if (o->model == "exponential") {
      fit = sfgl::fit_exponential(sample, theta.value_or(1));
    } else {
      auto pl = sfgl::fit_power_law(sample, theta);
      auto ex = sfgl::fit_exponential(sample, pl.theta_min);
      auto cmp = sfgl::compare_fits(pl, ex);
      fit = {{"powerlaw", pl},
             {"exponential", ex},
             {"preferred", cmp.preferred},
             {"log_likelihood_ratio", cmp.log_likelihood_ratio}};
    }
    sfgl::write_json_file(fit, join(o->out, "fit.json"));

    json config = source;
    config["model"] = o->model;
    config["theta_min"] = o->theta_min;
    config["bins_per_decade"] = o->bins;
    config["out"] = o->out;
    finish("fit", config, 0, {{"fit", fit}, {"n_samples", degrees.size()}}, t, o->out);
  });
}

// ---- ba-gen ----

void add_ba_gen(CLI::App& app) {
  struct Opts {
    std::size_t n = 0, m = 0;
    std::uint64_t seed = 0;
    std::string out = "out";
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("ba-gen", "generate a preferential-attachment graph");
  sub->add_option("--n", o->n, "number of nodes")->required()->check(CLI::PositiveNumber);
  sub->add_option("--m", o->m, "edges per arriving node")->required()->check(CLI::PositiveNumber);
  sub->add_option("--seed", o->seed, "generator seed");
  sub->add_option("--out", o->out, "output directory");

  sub->callback([o]() {
    if (o->n <= o->m)
      throw CLI::ValidationError("--n", "must exceed --m (got n=" + std::to_string(o->n) +
                                            ", m=" + std::to_string(o->m) + ")");
    Timer t;
    sfgl::ensure_dir(o->out);
    auto g = sfgl::generate_ba_graph(o->n, o->m, o->seed);
    sfgl::save_undirected_edges(g, join(o->out, "ba.edges"));
    json fit = sfgl::detail::sample_fit_json(sfgl::DegreeSample{g.degrees()});
    sfgl::write_json_file(fit, join(o->out, "fit.json"));
    json config = {{"n", o->n}, {"m", o->m}, {"seed", o->seed}, {"out", o->out}};
    json result = {{"n_nodes", g.n_nodes}, {"n_undirected_edges", g.n_edges()}, {"fit", fit}};
    finish("ba-gen", config, o->seed, result, t, o->out);
  });
}

// ---- shared training options ----

struct TrainIo {
  std::string features, embeddings, format = "coo-text";
  std::string graph, sidecar, labels;
  std::string strategy = "auto", out = "out";
  std::size_t budget = 0, val_budget = 0;
  bool tfidf = false;
  sfgl::GcnHyper hyper;
};

void add_train_io(CLI::App* sub, TrainIo& o, bool with_hyper) {
  auto* feat = sub->add_option("--features", o.features, "feature matrix file");
  auto* emb = sub->add_option("--embeddings", o.embeddings, "embedding matrix file");
  feat->excludes(emb);
  emb->excludes(feat);
  sub->add_option("--format", o.format, "coo-text | dense-text")
      ->check(CLI::IsMember({"coo-text", "dense-text"}));
  sub->add_flag("--tfidf", o.tfidf, "apply TF-IDF weighting (features only)");
  sub->add_option("--graph", o.graph, "edge list file")->required();
  sub->add_option("--sidecar", o.sidecar, "graph JSON sidecar");
  sub->add_option("--labels", o.labels, "label file")->required();
  sub->add_option("--budget", o.budget, "labeled-node budget")
      ->required()
      ->check(CLI::PositiveNumber);
  sub->add_option("--strategy", o.strategy, "auto | uniform | per-class-balanced")
      ->check(CLI::IsMember({"auto", "uniform", "per-class-balanced"}));
  sub->add_option("--val-budget", o.val_budget, "validation nodes held out");
  sub->add_option("--seed", o.hyper.seed, "split / init seed");
  sub->add_option("--out", o.out, "output directory");
  if (with_hyper) {
    sub->add_option("--hidden", o.hyper.hidden, "hidden width");
    sub->add_option("--lr", o.hyper.learning_rate, "Adam learning rate");
    sub->add_option("--dropout", o.hyper.dropout, "hidden dropout probability");
    sub->add_option("--weight-decay", o.hyper.weight_decay, "L2 penalty");
    sub->add_option("--epochs", o.hyper.epochs, "training epochs")->check(CLI::PositiveNumber);
  }
}

void check_train_io(const TrainIo& o, const std::string& sidecar) {
  if (o.features.empty() && o.embeddings.empty())
    throw CLI::RequiredError("--features or --embeddings");
  require_file("--features", o.features);
  require_file("--embeddings", o.embeddings);
  require_file("--graph", o.graph);
  require_file("--sidecar", sidecar);
  require_file("--labels", o.labels);
}

json train_io_config(const TrainIo& o, const std::string& sidecar, bool with_hyper) {
  json config = {{"format", o.format},     {"tfidf", o.tfidf},
                 {"graph", o.graph},       {"sidecar", sidecar},
                 {"labels", o.labels},     {"budget", o.budget},
                 {"strategy", o.strategy}, {"val_budget", o.val_budget},
                 {"seed", o.hyper.seed},   {"out", o.out}};
  if (!o.features.empty()) config["features"] = o.features;
  if (!o.embeddings.empty()) config["embeddings"] = o.embeddings;
  if (with_hyper) {
    config["hidden"] = o.hyper.hidden;
    config["learning_rate"] = o.hyper.learning_rate;
    config["dropout"] = o.hyper.dropout;
    config["weight_decay"] = o.hyper.weight_decay;
    config["epochs"] = o.hyper.epochs;
  }
  return config;
}

// ---- train ----

void add_train(CLI::App& app) {
  auto o = std::make_shared<TrainIo>();
  CLI::App* sub = app.add_subcommand("train", "train the GCN pseudo-labeler");
  add_train_io(sub, *o, true);

  sub->callback([o]() {
    std::string sidecar = sidecar_for(o->graph, o->sidecar);
    check_train_io(*o, sidecar);
    Timer t;
    sfgl::ensure_dir(o->out);
    auto g = sfgl::load_knn_graph(o->graph, sidecar);
    auto adj = sfgl::normalize_adjacency(sfgl::symmetrize(g));
    auto f = load_node_features(o->features, o->format, o->tfidf, o->embeddings, g.n_nodes);
    auto labels = sfgl::load_labels(o->labels, g.n_nodes);
    auto strategy = sfgl::resolve_strategy(o->strategy, o->budget, labels);
    auto split = sfgl::make_split(labels, o->budget, strategy, o->hyper.seed, o->val_budget);

    auto tr = sfgl::train_gcn<float>(f, adj, labels, split, o->hyper);
    sfgl::save_checkpoint(tr.params, join(o->out, "gcn.ckpt"));
    auto pl = sfgl::pseudo_label(tr.params, f, adj, split);
    sfgl::save_pseudo_labels_tsv(pl, labels, split, join(o->out, "pseudo_labels.tsv"));

    json metrics = sfgl::detail::train_metrics_json(tr);
    metrics["pseudo"] = sfgl::detail::pseudo_accuracy_json(pl, labels);
    metrics["strategy_resolved"] = sfgl::split_strategy_name(strategy);
    if (!split.test_idx.empty())
      metrics["test_accuracy"] = sfgl::evaluate_accuracy(tr.params, f, adj, labels, split.test_idx);
    sfgl::write_json_file(metrics, join(o->out, "metrics.json"));

    finish("train", train_io_config(*o, sidecar, true), o->hyper.seed, metrics, t, o->out);
  });
}

// ---- pseudo-label ----

void add_pseudo_label(CLI::App& app) {
  struct Opts : TrainIo {
    std::string checkpoint;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("pseudo-label", "assign labels from a trained checkpoint");
  sub->add_option("--checkpoint", o->checkpoint, "model checkpoint")->required();
  add_train_io(sub, *o, false);

  sub->callback([o]() {
    std::string sidecar = sidecar_for(o->graph, o->sidecar);
    require_file("--checkpoint", o->checkpoint);
    check_train_io(*o, sidecar);
    Timer t;
    sfgl::ensure_dir(o->out);
    auto params = sfgl::load_checkpoint(o->checkpoint);
    auto g = sfgl::load_knn_graph(o->graph, sidecar);
    auto adj = sfgl::normalize_adjacency(sfgl::symmetrize(g));
    auto f = load_node_features(o->features, o->format, o->tfidf, o->embeddings, g.n_nodes);
    auto labels = sfgl::load_labels(o->labels, g.n_nodes);
    auto strategy = sfgl::resolve_strategy(o->strategy, o->budget, labels);
    auto split = sfgl::make_split(labels, o->budget, strategy, o->hyper.seed, o->val_budget);

    auto pl = sfgl::pseudo_label(params, f, adj, split);
    sfgl::save_pseudo_labels_tsv(pl, labels, split, join(o->out, "pseudo_labels.tsv"));

    json result = sfgl::detail::pseudo_accuracy_json(pl, labels);
    result["strategy_resolved"] = sfgl::split_strategy_name(strategy);
    json config = train_io_config(*o, sidecar, false);
    config["checkpoint"] = o->checkpoint;
    finish("pseudo-label", config, o->hyper.seed, result, t, o->out);
  });
}

// ---- export-finetune ----

void add_export_finetune(CLI::App& app) {
  struct Opts {
    std::string pseudo, out = "out";
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("export-finetune",
                                     "convert a pseudo-label TSV into a finetuning export");
  sub->add_option("--pseudo", o->pseudo, "pseudo-label TSV")->required();
  sub->add_option("--out", o->out, "output directory");

  sub->callback([o]() {
    require_file("--pseudo", o->pseudo);
    Timer t;
    sfgl::ensure_dir(o->out);
    auto table = sfgl::load_pseudo_labels_tsv(o->pseudo);
    sfgl::save_finetune_export(table, join(o->out, "finetune_export.tsv"));
    std::size_t m = table.n_true(), n = table.n_pseudo();
    json result = {{"m", m},
                   {"n", n},
                   {"w_true", 1.0 / static_cast<double>(m)},
                   {"w_pseudo", 1.0 / static_cast<double>(n)}};
    finish("export-finetune", {{"pseudo", o->pseudo}, {"out", o->out}}, 0, result, t, o->out);
  });
}

// ---- import-embeddings ----

void add_import_embeddings(CLI::App& app) {
  struct Opts {
    std::string embeddings, out = "out";
    std::size_t n = 0;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("import-embeddings",
                                     "validate and canonicalize an embedding matrix");
  sub->add_option("--embeddings", o->embeddings, "embedding matrix file")->required();
  sub->add_option("--n", o->n, "expected row count (0 = any)");
  sub->add_option("--out", o->out, "output directory");

  sub->callback([o]() {
    require_file("--embeddings", o->embeddings);
    Timer t;
    sfgl::ensure_dir(o->out);
    auto e = sfgl::import_embeddings(o->embeddings, o->n);
    sfgl::export_embeddings(e, join(o->out, "embeddings.emb"));
    json config = {{"embeddings", o->embeddings}, {"n", o->n}, {"out", o->out}};
    finish("import-embeddings", config, 0, {{"n_nodes", e.n_nodes}, {"d", e.d}}, t, o->out);
  });
}

// ---- classify ----

void add_classify(CLI::App& app) {
  struct Opts {
    std::string checkpoint, features, embeddings, format = "coo-text";
    std::string graph, sidecar, labels, out = "out";
    bool tfidf = false;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("classify", "predict a label for every node");
  sub->add_option("--checkpoint", o->checkpoint, "model checkpoint")->required();
  auto* feat = sub->add_option("--features", o->features, "feature matrix file");
  auto* emb = sub->add_option("--embeddings", o->embeddings, "embedding matrix file");
  feat->excludes(emb);
  emb->excludes(feat);
  sub->add_option("--format", o->format, "coo-text | dense-text")
      ->check(CLI::IsMember({"coo-text", "dense-text"}));
  sub->add_flag("--tfidf", o->tfidf, "apply TF-IDF weighting (features only)");
  sub->add_option("--graph", o->graph, "edge list file")->required();
  sub->add_option("--sidecar", o->sidecar, "graph JSON sidecar");
  sub->add_option("--labels", o->labels, "optional labels for accuracy reporting");
  sub->add_option("--out", o->out, "output directory");

  sub->callback([o]() {
    std::string sidecar = sidecar_for(o->graph, o->sidecar);
    if (o->features.empty() && o->embeddings.empty())
      throw CLI::RequiredError("--features or --embeddings");
    require_file("--checkpoint", o->checkpoint);
    require_file("--features", o->features);
    require_file("--embeddings", o->embeddings);
    require_file("--graph", o->graph);
    require_file("--sidecar", sidecar);
    require_file("--labels", o->labels);
    Timer t;
    sfgl::ensure_dir(o->out);
    auto params = sfgl::load_checkpoint(o->checkpoint);
    auto g = sfgl::load_knn_graph(o->graph, sidecar);
    auto adj = sfgl::normalize_adjacency(sfgl::symmetrize(g));
    auto f = load_node_features(o->features, o->format, o->tfidf, o->embeddings, g.n_nodes);

    sfgl::Split everyone;  // no labeled nodes: predictions cover the whole graph
    auto pl = sfgl::pseudo_label(params, f, adj, everyone);
    {
      auto out = sfgl::detail::create_text(join(o->out, "predictions.tsv"));
      for (std::size_t i = 0; i < pl.nodes.size(); ++i)
        out << pl.nodes[i] << '\t' << pl.labels[i] << '\t' << sfgl::fmt_double(pl.confidence[i])
            << '\n';
      if (!out) sfgl::fail(sfgl::errc::io, "write failed for predictions.tsv");
    }

    json result = {{"n_nodes", g.n_nodes}, {"n_classes", params.n_classes()}};
    if (!o->labels.empty()) {
      auto labels = sfgl::load_labels(o->labels, g.n_nodes);
      std::vector<std::size_t> known;
      for (std::size_t i = 0; i < labels.n_nodes; ++i)
        if (labels.labels[i] != sfgl::LabelTable::unknown) known.push_back(i);
      if (!known.empty())
        result["accuracy"] = sfgl::evaluate_accuracy(params, f, adj, labels, known);
    }
    json config = {{"checkpoint", o->checkpoint}, {"format", o->format},
                   {"tfidf", o->tfidf},           {"graph", o->graph},
                   {"sidecar", sidecar},          {"out", o->out}};
    if (!o->features.empty()) config["features"] = o->features;
    if (!o->embeddings.empty()) config["embeddings"] = o->embeddings;
    if (!o->labels.empty()) config["labels"] = o->labels;
    finish("classify", config, 0, result, t, o->out);
  });
}

// ---- run ----

void add_run(CLI::App& app) {
  struct Opts {
    std::string config_path, stage;
    sfgl::PipelineConfig f;  // flag values; applied over the config file
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("run", "run a pipeline stage");
  sub->add_option("--config", o->config_path, "key=value config file");
  sub->add_option("--stage", o->stage, "a | b | iterate | compare-real")
      ->required()
      ->check(CLI::IsMember({"a", "b", "iterate", "compare-real"}));
  sub->add_option("--features", o->f.features);
  sub->add_option("--format", o->f.format)
      ->check(CLI::IsMember({"coo-text", "dense-text"}));
  sub->add_option("--labels", o->f.labels);
  sub->add_option("--edges", o->f.edges);
  sub->add_option("--embeddings", o->f.embeddings);
  sub->add_option("--k", o->f.k)->check(CLI::PositiveNumber);
  sub->add_option("--metric", o->f.metric)
      ->check(CLI::IsMember({"cosine", "euclidean", "manhattan"}));
  sub->add_option("--budget", o->f.budget)->check(CLI::PositiveNumber);
  sub->add_option("--strategy", o->f.strategy)
      ->check(CLI::IsMember({"auto", "uniform", "per-class-balanced"}));
  sub->add_option("--val-budget", o->f.val_budget);
  sub->add_flag("--tfidf,!--no-tfidf", o->f.tfidf);
  sub->add_option("--hidden", o->f.hyper.hidden);
  sub->add_option("--lr", o->f.hyper.learning_rate);
  sub->add_option("--dropout", o->f.hyper.dropout);
  sub->add_option("--weight-decay", o->f.hyper.weight_decay);
  sub->add_option("--epochs", o->f.hyper.epochs)->check(CLI::PositiveNumber);
  sub->add_option("--seed", o->f.hyper.seed);
  sub->add_option("--iterations", o->f.iterations)->check(CLI::PositiveNumber);
  sub->add_option("--mode", o->f.mode)
      ->check(CLI::IsMember({"export-import", "self-contained"}));
  sub->add_option("--out", o->f.out);
  sub->add_option("--compare-ks", o->f.compare_ks)->delimiter(',');

  sub->callback([o, sub]() {
    require_file("--config", o->config_path);
    sfgl::PipelineConfig cfg;
    if (!o->config_path.empty()) cfg = sfgl::load_config(o->config_path);
    auto over = [&](const char* flag, auto copy) {
      if (sub->count(flag)) copy();
    };
    over("--features", [&] { cfg.features = o->f.features; });
    over("--format", [&] { cfg.format = o->f.format; });
    over("--labels", [&] { cfg.labels = o->f.labels; });
    over("--edges", [&] { cfg.edges = o->f.edges; });
    over("--embeddings", [&] { cfg.embeddings = o->f.embeddings; });
    over("--k", [&] { cfg.k = o->f.k; });
    over("--metric", [&] { cfg.metric = o->f.metric; });
    over("--budget", [&] { cfg.budget = o->f.budget; });
    over("--strategy", [&] { cfg.strategy = o->f.strategy; });
    over("--val-budget", [&] { cfg.val_budget = o->f.val_budget; });
    over("--tfidf", [&] { cfg.tfidf = o->f.tfidf; });
    over("--hidden", [&] { cfg.hyper.hidden = o->f.hyper.hidden; });
    over("--lr", [&] { cfg.hyper.learning_rate = o->f.hyper.learning_rate; });
    over("--dropout", [&] { cfg.hyper.dropout = o->f.hyper.dropout; });
    over("--weight-decay", [&] { cfg.hyper.weight_decay = o->f.hyper.weight_decay; });
    over("--epochs", [&] { cfg.hyper.epochs = o->f.hyper.epochs; });
    over("--seed", [&] { cfg.hyper.seed = o->f.hyper.seed; });
    over("--iterations", [&] { cfg.iterations = o->f.iterations; });
    over("--mode", [&] { cfg.mode = o->f.mode; });
    over("--out", [&] { cfg.out = o->f.out; });
    over("--compare-ks", [&] { cfg.compare_ks = o->f.compare_ks; });

    json report;
    if (o->stage == "a") {
      report = sfgl::run_stage_a(cfg);
    } else if (o->stage == "b") {
      report = sfgl::run_stage_b(cfg);
    } else if (o->stage == "iterate") {
      for (std::size_t i = 0; i < std::max<std::size_t>(cfg.iterations, 1); ++i)
        report = sfgl::run_iteration(cfg);
    } else {
      report = sfgl::run_real_graph_comparison(cfg);
    }
    emit(report);
  });
}

// ---- compare-real ----

void add_compare_real(CLI::App& app) {
  struct Opts {
    sfgl::PipelineConfig f;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub =
      app.add_subcommand("compare-real", "train identical GCNs on a real graph and KNN graphs");
  sub->add_option("--features", o->f.features)->required();
  sub->add_option("--format", o->f.format)
      ->check(CLI::IsMember({"coo-text", "dense-text"}));
  sub->add_option("--labels", o->f.labels)->required();
  sub->add_option("--edges", o->f.edges, "real edge list")->required();
  sub->add_option("--k", o->f.k)->check(CLI::PositiveNumber);
  sub->add_option("--metric", o->f.metric)
      ->check(CLI::IsMember({"cosine", "euclidean", "manhattan"}));
  sub->add_option("--compare-ks", o->f.compare_ks, "KNN k values to compare")->delimiter(',');
  sub->add_option("--budget", o->f.budget)->required()->check(CLI::PositiveNumber);
  sub->add_option("--strategy", o->f.strategy)
      ->check(CLI::IsMember({"auto", "uniform", "per-class-balanced"}));
  sub->add_option("--val-budget", o->f.val_budget);
  sub->add_flag("--tfidf", o->f.tfidf);
  sub->add_option("--hidden", o->f.hyper.hidden);
  sub->add_option("--lr", o->f.hyper.learning_rate);
  sub->add_option("--dropout", o->f.hyper.dropout);
  sub->add_option("--weight-decay", o->f.hyper.weight_decay);
  sub->add_option("--epochs", o->f.hyper.epochs)->check(CLI::PositiveNumber);
  sub->add_option("--seed", o->f.hyper.seed);
  sub->add_option("--out", o->f.out);

  sub->callback([o]() {
    require_file("--features", o->f.features);
    require_file("--labels", o->f.labels);
    require_file("--edges", o->f.edges);
    emit(sfgl::run_real_graph_comparison(o->f));
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scale-free graph construction, validation, and GCN pseudo-labeling"};
  app.require_subcommand(1);
  add_build_graph(app);
  add_degrees(app);
  add_fit(app);
  add_ba_gen(app);
  add_train(app);
  add_pseudo_label(app);
  add_export_finetune(app);
  add_import_embeddings(app);
  add_classify(app);
  add_run(app);
  add_compare_real(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const sfgl::Error& e) {
    emit({{"error", {{"kind", sfgl::errc_name(e.kind())}, {"message", e.what()}}}});
    return 1;
  } catch (const std::exception& e) {
    emit({{"error", {{"kind", "internal"}, {"message", e.what()}}}});
    return 1;
  }
  return 0;
}
