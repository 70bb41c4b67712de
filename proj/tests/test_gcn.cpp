#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "sfgl/gcn.hpp"
#include "sfgl/knn.hpp"

using sfgl::errc;
using sfgl::GcnHyper;
using sfgl::GcnParams;
using sfgl::LabelTable;
using sfgl::SparseFeatureMatrix;
using sfgl::Split;
using sfgl::UndirectedGraph;

namespace {

UndirectedGraph path_graph(std::size_t n) {
  UndirectedGraph g;
  g.n_nodes = n;
  g.adj.assign(n, {});
  for (std::size_t i = 0; i + 1 < n; ++i) {
    g.adj[i].push_back(i + 1);
    g.adj[i + 1].push_back(i);
  }
  return g;
}

// Two well-separated integer clusters on a path-pair graph.
struct Toy {
  SparseFeatureMatrix f;
  UndirectedGraph g;
  LabelTable labels;
  Split split;
};

Toy separable_toy() {
  Toy t;
  t.f = SparseFeatureMatrix::from_dense(6, 2,
                                        {5, 0,  //
                                         4, 1,  //
                                         5, 1,  //
                                         0, 5,  //
                                         1, 4,  //
                                         1, 5});
  t.g.n_nodes = 6;
  t.g.adj = {{1, 2}, {0, 2}, {0, 1}, {4, 5}, {3, 5}, {3, 4}};
  t.labels.n_nodes = 6;
  t.labels.n_classes = 2;
  t.labels.labels = {0, 0, 0, 1, 1, 1};
  t.split.labeled_idx = {0, 3};
  t.split.test_idx = {1, 2, 4, 5};
  return t;
}

}  // namespace

TEST_CASE("adjacency normalization", "[gcn]") {
  SECTION("no edges gives the identity") {
    UndirectedGraph g;
    g.n_nodes = 3;
    g.adj.assign(3, {});
    auto a = sfgl::normalize_adjacency(g);
    for (std::size_t i = 0; i < 3; ++i) {
      REQUIRE(a.ptr[i + 1] - a.ptr[i] == 1);
      REQUIRE(a.idx[a.ptr[i]] == i);
      REQUIRE(a.val[a.ptr[i]] == 1.0);
    }
  }
  SECTION("triangle gives uniform 1/3 weights") {
    UndirectedGraph g;
    g.n_nodes = 3;
    g.adj = {{1, 2}, {0, 2}, {0, 1}};
    auto a = sfgl::normalize_adjacency(g);
    REQUIRE(a.val.size() == 9);
    for (auto v : a.val) REQUIRE(v == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SECTION("path of two") {
    UndirectedGraph g;
    g.n_nodes = 2;
    g.adj = {{1}, {0}};
    auto a = sfgl::normalize_adjacency(g);
    // degrees after self-loops are 2,2 -> every weight 1/2
    for (auto v : a.val) REQUIRE(v == Catch::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("forward pass matches a dense reimplementation", "[gcn]") {
  sfgl::Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    std::size_t n = 4 + rng.below(9);
    std::size_t d = 2 + rng.below(5);
    std::size_t h = 3 + rng.below(6);
    std::size_t c = 2 + rng.below(3);

    auto f = oracle::random_int_features(rng, n, d, 0.6);
    auto knn = sfgl::build_knn_graph(f, 2, sfgl::Metric::manhattan);
    auto ug = sfgl::symmetrize(knn);
    auto adj = sfgl::normalize_adjacency(ug);

    GcnHyper hyper;
    hyper.hidden = h;
    hyper.seed = 1000 + trial;
    auto params = GcnParams<double>::glorot(d, h, c, hyper);

    sfgl::ForwardCache<double> cache;
    sfgl::gcn_forward(params, adj, f, nullptr, cache);

    std::vector<std::size_t> labeled = {0, n - 1};
    std::vector<std::int64_t> labels(n, 0);
    labels[n - 1] = 1;
    auto ref = oracle::dense_gcn_forward(ug, f, params, labeled, labels,
                                         hyper.weight_decay);

    for (std::size_t i = 0; i < n; ++i) {
      double row_sum = 0;
      for (std::size_t j = 0; j < c; ++j) {
        REQUIRE(cache.z.at(i, j) == Catch::Approx(ref.z[i][j]).margin(1e-12));
        row_sum += cache.z.at(i, j);
      }
      REQUIRE(row_sum == Catch::Approx(1.0).epsilon(1e-12));
    }

    LabelTable lt;
    lt.n_nodes = n;
    lt.n_classes = c;
    lt.labels = labels;
    Split sp;
    sp.labeled_idx = labeled;
    double loss = sfgl::gcn_loss(cache.z, sp, lt, params);
    REQUIRE(loss == Catch::Approx(ref.loss).epsilon(1e-12));
  }
}

TEST_CASE("loss on a hand-computed fixture", "[gcn]") {
  // Single node, no edges: z = softmax(F W1 relu path) collapses to a
  // 1x2 softmax we can grind by hand.
  SparseFeatureMatrix f = SparseFeatureMatrix::from_dense(1, 1, {2.0});
  UndirectedGraph g;
  g.n_nodes = 1;
  g.adj.assign(1, {});
  auto adj = sfgl::normalize_adjacency(g);

  GcnParams<double> p;
  p.w1 = sfgl::Mat<double>(1, 1);
  p.w1.a = {0.5};
  p.b1 = {0.25};
  p.w2 = sfgl::Mat<double>(1, 2);
  p.w2.a = {1.0, -1.0};
  p.b2 = {0.0, 0.5};
  p.hyper.weight_decay = 0.1;

  sfgl::ForwardCache<double> cache;
  sfgl::gcn_forward(p, adj, f, nullptr, cache);
  // pre1 = 2*0.5 + 0.25 = 1.25; logits = (1.25, -1.25 + 0.5) = (1.25, -0.75)
  double e0 = std::exp(0.0), e1 = std::exp(-2.0);
  REQUIRE(cache.z.at(0, 0) == Catch::Approx(e0 / (e0 + e1)).epsilon(1e-12));

  LabelTable lt;
  lt.n_nodes = 1;
  lt.n_classes = 2;
  lt.labels = {1};
  Split sp;
  sp.labeled_idx = {0};
  double loss = sfgl::gcn_loss(cache.z, sp, lt, p);
  double expect = -std::log(e1 / (e0 + e1)) + 0.05 * (0.25 + 1.0 + 1.0);
  REQUIRE(loss == Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("analytic gradients agree with central differences", "[gcn]") {
  sfgl::Rng rng(23);
  auto f = oracle::random_int_features(rng, 9, 4, 0.5, false);
  auto knn = sfgl::build_knn_graph(f, 2, sfgl::Metric::cosine);
  auto adj = sfgl::normalize_adjacency(sfgl::symmetrize(knn));

  LabelTable lt;
  lt.n_nodes = 9;
  lt.n_classes = 3;
  lt.labels = {0, 1, 2, 0, 1, 2, 0, 1, 2};
  Split sp;
  sp.labeled_idx = {0, 1, 2, 3};

  double err = sfgl::gradient_check(f, adj, lt, sp, 5, 99);
  REQUIRE(err < 1e-4);

  auto big = oracle::random_int_features(rng, 17, 3, 0.5);
  REQUIRE(oracle::thrown_kind([&] {
            sfgl::gradient_check(big, adj, lt, sp, 4, 1);
          }) == errc::contract);
}

TEST_CASE("training separates a separable toy", "[gcn]") {
  auto toy = separable_toy();
  auto adj = sfgl::normalize_adjacency(toy.g);
  GcnHyper hyper;
  hyper.hidden = 8;
  hyper.epochs = 120;
  hyper.dropout = 0.2;
  hyper.seed = 3;

  auto tr = sfgl::train_gcn<float>(toy.f, adj, toy.labels, toy.split, hyper);
  REQUIRE(tr.loss_history.size() == 120);
  REQUIRE(tr.train_acc_history.back() == 1.0);
  REQUIRE(tr.loss_history.front() > tr.loss_history.back());
  REQUIRE(sfgl::evaluate_accuracy(tr.params, toy.f, adj, toy.labels, toy.split.test_idx) ==
          1.0);
}

TEST_CASE("training is deterministic per seed", "[gcn]") {
  auto toy = separable_toy();
  auto adj = sfgl::normalize_adjacency(toy.g);
  GcnHyper hyper;
  hyper.hidden = 4;
  hyper.epochs = 30;
  hyper.seed = 12;

  auto a = sfgl::train_gcn<float>(toy.f, adj, toy.labels, toy.split, hyper);
  auto b = sfgl::train_gcn<float>(toy.f, adj, toy.labels, toy.split, hyper);
  REQUIRE(a.params.w1.a == b.params.w1.a);
  REQUIRE(a.params.w2.a == b.params.w2.a);
  REQUIRE(a.loss_history == b.loss_history);

  hyper.seed = 13;
  auto c = sfgl::train_gcn<float>(toy.f, adj, toy.labels, toy.split, hyper);
  REQUIRE(a.params.w1.a != c.params.w1.a);
}

TEST_CASE("validation snapshot returns the best epoch", "[gcn]") {
  auto toy = separable_toy();
  toy.split.val_idx = {1, 4};
  toy.split.test_idx = {2, 5};
  auto adj = sfgl::normalize_adjacency(toy.g);
  GcnHyper hyper;
  hyper.hidden = 8;
  hyper.epochs = 80;
  hyper.seed = 5;

  auto tr = sfgl::train_gcn<float>(toy.f, adj, toy.labels, toy.split, hyper);
  REQUIRE(tr.val_acc_history.size() == 80);
  REQUIRE(tr.best_epoch >= 1);
  REQUIRE(tr.best_epoch <= 80);
  double best = *std::max_element(tr.val_acc_history.begin(), tr.val_acc_history.end());
  REQUIRE(tr.val_acc_history[tr.best_epoch - 1] == best);
}

TEST_CASE("divergent training reports the epoch", "[gcn]") {
  auto toy = separable_toy();
  auto adj = sfgl::normalize_adjacency(toy.g);
  GcnHyper hyper;
  hyper.hidden = 4;
  hyper.epochs = 50;
  hyper.learning_rate = 1e18;
  hyper.seed = 1;

  try {
    sfgl::train_gcn<float>(toy.f, adj, toy.labels, toy.split, hyper);
    FAIL("expected divergence");
  } catch (const sfgl::Error& e) {
    REQUIRE(e.kind() == errc::training);
    REQUIRE(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("pseudo labels cover exactly the unlabeled nodes", "[gcn]") {
  auto toy = separable_toy();
  auto adj = sfgl::normalize_adjacency(toy.g);
  GcnHyper hyper;
  hyper.hidden = 8;
  hyper.epochs = 120;
  hyper.dropout = 0.2;
  hyper.seed = 4;
  auto tr = sfgl::train_gcn<float>(toy.f, adj, toy.labels, toy.split, hyper);

  auto pl = sfgl::pseudo_label(tr.params, toy.f, adj, toy.split);
  REQUIRE(pl.nodes == std::vector<std::size_t>{1, 2, 4, 5});
  for (auto c : pl.confidence) {
    REQUIRE(c > 0.0);
    REQUIRE(c <= 1.0);
  }
  REQUIRE(pl.labels == std::vector<std::size_t>{0, 0, 1, 1});
}

TEST_CASE("checkpoint round trip preserves parameters exactly", "[gcn]") {
  oracle::TempDir tmp;
  auto toy = separable_toy();
  auto adj = sfgl::normalize_adjacency(toy.g);
  GcnHyper hyper;
  hyper.hidden = 6;
  hyper.epochs = 40;
  hyper.seed = 8;
  auto tr = sfgl::train_gcn<float>(toy.f, adj, toy.labels, toy.split, hyper);

  sfgl::save_checkpoint(tr.params, tmp.file("m.ckpt"));
  auto loaded = sfgl::load_checkpoint(tmp.file("m.ckpt"));
  REQUIRE(loaded.w1.a == tr.params.w1.a);
  REQUIRE(loaded.b1 == tr.params.b1);
  REQUIRE(loaded.w2.a == tr.params.w2.a);
  REQUIRE(loaded.b2 == tr.params.b2);

  sfgl::save_checkpoint(loaded, tmp.file("m2.ckpt"));
  REQUIRE(oracle::slurp(tmp.file("m.ckpt")) == oracle::slurp(tmp.file("m2.ckpt")));

  oracle::spit(tmp.file("bad.ckpt"), "SFGL-GCN v9 1 1 2\n");
  REQUIRE(oracle::thrown_kind([&] { sfgl::load_checkpoint(tmp.file("bad.ckpt")); }) ==
          errc::parse);
}

TEST_CASE("prediction ties resolve to the lowest class", "[gcn]") {
  // Zero weights make every class equally likely.
  GcnParams<float> p;
  p.w1 = sfgl::Mat<float>(2, 3);
  p.b1.assign(3, 0.0f);
  p.w2 = sfgl::Mat<float>(3, 4);
  p.b2.assign(4, 0.0f);

  auto f = SparseFeatureMatrix::from_dense(2, 2, {1, 2, 3, 4});
  UndirectedGraph g;
  g.n_nodes = 2;
  g.adj = {{1}, {0}};
  auto adj = sfgl::normalize_adjacency(g);

  Split none;
  auto pl = sfgl::pseudo_label(p, f, adj, none);
  REQUIRE(pl.labels == std::vector<std::size_t>{0, 0});
  REQUIRE(pl.confidence[0] == Catch::Approx(0.25).epsilon(1e-6));
}
