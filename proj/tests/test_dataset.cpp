#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "sfgl/csr.hpp"
#include "sfgl/labels.hpp"

using sfgl::errc;
using sfgl::FeatureFormat;
using sfgl::SparseFeatureMatrix;

TEST_CASE("coo-text load and save round trip", "[dataset]") {
  oracle::TempDir tmp;
  oracle::spit(tmp.file("f.txt"),
               "4 3 5\n"
               "0 0 1.5\n"
               "0 2 -2\n"
               "1 1 0.25\n"
               "3 0 7\n"
               "3 2 1e-3\n");
  auto f = sfgl::load_features(tmp.file("f.txt"), FeatureFormat::coo_text);
  REQUIRE(f.n_rows == 4);
  REQUIRE(f.n_cols == 3);
  REQUIRE(f.values.size() == 5);
  REQUIRE(f.row_ptr == std::vector<std::size_t>{0, 2, 3, 3, 5});
  REQUIRE(f.col_idx == std::vector<std::size_t>{0, 2, 1, 0, 2});
  REQUIRE(f.values[1] == -2.0);

  sfgl::save_features(f, tmp.file("copy.txt"), FeatureFormat::coo_text);
  auto g = sfgl::load_features(tmp.file("copy.txt"), FeatureFormat::coo_text);
  REQUIRE(g.row_ptr == f.row_ptr);
  REQUIRE(g.col_idx == f.col_idx);
  REQUIRE(g.values == f.values);
}

TEST_CASE("coo-text rejects malformed input", "[dataset]") {
  oracle::TempDir tmp;
  auto load = [&](const std::string& body) {
    oracle::spit(tmp.file("bad.txt"), body);
    return oracle::thrown_kind(
        [&] { sfgl::load_features(tmp.file("bad.txt"), FeatureFormat::coo_text); });
  };

  SECTION("duplicate entry") {
    REQUIRE(load("2 2 2\n0 1 1.0\n0 1 2.0\n") == errc::parse);
  }
  SECTION("column out of bounds") {
    REQUIRE(load("2 2 1\n0 2 1.0\n") == errc::bounds);
  }
  SECTION("row out of bounds") {
    REQUIRE(load("2 2 1\n5 0 1.0\n") == errc::bounds);
  }
  SECTION("declared count too high") {
    REQUIRE(load("2 2 3\n0 0 1.0\n1 1 2.0\n") == errc::parse);
  }
  SECTION("declared count too low") {
    REQUIRE(load("2 2 1\n0 0 1.0\n1 1 2.0\n") == errc::parse);
  }
  SECTION("non-finite value") {
    REQUIRE(load("2 2 1\n0 0 nan\n") == errc::parse);
  }
  SECTION("garbage token") {
    REQUIRE(load("2 2 1\n0 zero 1.0\n") == errc::parse);
  }
  SECTION("error message carries file and line") {
    oracle::spit(tmp.file("bad.txt"), "2 2 1\n0 0 oops\n");
    try {
      sfgl::load_features(tmp.file("bad.txt"), FeatureFormat::coo_text);
      FAIL("expected a parse error");
    } catch (const sfgl::Error& e) {
      REQUIRE(std::string(e.what()).find("bad.txt:2") != std::string::npos);
    }
  }
}

TEST_CASE("dense-text agrees with coo-text for the same matrix", "[dataset]") {
  oracle::TempDir tmp;
  oracle::spit(tmp.file("dense.txt"),
               "3 4\n"
               "0 1.5 0 2\n"
               "0 0 0 0\n"
               "3 0 0 -1\n");
  oracle::spit(tmp.file("coo.txt"),
               "3 4 4\n"
               "0 1 1.5\n"
               "0 3 2\n"
               "2 0 3\n"
               "2 3 -1\n");
  auto a = sfgl::load_features(tmp.file("dense.txt"), FeatureFormat::dense_text);
  auto b = sfgl::load_features(tmp.file("coo.txt"), FeatureFormat::coo_text);
  REQUIRE(a.row_ptr == b.row_ptr);
  REQUIRE(a.col_idx == b.col_idx);
  REQUIRE(a.values == b.values);

  sfgl::save_features(a, tmp.file("dense2.txt"), FeatureFormat::dense_text);
  auto c = sfgl::load_features(tmp.file("dense2.txt"), FeatureFormat::dense_text);
  REQUIRE(c.values == a.values);
}

TEST_CASE("tfidf matches a direct reimplementation", "[dataset]") {
  // 3 docs x 4 terms; df = 2, 1, 0, 3
  oracle::TempDir tmp;
  oracle::spit(tmp.file("f.txt"),
               "3 4 6\n"
               "0 0 2\n"
               "0 3 1\n"
               "1 1 5\n"
               "1 3 3\n"
               "2 0 1\n"
               "2 3 4\n");
  auto f = sfgl::load_features(tmp.file("f.txt"), FeatureFormat::coo_text);
  auto w = sfgl::tfidf_transform(f);

  REQUIRE(w.row_ptr == f.row_ptr);
  REQUIRE(w.col_idx == f.col_idx);

  double n = 3.0;
  auto idf = [&](double df) { return std::log((1.0 + n) / (1.0 + df)) + 1.0; };
  std::vector<double> df = {2, 1, 0, 3};
  for (std::size_t r = 0; r < f.n_rows; ++r)
    for (std::size_t p = f.row_ptr[r]; p < f.row_ptr[r + 1]; ++p)
      REQUIRE(w.values[p] ==
              Catch::Approx(f.values[p] * idf(df[f.col_idx[p]])).epsilon(1e-12));
}

TEST_CASE("tfidf rejects negative counts", "[dataset]") {
  SparseFeatureMatrix f;
  f.n_rows = 1;
  f.n_cols = 2;
  f.row_ptr = {0, 1};
  f.col_idx = {1};
  f.values = {-3.0};
  REQUIRE(oracle::thrown_kind([&] { sfgl::tfidf_transform(f); }) == errc::domain);
}

TEST_CASE("label table loads, infers, and validates", "[dataset]") {
  oracle::TempDir tmp;
  oracle::spit(tmp.file("l.txt"), "0 2\n3 0\n2 1\n");

  SECTION("inferred node count") {
    auto t = sfgl::load_labels(tmp.file("l.txt"));
    REQUIRE(t.n_nodes == 4);
    REQUIRE(t.n_classes == 3);
    REQUIRE(t.labels == std::vector<std::int64_t>{2, sfgl::LabelTable::unknown, 1, 0});
    REQUIRE(t.known_count() == 3);
  }
  SECTION("explicit node count keeps trailing unknowns") {
    auto t = sfgl::load_labels(tmp.file("l.txt"), 6);
    REQUIRE(t.n_nodes == 6);
    REQUIRE(t.labels[5] == sfgl::LabelTable::unknown);
  }
  SECTION("node id beyond declared count") {
    REQUIRE(oracle::thrown_kind([&] { sfgl::load_labels(tmp.file("l.txt"), 2); }) ==
            errc::bounds);
  }
  SECTION("duplicate node rejected") {
    oracle::spit(tmp.file("dup.txt"), "0 1\n0 2\n");
    REQUIRE(oracle::thrown_kind([&] { sfgl::load_labels(tmp.file("dup.txt")); }) ==
            errc::parse);
  }
  SECTION("negative class rejected") {
    oracle::spit(tmp.file("neg.txt"), "0 -2\n");
    REQUIRE(oracle::thrown_kind([&] { sfgl::load_labels(tmp.file("neg.txt")); }) ==
            errc::parse);
  }
}

static sfgl::LabelTable toy_labels(std::size_t n, std::size_t n_classes,
                                   std::size_t n_unknown) {
  sfgl::LabelTable t;
  t.n_nodes = n;
  t.n_classes = n_classes;
  for (std::size_t i = 0; i < n; ++i)
    t.labels.push_back(i < n_unknown ? sfgl::LabelTable::unknown
                                     : std::int64_t((i - n_unknown) % n_classes));
  return t;
}

TEST_CASE("uniform split samples exactly m known nodes", "[dataset]") {
  auto t = toy_labels(50, 3, 8);
  auto s = sfgl::make_split(t, 12, sfgl::SplitStrategy::uniform, 99, 5);
  REQUIRE(s.labeled_idx.size() == 12);
  REQUIRE(s.val_idx.size() == 5);
  REQUIRE(s.test_idx.size() == 42 - 12 - 5);
  s.validate(t.n_nodes);

  std::set<std::size_t> all(s.labeled_idx.begin(), s.labeled_idx.end());
  all.insert(s.val_idx.begin(), s.val_idx.end());
  all.insert(s.test_idx.begin(), s.test_idx.end());
  REQUIRE(all.size() == 42);
  for (auto i : all) REQUIRE(t.labels[i] != sfgl::LabelTable::unknown);

  auto again = sfgl::make_split(t, 12, sfgl::SplitStrategy::uniform, 99, 5);
  REQUIRE(again.labeled_idx == s.labeled_idx);
  REQUIRE(again.test_idx == s.test_idx);
  auto other = sfgl::make_split(t, 12, sfgl::SplitStrategy::uniform, 100, 5);
  REQUIRE(other.labeled_idx != s.labeled_idx);
}

TEST_CASE("balanced split takes m/C per class", "[dataset]") {
  auto t = toy_labels(60, 3, 0);
  auto s = sfgl::make_split(t, 15, sfgl::SplitStrategy::per_class_balanced, 7);
  REQUIRE(s.labeled_idx.size() == 15);
  std::vector<std::size_t> per_class(3, 0);
  for (auto i : s.labeled_idx) ++per_class[std::size_t(t.labels[i])];
  REQUIRE(per_class == std::vector<std::size_t>{5, 5, 5});
}

TEST_CASE("split budget validation", "[dataset]") {
  auto t = toy_labels(20, 3, 0);
  REQUIRE(oracle::thrown_kind([&] {
            sfgl::make_split(t, 0, sfgl::SplitStrategy::uniform, 1);
          }) == errc::config);
  REQUIRE(oracle::thrown_kind([&] {
            sfgl::make_split(t, 21, sfgl::SplitStrategy::uniform, 1);
          }) == errc::config);
  REQUIRE(oracle::thrown_kind([&] {
            sfgl::make_split(t, 10, sfgl::SplitStrategy::per_class_balanced, 1);
          }) == errc::config);
  REQUIRE(oracle::thrown_kind([&] {
            sfgl::make_split(t, 10, sfgl::SplitStrategy::uniform, 1, 11);
          }) == errc::config);

  auto scarce = toy_labels(7, 3, 0);  // class counts 3,2,2
  REQUIRE(oracle::thrown_kind([&] {
            sfgl::make_split(scarce, 9, sfgl::SplitStrategy::per_class_balanced, 1);
          }) == errc::config);
}
