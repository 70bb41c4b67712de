#include <catch2/catch_amalgamated.hpp>

#include <gsl/gsl_sf_zeta.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "sfgl/knn.hpp"
#include "sfgl/scalefree.hpp"

using sfgl::DegreeSample;
using sfgl::errc;

TEST_CASE("hurwitz zeta matches GSL", "[scalefree]") {
  for (double s : {1.2, 1.5, 2.0, 2.2, 2.8, 3.5, 5.0, 8.0}) {
    for (double q : {1.0, 2.0, 3.0, 7.0, 25.0, 150.0}) {
      double mine = sfgl::hurwitz_zeta(s, q);
      double ref = gsl_sf_hzeta(s, q);
      INFO("s=" << s << " q=" << q);
      REQUIRE(mine == Catch::Approx(ref).epsilon(1e-10));
    }
  }
  REQUIRE(oracle::thrown_kind([] { sfgl::hurwitz_zeta(1.0, 1.0); }) == errc::domain);
  REQUIRE(oracle::thrown_kind([] { sfgl::hurwitz_zeta(2.0, 0.5); }) == errc::domain);
}

TEST_CASE("log-binned histogram matches a linear-scan oracle", "[scalefree]") {
  sfgl::Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    DegreeSample s;
    std::size_t n = 50 + rng.below(500);
    for (std::size_t i = 0; i < n; ++i)
      s.degrees.push_back(rng.below(4) == 0 ? 0 : 1 + rng.below(400));
    unsigned bins = 4 + unsigned(rng.below(12));
    auto hist = sfgl::log_binned_histogram(s, bins);

    // independent binning: scan for the edge pair around each value
    auto edge = [&](std::size_t i) { return std::pow(10.0, double(i) / double(bins)); };
    std::size_t positive = 0;
    for (auto v : s.degrees)
      if (v > 0) ++positive;
    std::vector<std::size_t> counts(hist.size(), 0);
    for (auto v : s.degrees) {
      if (v == 0) continue;
      std::size_t b = 0;
      while (!(double(v) >= edge(b) && double(v) < edge(b + 1))) ++b;
      REQUIRE(b < counts.size());
      ++counts[b];
    }
    double mass = 0.0;
    for (std::size_t b = 0; b < hist.size(); ++b) {
      REQUIRE(hist[b].count == counts[b]);
      REQUIRE(hist[b].center == Catch::Approx(std::sqrt(edge(b) * edge(b + 1))).epsilon(1e-12));
      REQUIRE(hist[b].density ==
              Catch::Approx(double(counts[b]) / (hist[b].width * double(positive)))
                  .margin(1e-15));
      mass += hist[b].density * hist[b].width;
    }
    REQUIRE(mass == Catch::Approx(1.0).epsilon(1e-9));
  }

  DegreeSample zeros;
  zeros.degrees = {0, 0, 0};
  REQUIRE(oracle::thrown_kind([&] { sfgl::log_binned_histogram(zeros, 10); }) ==
          errc::domain);
}

TEST_CASE("power-law fit recovers known exponents", "[scalefree]") {
  sfgl::Rng rng(1001);
  for (auto [alpha, theta] : std::vector<std::pair<double, std::size_t>>{
           {2.5, 1}, {3.0, 2}}) {
    oracle::PowerLawSampler sampler(alpha, theta);
    DegreeSample s;
    for (int i = 0; i < 30000; ++i) s.degrees.push_back(sampler.sample(rng));

    INFO("alpha=" << alpha << " theta_min=" << theta);
    {  // true cutoff given
      auto fit = sfgl::fit_power_law(s, theta);
      REQUIRE(fit.theta_min == theta);
      REQUIRE(fit.alpha == Catch::Approx(alpha).margin(0.05));
      REQUIRE(fit.n_tail == s.degrees.size());
    }
    {  // cutoff selected by KS scan
      auto fit = sfgl::fit_power_law(s);
      REQUIRE(fit.alpha == Catch::Approx(alpha).margin(0.05));
      REQUIRE(fit.ks_stat < 0.02);
    }
  }
}

TEST_CASE("power-law fit ignores sub-cutoff noise", "[scalefree]") {
  sfgl::Rng rng(77);
  oracle::PowerLawSampler sampler(2.6, 4);
  DegreeSample s;
  for (int i = 0; i < 30000; ++i) s.degrees.push_back(sampler.sample(rng));
  for (int i = 0; i < 5000; ++i) s.degrees.push_back(1 + rng.below(3));  // below theta_min
  for (int i = 0; i < 500; ++i) s.degrees.push_back(0);

  auto fit = sfgl::fit_power_law(s);
  REQUIRE(fit.theta_min == 4);
  REQUIRE(fit.alpha == Catch::Approx(2.6).margin(0.05));
  REQUIRE(fit.n_zero == 500);
  REQUIRE(fit.n_tail == 30000);
}

TEST_CASE("exponential fit recovers a known rate", "[scalefree]") {
  sfgl::Rng rng(55);
  DegreeSample s;
  for (int i = 0; i < 30000; ++i) s.degrees.push_back(oracle::sample_geometric(rng, 0.7, 1));
  auto fit = sfgl::fit_exponential(s, 1);
  REQUIRE(fit.lambda == Catch::Approx(0.7).margin(0.02));
  REQUIRE(fit.ks_stat < 0.02);

  DegreeSample flat;
  flat.degrees = {2, 2, 2};
  REQUIRE(oracle::thrown_kind([&] { sfgl::fit_exponential(flat, 2); }) == errc::fit);
}

TEST_CASE("model comparison prefers the generating family", "[scalefree]") {
  sfgl::Rng rng(13);

  DegreeSample pl;
  oracle::PowerLawSampler sampler(2.5, 1);
  for (int i = 0; i < 20000; ++i) pl.degrees.push_back(sampler.sample(rng));
  auto f1 = sfgl::fit_power_law(pl, std::size_t{1});
  auto e1 = sfgl::fit_exponential(pl, 1);
  REQUIRE(sfgl::compare_fits(f1, e1).preferred == "powerlaw");

  DegreeSample ge;
  for (int i = 0; i < 20000; ++i) ge.degrees.push_back(oracle::sample_geometric(rng, 0.4, 1));
  auto f2 = sfgl::fit_power_law(ge, std::size_t{1});
  auto e2 = sfgl::fit_exponential(ge, 1);
  REQUIRE(sfgl::compare_fits(f2, e2).preferred == "exponential");

  auto f3 = sfgl::fit_power_law(pl, std::size_t{2});
  REQUIRE(oracle::thrown_kind([&] { sfgl::compare_fits(f3, e1); }) == errc::contract);
}

TEST_CASE("fit rejects degenerate samples", "[scalefree]") {
  DegreeSample empty;
  REQUIRE(oracle::thrown_kind([&] { sfgl::fit_power_law(empty); }) == errc::contract);

  DegreeSample single;
  single.degrees = {5, 5, 5, 5};
  REQUIRE(oracle::thrown_kind([&] { sfgl::fit_power_law(single); }) == errc::fit);

  DegreeSample zeros;
  zeros.degrees = {0, 0};
  REQUIRE(oracle::thrown_kind([&] { sfgl::fit_power_law(zeros); }) == errc::fit);
}

TEST_CASE("expected max degree formula", "[scalefree]") {
  REQUIRE(sfgl::expected_max_degree(1.0, 10000, 3.0) == Catch::Approx(100.0));
  REQUIRE(sfgl::expected_max_degree(2.0, 100000, 2.0) == Catch::Approx(200000.0));
  REQUIRE(oracle::thrown_kind([] { sfgl::expected_max_degree(1.0, 100, 1.0); }) ==
          errc::domain);
}

TEST_CASE("ba generator base cases and determinism", "[scalefree]") {
  auto clique = sfgl::generate_ba_graph(4, 3, 9);
  REQUIRE(clique.n_edges() == 6);
  for (auto& nb : clique.adj) REQUIRE(nb.size() == 3);

  auto g1 = sfgl::generate_ba_graph(300, 3, 42);
  REQUIRE(g1.n_edges() == 3 * (3 + 1) / 2 + 3 * (300 - 4));
  auto g2 = sfgl::generate_ba_graph(300, 3, 42);
  REQUIRE(g1.adj == g2.adj);
  auto g3 = sfgl::generate_ba_graph(300, 3, 43);
  REQUIRE(g1.adj != g3.adj);

  REQUIRE(oracle::thrown_kind([] { sfgl::generate_ba_graph(3, 3, 1); }) == errc::config);
  REQUIRE(oracle::thrown_kind([] { sfgl::generate_ba_graph(10, 0, 1); }) == errc::config);
}

TEST_CASE("ba degree distribution is heavy tailed", "[scalefree]") {
  auto g = sfgl::generate_ba_graph(20000, 2, 7);
  auto fit = sfgl::fit_power_law(DegreeSample{g.degrees()});
  REQUIRE(fit.alpha > 2.3);
  REQUIRE(fit.alpha < 3.7);
}

TEST_CASE("nonreciprocal in-degree identity on random knn graphs", "[scalefree]") {
  sfgl::Rng rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t n = 10 + rng.below(200);
    std::size_t d = 2 + rng.below(10);
    std::size_t k = 1 + rng.below(8);
    auto metric = static_cast<sfgl::Metric>(rng.below(3));
    auto f = oracle::random_int_features(rng, n, d, 0.5);
    auto g = sfgl::build_knn_graph(f, k, metric);
    auto rep = sfgl::degree_report(g);

    std::size_t kk = g.k;  // clamped value
    std::size_t sum_nonrecip =
        std::accumulate(rep.nonreciprocal_in.begin(), rep.nonreciprocal_in.end(),
                        std::size_t{0});
    REQUIRE(sum_nonrecip == 2 * rep.n_undirected_edges - kk * n);
    REQUIRE(rep.n_undirected_edges <= kk * n);
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(rep.out_degree[i] == kk);
      REQUIRE(rep.undirected_degree[i] >= kk);
      REQUIRE(rep.nonreciprocal_in[i] == rep.undirected_degree[i] - kk);
    }
  }
}
