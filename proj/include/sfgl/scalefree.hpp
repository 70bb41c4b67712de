#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sfgl/error.hpp"
#include "sfgl/graph.hpp"
#include "sfgl/rng.hpp"

namespace sfgl {

// Multiset of non-negative degrees under analysis.
struct DegreeSample {
  std::vector<std::size_t> degrees;

  void validate() const {
    if (degrees.empty()) fail(errc::contract, "degree sample is empty");
  }

  std::size_t n_zero() const {
    std::size_t n = 0;
    for (auto d : degrees)
      if (d == 0) ++n;
    return n;
  }

  // Ascending positive degrees; zeros carry no tail information.
  std::vector<std::size_t> positive_sorted() const {
    std::vector<std::size_t> p;
    p.reserve(degrees.size());
    for (auto d : degrees)
      if (d > 0) p.push_back(d);
    std::sort(p.begin(), p.end());
    return p;
  }
};

struct HistogramBin {
  double center;  // geometric bin midpoint
  double width;
  double density;
  std::size_t count;
};

// Log-spaced histogram of the positive degrees: edges at 10^(i/b) starting
// at 1, density normalized so that sum(density*width) = 1.
inline std::vector<HistogramBin> log_binned_histogram(const DegreeSample& sample,
                                                      unsigned bins_per_decade) {
  sample.validate();
  if (bins_per_decade < 1) fail(errc::contract, "bins_per_decade must be >= 1");
  auto pos = sample.positive_sorted();
  if (pos.empty()) fail(errc::domain, "all degrees are zero");

  double b = bins_per_decade;
  auto edge = [&](long i) { return std::pow(10.0, static_cast<double>(i) / b); };
  auto bin_of = [&](std::size_t d) {
    long i = static_cast<long>(std::floor(b * std::log10(static_cast<double>(d))));
    while (static_cast<double>(d) < edge(i)) --i;       // float guards at edges
    while (static_cast<double>(d) >= edge(i + 1)) ++i;
    return i;
  };

  long last = bin_of(pos.back());
  std::vector<std::size_t> counts(static_cast<std::size_t>(last) + 1, 0);
  for (auto d : pos) counts[static_cast<std::size_t>(bin_of(d))]++;

  double total = static_cast<double>(pos.size());
  std::vector<HistogramBin> bins;
  bins.reserve(counts.size());
  for (long i = 0; i <= last; ++i) {
    double lo = edge(i), hi = edge(i + 1);
    std::size_t c = counts[static_cast<std::size_t>(i)];
    bins.push_back({std::sqrt(lo * hi), hi - lo,
                    static_cast<double>(c) / ((hi - lo) * total), c});
  }
  return bins;
}

// Hurwitz zeta sum_{j>=0} (q+j)^-s for s > 1. Terms are summed directly
// until they drop below 1e-12; if the series is still running at 2000
// terms an Euler-Maclaurin tail closes it (error far below 1e-12 there,
// while bare truncation would leave an O(1e-6) tail for s near 2).
inline double hurwitz_zeta(double s, double q) {
  if (s <= 1.0) fail(errc::domain, "hurwitz_zeta requires s > 1");
  if (q < 1.0) fail(errc::domain, "hurwitz_zeta requires q >= 1");
  double sum = 0.0;
  std::size_t j = 0;
  for (; j < 2000; ++j) {
    double term = std::pow(q + static_cast<double>(j), -s);
    sum += term;
    if (term < sum * 5e-17) {  // relative: small-magnitude values need it too
      ++j;
      break;
    }
  }
  double x = q + static_cast<double>(j);  // first unsummed point
  double xs = std::pow(x, -s);
  sum += std::pow(x, 1.0 - s) / (s - 1.0) + 0.5 * xs + s * xs / x / 12.0 -
         s * (s + 1.0) * (s + 2.0) * xs / (x * x * x) / 720.0;
  return sum;
}

struct PowerLawFit {
  double alpha = 0.0;
  std::size_t theta_min = 1;
  double log_likelihood = 0.0;
  double ks_stat = 1.0;
  std::size_t n_tail = 0;
  std::size_t n_zero = 0;
};

struct ExponentialFit {
  double lambda = 0.0;
  std::size_t theta_min = 1;
  double log_likelihood = 0.0;
  double ks_stat = 1.0;
  std::size_t n_tail = 0;
  std::size_t n_zero = 0;
};

namespace detail {

struct Tail {
  std::vector<std::size_t> values;  // ascending, all >= theta_min
  double sum = 0.0;                 // sum of degrees
  double sum_log = 0.0;             // sum of ln(degree)
  std::size_t distinct = 0;
};

inline Tail make_tail(const std::vector<std::size_t>& pos_sorted, std::size_t theta_min) {
  Tail t;
  auto it = std::lower_bound(pos_sorted.begin(), pos_sorted.end(), theta_min);
  t.values.assign(it, pos_sorted.end());
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    t.sum += static_cast<double>(t.values[i]);
    t.sum_log += std::log(static_cast<double>(t.values[i]));
    if (i == 0 || t.values[i] != t.values[i - 1]) ++t.distinct;
  }
  return t;
}

// Tail log-likelihood of the discrete power law at exponent a.
inline double power_law_ll(double a, std::size_t theta_min, std::size_t n, double sum_log) {
  return -static_cast<double>(n) * std::log(hurwitz_zeta(a, static_cast<double>(theta_min))) -
         a * sum_log;
}

// The tail log-likelihood is strictly concave in the exponent; a
// golden-section search brackets the optimum after expanding the upper
// bound past the increasing region.
inline double maximize_power_law_ll(std::size_t theta_min, std::size_t n, double sum_log) {
  double n_d = static_cast<double>(n);
  // closed-form approximation as a scale hint for the bracket
  double denom = sum_log - n_d * std::log(static_cast<double>(theta_min) - 0.5);
  double hint = denom > 0 ? 1.0 + n_d / denom : 2.0;
  double lo = 1.0 + 1e-7;
  double hi = std::max(10.0, 2.0 * hint);
  auto ll = [&](double a) { return power_law_ll(a, theta_min, n, sum_log); };
  while (hi < 1e5 && ll(hi) > ll(hi * 0.999)) hi *= 2.0;
  if (hi >= 1e5) fail(errc::fit, "power-law exponent diverged");

  const double gr = 0.6180339887498949;
  double x1 = hi - gr * (hi - lo);
  double x2 = lo + gr * (hi - lo);
  double f1 = ll(x1), f2 = ll(x2);
  while (hi - lo > 1e-10) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = ll(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = ll(x1);
    }
  }
  return 0.5 * (lo + hi);
}

// KS distance between the empirical tail CDF and a fitted discrete CDF,
// evaluated at every observed tail value. survival(x) = P(X >= x).
template <typename Survival>
inline double ks_distance(const std::vector<std::size_t>& tail_sorted, Survival survival) {
  double n = static_cast<double>(tail_sorted.size());
  double ks = 0.0;
  std::size_t i = 0;
  while (i < tail_sorted.size()) {
    std::size_t j = i;
    while (j < tail_sorted.size() && tail_sorted[j] == tail_sorted[i]) ++j;
    double emp_cdf = static_cast<double>(j) / n;  // P(X <= x), x = tail_sorted[i]
    double fit_cdf = 1.0 - survival(tail_sorted[i] + 1);
    ks = std::max(ks, std::abs(emp_cdf - fit_cdf));
    i = j;
  }
  return ks;
}

inline PowerLawFit fit_power_law_at(const std::vector<std::size_t>& pos_sorted,
                                    std::size_t theta_min, std::size_t n_zero) {
  Tail t = make_tail(pos_sorted, theta_min);
  if (t.values.size() < 2) fail(errc::fit, "tail has fewer than 2 samples");
  if (t.distinct < 2) fail(errc::fit, "degenerate tail: all degrees equal");

  PowerLawFit fit;
  fit.theta_min = theta_min;
  fit.n_tail = t.values.size();
  fit.n_zero = n_zero;
  fit.alpha = maximize_power_law_ll(theta_min, t.values.size(), t.sum_log);
  fit.log_likelihood = power_law_ll(fit.alpha, theta_min, t.values.size(), t.sum_log);

  // survival via prefix sums: zeta(a, x) = zeta(a, tmin) - sum_{t<x} t^-a
  double z0 = hurwitz_zeta(fit.alpha, static_cast<double>(theta_min));
  std::size_t max_v = t.values.back();
  std::vector<double> surv(max_v + 2 - theta_min);
  double acc = 0.0;
  for (std::size_t x = theta_min; x <= max_v + 1; ++x) {
    surv[x - theta_min] = (z0 - acc) / z0;
    acc += std::pow(static_cast<double>(x), -fit.alpha);
  }
  fit.ks_stat = ks_distance(t.values, [&](std::size_t x) { return surv[x - theta_min]; });
  return fit;
}

}  // namespace detail

// Discrete power-law tail fit. When theta_min is absent it is selected
// from {1, ..., 95th percentile of positive degrees} by KS minimization.
inline PowerLawFit fit_power_law(const DegreeSample& sample,
                                 std::optional<std::size_t> theta_min = std::nullopt) {
  sample.validate();
  auto pos = sample.positive_sorted();
  std::size_t n_zero = sample.n_zero();
  if (pos.size() < 2) fail(errc::fit, "need at least 2 positive degrees");

  if (theta_min) {
    if (*theta_min < 1) fail(errc::contract, "theta_min must be >= 1");
    return detail::fit_power_law_at(pos, *theta_min, n_zero);
  }

  std::size_t p95 = pos[std::min(pos.size() - 1,
                                 static_cast<std::size_t>(
                                     std::ceil(0.95 * static_cast<double>(pos.size()))) -
                                     1)];
  std::optional<PowerLawFit> best;
  for (std::size_t t = 1; t <= p95; ++t) {
    detail::Tail tail = detail::make_tail(pos, t);
    if (tail.values.size() < 2 || tail.distinct < 2) continue;
    PowerLawFit fit = detail::fit_power_law_at(pos, t, n_zero);
    if (!best || fit.ks_stat < best->ks_stat) best = fit;
  }
  if (!best) fail(errc::fit, "no feasible theta_min candidate");
  return *best;
}

// Discrete exponential (geometric-form) tail fit at a fixed theta_min:
// P(theta) ∝ exp(-lambda*theta) on {theta_min, theta_min+1, ...}.
inline ExponentialFit fit_exponential(const DegreeSample& sample, std::size_t theta_min) {
  sample.validate();
  if (theta_min < 1) fail(errc::contract, "theta_min must be >= 1");
  auto pos = sample.positive_sorted();
  detail::Tail t = detail::make_tail(pos, theta_min);
  if (t.values.size() < 2) fail(errc::fit, "tail has fewer than 2 samples");
  double n = static_cast<double>(t.values.size());
  double mean = t.sum / n;
  if (mean <= static_cast<double>(theta_min))
    fail(errc::fit, "degenerate tail: mean equals theta_min");

  ExponentialFit fit;
  fit.theta_min = theta_min;
  fit.n_tail = t.values.size();
  fit.n_zero = sample.n_zero();
  fit.lambda = std::log(1.0 + 1.0 / (mean - static_cast<double>(theta_min)));
  fit.log_likelihood = -fit.lambda * t.sum +
                       n * (fit.lambda * static_cast<double>(theta_min) +
                            std::log(1.0 - std::exp(-fit.lambda)));
  fit.ks_stat = detail::ks_distance(t.values, [&](std::size_t x) {
    return std::exp(-fit.lambda * static_cast<double>(x - theta_min));
  });
  return fit;
}

struct FitComparison {
  std::string preferred;          // "powerlaw" | "exponential" | "tie"
  double log_likelihood_ratio;    // powerlaw ll - exponential ll
};

inline FitComparison compare_fits(const PowerLawFit& pl, const ExponentialFit& ex) {
  if (pl.theta_min != ex.theta_min)
    fail(errc::contract, "compare_fits: theta_min mismatch (" +
                             std::to_string(pl.theta_min) + " vs " +
                             std::to_string(ex.theta_min) + ")");
  if (pl.n_tail != ex.n_tail)
    fail(errc::contract, "compare_fits: fits use different tail samples");
  double ratio = pl.log_likelihood - ex.log_likelihood;
  FitComparison c;
  c.log_likelihood_ratio = ratio;
  c.preferred = ratio > 0 ? "powerlaw" : (ratio < 0 ? "exponential" : "tie");
  return c;
}

// theta_min * n^(1/(alpha-1)): expected maximum degree of a scale-free
// network with n nodes.
inline double expected_max_degree(double theta_min, std::size_t n_nodes, double alpha) {
  if (alpha <= 1.0) fail(errc::domain, "expected_max_degree requires alpha > 1");
  if (theta_min < 1.0 || n_nodes < 1)
    fail(errc::contract, "expected_max_degree requires theta_min >= 1 and n_nodes >= 1");
  return theta_min * std::pow(static_cast<double>(n_nodes), 1.0 / (alpha - 1.0));
}

// Preferential attachment generator: clique seed of m_attach+1 nodes, then
// each arrival attaches m_attach edges sampled without replacement with
// probability proportional to current degree.
inline UndirectedGraph generate_ba_graph(std::size_t n_nodes, std::size_t m_attach,
                                         std::uint64_t seed) {
  if (m_attach < 1 || n_nodes <= m_attach)
    fail(errc::config, "generate_ba_graph requires n_nodes > m_attach >= 1");

  UndirectedGraph g;
  g.n_nodes = n_nodes;
  g.adj.assign(n_nodes, {});
  std::vector<std::size_t> repeated;  // one entry per edge endpoint
  repeated.reserve(2 * (m_attach * (m_attach + 1) / 2 + m_attach * (n_nodes - m_attach - 1)));

  for (std::size_t u = 0; u <= m_attach; ++u)
    for (std::size_t v = u + 1; v <= m_attach; ++v) {
      g.adj[u].push_back(v);
      g.adj[v].push_back(u);
      repeated.push_back(u);
      repeated.push_back(v);
    }

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (std::size_t t = m_attach + 1; t < n_nodes; ++t) {
    chosen.clear();
    while (chosen.size() < m_attach) {
      std::size_t cand = repeated[rng.below(repeated.size())];
      if (std::find(chosen.begin(), chosen.end(), cand) == chosen.end())
        chosen.push_back(cand);
    }
    for (auto v : chosen) {
      g.adj[t].push_back(v);
      g.adj[v].push_back(t);
      repeated.push_back(v);
      repeated.push_back(t);
    }
  }
  for (auto& nb : g.adj) std::sort(nb.begin(), nb.end());
  return g;
}

inline void to_json(nlohmann::json& j, const PowerLawFit& f) {
  j = {{"model", "powerlaw"},         {"alpha", f.alpha},
       {"theta_min", f.theta_min},    {"log_likelihood", f.log_likelihood},
       {"ks_stat", f.ks_stat},        {"n_tail", f.n_tail},
       {"n_zero", f.n_zero}};
}

inline void to_json(nlohmann::json& j, const ExponentialFit& f) {
  j = {{"model", "exponential"},      {"lambda", f.lambda},
       {"theta_min", f.theta_min},    {"log_likelihood", f.log_likelihood},
       {"ks_stat", f.ks_stat},        {"n_tail", f.n_tail},
       {"n_zero", f.n_zero}};
}

inline void save_histogram_csv(const std::vector<HistogramBin>& bins, const std::string& path) {
  auto out = detail::create_text(path);
  out << "bin_center,density,count\n";
  for (const auto& b : bins)
    out << fmt_double(b.center) << ',' << fmt_double(b.density) << ',' << b.count << '\n';
  if (!out) fail(errc::io, "write failed for '" + path + "'");
}

}  // namespace sfgl
