#include "fewie/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "fewie/error.hpp"

namespace fewie {

F1Average parse_f1_average(std::string_view name) {
  if (name == "micro") return F1Average::kMicro;
  if (name == "macro") return F1Average::kMacro;
  throw ConfigError("unknown F1 average '" + std::string(name) + "' (expected micro or macro)");
}

const char* to_string(F1Average average) { return average == F1Average::kMicro ? "micro" : "macro"; }

SignificanceTest parse_significance_test(std::string_view name) {
  if (name == "paired-t" || name == "t") return SignificanceTest::kPairedT;
  if (name == "wilcoxon") return SignificanceTest::kWilcoxon;
  throw ConfigError("unknown significance test '" + std::string(name) + "' (expected paired-t or wilcoxon)");
}

namespace {

double f1_from(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

EpisodeScore episode_f1(std::span<const int> predictions, std::span<const int> gold, std::size_t n_ways,
                        F1Average average) {
  if (predictions.size() != gold.size()) {
    throw PreconditionError("predictions (" + std::to_string(predictions.size()) + ") and gold (" +
                            std::to_string(gold.size()) + ") differ in length");
  }
  if (gold.empty()) throw PreconditionError("episode has no query tokens");
  std::vector<std::size_t> tp(n_ways, 0), fp(n_ways, 0), fn(n_ways, 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int g = gold[i];
    const int p = predictions[i];
    if (g < 0 || static_cast<std::size_t>(g) >= n_ways || p < 0 || static_cast<std::size_t>(p) >= n_ways) {
      throw PreconditionError("class index out of range [0, " + std::to_string(n_ways) + ")");
    }
    if (p == g) {
      ++tp[g];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
  EpisodeScore s;
  s.tp = std::accumulate(tp.begin(), tp.end(), std::size_t{0});
  s.fp = std::accumulate(fp.begin(), fp.end(), std::size_t{0});
  s.fn = std::accumulate(fn.begin(), fn.end(), std::size_t{0});
  if (average == F1Average::kMicro) {
    s.f1 = f1_from(s.tp, s.fp, s.fn);
  } else {
    double sum = 0.0;
    std::size_t classes = 0;
    for (std::size_t c = 0; c < n_ways; ++c) {
      if (tp[c] + fp[c] + fn[c] == 0) continue;
      sum += f1_from(tp[c], fp[c], fn[c]);
      ++classes;
    }
    s.f1 = classes == 0 ? 0.0 : sum / static_cast<double>(classes);
  }
  return s;
}

Aggregate aggregate(std::span<const double> f1s) {
  if (f1s.empty()) throw PreconditionError("cannot aggregate an empty score list");
  const auto n = static_cast<double>(f1s.size());
  Aggregate a;
  a.mean = std::accumulate(f1s.begin(), f1s.end(), 0.0) / n;
  if (f1s.size() > 1) {
    double ss = 0.0;
    for (double x : f1s) ss += (x - a.mean) * (x - a.mean);
    a.std = std::sqrt(ss / (n - 1.0));
  }
  a.ci95 = 1.96 * a.std / std::sqrt(n);
  return a;
}

Aggregate aggregate(std::span<const EpisodeScore> scores) {
  std::vector<double> f1s;
  f1s.reserve(scores.size());
  for (const auto& s : scores) f1s.push_back(s.f1);
  return aggregate(f1s);
}

namespace {

double paired_t_p(const std::vector<double>& diffs) {
  const auto n = static_cast<double>(diffs.size());
  const double mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : diffs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) return mean == 0.0 ? 1.0 : 0.0;
  const double t = std::abs(mean) / (sd / std::sqrt(n));
  boost::math::students_t dist(n - 1.0);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
}

// Signed-rank test, normal approximation with tie correction; zero
// differences are dropped.
double wilcoxon_p(const std::vector<double>& diffs) {
  std::vector<double> nz;
  for (double x : diffs) {
    if (x != 0.0) nz.push_back(x);
  }
  if (nz.empty()) return 1.0;
  std::vector<std::size_t> order(nz.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(nz[a]) < std::abs(nz[b]);
  });
  std::vector<double> ranks(nz.size());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(nz[order[j + 1]]) == std::abs(nz[order[i]])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    const auto t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  double w_plus = 0.0;
  for (std::size_t i = 0; i < nz.size(); ++i) {
    if (nz[i] > 0) w_plus += ranks[i];
  }
  const auto n = static_cast<double>(nz.size());
  const double mu = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) return 1.0;
  const double z = std::abs(w_plus - mu) / std::sqrt(var);
  boost::math::normal_distribution<double> normal;
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(normal, z)));
}

}  // namespace

Significance significance(std::span<const double> a, std::span<const double> b, double alpha,
                          SignificanceTest test) {
  if (a.size() != b.size()) {
    throw PreconditionError("significance needs paired runs of equal length (" + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw PreconditionError("significance needs at least 2 paired episodes");
  std::vector<double> diffs(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diffs[i] = a[i] - b[i];
  Significance s;
  s.p_value = test == SignificanceTest::kPairedT ? paired_t_p(diffs) : wilcoxon_p(diffs);
  s.significant = s.p_value < alpha;
  return s;
}

Significance significance(std::span<const EpisodeScore> a, std::span<const EpisodeScore> b, double alpha,
                          SignificanceTest test) {
  if (a.size() != b.size()) {
    throw PreconditionError("significance needs paired runs of equal length (" + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()) + ")");
  }
  std::vector<double> fa(a.size()), fb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].episode_index != b[i].episode_index) {
      throw PreconditionError("runs are not paired: episode " + std::to_string(a[i].episode_index) +
                              " vs " + std::to_string(b[i].episode_index));
    }
    fa[i] = a[i].f1;
    fb[i] = b[i].f1;
  }
  return significance(fa, fb, alpha, test);
}

}  // namespace fewie
