#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace fewie {

struct EpisodeScore {
  std::size_t episode_index = 0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  friend bool operator==(const EpisodeScore&, const EpisodeScore&) = default;
};

enum class F1Average { kMicro, kMacro };

F1Average parse_f1_average(std::string_view name);
const char* to_string(F1Average average);

// Token-level F1 over the N positive classes. Micro pools tp/fp/fn over
// classes; macro averages per-class F1 over classes that occur in gold or
// predictions. tp/fp/fn are the pooled counts in both modes.
EpisodeScore episode_f1(std::span<const int> predictions, std::span<const int> gold,
                        std::size_t n_ways, F1Average average = F1Average::kMicro);

inline EpisodeScore episode_micro_f1(std::span<const int> predictions, std::span<const int> gold,
                                     std::size_t n_ways) {
  return episode_f1(predictions, gold, n_ways, F1Average::kMicro);
}

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;   // sample standard deviation, n - 1 denominator
  double ci95 = 0.0;  // 1.96 * std / sqrt(n)
};

Aggregate aggregate(std::span<const double> f1s);
Aggregate aggregate(std::span<const EpisodeScore> scores);

enum class SignificanceTest { kPairedT, kWilcoxon };

SignificanceTest parse_significance_test(std::string_view name);

struct Significance {
  double p_value = 1.0;
  bool significant = false;
};

// Two-sided paired test on per-episode F1 differences; p = 1 when every
// difference is exactly 0. Runs are paired by position.
Significance significance(std::span<const double> a, std::span<const double> b, double alpha = 0.05,
                          SignificanceTest test = SignificanceTest::kPairedT);

// Pairs by episode_index; throws when the runs cover different episodes.
Significance significance(std::span<const EpisodeScore> a, std::span<const EpisodeScore> b,
                          double alpha = 0.05, SignificanceTest test = SignificanceTest::kPairedT);

}  // namespace fewie
