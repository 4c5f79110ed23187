#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fewie/corpus.hpp"
#include "fewie/rng.hpp"

namespace fewie {

struct EpisodeSpec {
  std::size_t n_ways = 5;
  std::size_t k_shots = 1;
  std::size_t k_query = 1;
  std::uint64_t seed = 0;
  // One extra support mention per class for pair construction when K = 1.
  bool cl_extra = false;

  // Throws PreconditionError unless N >= 2, K >= 1, K' >= 1.
  void validate() const;
  bool wants_extra() const noexcept { return cl_extra && k_shots == 1; }
};

// One mention with its sentence context.
struct ShotRef {
  std::string sentence_id;
  TokenSpan span;
  std::string entity_type;

  friend bool operator==(const ShotRef&, const ShotRef&) = default;
};

struct Episode {
  std::vector<std::string> classes;  // class index = position
  std::vector<ShotRef> support;
  std::vector<ShotRef> query;
  std::vector<ShotRef> extra_support;

  // Position of `type` in classes, or nullopt.
  std::optional<std::size_t> class_index(std::string_view type) const;

  friend bool operator==(const Episode&, const Episode&) = default;
};

// Retry budget for class-set draws before a spec is declared infeasible.
inline constexpr std::size_t kMaxClassDraws = 1000;

// Precomputed mention index over a corpus. Sampling reads the corpus through
// it, so the corpus must outlive the sampler.
class EpisodeSampler {
 public:
  explicit EpisodeSampler(const Corpus& corpus);

  // Classes are drawn uniformly without replacement from the label space; a
  // draw is kept when every class has enough mentions in sentences that are
  // pure w.r.t. the drawn set and the support/query sentence disjointness can
  // be met. Within a class, mentions are drawn uniformly without replacement:
  // support first, then queries from sentences not used by any support shot,
  // then (K = 1 with cl_extra) extras from sentences not used by any query.
  Episode sample(const EpisodeSpec& spec, CounterRng& rng) const;

  // Episode i uses CounterRng::child(spec.seed, i).
  std::vector<Episode> sample_run(const EpisodeSpec& spec, std::size_t n_episodes) const;

  const Corpus& corpus() const noexcept { return *corpus_; }

 private:
  struct MentionRef {
    std::size_t sentence;
    TokenSpan span;
  };

  const Corpus* corpus_;
  std::vector<std::string> types_;                   // sorted label space
  std::vector<std::vector<std::size_t>> sentence_types_;  // per sentence, sorted type ids
  std::vector<std::vector<MentionRef>> by_type_;     // per type id
};

Episode sample_episode(const Corpus& corpus, const EpisodeSpec& spec, CounterRng& rng);
std::vector<Episode> sample_run(const Corpus& corpus, const EpisodeSpec& spec,
                                std::size_t n_episodes);

// Empty iff every episode invariant holds. When expected shot counts are not
// given, every class must carry the same count as the first class.
struct ShotCounts {
  std::size_t k_shots;
  std::size_t k_query;
};
std::vector<std::string> validate_episode(const Corpus& corpus, const Episode& episode,
                                          std::optional<ShotCounts> expected = std::nullopt);

// Episode manifests: JSON lines {episode_index, classes, support, query,
// extra_support}, shots as {sentence_id, start, end, type}.
std::string episode_to_json_line(std::size_t episode_index, const Episode& episode);
std::string write_manifest(const std::vector<Episode>& episodes);
void write_manifest_file(const std::filesystem::path& path, const std::vector<Episode>& episodes);

struct IndexedEpisode {
  std::size_t episode_index;
  Episode episode;
};
std::vector<IndexedEpisode> read_manifest(std::string_view text);
std::vector<IndexedEpisode> read_manifest_file(const std::filesystem::path& path);

}  // namespace fewie
