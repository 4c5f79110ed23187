#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fewie/config.hpp"
#include "fewie/contrastive.hpp"
#include "fewie/corpus.hpp"
#include "fewie/encoders.hpp"
#include "fewie/metrics.hpp"
#include "fewie/readout.hpp"
#include "fewie/sampler.hpp"

namespace fewie {

std::string artifact_version();

struct Scenario {
  std::size_t n_ways = 5;
  std::size_t k_shots = 1;
  std::size_t k_query = 1;

  // "5-way 1-shot", with " (K'=q)" appended when k_query != 1.
  std::string label() const;
  // File-name stem, e.g. "5way_1shot_1q".
  std::string stem() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
  friend auto operator<=>(const Scenario&, const Scenario&) = default;
};

struct ExperimentConfig {
  std::filesystem::path corpus_path;
  CorpusFormat corpus_format = CorpusFormat::kConll;
  ParseOptions parse;
  std::string dataset;  // table row label; defaults to the corpus file stem

  std::vector<Scenario> scenarios{{5, 1, 1}, {5, 5, 1}, {5, 10, 1}};
  std::size_t n_episodes = 600;
  std::uint64_t seed = 0;

  EncoderConfig encoder;
  std::string encoder_label;  // defaults to "Random" or the store file stem
  bool normalize = true;

  ReadoutKind readout = ReadoutKind::kLogReg;
  LogRegOptions logreg;
  std::optional<ContrastiveConfig> contrastive;
  F1Average average = F1Average::kMicro;

  std::filesystem::path output_dir;
  std::string label;  // table column label; see column_label()
  // 0 = FEWIE_BENCH_THREADS, then hardware concurrency.
  std::size_t threads = 0;

  void validate() const;
  // Explicit label, else encoder label with "+CL" and a non-LR readout suffix.
  std::string column_label() const;
};

// Builds a config from a parsed document. Relative paths resolve against
// `base_dir`; unknown keys are rejected.
ExperimentConfig experiment_config_from(const ConfigDocument& doc, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Resolved config as JSON (output directory excluded).
std::string config_snapshot_json(const ExperimentConfig& config);

// Normalized per-sentence embeddings shared by all episodes of a run.
class EmbeddingCache {
 public:
  EmbeddingCache(const Corpus& corpus, const Encoder& encoder, bool normalize);

  // Encodes every sentence referenced by the episodes that is not cached yet.
  void prepare(const std::vector<Episode>& episodes);
  // Throws MissingEmbeddingError when the sentence was never prepared.
  const RowMatrix& get(std::string_view sentence_id) const;

 private:
  const Corpus* corpus_;
  const Encoder* encoder_;
  bool normalize_;
  std::map<std::string, RowMatrix, std::less<>> rows_;
};

struct EpisodeOutcome {
  EpisodeScore score;
  std::vector<int> predictions;
  std::vector<int> gold;
};

// Gathers support/query token rows, optionally trains and applies a
// projection head, fits the readout and scores every query token.
EpisodeOutcome evaluate_episode(const Episode& episode, std::size_t episode_index, const Scenario& scenario,
                                const EmbeddingCache& cache, const ExperimentConfig& config);

struct ScenarioResult {
  Scenario scenario;
  bool ok = false;
  std::string error_kind;
  std::string error_message;
  std::string episodes_file;
  std::string scores_file;
  std::string predictions_file;
  // fnv1a64 over classes/support/query of every episode; equal digests mean
  // two runs can be paired episode by episode.
  std::string pairing_digest;
  Aggregate summary;
  std::vector<EpisodeScore> scores;
};

struct RunManifest {
  std::string version;
  std::string dataset;
  std::string label;
  std::string config_json;
  std::vector<ScenarioResult> scenarios;
  std::filesystem::path directory;

  bool all_ok() const;
};

// Runs every scenario and writes under config.output_dir:
//   episodes_<stem>.jsonl, scores_<stem>.jsonl, predictions_<stem>.jsonl,
//   results.csv, results.md, run_manifest.json.
// A failing scenario is recorded and the remaining scenarios still run.
RunManifest run_experiment(const ExperimentConfig& config);

// Reads run_manifest.json and the per-episode score files of a run directory.
RunManifest load_run(const std::filesystem::path& directory);

std::vector<EpisodeScore> read_scores_file(const std::filesystem::path& path);

// Worker count from FEWIE_BENCH_THREADS (0/unset = hardware concurrency).
std::size_t default_thread_count();

struct TableOptions {
  double alpha = 0.05;
  SignificanceTest test = SignificanceTest::kPairedT;
};

struct TableDocument {
  std::string csv;
  std::string markdown;
};

// Rows are (dataset, scenario), columns are run labels. Cells hold mean F1 x
// 100 rounded half-up to 2 decimals. The best cell of a row is bolded (ties:
// lowest column) and gets a dagger when it differs significantly from the
// next best column.
TableDocument emit_table(const std::vector<RunManifest>& runs, const TableOptions& options = {});

// Half-up rounding of 100 * f1 to two decimals.
std::string format_f1_cell(double f1);

}  // namespace fewie
