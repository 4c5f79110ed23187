#include "fewie/harness.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "fewie/error.hpp"
#include "fewie/rng.hpp"
#include "fewie/store.hpp"
#include "json.hpp"

#ifndef FEWIE_VERSION
#define FEWIE_VERSION "0.0.0"
#endif

namespace fewie {

using ojson = nlohmann::ordered_json;

std::string artifact_version() { return std::string("fewie-bench ") + FEWIE_VERSION; }

std::string Scenario::label() const {
  std::string s = std::to_string(n_ways) + "-way " + std::to_string(k_shots) + "-shot";
  if (k_query != 1) s += " (K'=" + std::to_string(k_query) + ")";
  return s;
}

std::string Scenario::stem() const {
  return std::to_string(n_ways) + "way_" + std::to_string(k_shots) + "shot_" + std::to_string(k_query) + "q";
}

void ExperimentConfig::validate() const {
  if (scenarios.empty()) throw ConfigError("at least one scenario is required");
  for (const auto& s : scenarios) {
    EpisodeSpec{s.n_ways, s.k_shots, s.k_query, 0, false}.validate();
  }
  if (n_episodes < 1) throw ConfigError("n_episodes must be at least 1");
  if (corpus_path.empty()) throw ConfigError("corpus.path is required");
  if (output_dir.empty()) throw ConfigError("output.dir is required");
  if (encoder.kind == EncoderKind::kRandom && encoder.dim < 1) throw ConfigError("encoder.dim must be >= 1");
  if (encoder.kind == EncoderKind::kStore && encoder.store_path.empty()) {
    throw ConfigError("encoder.store is required for the store encoder");
  }
  if (contrastive) contrastive->validate();
}

std::string ExperimentConfig::column_label() const {
  if (!label.empty()) return label;
  std::string base = encoder_label;
  if (base.empty()) {
    base = encoder.kind == EncoderKind::kRandom ? "Random" : encoder.store_path.stem().string();
  }
  if (contrastive) base += "+CL";
  if (readout != ReadoutKind::kLogReg) base += std::string(" ") + to_string(readout);
  return base;
}

namespace {

const std::set<std::string, std::less<>> kKnownKeys = {
    "corpus.path", "corpus.format", "corpus.token_col", "corpus.tag_col", "corpus.max_length",
    "corpus.scheme", "corpus.dataset",
    "sampling.scenarios", "sampling.n_episodes", "sampling.seed",
    "encoder.kind", "encoder.dim", "encoder.seed", "encoder.store", "encoder.label", "encoder.normalize",
    "readout.kind", "readout.l2_lambda", "readout.tol", "readout.max_iter",
    "contrastive.enabled", "contrastive.margin", "contrastive.learning_rate", "contrastive.epochs",
    "contrastive.batch_size", "contrastive.pair_seed", "contrastive.adam_beta1", "contrastive.adam_beta2",
    "contrastive.adam_eps",
    "metrics.average",
    "output.dir", "output.label",
    "run.threads",
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

Scenario scenario_from(const ConfigValue& v) {
  const auto& arr = v.as_array("sampling.scenarios[]");
  if (arr.size() < 2 || arr.size() > 3) {
    throw ConfigError("each scenario must be [N, K] or [N, K, K']");
  }
  Scenario s;
  s.n_ways = arr[0].as_uint("scenario N");
  s.k_shots = arr[1].as_uint("scenario K");
  if (arr.size() == 3) s.k_query = arr[2].as_uint("scenario K'");
  return s;
}

}  // namespace

ExperimentConfig experiment_config_from(const ConfigDocument& doc, const std::filesystem::path& base_dir) {
  for (const auto& [key, _] : doc.entries()) {
    if (!kKnownKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  auto get = [&](std::string_view key) { return doc.find(key); };
  ExperimentConfig c;

  if (auto v = get("corpus.path")) c.corpus_path = resolve(base_dir, v->as_string("corpus.path"));
  c.corpus_format = guess_corpus_format(c.corpus_path);
  if (auto v = get("corpus.format")) c.corpus_format = parse_corpus_format(v->as_string("corpus.format"));
  if (auto v = get("corpus.token_col")) c.parse.token_col = v->as_uint("corpus.token_col");
  if (auto v = get("corpus.tag_col")) c.parse.tag_col = static_cast<int>(v->as_int("corpus.tag_col"));
  if (auto v = get("corpus.max_length")) c.parse.max_length = v->as_uint("corpus.max_length");
  if (auto v = get("corpus.scheme")) {
    const auto s = v->as_string("corpus.scheme");
    if (s != "auto") c.parse.scheme = parse_tag_scheme(s);
  }
  c.dataset = c.corpus_path.stem().string();
  if (auto v = get("corpus.dataset")) c.dataset = v->as_string("corpus.dataset");

  if (auto v = get("sampling.scenarios")) {
    c.scenarios.clear();
    for (const auto& s : v->as_array("sampling.scenarios")) c.scenarios.push_back(scenario_from(s));
  }
  if (auto v = get("sampling.n_episodes")) c.n_episodes = v->as_uint("sampling.n_episodes");
  if (auto v = get("sampling.seed")) c.seed = v->as_uint("sampling.seed");

  if (auto v = get("encoder.kind")) c.encoder.kind = parse_encoder_kind(v->as_string("encoder.kind"));
  if (auto v = get("encoder.dim")) c.encoder.dim = v->as_uint("encoder.dim");
  if (auto v = get("encoder.seed")) c.encoder.seed = v->as_uint("encoder.seed");
  if (auto v = get("encoder.store")) c.encoder.store_path = resolve(base_dir, v->as_string("encoder.store"));
  if (auto v = get("encoder.label")) c.encoder_label = v->as_string("encoder.label");
  if (auto v = get("encoder.normalize")) c.normalize = v->as_bool("encoder.normalize");

  if (auto v = get("readout.kind")) c.readout = parse_readout_kind(v->as_string("readout.kind"));
  if (auto v = get("readout.l2_lambda")) c.logreg.l2_lambda = v->as_double("readout.l2_lambda");
  if (auto v = get("readout.tol")) c.logreg.tol = v->as_double("readout.tol");
  if (auto v = get("readout.max_iter")) c.logreg.max_iter = v->as_uint("readout.max_iter");

  const bool cl = get("contrastive.enabled") && get("contrastive.enabled")->as_bool("contrastive.enabled");
  if (cl) {
    ContrastiveConfig cc;
    if (auto v = get("contrastive.margin")) cc.margin = v->as_double("contrastive.margin");
    if (auto v = get("contrastive.learning_rate")) cc.learning_rate = v->as_double("contrastive.learning_rate");
    if (auto v = get("contrastive.epochs")) cc.epochs = v->as_uint("contrastive.epochs");
    if (auto v = get("contrastive.batch_size")) cc.batch_size = v->as_uint("contrastive.batch_size");
    if (auto v = get("contrastive.pair_seed")) cc.pair_seed = v->as_uint("contrastive.pair_seed");
    if (auto v = get("contrastive.adam_beta1")) cc.adam_beta1 = v->as_double("contrastive.adam_beta1");
    if (auto v = get("contrastive.adam_beta2")) cc.adam_beta2 = v->as_double("contrastive.adam_beta2");
    if (auto v = get("contrastive.adam_eps")) cc.adam_eps = v->as_double("contrastive.adam_eps");
    c.contrastive = cc;
  }
  if (auto v = get("metrics.average")) c.average = parse_f1_average(v->as_string("metrics.average"));
  if (auto v = get("output.dir")) c.output_dir = resolve(base_dir, v->as_string("output.dir"));
  if (auto v = get("output.label")) c.label = v->as_string("output.label");
  if (auto v = get("run.threads")) c.threads = v->as_uint("run.threads");
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::pair<std::string, std::string>>& overrides) {
  ConfigDocument doc = ConfigDocument::load(path);
  for (const auto& [key, value] : overrides) doc.set_from_text(key, value);
  return experiment_config_from(doc, std::filesystem::absolute(path).parent_path());
}

std::string config_snapshot_json(const ExperimentConfig& c) {
  ojson j;
  j["corpus"] = {{"path", c.corpus_path.string()},
                 {"format", to_string(c.corpus_format)},
                 {"token_col", c.parse.token_col},
                 {"tag_col", c.parse.tag_col},
                 {"max_length", c.parse.max_length},
                 {"scheme", c.parse.scheme ? to_string(*c.parse.scheme) : "auto"},
                 {"dataset", c.dataset}};
  auto scenarios = ojson::array();
  for (const auto& s : c.scenarios) scenarios.push_back({s.n_ways, s.k_shots, s.k_query});
  j["sampling"] = {{"scenarios", scenarios}, {"n_episodes", c.n_episodes}, {"seed", c.seed}};
  j["encoder"] = {{"kind", to_string(c.encoder.kind)},
                  {"dim", c.encoder.dim},
                  {"seed", c.encoder.seed},
                  {"store", c.encoder.store_path.string()},
                  {"label", c.encoder_label},
                  {"normalize", c.normalize}};
  j["readout"] = {{"kind", to_string(c.readout)},
                  {"l2_lambda", c.logreg.l2_lambda},
                  {"tol", c.logreg.tol},
                  {"max_iter", c.logreg.max_iter}};
  if (c.contrastive) {
    const auto& cc = *c.contrastive;
    j["contrastive"] = {{"enabled", true},          {"margin", cc.margin},
                        {"learning_rate", cc.learning_rate}, {"epochs", cc.epochs},
                        {"batch_size", cc.batch_size}, {"pair_seed", cc.pair_seed},
                        {"adam_beta1", cc.adam_beta1}, {"adam_beta2", cc.adam_beta2},
                        {"adam_eps", cc.adam_eps}};
  } else {
    j["contrastive"] = {{"enabled", false}};
  }
  j["metrics"] = {{"average", to_string(c.average)}};
  j["output"] = {{"label", c.column_label()}};
  return j.dump(2);
}

EmbeddingCache::EmbeddingCache(const Corpus& corpus, const Encoder& encoder, bool normalize)
    : corpus_(&corpus), encoder_(&encoder), normalize_(normalize) {}

void EmbeddingCache::prepare(const std::vector<Episode>& episodes) {
  auto add = [&](const ShotRef& shot) {
    if (rows_.count(shot.sentence_id)) return;
    const Sentence* s = corpus_->find(shot.sentence_id);
    if (!s) throw PreconditionError("episode references unknown sentence '" + shot.sentence_id + "'");
    EmbeddingMatrix m = encoder_->encode(*s);
    if (!m.vectors.allFinite()) {
      throw NumericError("embeddings of sentence '" + s->id + "' are not finite");
    }
    if (normalize_) l2_normalize_rows(m.vectors);
    rows_.emplace(s->id, std::move(m.vectors));
  };
  for (const auto& ep : episodes) {
    for (const auto& s : ep.support) add(s);
    for (const auto& s : ep.query) add(s);
    for (const auto& s : ep.extra_support) add(s);
  }
}

const RowMatrix& EmbeddingCache::get(std::string_view sentence_id) const {
  auto it = rows_.find(sentence_id);
  if (it == rows_.end()) {
    throw MissingEmbeddingError("sentence '" + std::string(sentence_id) + "' was not encoded");
  }
  return it->second;
}

namespace {

// Stacks the token rows of each shot; labels follow the episode class order.
void gather(const std::vector<ShotRef>& shots, const Episode& episode, const EmbeddingCache& cache,
            RowMatrix& rows, std::vector<int>& labels) {
  std::size_t total = 0;
  for (const auto& s : shots) total += s.span.length();
  const std::size_t offset = labels.size();
  Eigen::Index dim = 0;
  for (const auto& s : shots) {
    dim = cache.get(s.sentence_id).cols();
    break;
  }
  if (offset == 0) {
    rows.resize(static_cast<Eigen::Index>(total), dim);
  } else {
    rows.conservativeResize(static_cast<Eigen::Index>(offset + total), rows.cols());
  }
  std::size_t r = offset;
  for (const auto& s : shots) {
    const RowMatrix& m = cache.get(s.sentence_id);
    const auto cls = episode.class_index(s.entity_type);
    if (!cls) throw PreconditionError("shot type '" + s.entity_type + "' is not an episode class");
    if (s.span.end > static_cast<std::size_t>(m.rows())) {
      throw AlignmentError("shot span exceeds the embeddings of sentence '" + s.sentence_id + "'");
    }
    for (std::size_t t = s.span.start; t < s.span.end; ++t, ++r) {
      rows.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(t));
      labels.push_back(static_cast<int>(*cls));
    }
  }
}

}  // namespace

EpisodeOutcome evaluate_episode(const Episode& episode, std::size_t episode_index, const Scenario& scenario,
                                const EmbeddingCache& cache, const ExperimentConfig& config) {
  SupportSet support;
  support.n_classes = episode.classes.size();
  gather(episode.support, episode, cache, support.embeddings, support.labels);

  RowMatrix queries;
  std::vector<int> gold;
  gather(episode.query, episode, cache, queries, gold);

  if (config.contrastive) {
    SupportSet pair_support = support;
    gather(episode.extra_support, episode, cache, pair_support.embeddings, pair_support.labels);
    ContrastiveConfig cc = *config.contrastive;
    cc.pair_seed = CounterRng::child(cc.pair_seed, episode_index).next_u64();
    const ProjectionHead head = train_head(pair_support, support.n_classes, scenario.k_shots, cc);
    support.embeddings = head.apply(support.embeddings);
    queries = head.apply(queries);
    if (config.normalize) {
      l2_normalize_rows(support.embeddings);
      l2_normalize_rows(queries);
    }
  }

  const ReadoutModel model = fit_readout(config.readout, support, config.logreg);
  EpisodeOutcome out;
  out.predictions = predict_labels(model, queries);
  out.gold = std::move(gold);
  out.score = episode_f1(out.predictions, out.gold, support.n_classes, config.average);
  out.score.episode_index = episode_index;
  return out;
}

bool RunManifest::all_ok() const {
  for (const auto& s : scenarios) {
    if (!s.ok) return false;
  }
  return true;
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("FEWIE_BENCH_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string pairing_digest(const std::vector<Episode>& episodes) {
  std::string text;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    Episode core = episodes[i];
    core.extra_support.clear();
    text += episode_to_json_line(i, core);
    text += '\n';
  }
  return hex64(fnv1a64(text));
}

std::vector<EpisodeOutcome> evaluate_all(const std::vector<Episode>& episodes, const Scenario& scenario,
                                         const EmbeddingCache& cache, const ExperimentConfig& config) {
  std::vector<EpisodeOutcome> outcomes(episodes.size());
  std::vector<std::exception_ptr> errors(episodes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < episodes.size(); i = next++) {
      try {
        outcomes[i] = evaluate_episode(episodes[i], i, scenario, cache, config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads =
      std::min(episodes.size(), config.threads ? config.threads : default_thread_count());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return outcomes;
}

ojson scenario_json(const ScenarioResult& r) {
  ojson j;
  j["n_ways"] = r.scenario.n_ways;
  j["k_shots"] = r.scenario.k_shots;
  j["k_query"] = r.scenario.k_query;
  j["status"] = r.ok ? "ok" : "error";
  if (!r.ok) {
    j["error"] = {{"kind", r.error_kind}, {"message", r.error_message}};
  }
  if (!r.episodes_file.empty()) j["episodes"] = r.episodes_file;
  if (r.ok) {
    j["scores"] = r.scores_file;
    j["predictions"] = r.predictions_file;
    j["pairing_digest"] = r.pairing_digest;
    j["n_episodes"] = r.scores.size();
    j["mean_f1"] = r.summary.mean;
    j["std_f1"] = r.summary.std;
    j["ci95_f1"] = r.summary.ci95;
  }
  return j;
}

}  // namespace

std::vector<EpisodeScore> read_scores_file(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  std::vector<EpisodeScore> scores;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      scores.push_back({j.at("episode_index").get<std::size_t>(), j.at("f1").get<double>(),
                        j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
                        j.at("fn").get<std::size_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no);
    }
  }
  return scores;
}

RunManifest run_experiment(const ExperimentConfig& config) {
  config.validate();
  Corpus corpus = load_corpus(config.corpus_path, config.corpus_format, config.parse);
  const auto encoder = make_encoder(config.encoder);
  EmbeddingCache cache(corpus, *encoder, config.normalize);
  const EpisodeSampler sampler(corpus);

  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + config.output_dir.string() + ": " + ec.message());

  RunManifest run;
  run.version = artifact_version();
  run.dataset = config.dataset;
  run.label = config.column_label();
  run.config_json = config_snapshot_json(config);
  run.directory = config.output_dir;

  for (const auto& scenario : config.scenarios) {
    ScenarioResult r;
    r.scenario = scenario;
    try {
      const EpisodeSpec spec{scenario.n_ways, scenario.k_shots, scenario.k_query, config.seed,
                             config.contrastive.has_value()};
      const auto episodes = sampler.sample_run(spec, config.n_episodes);
      r.episodes_file = "episodes_" + scenario.stem() + ".jsonl";
      write_manifest_file(config.output_dir / r.episodes_file, episodes);
      r.pairing_digest = pairing_digest(episodes);

      cache.prepare(episodes);
      const auto outcomes = evaluate_all(episodes, scenario, cache, config);

      std::string scores_text, predictions_text;
      for (const auto& o : outcomes) {
        r.scores.push_back(o.score);
        ojson s;
        s["episode_index"] = o.score.episode_index;
        s["f1"] = o.score.f1;
        s["tp"] = o.score.tp;
        s["fp"] = o.score.fp;
        s["fn"] = o.score.fn;
        scores_text += s.dump() + "\n";
        ojson p;
        p["episode_index"] = o.score.episode_index;
        p["predictions"] = o.predictions;
        p["gold"] = o.gold;
        predictions_text += p.dump() + "\n";
      }
      r.scores_file = "scores_" + scenario.stem() + ".jsonl";
      r.predictions_file = "predictions_" + scenario.stem() + ".jsonl";
      write_text(config.output_dir / r.scores_file, scores_text);
      write_text(config.output_dir / r.predictions_file, predictions_text);
      r.summary = aggregate(r.scores);
      r.ok = true;
    } catch (const Error& e) {
      r.ok = false;
      r.error_kind = to_string(e.kind());
      r.error_message = e.what();
      r.scores.clear();
    }
    run.scenarios.push_back(std::move(r));
  }

  RunManifest ok_only = run;
  std::erase_if(ok_only.scenarios, [](const ScenarioResult& s) { return !s.ok; });
  if (!ok_only.scenarios.empty()) {
    const TableDocument table = emit_table({ok_only});
    write_text(config.output_dir / "results.csv", table.csv);
    write_text(config.output_dir / "results.md", table.markdown);
  }

  ojson manifest;
  manifest["version"] = run.version;
  manifest["dataset"] = run.dataset;
  manifest["label"] = run.label;
  manifest["config"] = ojson::parse(run.config_json);
  auto scenarios = ojson::array();
  for (const auto& r : run.scenarios) scenarios.push_back(scenario_json(r));
  manifest["scenarios"] = scenarios;
  write_text(config.output_dir / "run_manifest.json", manifest.dump(2) + "\n");
  return run;
}

RunManifest load_run(const std::filesystem::path& directory) {
  const auto path = directory / "run_manifest.json";
  ojson j;
  try {
    j = ojson::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  RunManifest run;
  run.directory = directory;
  try {
    run.version = j.at("version").get<std::string>();
    run.dataset = j.at("dataset").get<std::string>();
    run.label = j.at("label").get<std::string>();
    run.config_json = j.at("config").dump(2);
    for (const auto& s : j.at("scenarios")) {
      ScenarioResult r;
      r.scenario = {s.at("n_ways").get<std::size_t>(), s.at("k_shots").get<std::size_t>(),
                    s.at("k_query").get<std::size_t>()};
      r.ok = s.at("status").get<std::string>() == "ok";
      if (s.contains("episodes")) r.episodes_file = s.at("episodes").get<std::string>();
      if (r.ok) {
        r.scores_file = s.at("scores").get<std::string>();
        r.predictions_file = s.at("predictions").get<std::string>();
        r.pairing_digest = s.at("pairing_digest").get<std::string>();
        r.scores = read_scores_file(directory / r.scores_file);
        r.summary = aggregate(r.scores);
      } else {
        r.error_kind = s.at("error").at("kind").get<std::string>();
        r.error_message = s.at("error").at("message").get<std::string>();
      }
      run.scenarios.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return run;
}

}  // namespace fewie
