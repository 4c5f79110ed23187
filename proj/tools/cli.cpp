#include "cli.hpp"

#include <fstream>
#include <ostream>

#include "CLI11.hpp"
#include "fewie/error.hpp"
#include "fewie/harness.hpp"
#include "fewie/sampler.hpp"
#include "fewie/store.hpp"

namespace fewie::cli {

namespace {

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kInfeasible: return kInfeasible;
    case ErrorKind::kConfig: return kUsage;
    default: return kDataError;
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

// TOML basic string literal.
std::string toml_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

struct CorpusArgs {
  std::string path;
  std::string format;
  std::string scheme;

  Corpus load() const {
    ParseOptions options;
    if (!scheme.empty()) options.scheme = parse_tag_scheme(scheme);
    const CorpusFormat f = format.empty() ? guess_corpus_format(path) : parse_corpus_format(format);
    return load_corpus(path, f, options);
  }
};

void add_corpus_options(CLI::App* app, CorpusArgs& args) {
  app->add_option("--format", args.format, "Corpus format (conll|jsonl); guessed from the extension");
  app->add_option("--scheme", args.scheme, "Convert the corpus to this tag scheme (BIO|IO)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot NER encoder evaluation: episodic sampling, readout and scoring", "fewie-bench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", artifact_version());

  // run
  std::string config_path;
  std::string out_dir;
  std::optional<std::size_t> episodes_override;
  std::optional<std::int64_t> seed_override;  // config integers are signed 64-bit
  std::string readout_override;
  std::optional<std::size_t> threads_override;
  std::vector<std::string> sets;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a config file");
  run_cmd->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", out_dir, "Override output.dir");
  run_cmd->add_option("--episodes", episodes_override, "Override sampling.n_episodes");
  run_cmd->add_option("--seed", seed_override, "Override sampling.seed")->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--readout", readout_override, "Override readout.kind (LR|NN|NC)");
  run_cmd->add_option("--threads", threads_override, "Override run.threads");
  run_cmd->add_option("--set", sets, "Override any config key: section.key=value");

  // validate
  CorpusArgs validate_corpus;
  std::string manifest_path;
  std::optional<std::size_t> validate_k, validate_q;
  auto* validate_cmd = app.add_subcommand("validate", "Check an episode manifest against a corpus");
  validate_cmd->add_option("corpus", validate_corpus.path, "Corpus file")->required()->check(CLI::ExistingFile);
  validate_cmd->add_option("manifest", manifest_path, "Episode manifest (JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  validate_cmd->add_option("--k", validate_k, "Expected support shots per class");
  validate_cmd->add_option("--q", validate_q, "Expected query shots per class");
  add_corpus_options(validate_cmd, validate_corpus);

  // sample
  CorpusArgs sample_corpus;
  EpisodeSpec spec;
  std::size_t n_episodes = 600;
  std::string sample_out;
  auto* sample_cmd = app.add_subcommand("sample", "Sample episode manifests without evaluating them");
  sample_cmd->add_option("corpus", sample_corpus.path, "Corpus file")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--n", spec.n_ways, "Classes per episode (N)")->required();
  sample_cmd->add_option("--k", spec.k_shots, "Support shots per class (K)")->required();
  sample_cmd->add_option("--q", spec.k_query, "Query shots per class (K')");
  sample_cmd->add_option("--episodes", n_episodes, "Number of episodes")->required();
  sample_cmd->add_option("--seed", spec.seed, "Sampling seed")->required();
  sample_cmd->add_flag("--cl-extra", spec.cl_extra, "Sample one extra support mention per class when K = 1");
  sample_cmd->add_option("--out", sample_out, "Write the manifest here instead of stdout");
  add_corpus_options(sample_cmd, sample_corpus);

  // table
  std::vector<std::string> run_dirs;
  std::string csv_out, md_out, test_name = "paired-t";
  double alpha = 0.05;
  auto* table_cmd = app.add_subcommand("table", "Combine run directories into result tables");
  table_cmd->add_option("runs", run_dirs, "Run output directories")->required()->check(CLI::ExistingDirectory);
  table_cmd->add_option("--csv", csv_out, "Write the CSV table here");
  table_cmd->add_option("--md", md_out, "Write the markdown table here");
  table_cmd->add_option("--alpha", alpha, "Significance level");
  table_cmd->add_option("--test", test_name, "Significance test (paired-t|wilcoxon)");

  // store-check
  CorpusArgs store_corpus;
  std::string store_path;
  auto* store_cmd = app.add_subcommand("store-check", "Validate an embedding store against a corpus");
  store_cmd->add_option("store", store_path, "Embedding store file")->required()->check(CLI::ExistingFile);
  store_cmd->add_option("corpus", store_corpus.path, "Corpus file")->required()->check(CLI::ExistingFile);
  add_corpus_options(store_cmd, store_corpus);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) {
      std::vector<std::pair<std::string, std::string>> overrides;
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
          err << "--set expects section.key=value, got '" << s << "'\n";
          return kUsage;
        }
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
      }
      if (!out_dir.empty()) {
        overrides.emplace_back("output.dir", toml_string(std::filesystem::absolute(out_dir).string()));
      }
      if (episodes_override) overrides.emplace_back("sampling.n_episodes", std::to_string(*episodes_override));
      if (seed_override) overrides.emplace_back("sampling.seed", std::to_string(*seed_override));
      if (!readout_override.empty()) overrides.emplace_back("readout.kind", toml_string(readout_override));
      if (threads_override) overrides.emplace_back("run.threads", std::to_string(*threads_override));

      const ExperimentConfig config = load_experiment_config(config_path, overrides);
      const RunManifest manifest = run_experiment(config);
      int code = kOk;
      for (const auto& s : manifest.scenarios) {
        if (s.ok) {
          out << s.scenario.label() << ": mean F1 " << format_f1_cell(s.summary.mean) << " (n=" << s.scores.size()
              << ")\n";
        } else {
          err << s.scenario.label() << ": " << s.error_kind << " error: " << s.error_message << "\n";
          if (code == kOk || s.error_kind == "infeasible") {
            code = s.error_kind == "infeasible" ? kInfeasible : kDataError;
          }
        }
      }
      out << "wrote " << config.output_dir.string() << "\n";
      return code;
    }

    if (*validate_cmd) {
      const Corpus corpus = validate_corpus.load();
      const auto episodes = read_manifest_file(manifest_path);
      std::optional<ShotCounts> expected;
      if (validate_k || validate_q) expected = ShotCounts{validate_k.value_or(1), validate_q.value_or(1)};
      std::size_t violations = 0;
      for (const auto& ie : episodes) {
        for (const auto& v : validate_episode(corpus, ie.episode, expected)) {
          out << "episode " << ie.episode_index << ": " << v << "\n";
          ++violations;
        }
      }
      if (violations > 0) {
        err << violations << " violation(s) in " << episodes.size() << " episode(s)\n";
        return kDataError;
      }
      out << "ok: " << episodes.size() << " episode(s) valid\n";
      return kOk;
    }

    if (*sample_cmd) {
      const Corpus corpus = sample_corpus.load();
      spec.validate();
      const auto episodes = EpisodeSampler(corpus).sample_run(spec, n_episodes);
      const std::string text = write_manifest(episodes);
      if (sample_out.empty()) {
        out << text;
      } else {
        write_file(sample_out, text);
      }
      return kOk;
    }

    if (*table_cmd) {
      std::vector<RunManifest> runs;
      for (const auto& dir : run_dirs) runs.push_back(load_run(dir));
      const TableDocument table = emit_table(runs, {alpha, parse_significance_test(test_name)});
      if (!csv_out.empty()) write_file(csv_out, table.csv);
      if (!md_out.empty()) write_file(md_out, table.markdown);
      out << table.markdown;
      return kOk;
    }

    if (*store_cmd) {
      const EmbeddingStore store = store_read(store_path);
      const Corpus corpus = store_corpus.load();
      const auto problems = check_store_alignment(store, corpus);
      for (const auto& p : problems) out << p << "\n";
      for (const auto& e : store.entries()) store.lookup(e.sentence_id);
      if (!problems.empty()) {
        err << problems.size() << " problem(s)\n";
        return kDataError;
      }
      out << "ok: " << store.size() << " record(s), dim " << store.dim() << ", " << corpus.size()
          << " sentence(s) aligned\n";
      return kOk;
    }
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    return (*sample_cmd) ? kUsage : kDataError;
  } catch (const Error& e) {
    err << to_string(e.kind()) << " error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace fewie::cli
