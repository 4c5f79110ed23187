#include "fewie/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "fewie/error.hpp"
#include "json.hpp"

namespace fewie {

void EpisodeSpec::validate() const {
  if (n_ways < 2) throw PreconditionError("n_ways must be at least 2");
  if (k_shots < 1) throw PreconditionError("k_shots must be at least 1");
  if (k_query < 1) throw PreconditionError("k_query must be at least 1");
}

std::optional<std::size_t> Episode::class_index(std::string_view type) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == type) return i;
  }
  return std::nullopt;
}

EpisodeSampler::EpisodeSampler(const Corpus& corpus) : corpus_(&corpus) {
  types_.assign(corpus.label_space().begin(), corpus.label_space().end());
  by_type_.resize(types_.size());
  sentence_types_.resize(corpus.size());
  auto type_id = [&](const std::string& t) {
    return static_cast<std::size_t>(std::lower_bound(types_.begin(), types_.end(), t) - types_.begin());
  };
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    for (const auto& m : extract_mentions(corpus.sentences()[s], corpus.scheme())) {
      const std::size_t id = type_id(m.entity_type);
      by_type_[id].push_back({s, m.span});
      sentence_types_[s].push_back(id);
    }
    auto& st = sentence_types_[s];
    std::sort(st.begin(), st.end());
    st.erase(std::unique(st.begin(), st.end()), st.end());
  }
}

namespace {

// Lazily shuffled view over a candidate list: each draw is a Fisher-Yates step.
template <typename T>
class LazyShuffle {
 public:
  explicit LazyShuffle(std::vector<T> items) : items_(std::move(items)) {}

  bool exhausted() const noexcept { return cursor_ == items_.size(); }

  const T& draw(CounterRng& rng) {
    const std::size_t j = cursor_ + rng.uniform_below(items_.size() - cursor_);
    std::swap(items_[cursor_], items_[j]);
    return items_[cursor_++];
  }

 private:
  std::vector<T> items_;
  std::size_t cursor_ = 0;
};

}  // namespace

Episode EpisodeSampler::sample(const EpisodeSpec& spec, CounterRng& rng) const {
  spec.validate();
  const std::size_t n = spec.n_ways;
  if (types_.size() < n) {
    throw InfeasibleError("corpus has " + std::to_string(types_.size()) + " entity classes, " +
                              std::to_string(n) + " required",
                          "");
  }
  const std::size_t extra = spec.wants_extra() ? 1 : 0;
  const std::size_t need = spec.k_shots + spec.k_query + extra;
  const auto& sentences = corpus_->sentences();

  std::string failing;
  std::vector<std::size_t> pool(types_.size());
  std::vector<char> in_set(types_.size());

  for (std::size_t attempt = 0; attempt < kMaxClassDraws; ++attempt) {
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + rng.uniform_below(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    const std::vector<std::size_t> chosen(pool.begin(), pool.begin() + n);
    std::fill(in_set.begin(), in_set.end(), 0);
    for (auto c : chosen) in_set[c] = 1;

    auto pure = [&](std::size_t s) {
      return std::all_of(sentence_types_[s].begin(), sentence_types_[s].end(),
                         [&](std::size_t t) { return in_set[t] != 0; });
    };

    std::vector<LazyShuffle<MentionRef>> candidates;
    candidates.reserve(n);
    bool feasible = true;
    for (auto c : chosen) {
      std::vector<MentionRef> eligible;
      for (const auto& m : by_type_[c]) {
        if (pure(m.sentence)) eligible.push_back(m);
      }
      if (eligible.size() < need) {
        failing = types_[c];
        feasible = false;
        break;
      }
      candidates.emplace_back(std::move(eligible));
    }
    if (!feasible) continue;

    Episode ep;
    for (auto c : chosen) ep.classes.push_back(types_[c]);
    auto shot = [&](const MentionRef& m, std::size_t cls) {
      return ShotRef{sentences[m.sentence].id, m.span, ep.classes[cls]};
    };

    std::set<std::size_t> support_sentences;
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t k = 0; k < spec.k_shots; ++k) {
        const auto& m = candidates[c].draw(rng);
        support_sentences.insert(m.sentence);
        ep.support.push_back(shot(m, c));
      }
    }

    std::set<std::size_t> query_sentences;
    for (std::size_t c = 0; c < n && feasible; ++c) {
      std::size_t taken = 0;
      while (taken < spec.k_query) {
        if (candidates[c].exhausted()) {
          failing = ep.classes[c];
          feasible = false;
          break;
        }
        const auto& m = candidates[c].draw(rng);
        if (support_sentences.count(m.sentence)) continue;
        query_sentences.insert(m.sentence);
        ep.query.push_back(shot(m, c));
        ++taken;
      }
    }
    if (!feasible) continue;

    for (std::size_t c = 0; c < n && extra && feasible; ++c) {
      for (;;) {
        if (candidates[c].exhausted()) {
          failing = ep.classes[c];
          feasible = false;
          break;
        }
        const auto& m = candidates[c].draw(rng);
        if (query_sentences.count(m.sentence)) continue;
        ep.extra_support.push_back(shot(m, c));
        break;
      }
    }
    if (!feasible) continue;
    return ep;
  }
  throw InfeasibleError("no feasible " + std::to_string(n) + "-way " + std::to_string(spec.k_shots) +
                            "-shot class set after " + std::to_string(kMaxClassDraws) +
                            " draws; last failing class '" + failing + "'",
                        failing);
}

std::vector<Episode> EpisodeSampler::sample_run(const EpisodeSpec& spec, std::size_t n_episodes) const {
  std::vector<Episode> out;
  out.reserve(n_episodes);
  for (std::size_t i = 0; i < n_episodes; ++i) {
    CounterRng rng = CounterRng::child(spec.seed, i);
    out.push_back(sample(spec, rng));
  }
  return out;
}

Episode sample_episode(const Corpus& corpus, const EpisodeSpec& spec, CounterRng& rng) {
  return EpisodeSampler(corpus).sample(spec, rng);
}

std::vector<Episode> sample_run(const Corpus& corpus, const EpisodeSpec& spec, std::size_t n_episodes) {
  return EpisodeSampler(corpus).sample_run(spec, n_episodes);
}

namespace {

std::string describe(const ShotRef& s) {
  return "'" + s.sentence_id + "'[" + std::to_string(s.span.start) + "," +
         std::to_string(s.span.end) + ") " + s.entity_type;
}

}  // namespace

std::vector<std::string> validate_episode(const Corpus& corpus, const Episode& episode,
                                          std::optional<ShotCounts> expected) {
  std::vector<std::string> violations;
  const std::set<std::string> class_set(episode.classes.begin(), episode.classes.end());
  if (class_set.size() != episode.classes.size()) {
    violations.push_back("classes: episode lists a class more than once");
  }
  if (episode.classes.size() < 2) violations.push_back("classes: fewer than 2 classes");

  std::map<std::string, std::vector<EntityMention>> mention_cache;
  auto mentions_of = [&](const Sentence& s) -> const std::vector<EntityMention>& {
    auto it = mention_cache.find(s.id);
    if (it == mention_cache.end()) {
      it = mention_cache.emplace(s.id, extract_mentions(s, corpus.scheme())).first;
    }
    return it->second;
  };

  std::set<std::string> support_ids, query_ids;
  std::set<std::tuple<std::string, std::size_t, std::size_t>> seen;
  auto check_shots = [&](const std::vector<ShotRef>& shots, const char* role,
                         std::set<std::string>& ids) {
    for (const auto& s : shots) {
      ids.insert(s.sentence_id);
      if (!seen.emplace(s.sentence_id, s.span.start, s.span.end).second) {
        violations.push_back(std::string("duplicate: ") + role + " shot " + describe(s) +
                             " is used more than once");
      }
      if (!class_set.count(s.entity_type)) {
        violations.push_back(std::string("class: ") + role + " shot " + describe(s) +
                             " has a type outside the episode classes");
      }
      const Sentence* sentence = corpus.find(s.sentence_id);
      if (!sentence) {
        violations.push_back(std::string("dangling: ") + role + " shot " + describe(s) +
                             " references an unknown sentence");
        continue;
      }
      const auto& mentions = mentions_of(*sentence);
      const bool matches = std::any_of(mentions.begin(), mentions.end(), [&](const EntityMention& m) {
        return m.span == s.span && m.entity_type == s.entity_type;
      });
      if (!matches) {
        violations.push_back(std::string("mention: ") + role + " shot " + describe(s) +
                             " does not match a mention in its sentence");
      }
      for (const auto& m : mentions) {
        if (!class_set.count(m.entity_type)) {
          violations.push_back(std::string("purity: ") + role + " shot " + describe(s) +
                               " sentence contains out-of-episode type '" + m.entity_type + "'");
          break;
        }
      }
    }
  };
  std::set<std::string> extra_ids;
  check_shots(episode.support, "support", support_ids);
  check_shots(episode.query, "query", query_ids);
  check_shots(episode.extra_support, "extra", extra_ids);

  for (const auto& id : query_ids) {
    if (support_ids.count(id) || extra_ids.count(id)) {
      violations.push_back("disjointness: sentence '" + id + "' appears in support and query");
    }
  }

  auto count_by_class = [&](const std::vector<ShotRef>& shots) {
    std::map<std::string, std::size_t> counts;
    for (const auto& c : episode.classes) counts[c] = 0;
    for (const auto& s : shots) ++counts[s.entity_type];
    return counts;
  };
  auto check_counts = [&](const std::vector<ShotRef>& shots, const char* role,
                          std::optional<std::size_t> want) {
    const auto counts = count_by_class(shots);
    if (!want && !episode.classes.empty()) want = counts.at(episode.classes.front());
    for (const auto& c : episode.classes) {
      if (counts.at(c) != *want || *want == 0) {
        violations.push_back(std::string("shot-count: class '") + c + "' has " +
                             std::to_string(counts.at(c)) + " " + role + " shots, expected " +
                             std::to_string(*want == 0 ? 1 : *want));
      }
    }
  };
  check_counts(episode.support, "support",
               expected ? std::optional<std::size_t>(expected->k_shots) : std::nullopt);
  check_counts(episode.query, "query",
               expected ? std::optional<std::size_t>(expected->k_query) : std::nullopt);
  if (!episode.extra_support.empty()) check_counts(episode.extra_support, "extra", 1);
  return violations;
}

namespace {

nlohmann::ordered_json shots_to_json(const std::vector<ShotRef>& shots) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : shots) {
    arr.push_back({{"sentence_id", s.sentence_id},
                   {"start", s.span.start},
                   {"end", s.span.end},
                   {"type", s.entity_type}});
  }
  return arr;
}

std::vector<ShotRef> shots_from_json(const nlohmann::json& arr) {
  std::vector<ShotRef> shots;
  for (const auto& s : arr) {
    shots.push_back({s.at("sentence_id").get<std::string>(),
                     {s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>()},
                     s.at("type").get<std::string>()});
  }
  return shots;
}

}  // namespace

std::string episode_to_json_line(std::size_t episode_index, const Episode& episode) {
  nlohmann::ordered_json j;
  j["episode_index"] = episode_index;
  j["classes"] = episode.classes;
  j["support"] = shots_to_json(episode.support);
  j["query"] = shots_to_json(episode.query);
  j["extra_support"] = shots_to_json(episode.extra_support);
  return j.dump();
}

std::string write_manifest(const std::vector<Episode>& episodes) {
  std::string out;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    out += episode_to_json_line(i, episodes[i]);
    out += '\n';
  }
  return out;
}

void write_manifest_file(const std::filesystem::path& path, const std::vector<Episode>& episodes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << write_manifest(episodes);
  if (!out) throw IoError("write failed for manifest " + path.string());
}

std::vector<IndexedEpisode> read_manifest(std::string_view text) {
  std::vector<IndexedEpisode> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      IndexedEpisode ie;
      ie.episode_index = j.at("episode_index").get<std::size_t>();
      ie.episode.classes = j.at("classes").get<std::vector<std::string>>();
      ie.episode.support = shots_from_json(j.at("support"));
      ie.episode.query = shots_from_json(j.at("query"));
      if (j.contains("extra_support")) ie.episode.extra_support = shots_from_json(j.at("extra_support"));
      out.push_back(std::move(ie));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad manifest record: ") + e.what(), line_no);
    }
  }
  return out;
}

std::vector<IndexedEpisode> read_manifest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return read_manifest(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace fewie
