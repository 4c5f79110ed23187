#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace fewie {

inline constexpr std::size_t kDefaultMaxLength = 128;

enum class TagScheme { kBIO, kIO };

const char* to_string(TagScheme scheme);
TagScheme parse_tag_scheme(std::string_view name);

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  std::size_t size() const noexcept { return tokens.size(); }
};

// Half-open token range [start, end) of one entity mention.
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
  friend auto operator<=>(const TokenSpan&, const TokenSpan&) = default;
};

struct EntityMention {
  std::string sentence_id;
  TokenSpan span;
  std::string entity_type;

  friend bool operator==(const EntityMention&, const EntityMention&) = default;
};

// Sentences plus the scheme their tags follow. Immutable once built; use
// Corpus::build to get the label space and id checks.
class Corpus {
 public:
  Corpus() = default;

  // Validates unique ids, 1 <= T, token/tag length agreement and tag syntax
  // under `scheme`, then derives the label space.
  static Corpus build(std::vector<Sentence> sentences, TagScheme scheme);

  const std::vector<Sentence>& sentences() const noexcept { return sentences_; }
  TagScheme scheme() const noexcept { return scheme_; }
  const std::set<std::string>& label_space() const noexcept { return label_space_; }
  std::size_t size() const noexcept { return sentences_.size(); }

  // nullptr when the id is unknown.
  const Sentence* find(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;

 private:
  std::vector<Sentence> sentences_;
  TagScheme scheme_ = TagScheme::kBIO;
  std::set<std::string> label_space_;
  std::vector<std::size_t> by_id_;  // sentence indices sorted by id
};

enum class CorpusFormat { kConll, kJsonl };

CorpusFormat parse_corpus_format(std::string_view name);
const char* to_string(CorpusFormat format);
// .jsonl / .json -> kJsonl, anything else -> kConll.
CorpusFormat guess_corpus_format(const std::filesystem::path& path);

struct ParseOptions {
  std::size_t token_col = 0;
  // Negative values count from the last column (-1 = last).
  int tag_col = -1;
  std::size_t max_length = kDefaultMaxLength;
  // Prefix for generated sentence ids ("<stem>:<index>").
  std::string id_stem = "corpus";
  // Forces a scheme instead of detecting it; the corpus is converted.
  std::optional<TagScheme> scheme;
};

// Column format: blank-line separated blocks, whitespace separated columns,
// -DOCSTART- lines skipped. Long sentences are truncated to max_length and a
// mention cut by the truncation is dropped (its remaining tags become O).
Corpus parse_conll(std::string_view text, const ParseOptions& options = {});

// One {"id", "tokens", "tags"} object per line; "id" is optional.
Corpus parse_jsonl(std::string_view text, const ParseOptions& options = {});

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   ParseOptions options = {});

// Two-column "token<TAB>tag" blocks, readable by parse_conll.
std::string serialize_conll(const Corpus& corpus);

// Maximal spans. Under BIO, B-X starts a span and so does a dangling I-X
// (relaxed convention); under IO a type change or O ends a span.
std::vector<EntityMention> extract_mentions(const Sentence& sentence, TagScheme scheme);

// Rewrites tags into `target`. BIO -> IO merges adjacent same-type mentions.
Corpus convert_scheme(const Corpus& corpus, TagScheme target);

// Splits "B-PER" into ('B', "PER"); returns nullopt for "O".
struct TagParts {
  char prefix;
  std::string_view type;
};
std::optional<TagParts> split_tag(std::string_view tag);

}  // namespace fewie
