#include "fewie/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fewie/error.hpp"
#include "json.hpp"

namespace fewie {

const char* to_string(TagScheme scheme) { return scheme == TagScheme::kBIO ? "BIO" : "IO"; }

TagScheme parse_tag_scheme(std::string_view name) {
  if (name == "BIO" || name == "bio") return TagScheme::kBIO;
  if (name == "IO" || name == "io") return TagScheme::kIO;
  throw ConfigError("unknown tag scheme '" + std::string(name) + "' (expected BIO or IO)");
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "conll") return CorpusFormat::kConll;
  if (name == "jsonl") return CorpusFormat::kJsonl;
  throw ConfigError("unknown corpus format '" + std::string(name) + "' (expected conll or jsonl)");
}

const char* to_string(CorpusFormat format) {
  return format == CorpusFormat::kConll ? "conll" : "jsonl";
}

CorpusFormat guess_corpus_format(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".json") ? CorpusFormat::kJsonl : CorpusFormat::kConll;
}

std::optional<TagParts> split_tag(std::string_view tag) {
  if (tag == "O") return std::nullopt;
  if (tag.size() < 3 || tag[1] != '-') return TagParts{'?', {}};
  return TagParts{tag[0], tag.substr(2)};
}

namespace {

bool prefix_allowed(char prefix, TagScheme scheme) {
  return prefix == 'I' || (prefix == 'B' && scheme == TagScheme::kBIO);
}

std::string tag_error(std::string_view tag, TagScheme scheme) {
  return "tag '" + std::string(tag) + "' is not O or a valid " + to_string(scheme) + " tag";
}

}  // namespace

Corpus Corpus::build(std::vector<Sentence> sentences, TagScheme scheme) {
  Corpus c;
  c.scheme_ = scheme;
  for (const auto& s : sentences) {
    if (s.tokens.empty()) throw ParseError("sentence '" + s.id + "' has no tokens");
    if (s.tokens.size() != s.tags.size()) {
      throw ParseError("sentence '" + s.id + "' has " + std::to_string(s.tokens.size()) +
                       " tokens but " + std::to_string(s.tags.size()) + " tags");
    }
    for (const auto& tag : s.tags) {
      auto parts = split_tag(tag);
      if (!parts) continue;
      if (!prefix_allowed(parts->prefix, scheme)) {
        throw ParseError("sentence '" + s.id + "': " + tag_error(tag, scheme));
      }
      c.label_space_.emplace(parts->type);
    }
  }
  c.sentences_ = std::move(sentences);
  c.by_id_.resize(c.sentences_.size());
  for (std::size_t i = 0; i < c.by_id_.size(); ++i) c.by_id_[i] = i;
  std::sort(c.by_id_.begin(), c.by_id_.end(), [&](std::size_t a, std::size_t b) {
    return c.sentences_[a].id < c.sentences_[b].id;
  });
  for (std::size_t i = 1; i < c.by_id_.size(); ++i) {
    if (c.sentences_[c.by_id_[i]].id == c.sentences_[c.by_id_[i - 1]].id) {
      throw ParseError("duplicate sentence id '" + c.sentences_[c.by_id_[i]].id + "'");
    }
  }
  return c;
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  auto it = std::lower_bound(by_id_.begin(), by_id_.end(), id, [&](std::size_t i, std::string_view key) {
    return sentences_[i].id < key;
  });
  if (it == by_id_.end() || sentences_[*it].id != id) return std::nullopt;
  return *it;
}

const Sentence* Corpus::find(std::string_view id) const {
  auto idx = index_of(id);
  return idx ? &sentences_[*idx] : nullptr;
}

std::vector<EntityMention> extract_mentions(const Sentence& sentence, TagScheme scheme) {
  std::vector<EntityMention> out;
  std::optional<std::size_t> open_start;
  std::string_view open_type;
  auto close = [&](std::size_t end) {
    if (open_start) out.push_back({sentence.id, {*open_start, end}, std::string(open_type)});
    open_start.reset();
  };
  for (std::size_t t = 0; t < sentence.tags.size(); ++t) {
    auto parts = split_tag(sentence.tags[t]);
    if (!parts) {
      close(t);
      continue;
    }
    const bool continues = open_start && parts->type == open_type &&
                           (scheme == TagScheme::kIO || parts->prefix == 'I');
    if (!continues) {
      close(t);
      open_start = t;
      open_type = parts->type;
    }
  }
  close(sentence.tags.size());
  return out;
}

Corpus convert_scheme(const Corpus& corpus, TagScheme target) {
  if (corpus.scheme() == target) return corpus;
  std::vector<Sentence> sentences = corpus.sentences();
  for (auto& s : sentences) {
    const auto mentions = extract_mentions(s, corpus.scheme());
    std::fill(s.tags.begin(), s.tags.end(), "O");
    for (const auto& m : mentions) {
      for (std::size_t t = m.span.start; t < m.span.end; ++t) {
        const char prefix = (target == TagScheme::kBIO && t == m.span.start) ? 'B' : 'I';
        s.tags[t] = std::string(1, prefix) + "-" + m.entity_type;
      }
    }
  }
  return Corpus::build(std::move(sentences), target);
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) cols.push_back(line.substr(i, j - i));
    i = j;
  }
  return cols;
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

// Shared tail of both parsers: scheme detection, truncation, conversion.
Corpus finish(std::vector<Sentence> sentences, bool saw_begin, const ParseOptions& options) {
  if (sentences.empty()) throw ParseError("empty corpus: no sentences found");
  const TagScheme detected = saw_begin ? TagScheme::kBIO : TagScheme::kIO;
  if (options.max_length == 0) throw ConfigError("max_length must be positive");
  for (auto& s : sentences) {
    if (s.tokens.size() <= options.max_length) continue;
    const std::size_t cut = options.max_length;
    for (const auto& m : extract_mentions(s, detected)) {
      if (m.span.start < cut && m.span.end > cut) {
        for (std::size_t t = m.span.start; t < cut; ++t) s.tags[t] = "O";
      }
    }
    s.tokens.resize(cut);
    s.tags.resize(cut);
  }
  Corpus corpus = Corpus::build(std::move(sentences), detected);
  if (options.scheme && *options.scheme != detected) return convert_scheme(corpus, *options.scheme);
  return corpus;
}

void check_tag_syntax(std::string_view tag, std::size_t line_no, bool& saw_begin) {
  auto parts = split_tag(tag);
  if (!parts) return;
  if (parts->prefix != 'B' && parts->prefix != 'I') {
    throw ParseError("tag '" + std::string(tag) + "' has an unknown prefix", line_no);
  }
  if (parts->prefix == 'B') saw_begin = true;
}

}  // namespace

Corpus parse_conll(std::string_view text, const ParseOptions& options) {
  std::vector<Sentence> sentences;
  Sentence current;
  bool saw_begin = false;
  std::size_t expected_cols = 0;
  std::size_t line_no = 0;

  auto flush = [&] {
    if (current.tokens.empty()) return;
    current.id = options.id_stem + ":" + std::to_string(sentences.size());
    sentences.push_back(std::move(current));
    current = Sentence{};
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = trim_cr(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (is_blank(line)) {
      flush();
      if (nl == text.size()) break;
      continue;
    }
    const auto cols = split_ws(line);
    if (cols.front() == "-DOCSTART-") {
      if (nl == text.size()) break;
      continue;
    }
    if (expected_cols == 0) expected_cols = cols.size();
    const auto from_back = static_cast<std::size_t>(options.tag_col < 0 ? -options.tag_col : 0);
    const std::size_t needed =
        std::max(options.token_col + 1,
                 options.tag_col < 0 ? from_back : static_cast<std::size_t>(options.tag_col) + 1);
    if (cols.size() != expected_cols || cols.size() < needed) {
      throw ParseError("expected " + std::to_string(std::max(expected_cols, needed)) +
                           " columns, found " + std::to_string(cols.size()),
                       line_no);
    }
    const std::size_t tag_idx =
        options.tag_col < 0 ? cols.size() - from_back : static_cast<std::size_t>(options.tag_col);
    check_tag_syntax(cols[tag_idx], line_no, saw_begin);
    current.tokens.emplace_back(cols[options.token_col]);
    current.tags.emplace_back(cols[tag_idx]);
    if (nl == text.size()) break;
  }
  flush();
  return finish(std::move(sentences), saw_begin, options);
}

Corpus parse_jsonl(std::string_view text, const ParseOptions& options) {
  std::vector<Sentence> sentences;
  bool saw_begin = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = trim_cr(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (is_blank(line)) continue;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!obj.is_object() || !obj.contains("tokens") || !obj.contains("tags")) {
      throw ParseError("expected an object with \"tokens\" and \"tags\"", line_no);
    }
    Sentence s;
    try {
      s.tokens = obj.at("tokens").get<std::vector<std::string>>();
      s.tags = obj.at("tags").get<std::vector<std::string>>();
      s.id = obj.contains("id") ? obj.at("id").get<std::string>()
                                : options.id_stem + ":" + std::to_string(sentences.size());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad field type: ") + e.what(), line_no);
    }
    if (s.tokens.empty()) throw ParseError("sentence has no tokens", line_no);
    if (s.tokens.size() != s.tags.size()) {
      throw ParseError("tokens and tags differ in length", line_no);
    }
    for (const auto& tag : s.tags) check_tag_syntax(tag, line_no, saw_begin);
    sentences.push_back(std::move(s));
  }
  return finish(std::move(sentences), saw_begin, options);
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, ParseOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (options.id_stem == ParseOptions{}.id_stem) options.id_stem = path.stem().string();
  try {
    return format == CorpusFormat::kConll ? parse_conll(buf.str(), options)
                                          : parse_jsonl(buf.str(), options);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string serialize_conll(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus.sentences()) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      out += s.tokens[t];
      out += '\t';
      out += s.tags[t];
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

}  // namespace fewie
