#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fewie/corpus.hpp"
#include "fewie/encoders.hpp"

namespace fewie::testing {

// Removes the directory tree on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "fewie");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string class_name(std::size_t c);

// Every sentence holds exactly one mention, surrounded by O tokens. Class c
// mentions are `1 + c % max_mention_len` tokens long. Token strings are
// unique across the corpus, so a static random encoder carries no signal.
struct BalancedCorpusOptions {
  std::size_t n_classes = 5;
  std::size_t sentences_per_class = 40;
  std::size_t max_mention_len = 1;
  std::uint64_t seed = 1;
};
Corpus make_balanced_corpus(const BalancedCorpusOptions& options);

// Random BIO corpus: 3-8 classes, sentences with 0-3 mentions of random
// types and lengths, O-only sentences mixed in.
Corpus make_random_corpus(std::uint64_t seed, std::size_t n_sentences = 200);

// One embedding matrix per sentence: mention tokens are class_center + noise,
// O tokens pure noise. Centers are random unit vectors keyed by (seed, type);
// noise entries are N(0, noise^2 / dim).
std::vector<EmbeddingMatrix> make_clustered_embeddings(const Corpus& corpus, std::size_t dim, double noise,
                                                       std::uint64_t seed);

// As above, plus `n_directions` random unit directions shared by all classes,
// each token moving along every one of them by N(0, scale^2). Mimics the few
// dominant, class-agnostic directions of pretrained encoder embeddings.
std::vector<EmbeddingMatrix> make_anisotropic_embeddings(const Corpus& corpus, std::size_t dim, double noise,
                                                         std::size_t n_directions, double scale,
                                                         std::uint64_t seed);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace fewie::testing
