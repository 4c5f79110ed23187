#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "fewie/corpus.hpp"

namespace fewie {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row t is the embedding of token t of the sentence.
struct EmbeddingMatrix {
  std::string sentence_id;
  RowMatrix vectors;

  Eigen::Index token_count() const noexcept { return vectors.rows(); }
  Eigen::Index dim() const noexcept { return vectors.cols(); }
};

inline constexpr std::size_t kDefaultRandomDim = 768;

enum class EncoderKind { kRandom, kStore };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kRandom;
  std::size_t dim = kDefaultRandomDim;
  std::filesystem::path store_path;
  std::uint64_t seed = 0;
};

EncoderKind parse_encoder_kind(std::string_view name);
const char* to_string(EncoderKind kind);

class EmbeddingStore;

class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual EmbeddingMatrix encode(const Sentence& sentence) const = 0;
  virtual std::size_t dim() const = 0;
};

// Static random embeddings: each token string maps to its own i.i.d.
// standard-normal vector, keyed by mix64(seed ^ fnv1a64(token)).
class RandomEncoder final : public Encoder {
 public:
  RandomEncoder(std::size_t dim, std::uint64_t seed);
  EmbeddingMatrix encode(const Sentence& sentence) const override;
  std::size_t dim() const override { return dim_; }

  void token_vector(std::string_view token, Eigen::Ref<Eigen::RowVectorXd> out) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

class StoreEncoder final : public Encoder {
 public:
  explicit StoreEncoder(std::shared_ptr<const EmbeddingStore> store);
  EmbeddingMatrix encode(const Sentence& sentence) const override;
  std::size_t dim() const override;

 private:
  std::shared_ptr<const EmbeddingStore> store_;
};

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config);

// One-shot convenience; opens the store on every call for the store kind.
EmbeddingMatrix encode(const EncoderConfig& config, const Sentence& sentence);

// Rows with nonzero norm are scaled to unit Euclidean norm; zero rows pass.
void l2_normalize_rows(Eigen::Ref<RowMatrix> rows);
EmbeddingMatrix l2_normalize(EmbeddingMatrix matrix);

}  // namespace fewie
