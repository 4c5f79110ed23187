#include "fewie/encoders.hpp"

#include "fewie/error.hpp"
#include "fewie/rng.hpp"
#include "fewie/store.hpp"

namespace fewie {

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "random") return EncoderKind::kRandom;
  if (name == "store") return EncoderKind::kStore;
  throw ConfigError("unknown encoder kind '" + std::string(name) + "' (expected random or store)");
}

const char* to_string(EncoderKind kind) { return kind == EncoderKind::kRandom ? "random" : "store"; }

RandomEncoder::RandomEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw PreconditionError("random encoder dim must be at least 1");
}

void RandomEncoder::token_vector(std::string_view token, Eigen::Ref<Eigen::RowVectorXd> out) const {
  CounterRng rng(mix64(seed_ ^ fnv1a64(token)));
  for (Eigen::Index j = 0; j < out.size(); ++j) out[j] = rng.normal();
}

EmbeddingMatrix RandomEncoder::encode(const Sentence& sentence) const {
  EmbeddingMatrix m{sentence.id, RowMatrix(sentence.size(), dim_)};
  for (std::size_t t = 0; t < sentence.size(); ++t) {
    Eigen::RowVectorXd row(dim_);
    token_vector(sentence.tokens[t], row);
    m.vectors.row(t) = row;
  }
  return m;
}

StoreEncoder::StoreEncoder(std::shared_ptr<const EmbeddingStore> store) : store_(std::move(store)) {}

std::size_t StoreEncoder::dim() const { return store_->dim(); }

EmbeddingMatrix StoreEncoder::encode(const Sentence& sentence) const {
  const StoreEntry* entry = store_->find(sentence.id);
  if (!entry) {
    throw MissingEmbeddingError("no embeddings for sentence '" + sentence.id + "' in " +
                                store_->path().string());
  }
  if (entry->token_count != sentence.size()) {
    throw AlignmentError("sentence '" + sentence.id + "' has " + std::to_string(sentence.size()) +
                         " tokens but the store holds " + std::to_string(entry->token_count));
  }
  return store_->lookup(sentence.id);
}

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config) {
  if (config.kind == EncoderKind::kRandom) {
    return std::make_unique<RandomEncoder>(config.dim, config.seed);
  }
  auto store = std::make_shared<EmbeddingStore>(store_read(config.store_path));
  return std::make_unique<StoreEncoder>(std::move(store));
}

EmbeddingMatrix encode(const EncoderConfig& config, const Sentence& sentence) {
  return make_encoder(config)->encode(sentence);
}

void l2_normalize_rows(Eigen::Ref<RowMatrix> rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double norm = rows.row(i).norm();
    if (norm > 0.0) rows.row(i) /= norm;
  }
}

EmbeddingMatrix l2_normalize(EmbeddingMatrix matrix) {
  l2_normalize_rows(matrix.vectors);
  return matrix;
}

}  // namespace fewie
