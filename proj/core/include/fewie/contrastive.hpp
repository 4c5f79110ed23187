#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fewie/encoders.hpp"
#include "fewie/readout.hpp"

namespace fewie {

struct ContrastiveConfig {
  double margin = 1.0;
  double learning_rate = 5e-5;
  std::size_t epochs = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // 0 = full batch: one Adam step per epoch.
  std::size_t batch_size = 0;
  std::uint64_t pair_seed = 0;

  void validate() const;
};

// Linear map g(z) = W z applied to frozen token embeddings.
struct ProjectionHead {
  RowMatrix weight;  // d x d

  static ProjectionHead identity(std::size_t dim);
  // Projects every row: Z W^T.
  RowMatrix apply(const RowMatrix& rows) const;
};

struct PairSet {
  std::vector<std::pair<std::size_t, std::size_t>> positives;
  std::vector<std::pair<std::size_t, std::size_t>> negatives;
};

// Per class: a uniform anchor, a uniform positive partner among the other
// tokens of the class, and K negative partners drawn uniformly without
// replacement from tokens of other classes. Yields N positives and N*K
// negatives.
PairSet build_pairs(const SupportSet& support, std::size_t n_ways, std::size_t k_shots,
                    std::uint64_t pair_seed);

// Sum over positives of ||W(z_i - z_j)|| plus sum over negatives of
// max(0, margin - ||W(z_i - z_j)||).
double contrastive_loss(const PairSet& pairs, const RowMatrix& embeddings, const ProjectionHead& head,
                        double margin);

// Gradient of contrastive_loss in head.weight. Terms at zero distance or
// exactly on the hinge contribute 0.
RowMatrix contrastive_grad(const PairSet& pairs, const RowMatrix& embeddings, const ProjectionHead& head,
                           double margin);

// Adam from the identity head over the pairs of `support`.
ProjectionHead train_head(const SupportSet& support, std::size_t n_ways, std::size_t k_shots,
                          const ContrastiveConfig& config);

}  // namespace fewie
