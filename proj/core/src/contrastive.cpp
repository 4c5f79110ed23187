#include "fewie/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fewie/error.hpp"
#include "fewie/rng.hpp"

namespace fewie {

void ContrastiveConfig::validate() const {
  if (!(margin > 0.0)) throw PreconditionError("contrastive margin must be positive");
  if (!(learning_rate > 0.0)) throw PreconditionError("contrastive learning_rate must be positive");
  if (epochs < 1) throw PreconditionError("contrastive epochs must be at least 1");
}

ProjectionHead ProjectionHead::identity(std::size_t dim) {
  return ProjectionHead{RowMatrix::Identity(dim, dim)};
}

RowMatrix ProjectionHead::apply(const RowMatrix& rows) const { return rows * weight.transpose(); }

PairSet build_pairs(const SupportSet& support, std::size_t n_ways, std::size_t k_shots,
                    std::uint64_t pair_seed) {
  support.validate();
  if (n_ways < 2) throw PreconditionError("pair construction needs at least 2 classes");
  if (support.n_classes != n_ways) {
    throw PreconditionError("support has " + std::to_string(support.n_classes) + " classes, expected " +
                            std::to_string(n_ways));
  }
  std::vector<std::vector<std::size_t>> by_class(n_ways);
  for (std::size_t i = 0; i < support.labels.size(); ++i) by_class[support.labels[i]].push_back(i);

  CounterRng rng(mix64(pair_seed));
  PairSet pairs;
  for (std::size_t c = 0; c < n_ways; ++c) {
    const auto& own = by_class[c];
    if (own.size() < 2) {
      throw PreconditionError("class " + std::to_string(c) +
                              " has a single support token; a positive pair needs an extra example");
    }
    const std::size_t a = rng.uniform_below(own.size());
    std::size_t b = rng.uniform_below(own.size() - 1);
    if (b >= a) ++b;
    pairs.positives.emplace_back(own[a], own[b]);

    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < support.labels.size(); ++i) {
      if (static_cast<std::size_t>(support.labels[i]) != c) others.push_back(i);
    }
    if (others.size() < k_shots) {
      throw PreconditionError("not enough other-class tokens for " + std::to_string(k_shots) +
                              " negatives of class " + std::to_string(c));
    }
    for (std::size_t k = 0; k < k_shots; ++k) {
      const std::size_t j = k + rng.uniform_below(others.size() - k);
      std::swap(others[k], others[j]);
      pairs.negatives.emplace_back(own[a], others[k]);
    }
  }
  return pairs;
}

namespace {

void check_inputs(const PairSet& pairs, const RowMatrix& embeddings, const ProjectionHead& head) {
  if (!embeddings.allFinite()) throw NumericError("contrastive embeddings contain non-finite values");
  if (head.weight.rows() != embeddings.cols() || head.weight.cols() != embeddings.cols()) {
    throw PreconditionError("projection head shape does not match embedding dim");
  }
  auto in_range = [&](const auto& list) {
    return std::all_of(list.begin(), list.end(), [&](const auto& p) {
      return p.first != p.second && p.first < static_cast<std::size_t>(embeddings.rows()) &&
             p.second < static_cast<std::size_t>(embeddings.rows());
    });
  };
  if (!in_range(pairs.positives) || !in_range(pairs.negatives)) {
    throw PreconditionError("pair indices must be distinct rows of the embedding matrix");
  }
}

// Walks every pair with its difference u = z_i - z_j, projection v = W u and
// distance ||v||.
template <typename Fn>
void for_each_pair(const PairSet& pairs, const RowMatrix& z, const ProjectionHead& head, Fn&& fn) {
  auto visit = [&](const auto& list, bool positive) {
    for (const auto& [i, j] : list) {
      const Eigen::VectorXd u = (z.row(i) - z.row(j)).transpose();
      const Eigen::VectorXd v = head.weight * u;
      fn(positive, u, v, v.norm());
    }
  };
  visit(pairs.positives, true);
  visit(pairs.negatives, false);
}

}  // namespace

double contrastive_loss(const PairSet& pairs, const RowMatrix& embeddings, const ProjectionHead& head,
                        double margin) {
  check_inputs(pairs, embeddings, head);
  double loss = 0.0;
  for_each_pair(pairs, embeddings, head, [&](bool positive, const auto&, const auto&, double dist) {
    loss += positive ? dist : std::max(0.0, margin - dist);
  });
  return loss;
}

RowMatrix contrastive_grad(const PairSet& pairs, const RowMatrix& embeddings, const ProjectionHead& head,
                           double margin) {
  check_inputs(pairs, embeddings, head);
  RowMatrix grad = RowMatrix::Zero(head.weight.rows(), head.weight.cols());
  for_each_pair(pairs, embeddings, head,
                [&](bool positive, const Eigen::VectorXd& u, const Eigen::VectorXd& v, double dist) {
                  if (dist == 0.0) return;
                  if (positive) {
                    grad.noalias() += (v / dist) * u.transpose();
                  } else if (dist < margin) {
                    grad.noalias() -= (v / dist) * u.transpose();
                  }
                });
  return grad;
}

ProjectionHead train_head(const SupportSet& support, std::size_t n_ways, std::size_t k_shots,
                          const ContrastiveConfig& config) {
  config.validate();
  const PairSet all = build_pairs(support, n_ways, k_shots, config.pair_seed);
  const auto d = static_cast<std::size_t>(support.embeddings.cols());
  ProjectionHead head = ProjectionHead::identity(d);
  RowMatrix m = RowMatrix::Zero(d, d);
  RowMatrix v = RowMatrix::Zero(d, d);
  std::size_t t = 0;

  // Pair list flattened so minibatches can mix positives and negatives.
  struct Tagged {
    std::pair<std::size_t, std::size_t> pair;
    bool positive;
  };
  std::vector<Tagged> flat;
  for (const auto& p : all.positives) flat.push_back({p, true});
  for (const auto& p : all.negatives) flat.push_back({p, false});
  const std::size_t batch = config.batch_size == 0 ? flat.size() : config.batch_size;
  CounterRng shuffle_rng = CounterRng::child(config.pair_seed, 1);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (batch < flat.size()) {
      for (std::size_t i = flat.size(); i > 1; --i) {
        std::swap(flat[i - 1], flat[shuffle_rng.uniform_below(i)]);
      }
    }
    for (std::size_t start = 0; start < flat.size(); start += batch) {
      PairSet chunk;
      for (std::size_t i = start; i < std::min(flat.size(), start + batch); ++i) {
        (flat[i].positive ? chunk.positives : chunk.negatives).push_back(flat[i].pair);
      }
      const RowMatrix g = contrastive_grad(chunk, support.embeddings, head, config.margin);
      ++t;
      m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * g;
      v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * g.cwiseProduct(g);
      const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(t));
      head.weight.array() -= config.learning_rate * (m.array() / bc1) /
                             ((v.array() / bc2).sqrt() + config.adam_eps);
    }
  }
  if (!head.weight.allFinite()) throw NumericError("projection head diverged");
  return head;
}

}  // namespace fewie
