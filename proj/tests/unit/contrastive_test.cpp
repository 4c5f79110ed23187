#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fewie/contrastive.hpp"
#include "fewie/error.hpp"
#include "fewie/rng.hpp"
#include "oracles.hpp"

namespace fewie {
namespace {

// tokens_per_class rows per class, unit-normalized.
SupportSet class_support(CounterRng& rng, std::size_t n, std::size_t tokens_per_class, std::size_t d) {
  SupportSet s;
  s.n_classes = n;
  s.embeddings.resize(static_cast<Eigen::Index>(n * tokens_per_class), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < s.embeddings.size(); ++i) s.embeddings.data()[i] = rng.normal();
  l2_normalize_rows(s.embeddings);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t t = 0; t < tokens_per_class; ++t) s.labels.push_back(static_cast<int>(c));
  }
  return s;
}

RowMatrix random_matrix(CounterRng& rng, Eigen::Index r, Eigen::Index c) {
  RowMatrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

TEST(BuildPairs, CountsForFiveShot) {
  CounterRng rng(1);
  const auto s = class_support(rng, 5, 5, 4);
  const auto p = build_pairs(s, 5, 5, 9);
  EXPECT_EQ(p.positives.size(), 5u);
  EXPECT_EQ(p.negatives.size(), 25u);
}

TEST(BuildPairs, CountsForOneShotWithExtra) {
  CounterRng rng(2);
  const auto s = class_support(rng, 5, 2, 4);  // one shot plus one extra per class
  const auto p = build_pairs(s, 5, 1, 9);
  EXPECT_EQ(p.positives.size(), 5u);
  EXPECT_EQ(p.negatives.size(), 5u);
}

TEST(BuildPairs, InvariantsAndDeterminism) {
  CounterRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.uniform_below(5), k = 1 + rng.uniform_below(5);
    const auto s = class_support(rng, n, k + 1, 3);
    const std::uint64_t seed = rng.next_u64();
    const auto p = build_pairs(s, n, k, seed);
    ASSERT_EQ(p.positives.size(), n);
    ASSERT_EQ(p.negatives.size(), n * k);
    std::set<int> anchored;
    for (const auto& [i, j] : p.positives) {
      EXPECT_NE(i, j);
      EXPECT_EQ(s.labels[i], s.labels[j]);
      anchored.insert(s.labels[i]);
    }
    EXPECT_EQ(anchored.size(), n);
    std::set<std::pair<std::size_t, std::size_t>> unique_neg(p.negatives.begin(), p.negatives.end());
    EXPECT_EQ(unique_neg.size(), p.negatives.size());
    for (const auto& [i, j] : p.negatives) EXPECT_NE(s.labels[i], s.labels[j]);
    const auto again = build_pairs(s, n, k, seed);
    EXPECT_EQ(again.positives, p.positives);
    EXPECT_EQ(again.negatives, p.negatives);
  }
}

TEST(BuildPairs, SingleTokenClassNeedsExtra) {
  CounterRng rng(4);
  const auto s = class_support(rng, 3, 1, 4);
  EXPECT_THROW(build_pairs(s, 3, 1, 0), PreconditionError);
  EXPECT_THROW(build_pairs(class_support(rng, 3, 2, 4), 4, 1, 0), PreconditionError);
}

TEST(ContrastiveLoss, TrivialCases) {
  RowMatrix z(3, 2);
  z << 0.3, 0.4, 0.3, 0.4, 5.0, 0.0;
  const auto head = ProjectionHead::identity(2);
  EXPECT_EQ(contrastive_loss({{{0, 1}}, {}}, z, head, 1.0), 0.0);
  EXPECT_EQ(contrastive_loss({{}, {{0, 1}}}, z, head, 0.75), 0.75);
  EXPECT_EQ(contrastive_loss({{}, {{0, 2}}}, z, head, 1.0), 0.0);
  const RowMatrix g = contrastive_grad({{}, {{0, 2}}}, z, head, 1.0);
  EXPECT_TRUE(g.isZero(0.0));
}

TEST(ContrastiveLoss, MatchesOracle) {
  CounterRng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = class_support(rng, 3, 3, 4);
    const auto pairs = build_pairs(s, 3, 2, trial);
    const ProjectionHead head{RowMatrix::Identity(4, 4) + 0.3 * random_matrix(rng, 4, 4)};
    EXPECT_NEAR(contrastive_loss(pairs, s.embeddings, head, 1.2),
                testing::oracle_contrastive_loss(testing::to_mat(head.weight), testing::to_mat(s.embeddings),
                                                 pairs.positives, pairs.negatives, 1.2),
                1e-12);
  }
}

TEST(ContrastiveGrad, MatchesFiniteDifferencesAwayFromKinks) {
  CounterRng rng(6);
  constexpr double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 50; ++trial) {
    const RowMatrix z = random_matrix(rng, 5, 3);
    PairSet pairs{{{0, 1}, {2, 3}}, {{0, 4}, {1, 3}}};
    const ProjectionHead head{random_matrix(rng, 3, 3)};
    const double margin = 0.5 + 2.0 * rng.uniform01();
    bool near_kink = false;
    for (const auto& list : {pairs.positives, pairs.negatives}) {
      for (const auto& [i, j] : list) {
        const double r = (head.weight * (z.row(i) - z.row(j)).transpose()).norm();
        near_kink |= r < 1e-3 || std::abs(r - margin) < 1e-3;
      }
    }
    if (near_kink) continue;
    ++checked;
    const RowMatrix g = contrastive_grad(pairs, z, head, margin);
    RowMatrix fd(3, 3);
    for (Eigen::Index i = 0; i < 9; ++i) {
      ProjectionHead hp = head, hm = head;
      hp.weight.data()[i] += h;
      hm.weight.data()[i] -= h;
      fd.data()[i] = (contrastive_loss(pairs, z, hp, margin) - contrastive_loss(pairs, z, hm, margin)) / (2 * h);
    }
    EXPECT_LT((g - fd).norm() / std::max(1e-12, g.norm()), 1e-5) << "trial " << trial;
  }
  EXPECT_EQ(checked, 50);
}

TEST(ContrastiveGrad, StepAlongNegativeGradientDecreasesLoss) {
  RowMatrix z(2, 3);
  z << 1, 0, 0, 0.6, 0.8, 0;
  const PairSet pairs{{{0, 1}}, {}};
  const auto head = ProjectionHead::identity(3);
  const RowMatrix g = contrastive_grad(pairs, z, head, 1.0);
  ProjectionHead stepped{head.weight - 1e-3 * g};
  EXPECT_LT(contrastive_loss(pairs, z, stepped, 1.0), contrastive_loss(pairs, z, head, 1.0));
}

TEST(ContrastiveGrad, ZeroDistanceUsesZeroSubgradient) {
  RowMatrix z(2, 2);
  z << 0.5, 0.5, 0.5, 0.5;
  const auto head = ProjectionHead::identity(2);
  EXPECT_TRUE(contrastive_grad({{{0, 1}}, {{0, 1}}}, z, head, 1.0).isZero(0.0));
}

TEST(ContrastiveLoss, RejectsBadInputs) {
  RowMatrix z(2, 2);
  z << 1, 0, std::nan(""), 1;
  EXPECT_THROW(contrastive_loss({{{0, 1}}, {}}, z, ProjectionHead::identity(2), 1.0), NumericError);
  z(1, 0) = 0;
  EXPECT_THROW(contrastive_loss({{{0, 1}}, {}}, z, ProjectionHead::identity(3), 1.0), PreconditionError);
  EXPECT_THROW(contrastive_loss({{{0, 0}}, {}}, z, ProjectionHead::identity(2), 1.0), PreconditionError);
  EXPECT_THROW(contrastive_loss({{{0, 2}}, {}}, z, ProjectionHead::identity(2), 1.0), PreconditionError);
}

TEST(TrainHead, OneAdamStepDoesNotIncreaseLoss) {
  CounterRng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = class_support(rng, 5, 3, 8);
    ContrastiveConfig cfg;
    cfg.pair_seed = rng.next_u64();
    const auto pairs = build_pairs(s, 5, 2, cfg.pair_seed);
    const auto before = contrastive_loss(pairs, s.embeddings, ProjectionHead::identity(8), cfg.margin);
    const auto head = train_head(s, 5, 2, cfg);
    EXPECT_FALSE(head.weight.isIdentity(0.0));
    EXPECT_LE(contrastive_loss(pairs, s.embeddings, head, cfg.margin), before);
  }
}

TEST(TrainHead, LargerRunsReduceLossFurther) {
  CounterRng rng(8);
  const auto s = class_support(rng, 4, 4, 6);
  ContrastiveConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 50;
  cfg.pair_seed = 3;
  const auto pairs = build_pairs(s, 4, 3, cfg.pair_seed);
  const auto before = contrastive_loss(pairs, s.embeddings, ProjectionHead::identity(6), cfg.margin);
  EXPECT_LT(contrastive_loss(pairs, s.embeddings, train_head(s, 4, 3, cfg), cfg.margin), before);
  cfg.batch_size = 4;
  EXPECT_LT(contrastive_loss(pairs, s.embeddings, train_head(s, 4, 3, cfg), cfg.margin), before);
}

TEST(TrainHead, TinyMarginLeavesOnlyPositives) {
  CounterRng rng(9);
  const auto s = class_support(rng, 3, 3, 5);
  ContrastiveConfig cfg;
  cfg.margin = 1e-12;
  cfg.pair_seed = 4;
  const auto pairs = build_pairs(s, 3, 2, cfg.pair_seed);
  const PairSet positives_only{pairs.positives, {}};
  EXPECT_EQ(contrastive_grad(pairs, s.embeddings, ProjectionHead::identity(5), cfg.margin),
            contrastive_grad(positives_only, s.embeddings, ProjectionHead::identity(5), cfg.margin));
  // The first bias-corrected Adam step is lr * g / (|g| + eps).
  const RowMatrix g = contrastive_grad(positives_only, s.embeddings, ProjectionHead::identity(5), cfg.margin);
  const auto head = train_head(s, 3, 2, cfg);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double moved = ProjectionHead::identity(5).weight.data()[i] - head.weight.data()[i];
    const double gi = g.data()[i];
    EXPECT_NEAR(moved, cfg.learning_rate * gi / (std::abs(gi) + cfg.adam_eps), 1e-15);
  }
}

TEST(TrainHead, ConfigValidation) {
  CounterRng rng(10);
  const auto s = class_support(rng, 2, 2, 3);
  ContrastiveConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(train_head(s, 2, 1, cfg), PreconditionError);
  cfg.epochs = 1;
  cfg.margin = 0;
  EXPECT_THROW(train_head(s, 2, 1, cfg), PreconditionError);
  cfg.margin = 1;
  cfg.learning_rate = -1;
  EXPECT_THROW(train_head(s, 2, 1, cfg), PreconditionError);
}

}  // namespace
}  // namespace fewie
