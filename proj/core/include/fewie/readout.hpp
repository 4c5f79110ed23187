#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fewie/encoders.hpp"

namespace fewie {

// Token-expanded support: one row per token of every support mention.
struct SupportSet {
  RowMatrix embeddings;     // M x d
  std::vector<int> labels;  // M entries in [0, n_classes)
  std::size_t n_classes = 0;

  // Throws PreconditionError on length mismatch, out-of-range labels, a
  // class with no rows, or non-finite entries.
  void validate() const;
};

enum class ReadoutKind { kLogReg, kNearestNeighbor, kNearestCentroid };

ReadoutKind parse_readout_kind(std::string_view name);
const char* to_string(ReadoutKind kind);

struct LogRegOptions {
  double l2_lambda = 1.0;
  double tol = 1e-6;
  std::size_t max_iter = 1000;
};

struct ReadoutModel {
  ReadoutKind kind = ReadoutKind::kLogReg;
  std::size_t n_classes = 0;
  RowMatrix weights;              // LR: N x d; NC: centroids N x d
  RowMatrix references;           // NN: support rows
  std::vector<int> reference_labels;
  // LR diagnostics.
  std::size_t iterations = 0;
  double gradient_max_norm = 0.0;
};

struct Prediction {
  int label = 0;
  // LR: class probabilities. NN/NC: per-class Euclidean distances.
  Eigen::VectorXd scores;
};

// Minimizes mean_i -log softmax(W z_i)[y_i] + (lambda / 2) ||W||_F^2 with no
// bias, by full-batch gradient descent with Armijo backtracking from W = 0.
// Rows are visited in a canonical order, so permuting the support leaves the
// result bitwise unchanged.
ReadoutModel fit_logreg(const SupportSet& support, const LogRegOptions& options = {});

ReadoutModel fit_readout(ReadoutKind kind, const SupportSet& support,
                         const LogRegOptions& options = {});

// Ties go to the lowest class index.
Prediction predict_readout(const ReadoutModel& model, const Eigen::Ref<const Eigen::VectorXd>& query);
std::vector<int> predict_labels(const ReadoutModel& model, const RowMatrix& queries);

// Regularized LR objective and its gradient, exposed for verification.
double logreg_objective(const RowMatrix& weights, const SupportSet& support, double l2_lambda);
RowMatrix logreg_gradient(const RowMatrix& weights, const SupportSet& support, double l2_lambda);

}  // namespace fewie
