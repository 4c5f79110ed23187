#include "fewie/readout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fewie/error.hpp"

namespace fewie {

ReadoutKind parse_readout_kind(std::string_view name) {
  if (name == "LR" || name == "lr") return ReadoutKind::kLogReg;
  if (name == "NN" || name == "nn") return ReadoutKind::kNearestNeighbor;
  if (name == "NC" || name == "nc") return ReadoutKind::kNearestCentroid;
  throw ConfigError("unknown readout '" + std::string(name) + "' (expected LR, NN or NC)");
}

const char* to_string(ReadoutKind kind) {
  switch (kind) {
    case ReadoutKind::kLogReg: return "LR";
    case ReadoutKind::kNearestNeighbor: return "NN";
    case ReadoutKind::kNearestCentroid: return "NC";
  }
  return "?";
}

void SupportSet::validate() const {
  if (n_classes == 0) throw PreconditionError("support set has no classes");
  if (labels.size() != static_cast<std::size_t>(embeddings.rows())) {
    throw PreconditionError("support set has " + std::to_string(embeddings.rows()) + " rows but " +
                            std::to_string(labels.size()) + " labels");
  }
  if (embeddings.cols() == 0) throw PreconditionError("support embeddings have no columns");
  std::vector<bool> present(n_classes, false);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
      throw PreconditionError("support label " + std::to_string(y) + " out of range");
    }
    present[y] = true;
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (!present[c]) throw PreconditionError("class " + std::to_string(c) + " has no support rows");
  }
  if (!embeddings.allFinite()) throw PreconditionError("support embeddings contain non-finite values");
}

namespace {

// Row-wise softmax of logits, stabilized by the row max.
RowMatrix softmax_rows(const RowMatrix& logits) {
  RowMatrix p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

// Classes are handled one at a time with the same kernel, so two classes with
// identical support rows get bitwise-identical weights and tie exactly.
RowMatrix class_logits(const RowMatrix& weights, const RowMatrix& x) {
  RowMatrix logits(x.rows(), weights.rows());
  for (Eigen::Index c = 0; c < weights.rows(); ++c) logits.col(c) = x * weights.row(c).transpose();
  return logits;
}

SupportSet canonical_order(const SupportSet& support) {
  std::vector<Eigen::Index> order(support.labels.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto& z = support.embeddings;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (support.labels[a] != support.labels[b]) return support.labels[a] < support.labels[b];
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      if (z(a, j) != z(b, j)) return z(a, j) < z(b, j);
    }
    return false;
  });
  SupportSet out;
  out.n_classes = support.n_classes;
  out.embeddings.resize(z.rows(), z.cols());
  out.labels.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.embeddings.row(i) = z.row(order[i]);
    out.labels[i] = support.labels[order[i]];
  }
  return out;
}

}  // namespace

double logreg_objective(const RowMatrix& weights, const SupportSet& support, double l2_lambda) {
  const RowMatrix logits = class_logits(weights, support.embeddings);  // M x N
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    loss += lse - logits(i, support.labels[i]);
  }
  loss /= static_cast<double>(logits.rows());
  return loss + 0.5 * l2_lambda * weights.squaredNorm();
}

RowMatrix logreg_gradient(const RowMatrix& weights, const SupportSet& support, double l2_lambda) {
  const RowMatrix& x = support.embeddings;
  const RowMatrix p = softmax_rows(class_logits(weights, x));  // M x N
  RowMatrix grad(weights.rows(), weights.cols());
  for (Eigen::Index c = 0; c < weights.rows(); ++c) {
    Eigen::RowVectorXd own = Eigen::RowVectorXd::Zero(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (support.labels[i] == c) own += x.row(i);
    }
    grad.row(c) = (p.col(c).transpose() * x - own) / static_cast<double>(x.rows());
  }
  grad += l2_lambda * weights;
  return grad;
}

ReadoutModel fit_logreg(const SupportSet& raw_support, const LogRegOptions& options) {
  raw_support.validate();
  if (options.l2_lambda < 0.0) throw PreconditionError("l2_lambda must be nonnegative");
  if (options.tol <= 0.0) throw PreconditionError("tol must be positive");
  if (options.max_iter == 0) throw PreconditionError("max_iter must be positive");
  const SupportSet support = canonical_order(raw_support);

  constexpr double kArmijo = 1e-4;
  constexpr double kMinStep = 1e-20;
  const auto n = static_cast<Eigen::Index>(support.n_classes);
  RowMatrix w = RowMatrix::Zero(n, support.embeddings.cols());
  double f = logreg_objective(w, support, options.l2_lambda);
  double step = 1.0;

  ReadoutModel model;
  model.kind = ReadoutKind::kLogReg;
  model.n_classes = support.n_classes;

  std::size_t iter = 0;
  RowMatrix g = logreg_gradient(w, support, options.l2_lambda);
  for (; iter < options.max_iter; ++iter) {
    if (g.cwiseAbs().maxCoeff() <= options.tol) break;
    const double g2 = g.squaredNorm();
    step = std::min(step * 2.0, 1e6);
    RowMatrix candidate;
    double f_new = 0.0;
    for (;;) {
      candidate = w - step * g;
      f_new = logreg_objective(candidate, support, options.l2_lambda);
      if (!std::isfinite(f_new)) throw NumericError("logistic regression objective is not finite");
      if (f_new <= f - kArmijo * step * g2) break;
      step *= 0.5;
      if (step < kMinStep) break;
    }
    if (step < kMinStep) break;  // no further decrease representable
    w = std::move(candidate);
    f = f_new;
    g = logreg_gradient(w, support, options.l2_lambda);
  }
  if (!w.allFinite()) throw NumericError("logistic regression weights are not finite");
  model.weights = std::move(w);
  model.iterations = iter;
  model.gradient_max_norm = g.cwiseAbs().maxCoeff();
  return model;
}

ReadoutModel fit_readout(ReadoutKind kind, const SupportSet& support, const LogRegOptions& options) {
  if (kind == ReadoutKind::kLogReg) return fit_logreg(support, options);
  support.validate();
  ReadoutModel model;
  model.kind = kind;
  model.n_classes = support.n_classes;
  if (kind == ReadoutKind::kNearestNeighbor) {
    model.references = support.embeddings;
    model.reference_labels = support.labels;
    return model;
  }
  model.weights = RowMatrix::Zero(support.n_classes, support.embeddings.cols());
  std::vector<double> counts(support.n_classes, 0.0);
  for (std::size_t i = 0; i < support.labels.size(); ++i) {
    model.weights.row(support.labels[i]) += support.embeddings.row(i);
    counts[support.labels[i]] += 1.0;
  }
  for (std::size_t c = 0; c < support.n_classes; ++c) model.weights.row(c) /= counts[c];
  return model;
}

namespace {

int argmin_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] < v[best]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace

Prediction predict_readout(const ReadoutModel& model, const Eigen::Ref<const Eigen::VectorXd>& query) {
  const Eigen::Index d =
      model.kind == ReadoutKind::kNearestNeighbor ? model.references.cols() : model.weights.cols();
  if (query.size() != d) {
    throw PreconditionError("query has dimension " + std::to_string(query.size()) + ", model expects " +
                            std::to_string(d));
  }
  Prediction p;
  const auto n = static_cast<Eigen::Index>(model.n_classes);
  switch (model.kind) {
    case ReadoutKind::kLogReg: {
      Eigen::VectorXd logits(n);
      for (Eigen::Index c = 0; c < n; ++c) logits[c] = model.weights.row(c).dot(query);
      const double m = logits.maxCoeff();
      p.scores = (logits.array() - m).exp();
      p.scores /= p.scores.sum();
      int best = 0;
      for (Eigen::Index c = 1; c < n; ++c) {
        if (logits[c] > logits[best]) best = static_cast<int>(c);
      }
      p.label = best;
      break;
    }
    case ReadoutKind::kNearestNeighbor: {
      Eigen::VectorXd sq = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
      for (Eigen::Index i = 0; i < model.references.rows(); ++i) {
        const double dist = (model.references.row(i).transpose() - query).squaredNorm();
        const int c = model.reference_labels[i];
        if (dist < sq[c]) sq[c] = dist;
      }
      p.label = argmin_lowest(sq);
      p.scores = sq.cwiseSqrt();
      break;
    }
    case ReadoutKind::kNearestCentroid: {
      Eigen::VectorXd sq(n);
      for (Eigen::Index c = 0; c < n; ++c) sq[c] = (model.weights.row(c).transpose() - query).squaredNorm();
      p.label = argmin_lowest(sq);
      p.scores = sq.cwiseSqrt();
      break;
    }
  }
  return p;
}

std::vector<int> predict_labels(const ReadoutModel& model, const RowMatrix& queries) {
  std::vector<int> out;
  out.reserve(queries.rows());
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    out.push_back(predict_readout(model, queries.row(i).transpose()).label);
  }
  return out;
}

}  // namespace fewie
