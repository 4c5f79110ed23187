#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fewie::testing {

namespace {

Vec logits(const Mat& w, const Vec& q) {
  Vec out(w.size(), 0.0);
  for (std::size_t c = 0; c < w.size(); ++c) {
    for (std::size_t j = 0; j < q.size(); ++j) out[c] += w[c][j] * q[j];
  }
  return out;
}

double sq_dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

}  // namespace

Mat to_mat(const RowMatrix& m) {
  Mat out(m.rows(), Vec(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  }
  return out;
}

Vec to_vec(const Eigen::VectorXd& v) { return Vec(v.data(), v.data() + v.size()); }

Vec oracle_softmax(const Mat& w, const Vec& q) {
  Vec l = logits(w, q);
  const double m = *std::max_element(l.begin(), l.end());
  double total = 0.0;
  for (double& v : l) total += (v = std::exp(v - m));
  for (double& v : l) v /= total;
  return l;
}

double oracle_logreg_objective(const Mat& w, const Mat& x, const std::vector<int>& y, double lambda) {
  double f = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) f -= std::log(oracle_softmax(w, x[i])[y[i]]);
  f /= static_cast<double>(x.size());
  double reg = 0.0;
  for (const auto& row : w) {
    for (double v : row) reg += v * v;
  }
  return f + 0.5 * lambda * reg;
}

Mat oracle_logreg_gradient(const Mat& w, const Mat& x, const std::vector<int>& y, double lambda) {
  Mat g(w.size(), Vec(w[0].size(), 0.0));
  const double inv_m = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Vec p = oracle_softmax(w, x[i]);
    for (std::size_t c = 0; c < w.size(); ++c) {
      const double r = p[c] - (static_cast<int>(c) == y[i] ? 1.0 : 0.0);
      for (std::size_t j = 0; j < x[i].size(); ++j) g[c][j] += inv_m * r * x[i][j];
    }
  }
  for (std::size_t c = 0; c < w.size(); ++c) {
    for (std::size_t j = 0; j < w[c].size(); ++j) g[c][j] += lambda * w[c][j];
  }
  return g;
}

OracleFit oracle_logreg_fit(const Mat& x, const std::vector<int>& y, std::size_t n_classes, double lambda,
                            double grad_tol, std::size_t max_iter) {
  double max_sq = 0.0;
  for (const auto& row : x) {
    double s = 0.0;
    for (double v : row) s += v * v;
    max_sq = std::max(max_sq, s);
  }
  // The mean cross-entropy Hessian is bounded by max ||x||^2 in spectral norm.
  const double step = 1.0 / (lambda + max_sq);
  OracleFit fit;
  fit.w.assign(n_classes, Vec(x[0].size(), 0.0));
  for (; fit.iterations < max_iter; ++fit.iterations) {
    const Mat g = oracle_logreg_gradient(fit.w, x, y, lambda);
    fit.grad_max = 0.0;
    for (const auto& row : g) {
      for (double v : row) fit.grad_max = std::max(fit.grad_max, std::abs(v));
    }
    if (fit.grad_max <= grad_tol) break;
    for (std::size_t c = 0; c < n_classes; ++c) {
      for (std::size_t j = 0; j < g[c].size(); ++j) fit.w[c][j] -= step * g[c][j];
    }
  }
  return fit;
}

int oracle_nn_label(const Mat& support, const std::vector<int>& labels, const Vec& q) {
  double best = std::numeric_limits<double>::infinity();
  int label = -1;
  for (std::size_t i = 0; i < support.size(); ++i) {
    const double d = sq_dist(support[i], q);
    if (d < best || (d == best && labels[i] < label)) {
      best = d;
      label = labels[i];
    }
  }
  return label;
}

int oracle_nc_label(const Mat& support, const std::vector<int>& labels, std::size_t n_classes, const Vec& q) {
  Mat centers(n_classes, Vec(q.size(), 0.0));
  std::vector<double> counts(n_classes, 0.0);
  for (std::size_t i = 0; i < support.size(); ++i) {
    for (std::size_t j = 0; j < q.size(); ++j) centers[labels[i]][j] += support[i][j];
    counts[labels[i]] += 1.0;
  }
  int label = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (double& v : centers[c]) v /= counts[c];
    const double d = sq_dist(centers[c], q);
    if (d < best) {
      best = d;
      label = static_cast<int>(c);
    }
  }
  return label;
}

OracleCounts oracle_micro_f1(const std::vector<int>& pred, const std::vector<int>& gold, std::size_t n_classes) {
  OracleCounts out;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const int k = static_cast<int>(c);
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (pred[i] == k && gold[i] == k) ++out.tp;
      if (pred[i] == k && gold[i] != k) ++out.fp;
      if (pred[i] != k && gold[i] == k) ++out.fn;
    }
  }
  const double precision = out.tp + out.fp == 0 ? 0.0 : double(out.tp) / double(out.tp + out.fp);
  const double recall = out.tp + out.fn == 0 ? 0.0 : double(out.tp) / double(out.tp + out.fn);
  out.f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
  return out;
}

double oracle_contrastive_loss(const Mat& w, const Mat& z, const std::vector<std::pair<std::size_t, std::size_t>>& pos,
                               const std::vector<std::pair<std::size_t, std::size_t>>& neg, double margin) {
  auto dist = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t r = 0; r < w.size(); ++r) {
      double v = 0.0;
      for (std::size_t c = 0; c < w[r].size(); ++c) v += w[r][c] * (z[i][c] - z[j][c]);
      s += v * v;
    }
    return std::sqrt(s);
  };
  double loss = 0.0;
  for (const auto& [i, j] : pos) loss += dist(i, j);
  for (const auto& [i, j] : neg) loss += std::max(0.0, margin - dist(i, j));
  return loss;
}

}  // namespace fewie::testing
