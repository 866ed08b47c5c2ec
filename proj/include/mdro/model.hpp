#pragma once

// Data containers and pointwise losses shared by every robust objective.

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mdro {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when an operation is asked for something it does not support
/// (e.g. a subgradient of the 0-1 loss).
class unsupported_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/**
 * Training or evaluation sample.
 *
 * `features` is n x d, `labels` has n entries. Replicates hold m repeated
 * labels per row (same covariates, fresh conditional draws). `group` is the
 * latent membership indicator, kept for diagnostics only, and `confounder`
 * the unobserved C column of the confounded simulation.
 */
struct Dataset {
  RowMatrix features;
  Vector labels;
  std::optional<RowMatrix> replicates;
  std::optional<Vector> group;
  std::optional<Vector> confounder;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }

  void validate() const {
    const Index n = features.rows();
    if (n < 1) throw std::invalid_argument("dataset: need at least one row");
    if (features.cols() < 1) throw std::invalid_argument("dataset: need at least one feature column");
    if (labels.size() != n) throw std::invalid_argument("dataset: label count does not match row count");
    if (!features.allFinite() || !labels.allFinite())
      throw std::invalid_argument("dataset: non-finite feature or label");
    if (replicates) {
      if (replicates->rows() != n) throw std::invalid_argument("dataset: replicate rows do not match row count");
      if (replicates->cols() < 1) throw std::invalid_argument("dataset: replicate matrix has no columns");
      if (!replicates->allFinite()) throw std::invalid_argument("dataset: non-finite replicate");
    }
    if (group) {
      if (group->size() != n) throw std::invalid_argument("dataset: group column length mismatch");
      for (Index i = 0; i < n; ++i)
        if ((*group)(i) != 0.0 && (*group)(i) != 1.0)
          throw std::invalid_argument("dataset: group column must be 0/1");
    }
    if (confounder) {
      if (confounder->size() != n) throw std::invalid_argument("dataset: confounder column length mismatch");
      if (!confounder->allFinite()) throw std::invalid_argument("dataset: non-finite confounder");
    }
  }
};

/// Linear predictor theta^T x + intercept. The intercept is never regularized.
struct ParamVector {
  Vector theta;
  double intercept = 0.0;

  ParamVector() = default;
  explicit ParamVector(Index d) : theta(Vector::Zero(d)) {}
  ParamVector(Vector t, double b) : theta(std::move(t)), intercept(b) {}

  Index dim() const { return theta.size(); }

  template <class Derived>
  double predict(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != theta.size())
      throw std::invalid_argument("predict: feature dimension " + std::to_string(x.size()) +
                                  " does not match parameter dimension " + std::to_string(theta.size()));
    double s = intercept;
    for (Index k = 0; k < theta.size(); ++k) s += theta(k) * x(k);
    return s;
  }

  bool finite() const { return theta.allFinite() && std::isfinite(intercept); }
};

enum class LossKind { absolute_deviation, logistic, zero_one };

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::absolute_deviation: return "absolute_deviation";
    case LossKind::logistic: return "logistic";
    case LossKind::zero_one: return "zero_one";
  }
  return "?";
}

inline LossKind parse_loss_kind(std::string_view s) {
  if (s == "absolute_deviation" || s == "absolute" || s == "l1") return LossKind::absolute_deviation;
  if (s == "logistic") return LossKind::logistic;
  if (s == "zero_one" || s == "01") return LossKind::zero_one;
  throw std::invalid_argument("unknown loss kind '" + std::string(s) + "'");
}

inline bool trainable(LossKind k) { return k != LossKind::zero_one; }

namespace detail {

// log(1 + exp(-m)) without overflow.
inline double log1p_exp_neg(double m) {
  return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

// 1 / (1 + exp(m))
inline double sigmoid_neg(double m) {
  if (m >= 0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

inline double loss_from_margin(LossKind kind, double pred, double y) {
  switch (kind) {
    case LossKind::absolute_deviation: return std::abs(pred - y);
    case LossKind::logistic: return log1p_exp_neg(y * pred);
    case LossKind::zero_one: return (y * pred > 0.0) ? 0.0 : 1.0;
  }
  return 0.0;
}

// d loss / d pred
inline double loss_slope(LossKind kind, double pred, double y) {
  switch (kind) {
    case LossKind::absolute_deviation: {
      const double r = pred - y;
      return r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0);
    }
    case LossKind::logistic: return -y * sigmoid_neg(y * pred);
    case LossKind::zero_one: throw unsupported_error("zero_one loss has no useful subgradient");
  }
  return 0.0;
}

}  // namespace detail

template <class Derived>
double loss_value(LossKind kind, const ParamVector& params, const Eigen::MatrixBase<Derived>& x, double y) {
  return detail::loss_from_margin(kind, params.predict(x), y);
}

/// Subgradient with respect to (theta, intercept); the last entry is the
/// intercept component. At the absolute-loss kink the zero element is chosen.
template <class Derived>
Vector loss_subgradient(LossKind kind, const ParamVector& params, const Eigen::MatrixBase<Derived>& x, double y) {
  if (!trainable(kind)) throw unsupported_error("zero_one loss has no useful subgradient");
  const double slope = detail::loss_slope(kind, params.predict(x), y);
  Vector g(params.dim() + 1);
  for (Index k = 0; k < params.dim(); ++k) g(k) = slope * x(k);
  g(params.dim()) = slope;
  return g;
}

inline Vector predictions(const ParamVector& params, const RowMatrix& features) {
  if (features.cols() != params.dim())
    throw std::invalid_argument("predictions: feature dimension " + std::to_string(features.cols()) +
                                " does not match parameter dimension " + std::to_string(params.dim()));
  return (features * params.theta).array() + params.intercept;
}

/// Per-example losses for every row of `features`.
inline Vector losses(LossKind kind, const ParamVector& params, const RowMatrix& features, const Vector& labels) {
  if (labels.size() != features.rows()) throw std::invalid_argument("losses: label count mismatch");
  const Vector pred = predictions(params, features);
  Vector out(pred.size());
  for (Index i = 0; i < pred.size(); ++i) out(i) = detail::loss_from_margin(kind, pred(i), labels(i));
  return out;
}

inline Vector losses(LossKind kind, const ParamVector& params, const Dataset& data) {
  return losses(kind, params, data.features, data.labels);
}

/// Per-example derivative of the loss with respect to the prediction.
inline Vector loss_slopes(LossKind kind, const ParamVector& params, const RowMatrix& features, const Vector& labels) {
  if (!trainable(kind)) throw unsupported_error("zero_one loss has no useful subgradient");
  const Vector pred = predictions(params, features);
  Vector out(pred.size());
  for (Index i = 0; i < pred.size(); ++i) out(i) = detail::loss_slope(kind, pred(i), labels(i));
  return out;
}

/// Sum_i weights_i * subgradient_i, laid out as (theta, intercept).
inline Vector weighted_loss_gradient(LossKind kind, const ParamVector& params, const Dataset& data,
                                     const Vector& weights) {
  const Vector slopes = loss_slopes(kind, params, data.features, data.labels);
  const Vector coeff = slopes.cwiseProduct(weights);
  Vector g(params.dim() + 1);
  g.head(params.dim()) = data.features.transpose() * coeff;
  g(params.dim()) = coeff.sum();
  return g;
}

}  // namespace mdro
