#pragma once

// Alternative function classes for the variational bound: an RKHS ball
// (Gaussian kernel) and bounded Holder functions. Both are duals of the
// empirical inner supremum; the caller adds the explicit +eta.

#include "mdro/marginal_dro.hpp"
#include "mdro/model.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>
#include <string>

namespace mdro {

enum class KernelKind { gaussian };

struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  double bandwidth = 1.0;  // sigma
  double radius = 1.0;     // RKHS norm budget R

  void validate() const {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw std::invalid_argument("kernel bandwidth must be > 0");
    if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("kernel radius must be > 0");
  }
};

/// Symmetric kernel matrix evaluated on the sample.
class GramMatrix {
 public:
  GramMatrix() = default;
  explicit GramMatrix(RowMatrix k) : k_(std::move(k)) {
    if (k_.rows() != k_.cols()) throw std::invalid_argument("gram matrix must be square");
    for (Index i = 0; i < k_.rows(); ++i)
      for (Index j = i + 1; j < k_.cols(); ++j)
        if (k_(i, j) != k_(j, i)) throw std::invalid_argument("gram matrix must be symmetric");
  }

  Index size() const { return k_.rows(); }
  const RowMatrix& matrix() const { return k_; }
  double operator()(Index i, Index j) const { return k_(i, j); }

  /// Attempts a Cholesky factorization of K + jitter * I.
  bool is_psd(double jitter = 1e-9) const {
    Eigen::MatrixXd shifted = k_;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    return llt.info() == Eigen::Success;
  }

  double quadratic_form(const Vector& beta) const { return beta.dot(k_ * beta); }

 private:
  RowMatrix k_;
};

/// k_ij = exp(-||x_i - x_j||^2 / (2 sigma^2))
inline GramMatrix gram(const RowMatrix& features, const KernelSpec& kernel) {
  kernel.validate();
  const Index n = features.rows();
  if (n < 1) throw std::invalid_argument("gram: need at least one row");
  const double inv = 1.0 / (2.0 * kernel.bandwidth * kernel.bandwidth);
  RowMatrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      const double v = std::exp(-(features.row(i) - features.row(j)).squaredNorm() * inv);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return GramMatrix(std::move(k));
}

namespace detail {

inline double checked_quadratic(const GramMatrix& gram, const Vector& beta) {
  const double quad = gram.quadratic_form(beta);
  const double tol = 1e-9 * (1.0 + beta.squaredNorm());
  if (quad < -tol)
    throw std::domain_error("rkhs objective: beta^T K beta = " + std::to_string(quad) +
                            " < 0, gram matrix is not positive semidefinite");
  return std::max(quad, 0.0);
}

}  // namespace detail

/// (1/(alpha0 n)) sum_i (l_i - eta + beta_i)_+ + (1/n) sqrt(beta^T K beta / R)
inline double rkhs_objective(const Vector& losses, const GramMatrix& gram, double eta, const Vector& beta,
                             double alpha0, double radius) {
  const Index n = losses.size();
  if (n < 1 || gram.size() != n || beta.size() != n)
    throw std::invalid_argument("rkhs objective: losses, gram and beta sizes disagree");
  if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw std::invalid_argument("rkhs objective: alpha0 must lie in (0, 1]");
  if (!(radius > 0.0)) throw std::invalid_argument("rkhs objective: radius must be > 0");
  const double nn = static_cast<double>(n);
  double hinge = 0.0;
  for (Index i = 0; i < n; ++i) hinge += std::max(losses(i) - eta + beta(i), 0.0);
  return hinge / (alpha0 * nn) + std::sqrt(detail::checked_quadratic(gram, beta) / radius) / nn;
}

struct RkhsGradient {
  Vector loss_weights;  // d objective / d l_i
  double eta = 0.0;
  Vector beta;
};

inline RkhsGradient rkhs_gradient(const Vector& losses, const GramMatrix& gram, double eta, const Vector& beta,
                                  double alpha0, double radius) {
  const Index n = losses.size();
  const double nn = static_cast<double>(n);
  RkhsGradient g;
  g.loss_weights = Vector::Zero(n);
  for (Index i = 0; i < n; ++i)
    if (losses(i) - eta + beta(i) > 0) g.loss_weights(i) = 1.0 / (alpha0 * nn);
  g.eta = -g.loss_weights.sum();
  g.beta = g.loss_weights;
  const Vector kb = gram.matrix() * beta;
  const double quad = std::max(beta.dot(kb), 0.0);
  if (quad > 0.0) g.beta += kb / (radius * nn * std::sqrt(quad / radius));
  return g;
}

/**
 * Bounded-Holder dual:
 *   (1/(alpha0 n)) sum_i (l_i - c_i - eta)_+ + (L^(p-1)/n^2) sum_ij cost_ij B_ij.
 *
 * This class carries no eps, so the Lipschitz hyperparameter is read as L
 * itself: L^(p-1) = lipschitz_ratio^(p-1).
 */
inline double bounded_holder_objective(const Vector& losses, const PairwiseDistances& dist, double eta,
                                       const TransportPlan& plan, double alpha0, const RobustSpec& spec) {
  RobustSpec local = spec;
  local.alpha0 = alpha0;
  detail::check_marginal_inputs(losses, dist, plan, local);
  const Index n = losses.size();
  const double nn = static_cast<double>(n);
  const Vector& c = plan.adjustment();
  double hinge = 0.0;
  for (Index i = 0; i < n; ++i) hinge += std::max(losses(i) - c(i) - eta, 0.0);
  return hinge / (alpha0 * nn) + std::pow(spec.lipschitz_ratio, spec.p - 1.0) / (nn * nn) * plan.transport_cost(dist);
}

/// d objective / d (l_i - c_i): 1/(alpha0 n) on active hinges.
inline Vector bounded_holder_weights(const Vector& losses, const Vector& adjust, double eta, double alpha0) {
  const Index n = losses.size();
  Vector w = Vector::Zero(n);
  for (Index i = 0; i < n; ++i)
    if (losses(i) - adjust(i) - eta > 0) w(i) = 1.0 / (alpha0 * static_cast<double>(n));
  return w;
}

}  // namespace mdro
