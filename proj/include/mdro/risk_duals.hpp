#pragma once

// One-dimensional duals of worst-case subpopulation risk: CVaR, the joint
// p-norm bound, and the replicate plug-in estimator.

#include "mdro/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace mdro {

/**
 * Hyperparameters shared by all robust objectives.
 *
 * `lipschitz_ratio` is L/eps, the single smoothness knob. `eps` enters on its
 * own only through the floor eps^(q-1). `delta` is the postulated confounding
 * level and `loss_bound` the a-priori bound M on the loss (when unset, the
 * largest observed loss is used).
 */
struct RobustSpec {
  double alpha0 = 0.3;
  double p = 2.0;
  double lipschitz_ratio = 1.0;
  double eps = 1e-4;
  double delta = 0.0;
  std::optional<double> loss_bound;

  /// Holder conjugate p/(p-1); infinite at p = 1.
  double q() const { return p > 1.0 ? p / (p - 1.0) : std::numeric_limits<double>::infinity(); }

  /// L^(p-1) / eps with L = lipschitz_ratio * eps.
  double penalty_scale() const { return std::pow(lipschitz_ratio * eps, p - 1.0) / eps; }

  /// 2 delta^(p-1) / eps.
  double confounding_scale() const { return delta > 0.0 ? 2.0 * std::pow(delta, p - 1.0) / eps : 0.0; }

  /// eps^(q-1) = eps^(1/(p-1)).
  double floor_value() const { return std::pow(eps, 1.0 / (p - 1.0)); }

  void validate(bool allow_p_one = false) const {
    if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw std::invalid_argument("alpha0 must lie in (0, 1]");
    if (allow_p_one) {
      if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
    } else if (!(p > 1.0 && p <= 2.0)) {
      throw std::invalid_argument("p must lie in (1, 2]");
    }
    if (!(lipschitz_ratio >= 0.0) || !std::isfinite(lipschitz_ratio))
      throw std::invalid_argument("lipschitz_ratio must be finite and >= 0");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("eps must be finite and > 0");
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be finite and >= 0");
    if (loss_bound && !(*loss_bound > 0.0)) throw std::invalid_argument("loss_bound must be > 0");
  }
};

struct DualValue {
  double risk;
  double eta_star;
};

inline std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

/**
 * inf_eta (1/(alpha0 n)) sum_i (v_i - eta)_+ + eta, solved exactly.
 *
 * The minimizer is the ceil(alpha0 n)-th largest value; plugging it back in
 * gives the fractional tail average, so non-integer alpha0 n is handled
 * without rounding.
 */
inline DualValue cvar_dual(std::span<const double> values, double alpha0) {
  if (values.empty()) throw std::invalid_argument("cvar_dual: empty input");
  if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw std::invalid_argument("cvar_dual: alpha0 must lie in (0, 1]");
  const std::size_t n = values.size();
  std::vector<double> sorted(values.begin(), values.end());
  const double k = alpha0 * static_cast<double>(n);
  auto rank = static_cast<std::size_t>(std::ceil(k - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end(),
                   std::greater<>());
  const double eta = sorted[rank - 1];
  double tail = 0.0;
  for (double v : values) tail += std::max(v - eta, 0.0);
  return {eta + tail / k, eta};
}

inline DualValue cvar_dual(const Vector& values, double alpha0) { return cvar_dual(as_span(values), alpha0); }

namespace detail {

// (mean_i (v_i - eta)_+^p)^(1/p)
inline double hinge_pnorm(std::span<const double> v, double eta, double p) {
  double s = 0.0;
  for (double x : v) {
    const double h = x - eta;
    if (h > 0) s += (p == 2.0) ? h * h : std::pow(h, p);
  }
  s /= static_cast<double>(v.size());
  if (s <= 0) return 0.0;
  return (p == 2.0) ? std::sqrt(s) : std::pow(s, 1.0 / p);
}

/// Golden-section search for the minimizer of a convex function on [lo, hi].
template <class F>
std::pair<double, double> golden_section(F&& f, double lo, double hi, double tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  // endpoints may win when the minimum sits on the boundary
  double best_x = f1 <= f2 ? x1 : x2;
  double best_f = std::min(f1, f2);
  for (double x : {lo, hi}) {
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  return {best_x, best_f};
}

}  // namespace detail

/// Objective of the joint p-norm dual at a fixed eta.
inline double pnorm_dual_objective(std::span<const double> values, double alpha0, double p, double eta) {
  return detail::hinge_pnorm(values, eta, p) / alpha0 + eta;
}

/**
 * inf_eta (1/alpha0) (mean_i (v_i - eta)_+^p)^(1/p) + eta over
 * eta in [min(0, min v), max v]. For p == 1 this is exactly cvar_dual.
 */
inline DualValue pnorm_dual(std::span<const double> values, double alpha0, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("pnorm_dual: p must be >= 1");
  if (values.empty()) throw std::invalid_argument("pnorm_dual: empty input");
  if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw std::invalid_argument("pnorm_dual: alpha0 must lie in (0, 1]");
  if (p == 1.0) return cvar_dual(values, alpha0);
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = std::min(0.0, *mn), hi = *mx;
  if (hi - lo <= 0.0) return {pnorm_dual_objective(values, alpha0, p, hi), hi};
  const double tol = 1e-10 * (1.0 + std::abs(hi));
  auto [eta, risk] = detail::golden_section(
      [&](double e) { return pnorm_dual_objective(values, alpha0, p, e); }, lo, hi, tol);
  return {risk, eta};
}

inline DualValue pnorm_dual(const Vector& values, double alpha0, double p) {
  return pnorm_dual(as_span(values), alpha0, p);
}

/// Row-averages the replicated losses, then takes CVaR over rows.
inline double replicate_worst_case(const RowMatrix& replicated_losses, double alpha0) {
  if (replicated_losses.rows() < 1 || replicated_losses.cols() < 1)
    throw std::invalid_argument("replicate_worst_case: need n >= 1 rows and m >= 1 replicates");
  const Vector means = replicated_losses.rowwise().mean();
  return cvar_dual(means, alpha0).risk;
}

/// Same as above from nested rows; ragged input is rejected.
inline double replicate_worst_case(const std::vector<std::vector<double>>& rows, double alpha0) {
  if (rows.empty() || rows.front().empty())
    throw std::invalid_argument("replicate_worst_case: need n >= 1 rows and m >= 1 replicates");
  const std::size_t m = rows.front().size();
  RowMatrix mat(static_cast<Index>(rows.size()), static_cast<Index>(m));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m) throw std::invalid_argument("replicate_worst_case: ragged replicate matrix");
    for (std::size_t j = 0; j < m; ++j) mat(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return replicate_worst_case(mat, alpha0);
}

/// Default loss bound M: the user value if set, otherwise the largest loss.
inline double effective_loss_bound(const RobustSpec& spec, const Vector& losses) {
  if (spec.loss_bound) return *spec.loss_bound;
  return losses.size() ? std::max(losses.maxCoeff(), 0.0) : 0.0;
}

}  // namespace mdro
