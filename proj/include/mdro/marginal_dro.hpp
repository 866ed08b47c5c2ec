#pragma once

// Lp-Holder marginal DRO dual: hinge block on transport-adjusted losses plus a
// distance-weighted transport penalty, its confounded extension, the
// eps-floored surrogate, and subgradients of all three.

#include "mdro/model.hpp"
#include "mdro/risk_duals.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdro {

/// Plans above this many rows cost 8 n^2 bytes each and trigger a warning.
inline constexpr Index kDensePlanWarnRows = 20000;

/**
 * Pairwise transport costs ||x_i - x_j||^exponent (Euclidean base norm).
 *
 * Only the powered matrix is stored; `base(i, j)` undoes the power on demand.
 */
class PairwiseDistances {
 public:
  PairwiseDistances() = default;

  PairwiseDistances(const RowMatrix& features, double exponent) : exponent_(exponent) {
    check_exponent(exponent);
    const Index n = features.rows();
    cost_.resize(n, n);
    for (Index i = 0; i < n; ++i) {
      cost_(i, i) = 0.0;
      for (Index j = i + 1; j < n; ++j) {
        const double dist = (features.row(i) - features.row(j)).norm();
        const double c = raise(dist);
        cost_(i, j) = c;
        cost_(j, i) = c;
      }
    }
  }

  /// Builds from an explicit matrix of base distances (symmetric, zero diagonal, >= 0).
  static PairwiseDistances from_base(const RowMatrix& base, double exponent) {
    check_exponent(exponent);
    if (base.rows() != base.cols()) throw std::invalid_argument("distances: matrix must be square");
    const Index n = base.rows();
    PairwiseDistances out;
    out.exponent_ = exponent;
    out.cost_.resize(n, n);
    for (Index i = 0; i < n; ++i) {
      if (base(i, i) != 0.0) throw std::invalid_argument("distances: diagonal must be zero");
      for (Index j = 0; j < n; ++j) {
        if (!(base(i, j) >= 0.0) || !std::isfinite(base(i, j)))
          throw std::invalid_argument("distances: entries must be finite and >= 0");
        if (base(i, j) != base(j, i)) throw std::invalid_argument("distances: matrix must be symmetric");
        out.cost_(i, j) = out.raise(base(i, j));
      }
    }
    return out;
  }

  Index size() const { return cost_.rows(); }
  double exponent() const { return exponent_; }
  const RowMatrix& cost() const { return cost_; }
  double cost(Index i, Index j) const { return cost_(i, j); }
  double base(Index i, Index j) const {
    return exponent_ == 1.0 ? cost_(i, j) : std::pow(cost_(i, j), 1.0 / exponent_);
  }

 private:
  static void check_exponent(double e) {
    if (!(e > 0.0 && e <= 1.0)) throw std::invalid_argument("distances: exponent p-1 must lie in (0, 1]");
  }
  double raise(double d) const { return exponent_ == 1.0 ? d : std::pow(d, exponent_); }

  RowMatrix cost_;
  double exponent_ = 1.0;
};

/// Distances matching the dual exponent of `spec` (power p - 1).
inline PairwiseDistances distances_for(const RowMatrix& features, const RobustSpec& spec) {
  return PairwiseDistances(features, spec.p - 1.0);
}

/**
 * Nonnegative n x n transport plan B with the cached loss adjustment
 * c_i = (1/n) sum_j (B_ij - B_ji). The adjustments always sum to zero.
 */
class TransportPlan {
 public:
  TransportPlan() = default;
  explicit TransportPlan(Index n) : b_(RowMatrix::Zero(n, n)), adjust_(Vector::Zero(n)) {
    if (n >= kDensePlanWarnRows)
      std::cerr << "warning: dense transport plan with n = " << n << " uses "
                << (8.0 * static_cast<double>(n) * static_cast<double>(n) / 1e9) << " GB\n";
  }
  explicit TransportPlan(RowMatrix b) : b_(std::move(b)) {
    if (b_.rows() != b_.cols()) throw std::invalid_argument("transport plan must be square");
    for (Index i = 0; i < b_.rows(); ++i)
      for (Index j = 0; j < b_.cols(); ++j)
        if (!(b_(i, j) >= 0.0) || !std::isfinite(b_(i, j)))
          throw std::invalid_argument("transport plan entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                      ") is negative or non-finite");
    refresh_adjustment();
  }

  Index size() const { return b_.rows(); }
  const RowMatrix& matrix() const { return b_; }
  double operator()(Index i, Index j) const { return b_(i, j); }
  const Vector& adjustment() const { return adjust_; }
  double total_mass() const { return b_.sum(); }

  /// sum_ij cost_ij B_ij
  double transport_cost(const PairwiseDistances& dist) const {
    if (dist.size() != size()) throw std::invalid_argument("transport plan / distance size mismatch");
    return dist.cost().cwiseProduct(b_).sum();
  }

  struct StepSums {
    double cost = 0.0;  // sum_ij cost_ij B_ij after the step
    double mass = 0.0;  // sum_ij B_ij after the step
  };

  /**
   * Projected step B_kl <- max(0, B_kl - step * G_kl) for gradients of the form
   * G_kl = w_l - w_k + cost_coeff * cost_kl + mass_coeff, done in one pass that
   * also refreshes the adjustment cache. The diagonal is pinned at zero since
   * self-transport never changes the adjustment.
   */
  StepSums descend(const Vector& w, double step, const RowMatrix& cost, double cost_coeff, double mass_coeff) {
    const Index n = size();
    Vector col = Vector::Zero(n);
    Vector row_sum(n);
    StepSums sums;
    const Eigen::RowVectorXd wt = w.transpose();
    for (Index i = 0; i < n; ++i) {
      auto bi = b_.row(i);
      const double shift = -w(i) + mass_coeff;
      if (cost_coeff != 0.0) {
        bi = (bi.array() - step * (wt.array() + shift + cost_coeff * cost.row(i).array())).cwiseMax(0.0);
      } else {
        bi = (bi.array() - step * (wt.array() + shift)).cwiseMax(0.0);
      }
      bi(i) = 0.0;
      row_sum(i) = bi.sum();
      col += bi.transpose();
      sums.cost += cost.row(i).dot(bi);
    }
    sums.mass = row_sum.sum();
    adjust_ = (row_sum - col) / static_cast<double>(n);
    return sums;
  }

  void assign(const TransportPlan& other) {
    b_ = other.b_;
    adjust_ = other.adjust_;
  }

 private:
  void refresh_adjustment() {
    const double n = static_cast<double>(b_.rows());
    adjust_ = (b_.rowwise().sum() - b_.colwise().sum().transpose()) / n;
  }

  RowMatrix b_;
  Vector adjust_;
};

/**
 * Plan restricted to neighbour moves along a single sorted feature. With d = 1
 * and p = 2 the cost |x_i - x_j| is additive along the line, so routing any
 * plan through neighbours keeps its adjustment and never raises its cost: the
 * infimum over B is the infimum over these n - 1 flows. flow(k) is the net
 * mass, divided by n, moved from the k-th to the (k+1)-th smallest point.
 */
class LineFlow {
 public:
  LineFlow() = default;
  explicit LineFlow(const RowMatrix& features) {
    if (features.cols() != 1) throw std::invalid_argument("LineFlow: needs exactly one feature column");
    const Index n = features.rows();
    order_.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order_[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order_.begin(), order_.end(),
                     [&](Index a, Index b) { return features(a, 0) < features(b, 0); });
    gap_ = Vector::Zero(std::max<Index>(n - 1, 0));
    for (Index k = 0; k + 1 < n; ++k) gap_(k) = features(at(k + 1), 0) - features(at(k), 0);
    flow_ = Vector::Zero(gap_.size());
    adjust_ = Vector::Zero(n);
  }

  static bool applicable(const RowMatrix& features, const RobustSpec& spec) {
    return features.cols() == 1 && spec.p == 2.0;
  }

  Index size() const { return static_cast<Index>(order_.size()); }
  const Vector& flow() const { return flow_; }
  const Vector& adjustment() const { return adjust_; }

  /// sum_ij |x_i - x_j| B_ij of the equivalent plan.
  double transport_cost() const {
    return static_cast<double>(size()) * gap_.cwiseProduct(flow_.cwiseAbs()).sum();
  }

  /**
   * Proximal step on flow for an objective whose derivative in the adjustment
   * is -w, plus cost_coeff * sum_k gap_k |flow_k| handled exactly by soft
   * thresholding.
   */
  void descend(const Vector& w, double step, double cost_coeff) {
    for (Index k = 0; k < flow_.size(); ++k) {
      const double v = flow_(k) - step * (w(at(k + 1)) - w(at(k)));
      const double t = step * cost_coeff * gap_(k);
      flow_(k) = v > t ? v - t : (v < -t ? v + t : 0.0);
    }
    refresh();
  }

  TransportPlan to_plan() const {
    const Index n = size();
    RowMatrix b = RowMatrix::Zero(n, n);
    const double nn = static_cast<double>(n);
    for (Index k = 0; k < flow_.size(); ++k) {
      if (flow_(k) > 0) b(at(k), at(k + 1)) = nn * flow_(k);
      else if (flow_(k) < 0) b(at(k + 1), at(k)) = -nn * flow_(k);
    }
    return TransportPlan(std::move(b));
  }

 private:
  Index at(Index k) const { return order_[static_cast<std::size_t>(k)]; }

  void refresh() {
    const Index n = size();
    for (Index k = 0; k < n; ++k)
      adjust_(at(k)) = (k + 1 < n ? flow_(k) : 0.0) - (k > 0 ? flow_(k - 1) : 0.0);
  }

  std::vector<Index> order_;
  Vector gap_, flow_, adjust_;
};

/// Primal/dual step ratios (times n) of PlanSaddle, tuned on the toy sample.
inline constexpr double kLineBalance = 3.0;
inline constexpr double kDenseBalance = 30.0;

/**
 * Chambolle-Pock iterate for the p = 2 plan problem
 *
 *   inf_B  n^(-1/2) ||(a - c(B))_+|| + G(B),   a = l - eta,
 *
 * where c(B) is the adjustment and G collects the cost and mass terms with the
 * B >= 0 constraint. The dual variable lives in {y <= 0, ||y|| <= n^(-1/2)}
 * and -y converges to the hinge weights. The primal half is the caller's
 * proximal step, so the same iterate drives dense plans and line flows.
 */
class PlanSaddle {
 public:
  PlanSaddle() = default;
  /// op_norm bounds ||c(.)||; balance is the primal/dual step ratio.
  PlanSaddle(Index n, double op_norm, double balance)
      : y_(Vector::Zero(n)), cbar_(Vector::Zero(n)), tau_(balance / op_norm), sigma_(1.0 / (balance * op_norm)),
        rho_(1.0 / std::sqrt(static_cast<double>(n))) {
    if (!(op_norm > 0.0 && balance > 0.0)) throw std::invalid_argument("PlanSaddle: step parameters must be > 0");
  }

  /// Two-point bounds on the adjustment operator norm.
  static double dense_norm(Index n) { return 2.0 / std::sqrt(static_cast<double>(n)); }
  static double line_norm() { return 2.0; }

  /**
   * One iteration. `c` is the current adjustment; `prox(w, tau)` must take the
   * proximal step B <- prox_{tau G}(B - tau * K^T(-w)) and return the new
   * adjustment.
   */
  template <class Prox>
  void step(const Vector& a, const Vector& c, Prox&& prox) {
    y_ = (y_ + sigma_ * (cbar_ - a)).cwiseMin(0.0);
    const double norm = y_.norm();
    if (norm > rho_) y_ *= rho_ / norm;
    const Vector before = c;
    const Vector& after = prox(Vector(-y_), tau_);
    cbar_ = 2.0 * after - before;
  }

  const Vector& dual() const { return y_; }
  double tau() const { return tau_; }

 private:
  Vector y_, cbar_;
  double tau_ = 0.0, sigma_ = 0.0, rho_ = 0.0;
};

/// Optimization variables of the robust training problem.
struct DualState {
  ParamVector params;
  double eta = 0.0;
  TransportPlan plan;
};

namespace detail {

inline void check_marginal_inputs(const Vector& losses, const PairwiseDistances& dist, const TransportPlan& plan,
                                  const RobustSpec& spec) {
  spec.validate();
  const Index n = losses.size();
  if (n < 1) throw std::invalid_argument("marginal objective: empty loss vector");
  if (dist.size() != n || plan.size() != n)
    throw std::invalid_argument("marginal objective: losses (" + std::to_string(n) + "), distances (" +
                                std::to_string(dist.size()) + ") and plan (" + std::to_string(plan.size()) +
                                ") sizes disagree");
  if (std::abs(dist.exponent() - (spec.p - 1.0)) > 1e-12)
    throw std::invalid_argument("marginal objective: distance exponent must equal p - 1");
}

/// Hinge block ((p-1)/n sum_i (l_i - c_i - eta)_+^p)^(1/p) together with its
/// partial derivatives with respect to each adjusted loss.
struct HingeBlock {
  double value = 0.0;
  Vector weights;  // d value / d (l_i - c_i)
};

inline HingeBlock hinge_block(const Vector& losses, const Vector& adjust, double eta, double p) {
  const Index n = losses.size();
  const double scale = (p - 1.0) / static_cast<double>(n);
  HingeBlock out;
  out.weights = Vector::Zero(n);
  double s = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double h = losses(i) - adjust(i) - eta;
    if (h > 0) s += (p == 2.0) ? h * h : std::pow(h, p);
  }
  s *= scale;
  if (s <= 0.0) return out;
  out.value = (p == 2.0) ? std::sqrt(s) : std::pow(s, 1.0 / p);
  const double denom = (p == 2.0) ? out.value : std::pow(out.value, p - 1.0);
  for (Index i = 0; i < n; ++i) {
    const double h = losses(i) - adjust(i) - eta;
    if (h > 0) out.weights(i) = scale * ((p == 2.0) ? h : std::pow(h, p - 1.0)) / denom;
  }
  return out;
}

}  // namespace detail

/// Empirical Lp-Holder dual at fixed (eta, B).
inline double marginal_objective(const Vector& losses, const PairwiseDistances& dist, double eta,
                                 const TransportPlan& plan, const RobustSpec& spec) {
  detail::check_marginal_inputs(losses, dist, plan, spec);
  const double n = static_cast<double>(losses.size());
  const double hinge = detail::hinge_block(losses, plan.adjustment(), eta, spec.p).value;
  return hinge + spec.penalty_scale() / (n * n) * plan.transport_cost(dist);
}

/// Marginal objective plus the confounding term (2 delta^(p-1) / (eps n^2)) sum_ij |B_ij|.
inline double confounded_objective(const Vector& losses, const PairwiseDistances& dist, double eta,
                                   const TransportPlan& plan, const RobustSpec& spec) {
  const double base = marginal_objective(losses, dist, eta, plan, spec);
  const double n = static_cast<double>(losses.size());
  return base + spec.confounding_scale() / (n * n) * plan.total_mass();
}

inline double dual_objective(const Vector& losses, const PairwiseDistances& dist, double eta,
                             const TransportPlan& plan, const RobustSpec& spec, bool confounded) {
  return confounded ? confounded_objective(losses, dist, eta, plan, spec)
                    : marginal_objective(losses, dist, eta, plan, spec);
}

/// (1/alpha0) max(objective, eps^(q-1)) + eta
inline double floored_surrogate(double objective, double eta, const RobustSpec& spec) {
  return std::max(objective, spec.floor_value()) / spec.alpha0 + eta;
}

inline double robust_surrogate(const DualState& state, const Dataset& data, LossKind kind, const RobustSpec& spec,
                               bool confounded, const PairwiseDistances& dist) {
  const Vector l = losses(kind, state.params, data);
  return floored_surrogate(dual_objective(l, dist, state.eta, state.plan, spec, confounded), state.eta, spec);
}

inline double robust_surrogate(const DualState& state, const Dataset& data, LossKind kind, const RobustSpec& spec,
                               bool confounded) {
  return robust_surrogate(state, data, kind, spec, confounded, distances_for(data.features, spec));
}

struct SurrogateSubgradient {
  Vector theta;     // d entries followed by the intercept component
  double eta = 0.0;
  RowMatrix plan;   // n x n
  bool floor_active = false;
};

/**
 * Subgradient of robust_surrogate. When the floor eps^(q-1) is the active
 * branch only the explicit +eta contributes.
 */
inline SurrogateSubgradient subgradient(const DualState& state, const Dataset& data, LossKind kind,
                                        const RobustSpec& spec, bool confounded, const PairwiseDistances& dist) {
  if (!trainable(kind)) throw unsupported_error("subgradient: zero_one loss is evaluation-only");
  const Vector l = losses(kind, state.params, data);
  detail::check_marginal_inputs(l, dist, state.plan, spec);
  const Index n = l.size();
  const double nn = static_cast<double>(n);
  const double kappa = spec.penalty_scale() / (nn * nn);
  const double kappa_c = confounded ? spec.confounding_scale() / (nn * nn) : 0.0;

  const auto block = detail::hinge_block(l, state.plan.adjustment(), state.eta, spec.p);
  const double objective =
      block.value + kappa * state.plan.transport_cost(dist) + kappa_c * state.plan.total_mass();

  SurrogateSubgradient g;
  g.theta = Vector::Zero(data.dim() + 1);
  g.plan = RowMatrix::Zero(n, n);
  g.eta = 1.0;
  if (objective < spec.floor_value()) {
    g.floor_active = true;
    return g;
  }
  const double inv_alpha = 1.0 / spec.alpha0;
  g.theta = inv_alpha * weighted_loss_gradient(kind, state.params, data, block.weights);
  g.eta = 1.0 - inv_alpha * block.weights.sum();
  const RowMatrix& cost = dist.cost();
  for (Index k = 0; k < n; ++k)
    for (Index m = 0; m < n; ++m)
      g.plan(k, m) = inv_alpha * ((block.weights(m) - block.weights(k)) / nn + kappa * cost(k, m) + kappa_c);
  return g;
}

inline SurrogateSubgradient subgradient(const DualState& state, const Dataset& data, LossKind kind,
                                        const RobustSpec& spec, bool confounded) {
  return subgradient(state, data, kind, spec, confounded, distances_for(data.features, spec));
}

/**
 * Brute-force value of the primal problem behind the marginal dual:
 *
 *   sup (1/(eps n)) sum_i h_i (l_i - eta)  over h >= 0,
 *       h_i - h_j <= L^(p-1) ||x_i - x_j||^(p-1),  (mean h^q)^(1/q) <= eps.
 *
 * Writing h = t u with u on the probability simplex, the best t for each
 * direction is closed-form, and the resulting function of u is quasi-concave,
 * so a zooming grid over the simplex converges to the supremum. Exponential in
 * n; limited to n <= 6.
 */
inline double primal_inner_sup(const Vector& losses, const PairwiseDistances& dist, double eta,
                               const RobustSpec& spec) {
  spec.validate();
  const Index n = losses.size();
  if (n < 1) throw std::invalid_argument("primal_inner_sup: empty loss vector");
  if (n > 6) throw std::invalid_argument("primal_inner_sup: n = " + std::to_string(n) + " exceeds the brute-force limit 6");
  if (dist.size() != n) throw std::invalid_argument("primal_inner_sup: distance size mismatch");

  const Vector a = losses.array() - eta;
  if (a.maxCoeff() <= 0.0) return 0.0;
  const double kappa = spec.penalty_scale();
  const double q = spec.q();
  const double nn = static_cast<double>(n);

  std::vector<double> u(static_cast<std::size_t>(n));
  auto value = [&]() {
    double au = 0.0;
    for (Index i = 0; i < n; ++i) au += u[i] * a(i);
    if (au <= 0.0) return 0.0;
    double mq = 0.0;
    for (Index i = 0; i < n; ++i) mq += std::pow(u[i], q);
    double t = 1.0 / std::pow(mq / nn, 1.0 / q);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        const double diff = u[i] - u[j];
        if (diff > 0.0) t = std::min(t, kappa * dist.cost(i, j) / diff);
      }
    return t * au / nn;
  };

  if (n == 1) {
    u[0] = 1.0;
    return value();
  }

  const Index dims = n - 1;
  const int grid = n == 2 ? 201 : n == 3 ? 61 : n == 4 ? 25 : n == 5 ? 13 : 9;
  std::vector<double> center(static_cast<std::size_t>(dims), 0.5);
  double half = 0.5;
  double best = 0.0;
  std::vector<double> best_u(center);
  std::vector<int> idx(static_cast<std::size_t>(dims));
  for (int level = 0; level < 80 && half > 1e-13; ++level) {
    std::fill(idx.begin(), idx.end(), 0);
    std::vector<double> lo(static_cast<std::size_t>(dims)), step(static_cast<std::size_t>(dims));
    for (Index k = 0; k < dims; ++k) {
      const double l0 = std::max(0.0, center[k] - half), h0 = std::min(1.0, center[k] + half);
      lo[k] = l0;
      step[k] = (h0 - l0) / (grid - 1);
    }
    while (true) {
      double used = 0.0;
      for (Index k = 0; k < dims; ++k) {
        u[k] = lo[k] + step[k] * idx[k];
        used += u[k];
      }
      if (used <= 1.0 + 1e-15) {
        u[dims] = std::max(0.0, 1.0 - used);
        const double v = value();
        if (v > best) {
          best = v;
          std::copy(u.begin(), u.begin() + dims, best_u.begin());
        }
      }
      Index k = 0;
      while (k < dims && ++idx[k] == grid) idx[k++] = 0;
      if (k == dims) break;
    }
    center = best_u;
    half *= 0.5;
  }
  return best;
}

struct PlanSolution {
  double value = 0.0;
  TransportPlan plan;
};

struct PlanSolverOptions {
  int iters = 10000;
  double step0 = 1.0;
  /// Primal/dual step ratio of the p = 2 saddle iteration, relative to n.
  double balance = kDenseBalance;
  /// Use projected subgradient steps for p = 2 as well.
  bool subgradient = false;
};

/**
 * inf over B >= 0 of the (optionally confounded) dual objective at fixed
 * losses and eta. For p = 2 this runs the PlanSaddle iteration unless
 * opt.subgradient is set; other p use projected subgradient descent with step step0 * scale * n^2 / sqrt(t),
 * where scale is the largest |l_i - eta|. Returns the best iterate.
 */
inline PlanSolution minimize_plan(const Vector& losses, const PairwiseDistances& dist, double eta,
                                  const RobustSpec& spec, bool confounded = false, PlanSolverOptions opt = {}) {
  const Index n = losses.size();
  TransportPlan plan(n);
  detail::check_marginal_inputs(losses, dist, plan, spec);
  const double nn = static_cast<double>(n);
  const double kappa = spec.penalty_scale() / (nn * nn);
  const double kappa_c = confounded ? spec.confounding_scale() / (nn * nn) : 0.0;
  const double scale = std::max((losses.array() - eta).abs().maxCoeff(), 1e-12);

  PlanSolution best;
  best.plan = TransportPlan(n);
  auto block = detail::hinge_block(losses, plan.adjustment(), eta, spec.p);
  best.value = block.value;
  TransportPlan::StepSums sums;
  auto track = [&] {
    block = detail::hinge_block(losses, plan.adjustment(), eta, spec.p);
    const double value = block.value + kappa * sums.cost + kappa_c * sums.mass;
    if (value < best.value) {
      best.value = value;
      best.plan.assign(plan);
    }
  };
  if (spec.p == 2.0 && !opt.subgradient) {
    const Vector a = losses.array() - eta;
    PlanSaddle saddle(n, PlanSaddle::dense_norm(n), opt.balance * nn);
    auto prox = [&](const Vector& w, double tau) -> const Vector& {
      sums = plan.descend(w / nn, tau, dist.cost(), kappa, kappa_c);
      return plan.adjustment();
    };
    for (int t = 1; t <= opt.iters; ++t) {
      saddle.step(a, plan.adjustment(), prox);
      track();
    }
    return best;
  }
  for (int t = 1; t <= opt.iters; ++t) {
    const double step = opt.step0 * scale * nn * nn / std::sqrt(static_cast<double>(t));
    sums = plan.descend(block.weights / nn, step, dist.cost(), kappa, kappa_c);
    track();
  }
  return best;
}

/// inf over (eta in [0, M], B >= 0) of the floored surrogate at fixed losses.
inline DualValue minimize_surrogate(const Vector& losses, const PairwiseDistances& dist, const RobustSpec& spec,
                                    bool confounded = false, PlanSolverOptions opt = {}) {
  const double upper = effective_loss_bound(spec, losses);
  auto f = [&](double eta) {
    return floored_surrogate(minimize_plan(losses, dist, eta, spec, confounded, opt).value, eta, spec);
  };
  if (upper <= 0.0) return {f(0.0), 0.0};
  auto [eta, risk] = detail::golden_section(f, 0.0, upper, 1e-7 * (1.0 + upper));
  return {risk, eta};
}

}  // namespace mdro
