#pragma once

// Full-batch projected subgradient training for ERM, the joint-DRO duals, the
// marginal (optionally confounded) dual and the two variational variants. For
// p = 2 the marginal plan follows a warm-started saddle-point iteration
// instead, which is far better conditioned than subgradient steps on B.

#include "mdro/datagen.hpp"
#include "mdro/marginal_dro.hpp"
#include "mdro/model.hpp"
#include "mdro/risk_duals.hpp"
#include "mdro/variational.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mdro {

enum class Objective { erm, joint_cvar, joint_pnorm, marginal, marginal_confounded, rkhs, bounded_holder };

inline std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::erm: return "erm";
    case Objective::joint_cvar: return "joint_cvar";
    case Objective::joint_pnorm: return "joint_pnorm";
    case Objective::marginal: return "marginal";
    case Objective::marginal_confounded: return "marginal_confounded";
    case Objective::rkhs: return "rkhs";
    case Objective::bounded_holder: return "bounded_holder";
  }
  return "?";
}

inline Objective parse_objective(std::string_view s) {
  for (Objective o : {Objective::erm, Objective::joint_cvar, Objective::joint_pnorm, Objective::marginal,
                      Objective::marginal_confounded, Objective::rkhs, Objective::bounded_holder})
    if (s == to_string(o)) return o;
  throw std::invalid_argument("unknown objective '" + std::string(s) + "'");
}

inline bool uses_plan(Objective o) {
  return o == Objective::marginal || o == Objective::marginal_confounded || o == Objective::bounded_holder;
}

enum class StepSchedule { constant, inv_sqrt };

inline StepSchedule parse_schedule(std::string_view s) {
  if (s == "constant") return StepSchedule::constant;
  if (s == "inv_sqrt") return StepSchedule::inv_sqrt;
  throw std::invalid_argument("unknown step schedule '" + std::string(s) + "'");
}

struct OptimizerConfig {
  int max_iters = 2000;
  double step0 = 0.1;
  StepSchedule schedule = StepSchedule::inv_sqrt;
  /// Stop when the best objective improved by less than tol (relative) over
  /// the last `tol_window` iterations. 0 disables.
  double tol = 0.0;
  int tol_window = 200;
  std::uint64_t seed = 0;
  Objective objective = Objective::marginal;
  double ridge = 0.0;
  bool fit_intercept = true;
  /// Standard deviation of the random initial theta; 0 starts at the origin.
  double init_scale = 0.0;
  /// Subgradient plan (and RKHS beta) steps are the theta step times n^2 (n)
  /// times this. Unused by the p = 2 marginal objectives.
  double plan_step_scale = 10.0;
  int exact_eta_every = 10;
  /// Use the neighbour-flow plan (LineFlow) for the marginal objective when
  /// d = 1 and p = 2. Same optimum, O(n) per step instead of O(n^2).
  bool line_flow = true;
  /// Saddle-point plan steps per theta step for the p = 2 marginal
  /// objectives. 0 picks 1 for dense plans and about 50 n / max_iters
  /// (within [5, 1000]) for line flows, whose steps are O(n).
  int plan_inner_steps = 0;
  KernelSpec kernel;

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("optimizer: max_iters must be >= 1");
    if (!(step0 > 0.0)) throw std::invalid_argument("optimizer: step0 must be > 0");
    if (!(ridge >= 0.0)) throw std::invalid_argument("optimizer: ridge must be >= 0");
    if (!(plan_step_scale > 0.0)) throw std::invalid_argument("optimizer: plan_step_scale must be > 0");
    if (plan_inner_steps < 0) throw std::invalid_argument("optimizer: plan_inner_steps must be >= 0");
  }
};

/// Thrown when the objective turns NaN or infinite.
class divergence_error : public std::runtime_error {
 public:
  divergence_error(int iteration, double value)
      : std::runtime_error("objective diverged (" + std::to_string(value) + ") at iteration " +
                           std::to_string(iteration)),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// Larger line-flow fits do not materialize the dense plan in TrainResult.
inline constexpr Index kLinePlanExportRows = 5000;

struct TrainResult {
  ParamVector params;          // best iterate
  double eta = 0.0;            // eta of the best iterate
  double objective = 0.0;      // best objective value
  std::vector<double> trace;   // best-so-far objective after each iteration
  int iterations = 0;
  std::optional<TransportPlan> plan;  // final plan for plan-based objectives
};

/// Minimizing eta of the joint p-norm dual (p = 1 gives the CVaR quantile).
inline double optimal_eta_exact(const Vector& losses, double alpha0, double p) {
  return pnorm_dual(losses, alpha0, p).eta_star;
}

/// eps such that the floor eps^(q-1) / alpha0 equals 1e-3 * mean_loss.
inline double default_eps(double mean_loss, double alpha0, double p) {
  const double floor = std::max(1e-3 * alpha0 * mean_loss, 1e-12);
  return std::pow(floor, p - 1.0);
}

namespace detail {

struct ObjectiveEval {
  double value = 0.0;
  Vector loss_weights;     // d objective / d l_i
  double eta_grad = 0.0;
  Vector plan_weights;     // w in the plan gradient w_l - w_k (already scaled)
  double plan_cost_coeff = 0.0;
  double plan_mass_coeff = 0.0;
  bool plan_active = false;
  Vector beta_grad;
};

class Trainer {
 public:
  Trainer(const Dataset& data, LossKind kind, const RobustSpec& spec, const OptimizerConfig& opt)
      : data_(data), kind_(kind), spec_(spec), opt_(opt), n_(data.size()), nn_(static_cast<double>(n_)) {
    data.validate();
    opt.validate();
    if (!trainable(kind)) throw unsupported_error("train: zero_one loss is evaluation-only");
    const bool plan_based = uses_plan(opt.objective);
    spec.validate(/*allow_p_one=*/!plan_based || opt.objective == Objective::bounded_holder);
    if (opt.objective == Objective::bounded_holder && !(spec.p > 1.0 && spec.p <= 2.0))
      throw std::invalid_argument("bounded_holder requires p in (1, 2]");
    params_ = ParamVector(data.dim());
    if (opt.init_scale > 0.0) {
      Rng rng(opt.seed, 0x1417);
      for (Index k = 0; k < params_.dim(); ++k) params_.theta(k) = opt.init_scale * rng.normal();
    }
    line_mode_ = opt.line_flow && opt.objective == Objective::marginal && LineFlow::applicable(data.features, spec);
    if (line_mode_) {
      line_ = LineFlow(data.features);
    } else if (plan_based) {
      dist_ = PairwiseDistances(data.features, spec.p - 1.0);
      plan_ = TransportPlan(n_);
    }
    saddle_mode_ = spec.p == 2.0 &&
                   (opt.objective == Objective::marginal || opt.objective == Objective::marginal_confounded);
    if (saddle_mode_) {
      saddle_ = line_mode_ ? PlanSaddle(n_, PlanSaddle::line_norm(), kLineBalance * nn_)
                           : PlanSaddle(n_, PlanSaddle::dense_norm(n_), kDenseBalance * nn_);
      inner_steps_ = opt.plan_inner_steps > 0 ? opt.plan_inner_steps
                     : line_mode_ ? std::clamp(static_cast<int>(std::ceil(50.0 * nn_ / opt.max_iters)), 5, 1000)
                                  : 1;
    }
    if (opt.objective == Objective::rkhs) {
      gram_ = gram(data.features, opt.kernel);
      beta_ = Vector::Zero(n_);
    }
  }

  TrainResult run() {
    TrainResult result;
    result.trace.reserve(static_cast<std::size_t>(opt_.max_iters));
    double best = std::numeric_limits<double>::infinity();
    double bound = 0.0;
    const bool joint = opt_.objective == Objective::joint_cvar || opt_.objective == Objective::joint_pnorm;
    const double joint_p = opt_.objective == Objective::joint_cvar ? 1.0 : spec_.p;
    const bool marginal_kind =
        opt_.objective == Objective::marginal || opt_.objective == Objective::marginal_confounded;
    for (int t = 1; t <= opt_.max_iters; ++t) {
      const Vector l = losses(kind_, params_, data_);
      bound = spec_.loss_bound ? *spec_.loss_bound : std::max(bound, l.maxCoeff());
      if (joint && opt_.exact_eta_every > 0 && (t - 1) % opt_.exact_eta_every == 0)
        eta_ = std::clamp(optimal_eta_exact(l, spec_.alpha0, joint_p), 0.0, bound);
      if (marginal_kind && opt_.exact_eta_every > 0 && (t - 1) % opt_.exact_eta_every == 0) eta_ = marginal_eta(l, bound);
      ObjectiveEval ev = evaluate(l);
      // The primal hinge direction is noise once the plan absorbs most of the
      // tail; the saddle dual is the stable estimate of the same weights.
      if (saddle_mode_ && ev.plan_active) {
        ev.loss_weights = -saddle_.dual() / spec_.alpha0;
        ev.eta_grad = 1.0 - ev.loss_weights.sum();
      }
      if (opt_.ridge > 0.0) ev.value += opt_.ridge * params_.theta.squaredNorm();
      if (!std::isfinite(ev.value)) throw divergence_error(t, ev.value);
      if (ev.value < best) {
        best = ev.value;
        result.params = params_;
        result.eta = eta_;
      }
      result.trace.push_back(best);
      result.iterations = t;

      const double step = opt_.schedule == StepSchedule::inv_sqrt ? opt_.step0 / std::sqrt(static_cast<double>(t))
                                                                  : opt_.step0;
      Vector g = weighted_loss_gradient(kind_, params_, data_, ev.loss_weights);
      g.head(params_.dim()) += 2.0 * opt_.ridge * params_.theta;
      params_.theta -= step * g.head(params_.dim());
      if (opt_.fit_intercept) params_.intercept -= step * g(params_.dim());
      if (opt_.objective != Objective::erm) eta_ = std::clamp(eta_ - step * ev.eta_grad, 0.0, bound);
      if (saddle_mode_) {
        plan_saddle_steps(losses(kind_, params_, data_));
      } else if (ev.plan_active && line_mode_) {
        line_.descend(ev.loss_weights, step * opt_.plan_step_scale, ev.plan_cost_coeff * nn_);
      } else if (ev.plan_active) {
        sums_ = plan_.descend(ev.plan_weights, step * opt_.plan_step_scale * nn_ * nn_, dist_.cost(),
                              ev.plan_cost_coeff, ev.plan_mass_coeff);
      }
      if (opt_.objective == Objective::rkhs) beta_ -= step * opt_.plan_step_scale * nn_ * ev.beta_grad;

      if (!params_.finite()) throw divergence_error(t, std::numeric_limits<double>::quiet_NaN());
      if (opt_.tol > 0.0 && t > opt_.tol_window) {
        const double before = result.trace[static_cast<std::size_t>(t - 1 - opt_.tol_window)];
        if (before - best <= opt_.tol * std::abs(best)) break;
      }
    }
    result.objective = best;
    if (line_mode_) {
      if (n_ <= kLinePlanExportRows) result.plan = line_.to_plan();
    } else if (uses_plan(opt_.objective)) {
      result.plan = std::move(plan_);
    }
    return result;
  }

 private:
  // The dual is convex in eta with (theta, B) fixed, and each evaluation is
  // O(n), far cheaper than a plan step.
  double marginal_eta(const Vector& l, double bound) const {
    const bool confounded = opt_.objective == Objective::marginal_confounded;
    const double kappa = spec_.penalty_scale() / (nn_ * nn_);
    const double kappa_c = confounded ? spec_.confounding_scale() / (nn_ * nn_) : 0.0;
    const Vector& adj = line_mode_ ? line_.adjustment() : plan_.adjustment();
    const double fixed = kappa * (line_mode_ ? line_.transport_cost() : sums_.cost) + kappa_c * sums_.mass;
    auto f = [&](double e) {
      return floored_surrogate(detail::hinge_block(l, adj, e, spec_.p).value + fixed, e, spec_);
    };
    if (bound <= 0.0) return 0.0;
    return detail::golden_section(f, 0.0, bound, 1e-9 * (1.0 + bound)).first;
  }

  // Plan steps at the updated (theta, eta). The floor does not matter here:
  // it only caps the objective from below.
  void plan_saddle_steps(const Vector& l) {
    const bool confounded = opt_.objective == Objective::marginal_confounded;
    const double kappa = spec_.penalty_scale() / (nn_ * nn_);
    const double kappa_c = confounded ? spec_.confounding_scale() / (nn_ * nn_) : 0.0;
    const Vector a = l.array() - eta_;
    for (int k = 0; k < inner_steps_; ++k) {
      if (line_mode_) {
        saddle_.step(a, line_.adjustment(), [&](const Vector& w, double tau) -> const Vector& {
          line_.descend(w, tau, kappa * nn_);
          return line_.adjustment();
        });
      } else {
        saddle_.step(a, plan_.adjustment(), [&](const Vector& w, double tau) -> const Vector& {
          sums_ = plan_.descend(w / nn_, tau, dist_.cost(), kappa, kappa_c);
          return plan_.adjustment();
        });
      }
    }
  }

  ObjectiveEval evaluate(const Vector& l) {
    ObjectiveEval ev;
    const double inv_alpha = 1.0 / spec_.alpha0;
    switch (opt_.objective) {
      case Objective::erm: {
        ev.value = l.mean();
        ev.loss_weights = Vector::Constant(n_, 1.0 / nn_);
        break;
      }
      case Objective::joint_cvar: {
        ev.loss_weights = Vector::Zero(n_);
        double tail = 0.0;
        for (Index i = 0; i < n_; ++i)
          if (l(i) > eta_) {
            tail += l(i) - eta_;
            ev.loss_weights(i) = inv_alpha / nn_;
          }
        ev.value = inv_alpha * tail / nn_ + eta_;
        ev.eta_grad = 1.0 - ev.loss_weights.sum();
        break;
      }
      case Objective::joint_pnorm: {
        const double p = spec_.p;
        const double norm = detail::hinge_pnorm(as_span(l), eta_, p);
        ev.value = inv_alpha * norm + eta_;
        ev.loss_weights = Vector::Zero(n_);
        if (norm > 0.0) {
          const double denom = nn_ * std::pow(norm, p - 1.0);
          for (Index i = 0; i < n_; ++i)
            if (l(i) > eta_) ev.loss_weights(i) = inv_alpha * std::pow(l(i) - eta_, p - 1.0) / denom;
        }
        ev.eta_grad = 1.0 - ev.loss_weights.sum();
        break;
      }
      case Objective::marginal:
      case Objective::marginal_confounded: {
        const bool confounded = opt_.objective == Objective::marginal_confounded;
        const double kappa = spec_.penalty_scale() / (nn_ * nn_);
        const double kappa_c = confounded ? spec_.confounding_scale() / (nn_ * nn_) : 0.0;
        const auto block = detail::hinge_block(l, line_mode_ ? line_.adjustment() : plan_.adjustment(), eta_, spec_.p);
        const double cost = line_mode_ ? line_.transport_cost() : sums_.cost;
        const double raw = block.value + kappa * cost + kappa_c * sums_.mass;
        ev.value = floored_surrogate(raw, eta_, spec_);
        if (raw < spec_.floor_value()) {
          ev.loss_weights = Vector::Zero(n_);
          ev.eta_grad = 1.0;
        } else {
          ev.loss_weights = inv_alpha * block.weights;
          ev.eta_grad = 1.0 - ev.loss_weights.sum();
          ev.plan_weights = ev.loss_weights / nn_;
          ev.plan_cost_coeff = inv_alpha * kappa;
          ev.plan_mass_coeff = inv_alpha * kappa_c;
          ev.plan_active = true;
        }
        break;
      }
      case Objective::rkhs: {
        ev.value = rkhs_objective(l, gram_, eta_, beta_, spec_.alpha0, opt_.kernel.radius) + eta_;
        auto g = rkhs_gradient(l, gram_, eta_, beta_, spec_.alpha0, opt_.kernel.radius);
        ev.loss_weights = std::move(g.loss_weights);
        ev.eta_grad = 1.0 + g.eta;
        ev.beta_grad = std::move(g.beta);
        break;
      }
      case Objective::bounded_holder: {
        const double coeff = std::pow(spec_.lipschitz_ratio, spec_.p - 1.0) / (nn_ * nn_);
        ev.loss_weights = bounded_holder_weights(l, plan_.adjustment(), eta_, spec_.alpha0);
        double hinge = 0.0;
        for (Index i = 0; i < n_; ++i) hinge += std::max(l(i) - plan_.adjustment()(i) - eta_, 0.0);
        ev.value = hinge * inv_alpha / nn_ + coeff * sums_.cost + eta_;
        ev.eta_grad = 1.0 - ev.loss_weights.sum();
        ev.plan_weights = ev.loss_weights / nn_;
        ev.plan_cost_coeff = coeff;
        ev.plan_active = true;
        break;
      }
    }
    return ev;
  }

  const Dataset& data_;
  LossKind kind_;
  RobustSpec spec_;
  OptimizerConfig opt_;
  Index n_;
  double nn_;
  ParamVector params_;
  double eta_ = 0.0;
  PairwiseDistances dist_;
  TransportPlan plan_;
  TransportPlan::StepSums sums_;
  bool line_mode_ = false;
  LineFlow line_;
  bool saddle_mode_ = false;
  PlanSaddle saddle_;
  int inner_steps_ = 0;
  GramMatrix gram_;
  Vector beta_;
};

}  // namespace detail

/**
 * Trains theta (and internally eta, B or beta) by projected subgradient
 * descent. Eta is clipped to [0, M] and B to the nonnegative orthant after
 * every step; the best iterate is returned. With p = 2 the marginal plan
 * takes PlanSaddle steps between theta steps.
 */
inline TrainResult train(const Dataset& data, LossKind kind, const RobustSpec& spec, const OptimizerConfig& opt) {
  detail::Trainer trainer(data, kind, spec, opt);
  return trainer.run();
}

}  // namespace mdro
