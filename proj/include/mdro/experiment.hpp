#pragma once

// Experiment plumbing shared by the command-line tool and the acceptance
// harness: flat config, model fitting from a config, replicate-scored grid
// search over the Lipschitz ratio, and the 1-d oracle slope search.

#include "mdro/datagen.hpp"
#include "mdro/evaluation.hpp"
#include "mdro/io.hpp"
#include "mdro/optimizer.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace mdro {

/// Raised for bad command input: unknown keys, malformed values.
class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string objective = "marginal";
  std::string loss = "absolute_deviation";
  double alpha0 = 0.3;
  double p = 2.0;
  std::optional<std::vector<double>> lipschitz_ratio;  // grid allowed
  std::optional<double> eps;                           // default_eps() when unset
  double delta = 0.0;
  Index n = 2000;
  Index d = 1;
  std::optional<std::uint64_t> seed;
  int iters = 300;
  std::optional<double> step0;  // default_step0() when unset
  double ridge = 0.0;
  std::string in_csv, out_csv;
  std::vector<double> alphas{0.05, 0.1, 0.15, 0.3, 0.5, 1.0};

  std::string variant = "simdist";
  double alpha_true = 0.15;
  Index m = 0;  // replicate columns written by gen
  std::string model;
  std::string mode = "oracle";
  std::optional<double> confounder;
  std::string trace;
  int jobs = 1;
  bool intercept = true;
  std::string out_dir = ".";
  std::string figure;
  std::vector<Index> binary_cols;
  double cv_alpha = 0.05;
  std::string holdout_csv;
  Index holdout_n = 1000;
  Index holdout_m = 100;
  Index eval_n = 20000;
  std::string schedule = "inv_sqrt";
  double plan_step_scale = 10.0;
  double tol = 0.0;
  double bandwidth = 1.0;
  double radius = 1.0;

  std::uint64_t resolved_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("DRO_SEED")) {
      try {
        return std::stoull(env);
      } catch (const std::exception&) {
        throw usage_error("DRO_SEED='" + std::string(env) + "' is not an unsigned integer");
      }
    }
    return 0;
  }
};

namespace detail {

inline double config_double(const std::string& key, const std::string& v) {
  try {
    return parse_double(v, key);
  } catch (const io_error& e) {
    throw usage_error(e.what());
  }
}

inline long long config_int(const std::string& key, const std::string& v, long long lo) {
  const double x = config_double(key, v);
  if (x != std::floor(x) || x < static_cast<double>(lo) || x > 9.0e15)
    throw usage_error(key + " must be an integer >= " + std::to_string(lo) + ", got '" + v + "'");
  return static_cast<long long>(x);
}

inline bool config_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw usage_error(key + " must be true/false, got '" + v + "'");
}

inline std::vector<double> config_list(const std::string& key, const std::string& v) {
  try {
    return parse_double_list(v, key);
  } catch (const io_error& e) {
    throw usage_error(e.what());
  }
}

}  // namespace detail

inline const std::set<std::string, std::less<>>& config_keys() {
  static const std::set<std::string, std::less<>> keys{
      "objective", "loss",  "alpha0",    "p",          "lipschitz_ratio", "eps",         "delta",
      "n",         "d",     "seed",      "iters",      "step0",           "ridge",       "in_csv",
      "out_csv",   "alphas", "variant",  "alpha_true", "m",               "model",       "mode",
      "confounder", "trace", "jobs",     "intercept",  "out_dir",         "figure",      "binary_cols",
      "cv_alpha",  "holdout_csv", "holdout_n", "holdout_m", "eval_n",     "schedule",    "plan_step_scale",
      "tol",       "bandwidth", "radius"};
  return keys;
}

/// Applies every entry of `values` on top of `cfg`. Unknown keys are rejected.
inline void apply_config(ExperimentConfig& cfg, const ConfigMap& values) {
  using namespace detail;
  for (const auto& [key, v] : values) {
    if (!config_keys().count(key)) throw usage_error("unknown config key '" + key + "'");
    if (key == "objective") cfg.objective = v;
    else if (key == "loss") cfg.loss = v;
    else if (key == "alpha0") cfg.alpha0 = config_double(key, v);
    else if (key == "p") cfg.p = config_double(key, v);
    else if (key == "lipschitz_ratio") cfg.lipschitz_ratio = config_list(key, v);
    else if (key == "eps") cfg.eps = config_double(key, v);
    else if (key == "delta") cfg.delta = config_double(key, v);
    else if (key == "n") cfg.n = config_int(key, v, 1);
    else if (key == "d") cfg.d = config_int(key, v, 1);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(config_int(key, v, 0));
    else if (key == "iters") cfg.iters = static_cast<int>(config_int(key, v, 1));
    else if (key == "step0") cfg.step0 = config_double(key, v);
    else if (key == "ridge") cfg.ridge = config_double(key, v);
    else if (key == "in_csv") cfg.in_csv = v;
    else if (key == "out_csv") cfg.out_csv = v;
    else if (key == "alphas") cfg.alphas = config_list(key, v);
    else if (key == "variant") cfg.variant = v;
    else if (key == "alpha_true") cfg.alpha_true = config_double(key, v);
    else if (key == "m") cfg.m = config_int(key, v, 0);
    else if (key == "model") cfg.model = v;
    else if (key == "mode") cfg.mode = v;
    else if (key == "confounder") cfg.confounder = config_double(key, v);
    else if (key == "trace") cfg.trace = v;
    else if (key == "jobs") cfg.jobs = static_cast<int>(config_int(key, v, 1));
    else if (key == "intercept") cfg.intercept = config_bool(key, v);
    else if (key == "out_dir") cfg.out_dir = v;
    else if (key == "figure") cfg.figure = v;
    else if (key == "binary_cols") {
      cfg.binary_cols.clear();
      for (double c : config_list(key, v)) {
        if (c < 0 || c != std::floor(c)) throw usage_error("binary_cols entries must be column indices");
        cfg.binary_cols.push_back(static_cast<Index>(c));
      }
    } else if (key == "cv_alpha") cfg.cv_alpha = config_double(key, v);
    else if (key == "holdout_csv") cfg.holdout_csv = v;
    else if (key == "holdout_n") cfg.holdout_n = config_int(key, v, 1);
    else if (key == "holdout_m") cfg.holdout_m = config_int(key, v, 1);
    else if (key == "eval_n") cfg.eval_n = config_int(key, v, 1);
    else if (key == "schedule") cfg.schedule = v;
    else if (key == "plan_step_scale") cfg.plan_step_scale = config_double(key, v);
    else if (key == "tol") cfg.tol = config_double(key, v);
    else if (key == "bandwidth") cfg.bandwidth = config_double(key, v);
    else if (key == "radius") cfg.radius = config_double(key, v);
  }
}

/// File values first, then flag values on top.
inline ExperimentConfig make_config(const ConfigMap& file_values, const ConfigMap& flag_values) {
  ExperimentConfig cfg;
  apply_config(cfg, file_values);
  apply_config(cfg, flag_values);
  return cfg;
}

// ---- fitting ------------------------------------------------------------------

inline double zero_model_mean_loss(LossKind kind, const Dataset& data) {
  return losses(kind, ParamVector(data.dim()), data).mean();
}

inline RobustSpec robust_spec_for(const ExperimentConfig& cfg, LossKind kind, const Dataset& train_data,
                                  double ratio) {
  RobustSpec spec;
  spec.alpha0 = cfg.alpha0;
  spec.p = cfg.p;
  spec.lipschitz_ratio = ratio;
  spec.delta = cfg.delta;
  spec.eps = cfg.eps ? *cfg.eps : default_eps(zero_model_mean_loss(kind, train_data), cfg.alpha0, cfg.p);
  return spec;
}

/// The variational variants couple their beta / plan step to the theta step
/// and need it small; the rest reach their optimum within 300 iterations at 1.
inline double default_step0(Objective o) {
  return o == Objective::rkhs || o == Objective::bounded_holder ? 0.1 : 1.0;
}

inline OptimizerConfig optimizer_for(const ExperimentConfig& cfg) {
  OptimizerConfig opt;
  opt.objective = parse_objective(cfg.objective);
  opt.max_iters = cfg.iters;
  opt.step0 = cfg.step0 ? *cfg.step0 : default_step0(opt.objective);
  opt.schedule = parse_schedule(cfg.schedule);
  opt.ridge = cfg.ridge;
  opt.fit_intercept = cfg.intercept;
  opt.plan_step_scale = cfg.plan_step_scale;
  opt.tol = cfg.tol;
  opt.seed = cfg.resolved_seed();
  opt.kernel.bandwidth = cfg.bandwidth;
  opt.kernel.radius = cfg.radius;
  return opt;
}

/// Classification losses train on {-1, +1} labels.
inline Dataset prepare_labels(Dataset data, LossKind kind) {
  if (kind != LossKind::absolute_deviation) {
    data.labels = to_signed_labels(data.labels);
    if (data.replicates)
      for (Index j = 0; j < data.replicates->cols(); ++j) {
        Vector col = data.replicates->col(j);
        data.replicates->col(j) = to_signed_labels(col);
      }
  }
  return data;
}

inline TrainResult fit(const Dataset& train_data, LossKind kind, const ExperimentConfig& cfg, double ratio) {
  return train(train_data, kind, robust_spec_for(cfg, kind, train_data, ratio), optimizer_for(cfg));
}

// ---- grid search ----------------------------------------------------------------

struct CvPoint {
  double ratio = 0.0;
  double score = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string error;
  std::optional<TrainResult> model;
};

struct CvResult {
  std::vector<CvPoint> points;  // ascending ratio
  std::size_t best = 0;

  const CvPoint& best_point() const { return points.at(best); }
};

/**
 * Trains one model per ratio and scores it by the replicate plug-in at
 * `score_alpha` on `holdout`. Ties go to the smaller ratio. Failures are kept
 * in the table; only an all-failed grid throws.
 */
inline CvResult cross_validate(const Dataset& train_data, const Dataset& holdout, LossKind kind,
                               const ExperimentConfig& cfg, std::vector<double> grid, double score_alpha,
                               int jobs = 1, std::optional<double> confounder = std::nullopt) {
  if (grid.empty()) throw usage_error("cv: lipschitz_ratio grid is empty");
  if (!holdout.replicates) throw usage_error("cv: holdout set needs replicate labels");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  CvResult out;
  out.points.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) out.points[k].ratio = grid[k];

  auto run_point = [&](std::size_t k) {
    CvPoint& pt = out.points[k];
    try {
      TrainResult res = fit(train_data, kind, cfg, pt.ratio);
      const double s = eval_replicates(res.params, holdout, kind, {score_alpha}, confounder).risks[0];
      if (!std::isfinite(s)) throw divergence_error(res.iterations, s);
      pt.score = s;
      pt.ok = true;
      pt.model = std::move(res);
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), grid.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < grid.size(); ++k) run_point(k);
  } else {
    std::size_t next = 0;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t k;
          {
            std::lock_guard lock(mu);
            if (next >= grid.size()) return;
            k = next++;
          }
          run_point(k);
        }
      });
    for (auto& t : pool) t.join();
  }

  bool any = false;
  for (std::size_t k = 0; k < out.points.size(); ++k) {
    if (!out.points[k].ok) continue;
    if (!any || out.points[k].score < out.points[out.best].score) out.best = k;
    any = true;
  }
  if (!any) {
    std::string msg = "cv: every grid point failed";
    for (const auto& pt : out.points) msg += "; ratio " + format_double(pt.ratio) + ": " + pt.error;
    throw std::runtime_error(msg);
  }
  return out;
}

// ---- oracle slope search ----------------------------------------------------------

struct OracleSlope {
  double alpha = 0.0;
  double slope = 0.0;
  double risk = 0.0;
};

/// Best through-the-origin slope per alpha0 on a uniform grid, scored by the
/// exact conditional risk (1-d problems).
inline std::vector<OracleSlope> oracle_slopes(const RowMatrix& eval_features, SimVariant variant,
                                              const std::vector<double>& alphas, double lo = -1.0, double hi = 2.0,
                                              double step = 0.005) {
  if (eval_features.cols() != 1) throw std::invalid_argument("oracle_slopes: needs one feature column");
  std::vector<OracleSlope> best;
  for (double a : detail::sorted_alphas(alphas)) best.push_back({a, 0.0, std::numeric_limits<double>::infinity()});
  const int steps = static_cast<int>(std::lround((hi - lo) / step));
  for (int k = 0; k <= steps; ++k) {
    ParamVector params(1);
    params.theta(0) = lo + step * k;
    std::vector<double> as;
    for (const auto& b : best) as.push_back(b.alpha);
    const RiskReport r = eval_oracle(params, eval_features, variant, as);
    for (std::size_t j = 0; j < best.size(); ++j)
      if (r.risks[j] < best[j].risk) best[j] = {best[j].alpha, params.theta(0), r.risks[j]};
  }
  return best;
}

}  // namespace mdro
