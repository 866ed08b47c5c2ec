#pragma once

// Scripted simulation protocols. Each returns plot-ready tables; the command
// line tool writes one CSV per table.

#include "mdro/experiment.hpp"

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mdro {

struct Table {
  std::string name;  // file stem
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

inline void write_table(std::ostream& os, const Table& t) {
  for (std::size_t k = 0; k < t.header.size(); ++k) os << (k ? "," : "") << t.header[k];
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << r[k];
    os << '\n';
  }
}

/// Seed offsets: every sample of a protocol derives from the one seed.
inline constexpr std::uint64_t kTrainSeedOffset = 0;
inline constexpr std::uint64_t kHoldoutSeedOffset = 1000003;
inline constexpr std::uint64_t kEvalSeedOffset = 2000003;

/// Default Lipschitz-ratio grid for cross-validated marginal models.
inline const std::vector<double> kDefaultRatioGrid{1.0, 10.0, 100.0};

struct SimSamples {
  Dataset train;
  Dataset holdout;  // with replicates, for grid search
  Dataset eval;     // with replicates (confounded) or plain (oracle-scored)
};

inline SimSamples make_samples(SimVariant variant, Index n, Index d, double alpha_true, std::uint64_t seed,
                               Index holdout_n, Index holdout_m, Index eval_n, Index eval_m = 0) {
  SimSpec s{n, d, alpha_true, variant, seed + kTrainSeedOffset};
  SimSamples out;
  out.train = generate(s);
  SimSpec h{holdout_n, d, alpha_true, variant, seed + kHoldoutSeedOffset};
  out.holdout = generate_replicates(h, holdout_m);
  SimSpec e{eval_n, d, alpha_true, variant, seed + kEvalSeedOffset};
  out.eval = eval_m > 0 ? generate_replicates(e, eval_m) : generate(e);
  return out;
}

struct FittedModel {
  std::string method;
  TrainResult result;
  double ratio = 0.0;  // marginal models only
  std::optional<CvResult> cv;
};

/// Marginal model: trained directly for a single ratio, otherwise grid-searched.
inline FittedModel fit_marginal(const SimSamples& s, const ExperimentConfig& base, const std::vector<double>& grid,
                                std::optional<double> confounder = std::nullopt) {
  ExperimentConfig cfg = base;
  if (cfg.objective != "marginal_confounded") cfg.objective = "marginal";
  FittedModel m;
  m.method = cfg.objective;
  if (grid.size() == 1) {
    m.ratio = grid[0];
    m.result = fit(s.train, LossKind::absolute_deviation, cfg, grid[0]);
    return m;
  }
  CvResult cv = cross_validate(s.train, s.holdout, LossKind::absolute_deviation, cfg, grid, cfg.cv_alpha, cfg.jobs,
                               confounder);
  m.ratio = cv.best_point().ratio;
  m.result = *cv.best_point().model;
  for (auto& pt : cv.points) pt.model.reset();
  m.cv = std::move(cv);
  return m;
}

inline FittedModel fit_named(const SimSamples& s, const ExperimentConfig& base, const std::string& objective) {
  ExperimentConfig cfg = base;
  cfg.objective = objective;
  return {objective, fit(s.train, LossKind::absolute_deviation, cfg, 1.0), 0.0, std::nullopt};
}

/// Through-the-origin fits, the way the simulations are run.
inline ExperimentConfig simulation_config(ExperimentConfig cfg) {
  cfg.intercept = false;
  cfg.loss = "absolute_deviation";
  return cfg;
}

inline std::vector<double> ratio_grid(const ExperimentConfig& cfg) {
  return cfg.lipschitz_ratio ? *cfg.lipschitz_ratio : kDefaultRatioGrid;
}

inline std::string alpha_label(double a) { return "risk_" + format_double(a); }

// ---- fig_toy --------------------------------------------------------------------

struct ToyOutcome {
  FittedModel erm, joint, marginal;
  RiskReport erm_risk, joint_risk, marginal_risk;
};

inline ToyOutcome run_toy(const ExperimentConfig& base) {
  const ExperimentConfig cfg = simulation_config(base);
  const auto seed = cfg.resolved_seed();
  const SimSamples s = make_samples(SimVariant::toy_1d, cfg.n, 1, cfg.alpha_true, seed, cfg.holdout_n,
                                    cfg.holdout_m, cfg.eval_n);
  ToyOutcome o;
  o.erm = fit_named(s, cfg, "erm");
  o.joint = fit_named(s, cfg, "joint_pnorm");
  o.marginal = fit_marginal(s, cfg, ratio_grid(cfg));
  o.erm_risk = eval_oracle(o.erm.result.params, s.eval.features, SimVariant::toy_1d, cfg.alphas);
  o.joint_risk = eval_oracle(o.joint.result.params, s.eval.features, SimVariant::toy_1d, cfg.alphas);
  o.marginal_risk = eval_oracle(o.marginal.result.params, s.eval.features, SimVariant::toy_1d, cfg.alphas);
  return o;
}

inline std::vector<Table> fig_toy(const ExperimentConfig& cfg) {
  const ToyOutcome o = run_toy(cfg);
  Table t{"fig_toy", {"method", "slope", "intercept", "lipschitz_ratio"}, {}};
  for (double a : o.erm_risk.alphas) t.header.push_back(alpha_label(a));
  auto row = [&](const std::string& name, const FittedModel& m, const RiskReport& r) {
    std::vector<std::string> v{name, format_double(m.result.params.theta(0)), format_double(m.result.params.intercept),
                               m.method == "marginal" ? format_double(m.ratio) : ""};
    for (double x : r.risks) v.push_back(format_double(x));
    t.add(std::move(v));
  };
  row("erm", o.erm, o.erm_risk);
  row("joint", o.joint, o.joint_risk);
  row("marginal", o.marginal, o.marginal_risk);
  return {t};
}

// ---- fig_alpha_sweep ------------------------------------------------------------------

struct SweepOutcome {
  std::map<std::string, RiskReport> reports;  // erm, joint_cvar, joint_pnorm, marginal
  std::vector<OracleSlope> oracle;
  FittedModel marginal;
};

inline SweepOutcome run_alpha_sweep(const ExperimentConfig& base, bool with_oracle = true) {
  const ExperimentConfig cfg = simulation_config(base);
  const SimSamples s = make_samples(SimVariant::simdist, cfg.n, 1, cfg.alpha_true, cfg.resolved_seed(),
                                    cfg.holdout_n, cfg.holdout_m, cfg.eval_n);
  SweepOutcome o;
  for (const char* name : {"erm", "joint_cvar", "joint_pnorm"}) {
    const FittedModel m = fit_named(s, cfg, name);
    o.reports[name] = eval_oracle(m.result.params, s.eval.features, SimVariant::simdist, cfg.alphas);
  }
  o.marginal = fit_marginal(s, cfg, ratio_grid(cfg));
  o.reports["marginal"] = eval_oracle(o.marginal.result.params, s.eval.features, SimVariant::simdist, cfg.alphas);
  if (with_oracle) o.oracle = oracle_slopes(s.eval.features, SimVariant::simdist, cfg.alphas);
  return o;
}

inline std::vector<Table> fig_alpha_sweep(const ExperimentConfig& cfg) {
  const SweepOutcome o = run_alpha_sweep(cfg);
  Table t{"fig_alpha_sweep", {"method", "alpha0", "risk", "slope"}, {}};
  for (const auto& [name, r] : o.reports)
    for (std::size_t k = 0; k < r.alphas.size(); ++k)
      t.add({name, format_double(r.alphas[k]), format_double(r.risks[k]), ""});
  for (const auto& os : o.oracle)
    t.add({"oracle", format_double(os.alpha), format_double(os.risk), format_double(os.slope)});
  return {t};
}

// ---- fig_dimdep -----------------------------------------------------------------------

inline const std::vector<Index> kDimdepDims{1, 2, 5, 10};

inline std::vector<Table> fig_dimdep(const ExperimentConfig& base) {
  const ExperimentConfig cfg = simulation_config(base);
  Table t{"fig_dimdep", {"d", "method", "alpha0", "risk"}, {}};
  for (Index d : kDimdepDims) {
    const SimSamples s = make_samples(SimVariant::simdist, cfg.n, d, cfg.alpha_true, cfg.resolved_seed(),
                                      cfg.holdout_n, cfg.holdout_m, cfg.eval_n);
    std::vector<FittedModel> models{fit_named(s, cfg, "erm"), fit_named(s, cfg, "joint_pnorm"),
                                    fit_marginal(s, cfg, ratio_grid(cfg))};
    for (const auto& m : models) {
      const RiskReport r = eval_oracle(m.result.params, s.eval.features, SimVariant::simdist, cfg.alphas);
      for (std::size_t k = 0; k < r.alphas.size(); ++k)
        t.add({std::to_string(d), m.method, format_double(r.alphas[k]), format_double(r.risks[k])});
    }
  }
  return {t};
}

// ---- fig_lip_sensitivity ------------------------------------------------------------------

inline const std::vector<double> kSensitivityGrid{0.1, 1.0, 10.0, 100.0, 1000.0};

inline std::vector<Table> fig_lip_sensitivity(const ExperimentConfig& base) {
  ExperimentConfig cfg = simulation_config(base);
  cfg.objective = "marginal";
  const SimSamples s = make_samples(SimVariant::simdist, cfg.n, 1, cfg.alpha_true, cfg.resolved_seed(),
                                    cfg.holdout_n, cfg.holdout_m, cfg.eval_n);
  Table t{"fig_lip_sensitivity", {"lipschitz_ratio", "slope", "holdout_score", "alpha0", "risk"}, {}};
  for (double ratio : cfg.lipschitz_ratio ? *cfg.lipschitz_ratio : kSensitivityGrid) {
    const TrainResult res = fit(s.train, LossKind::absolute_deviation, cfg, ratio);
    const double score =
        eval_replicates(res.params, s.holdout, LossKind::absolute_deviation, {cfg.cv_alpha}).risks[0];
    const RiskReport r = eval_oracle(res.params, s.eval.features, SimVariant::simdist, cfg.alphas);
    for (std::size_t k = 0; k < r.alphas.size(); ++k)
      t.add({format_double(ratio), format_double(res.params.theta(0)), format_double(score), format_double(r.alphas[k]),
             format_double(r.risks[k])});
  }
  return {t};
}

// ---- fig_confounded ------------------------------------------------------------------------

/// Postulated confounding levels. Y moves by at most |c| <= 1, so delta = 1
/// matches the strongest confounder values.
inline const std::vector<double> kConfoundingLevels{0.0, 0.5, 1.0};
inline constexpr double kConfoundedTrainAlpha = 0.1;
inline constexpr double kConfoundedTestAlpha = 0.05;
inline constexpr Index kConfoundedEvalReplicates = 10;

struct ConfoundedOutcome {
  std::vector<std::string> methods;
  std::vector<double> deltas;                     // NaN for non-confounded methods
  std::vector<std::array<double, 5>> risk_by_c;   // indexed like kConfounderSupport
};

inline ConfoundedOutcome run_confounded(const ExperimentConfig& base,
                                        const std::vector<double>& levels = kConfoundingLevels,
                                        bool baselines = true) {
  ExperimentConfig cfg = simulation_config(base);
  cfg.alpha0 = kConfoundedTrainAlpha;
  const SimSamples s = make_samples(SimVariant::confounded, cfg.n, cfg.d, cfg.alpha_true, cfg.resolved_seed(),
                                    cfg.holdout_n, 1, cfg.n, kConfoundedEvalReplicates);
  const double ratio = cfg.lipschitz_ratio ? cfg.lipschitz_ratio->front() : 10.0;
  ConfoundedOutcome o;
  auto record = [&](const std::string& name, double delta, const ParamVector& params) {
    std::array<double, 5> r{};
    for (std::size_t k = 0; k < kConfounderSupport.size(); ++k)
      r[k] = eval_replicates(params, s.eval, LossKind::absolute_deviation, {kConfoundedTestAlpha},
                             kConfounderSupport[k])
                 .risks[0];
    o.methods.push_back(name);
    o.deltas.push_back(delta);
    o.risk_by_c.push_back(r);
  };
  for (double delta : levels) {
    ExperimentConfig c = cfg;
    c.objective = "marginal_confounded";
    c.delta = delta;
    record("marginal_confounded", delta, fit(s.train, LossKind::absolute_deviation, c, ratio).params);
  }
  if (baselines) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const char* name : {"erm", "joint_cvar", "joint_pnorm"}) record(name, nan, fit_named(s, cfg, name).result.params);
  }
  return o;
}

/// Worst of R(theta, -1) and R(theta, +1).
inline double worst_at_unit_confounder(const std::array<double, 5>& r) {
  static_assert(kConfounderSupport.front() == -1.0 && kConfounderSupport.back() == 1.0);
  return std::max(r.front(), r.back());
}

inline std::vector<Table> fig_confounded(const ExperimentConfig& cfg) {
  const ConfoundedOutcome o = run_confounded(cfg);
  Table t{"fig_confounded", {"method", "delta", "c", "alpha0", "risk"}, {}};
  for (std::size_t m = 0; m < o.methods.size(); ++m)
    for (std::size_t k = 0; k < kConfounderSupport.size(); ++k)
      t.add({o.methods[m], std::isnan(o.deltas[m]) ? "" : format_double(o.deltas[m]),
             format_double(kConfounderSupport[k]), format_double(kConfoundedTestAlpha),
             format_double(o.risk_by_c[m][k])});
  return {t};
}

// ---- registry ----------------------------------------------------------------------------

using Protocol = std::function<std::vector<Table>(const ExperimentConfig&)>;

inline const std::map<std::string, Protocol>& protocols() {
  static const std::map<std::string, Protocol> table{
      {"fig_alpha_sweep", fig_alpha_sweep}, {"fig_confounded", fig_confounded}, {"fig_dimdep", fig_dimdep},
      {"fig_lip_sensitivity", fig_lip_sensitivity}, {"fig_toy", fig_toy}};
  return table;
}

}  // namespace mdro
