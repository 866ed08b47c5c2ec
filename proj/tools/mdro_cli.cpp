// mdro: data generation, training, evaluation, grid search and simulation
// protocols for marginal distributionally robust regression.
//
// Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or I/O error.

#include "mdro/mdro.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

namespace {

using namespace mdro;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommandLine {
  std::string config_path;
  std::map<std::string, std::string> flags;  // key -> raw value, only when given
};

void add_config_flags(CLI::App* sub, CommandLine& cl) {
  sub->add_option("--config", cl.config_path, "flat key=value config file");
  for (const auto& key : config_keys()) {
    sub->add_option_function<std::string>(
        "--" + key, [&cl, key](const std::string& v) { cl.flags[key] = v; }, "overrides '" + key + "'");
  }
}

ExperimentConfig load_config(const CommandLine& cl) {
  ConfigMap file_values;
  if (!cl.config_path.empty()) file_values = read_config(cl.config_path);
  ConfigMap flag_values(cl.flags.begin(), cl.flags.end());
  return make_config(file_values, flag_values);
}

/// Writes to `path`, or to stdout when it is empty.
template <class Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  fn(f);
  if (!f) throw io_error("write to '" + path + "' failed");
}

LossKind loss_of(const ExperimentConfig& cfg) {
  try {
    return parse_loss_kind(cfg.loss);
  } catch (const std::invalid_argument& e) {
    throw usage_error(e.what());
  }
}

SimSpec sim_spec_of(const ExperimentConfig& cfg, Index n, std::uint64_t seed) {
  SimSpec s;
  s.n = n;
  s.d = cfg.d;
  s.alpha_true = cfg.alpha_true;
  s.variant = parse_sim_variant(cfg.variant);
  s.seed = seed;
  s.validate();
  return s;
}

double single_ratio(const ExperimentConfig& cfg) {
  if (!cfg.lipschitz_ratio) return 10.0;
  if (cfg.lipschitz_ratio->size() != 1) throw usage_error("train takes one lipschitz_ratio; use 'cv' for a grid");
  return cfg.lipschitz_ratio->front();
}

// ---- gen --------------------------------------------------------------------

int cmd_gen(const ExperimentConfig& cfg) {
  const SimSpec s = sim_spec_of(cfg, cfg.n, cfg.resolved_seed());
  const Dataset data = cfg.m > 0 ? generate_replicates(s, cfg.m) : generate(s);
  with_output(cfg.out_csv, [&](std::ostream& os) { write_dataset_csv(os, data); });
  return kExitOk;
}

// ---- train ------------------------------------------------------------------

void write_trace(const std::string& path, const TrainResult& res) {
  with_output(path, [&](std::ostream& os) {
    for (std::size_t t = 0; t < res.trace.size(); ++t)
      os << nlohmann::json{{"iter", t + 1}, {"objective", res.trace[t]}}.dump() << '\n';
    nlohmann::json done{{"done", true},
                        {"iterations", res.iterations},
                        {"objective", res.objective},
                        {"eta", res.eta},
                        {"intercept", res.params.intercept}};
    done["theta"] = std::vector<double>(res.params.theta.data(), res.params.theta.data() + res.params.dim());
    os << done.dump() << '\n';
  });
}

int cmd_train(const ExperimentConfig& cfg) {
  if (cfg.in_csv.empty()) throw usage_error("train: in_csv is required");
  const LossKind kind = loss_of(cfg);
  const Dataset data = prepare_labels(read_dataset_csv(cfg.in_csv), kind);
  const TrainResult res = fit(data, kind, cfg, single_ratio(cfg));
  const std::string model_path = cfg.model.empty() ? "model.txt" : cfg.model;
  write_model(model_path, res.params);
  write_trace(cfg.trace.empty() ? model_path + ".trace.jsonl" : cfg.trace, res);
  std::cerr << "trained " << cfg.objective << " in " << res.iterations << " iterations, objective "
            << format_double(res.objective) << " -> " << model_path << '\n';
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

Dataset eval_data(const ExperimentConfig& cfg, bool need_replicates) {
  if (!cfg.in_csv.empty()) return read_dataset_csv(cfg.in_csv);
  const SimSpec s = sim_spec_of(cfg, cfg.eval_n, cfg.resolved_seed() + kEvalSeedOffset);
  return need_replicates ? generate_replicates(s, cfg.holdout_m) : generate(s);
}

int cmd_eval(const ExperimentConfig& cfg) {
  if (cfg.model.empty()) throw usage_error("eval: model is required");
  const ParamVector params = read_model(cfg.model);
  const LossKind kind = loss_of(cfg);
  const std::string& mode = cfg.mode;

  if (mode == "oracle") {
    const SimVariant variant = parse_sim_variant(cfg.variant);
    if (variant == SimVariant::confounded)
      throw unsupported_error("eval: oracle mode is unsupported for the confounded variant; use mode=replicates");
    const Dataset data = eval_data(cfg, false);
    if (data.dim() != params.dim()) throw usage_error("eval: model dimension does not match data");
    const RiskReport r = eval_oracle(params, data.features, variant, cfg.alphas);
    with_output(cfg.out_csv, [&](std::ostream& os) { write_csv(os, r); });
  } else if (mode == "replicates" || mode == "joint") {
    const Dataset data = prepare_labels(eval_data(cfg, mode == "replicates"), kind);
    if (data.dim() != params.dim()) throw usage_error("eval: model dimension does not match data");
    const RiskReport r = mode == "joint" ? eval_joint(params, data, kind, cfg.alphas)
                                         : eval_replicates(params, data, kind, cfg.alphas, cfg.confounder);
    with_output(cfg.out_csv, [&](std::ostream& os) { write_csv(os, r); });
  } else if (mode == "groups") {
    if (cfg.binary_cols.empty()) throw usage_error("eval: groups mode needs binary_cols");
    const Dataset data = prepare_labels(eval_data(cfg, false), kind);
    const auto res = eval_group_split(params, data, kind, cfg.binary_cols);
    with_output(cfg.out_csv, [&](std::ostream& os) {
      os << "column,mean_when_zero,mean_when_one,worst,note\n";
      for (const auto& g : res) {
        os << g.column << ',';
        if (g.skipped)
          os << ",,," << g.reason << '\n';
        else
          os << format_double(g.mean_when_zero) << ',' << format_double(g.mean_when_one) << ','
             << format_double(g.worst) << ",\n";
      }
    });
  } else {
    throw usage_error("eval: unknown mode '" + mode + "' (oracle, replicates, joint, groups)");
  }
  return kExitOk;
}

// ---- cv ---------------------------------------------------------------------

int cmd_cv(const ExperimentConfig& base) {
  ExperimentConfig cfg = base;
  const LossKind kind = loss_of(cfg);
  Dataset train_data, holdout;
  if (!cfg.in_csv.empty()) {
    if (cfg.holdout_csv.empty()) throw usage_error("cv: in_csv needs a holdout_csv with y_rep columns");
    train_data = prepare_labels(read_dataset_csv(cfg.in_csv), kind);
    holdout = prepare_labels(read_dataset_csv(cfg.holdout_csv), kind);
  } else {
    const auto seed = cfg.resolved_seed();
    train_data = generate(sim_spec_of(cfg, cfg.n, seed + kTrainSeedOffset));
    holdout = generate_replicates(sim_spec_of(cfg, cfg.holdout_n, seed + kHoldoutSeedOffset), cfg.holdout_m);
  }
  const std::vector<double> grid = cfg.lipschitz_ratio ? *cfg.lipschitz_ratio : kDefaultRatioGrid;
  const CvResult cv = cross_validate(train_data, holdout, kind, cfg, grid, cfg.cv_alpha, cfg.jobs, cfg.confounder);
  with_output(cfg.out_csv, [&](std::ostream& os) {
    os << "lipschitz_ratio,score,status\n";
    for (const auto& pt : cv.points)
      os << format_double(pt.ratio) << ',' << (pt.ok ? format_double(pt.score) : "") << ','
         << (pt.ok ? "ok" : "failed") << '\n';
  });
  for (const auto& pt : cv.points)
    if (!pt.ok) std::cerr << "ratio " << format_double(pt.ratio) << " failed: " << pt.error << '\n';
  const CvPoint& best = cv.best_point();
  std::cerr << "best lipschitz_ratio=" << format_double(best.ratio) << " score=" << format_double(best.score) << '\n';
  if (!cfg.model.empty()) write_model(cfg.model, best.model->params);
  return kExitOk;
}

// ---- repro ------------------------------------------------------------------

std::string valid_figures() {
  std::string s;
  for (const auto& [name, fn] : protocols()) s += (s.empty() ? "" : ", ") + name;
  return s;
}

int cmd_repro(const ExperimentConfig& cfg) {
  if (cfg.figure.empty()) throw usage_error("repro: figure id required; valid ids: " + valid_figures());
  const auto it = protocols().find(cfg.figure);
  if (it == protocols().end())
    throw usage_error("repro: unknown figure '" + cfg.figure + "'; valid ids: " + valid_figures());
  std::filesystem::create_directories(cfg.out_dir);
  for (const Table& t : it->second(cfg)) {
    const std::string path = (std::filesystem::path(cfg.out_dir) / (t.name + ".csv")).string();
    with_output(path, [&](std::ostream& os) { write_table(os, t); });
    std::cerr << "wrote " << path << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marginal distributionally robust regression: generate, train, evaluate, grid-search, reproduce"};
  app.require_subcommand(1);
  std::map<std::string, CommandLine> lines;
  std::string figure_arg;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"gen", "write a synthetic dataset as CSV"},
      {"train", "fit a model and write it with a JSON-lines trace"},
      {"eval", "worst-case risk over a grid of alpha0 values"},
      {"cv", "grid search over lipschitz_ratio scored on held-out replicates"},
      {"repro", "run a simulation protocol and write one CSV per panel"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_config_flags(sub, lines[name]);
    if (name == "repro") sub->add_option("figure_id", figure_arg, "protocol id");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    std::string name;
    for (const auto* sub : app.get_subcommands()) name = sub->get_name();
    CommandLine& cl = lines[name];
    if (!figure_arg.empty()) cl.flags.emplace("figure", figure_arg);
    const ExperimentConfig cfg = load_config(cl);
    if (name == "gen") return cmd_gen(cfg);
    if (name == "train") return cmd_train(cfg);
    if (name == "eval") return cmd_eval(cfg);
    if (name == "cv") return cmd_cv(cfg);
    if (name == "repro") return cmd_repro(cfg);
    return kExitUsage;
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const unsupported_error& e) {
    std::cerr << "unsupported: " << e.what() << '\n';
    return kExitUsage;
  } catch (const divergence_error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitRuntime;
  }
}
