#pragma once

// Worst-case subpopulation risk over a grid of test-time alpha0 values.

#include "mdro/datagen.hpp"
#include "mdro/io.hpp"
#include "mdro/model.hpp"
#include "mdro/risk_duals.hpp"

#include <algorithm>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdro {

struct RiskReport {
  std::vector<double> alphas;  // ascending
  std::vector<double> risks;
  std::string method;
  double mean_risk = 0.0;

  double risk_at(double alpha) const {
    for (std::size_t k = 0; k < alphas.size(); ++k)
      if (std::abs(alphas[k] - alpha) < 1e-12) return risks[k];
    throw std::out_of_range("risk report has no entry for alpha0 = " + std::to_string(alpha));
  }
};

namespace detail {

inline std::vector<double> sorted_alphas(std::vector<double> alphas) {
  if (alphas.empty()) throw std::invalid_argument("evaluation: empty alpha grid");
  for (double a : alphas)
    if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("evaluation: alpha0 values must lie in (0, 1]");
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
  return alphas;
}

inline RiskReport cvar_report(const Vector& values, std::vector<double> alphas, std::string method) {
  RiskReport report;
  report.alphas = sorted_alphas(std::move(alphas));
  report.method = std::move(method);
  report.mean_risk = values.mean();
  for (double a : report.alphas) report.risks.push_back(a == 1.0 ? report.mean_risk : cvar_dual(values, a).risk);
  return report;
}

}  // namespace detail

/// CVaR of the exact conditional risk over an evaluation sample.
inline RiskReport eval_oracle(const ParamVector& params, const RowMatrix& eval_features, SimVariant variant,
                              std::vector<double> alphas) {
  return detail::cvar_report(conditional_risks(params, eval_features, variant), std::move(alphas), "oracle");
}

/**
 * Replicate plug-in: average each row's loss over its replicate labels, then
 * CVaR over rows. With `confounder`, only rows whose C equals that value count.
 */
inline RiskReport eval_replicates(const ParamVector& params, const Dataset& data, LossKind kind,
                                  std::vector<double> alphas, std::optional<double> confounder = std::nullopt) {
  if (!data.replicates) throw std::invalid_argument("eval_replicates: dataset has no replicate labels");
  if (confounder && !data.confounder) throw std::invalid_argument("eval_replicates: dataset has no confounder column");
  const RowMatrix& reps = *data.replicates;
  const Vector pred = predictions(params, data.features);
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(data.size()));
  for (Index i = 0; i < data.size(); ++i) {
    if (confounder && std::abs((*data.confounder)(i) - *confounder) > 1e-12) continue;
    double s = 0.0;
    for (Index j = 0; j < reps.cols(); ++j) s += detail::loss_from_margin(kind, pred(i), reps(i, j));
    means.push_back(s / static_cast<double>(reps.cols()));
  }
  if (means.empty())
    throw std::invalid_argument("eval_replicates: no rows match confounder value " + std::to_string(*confounder));
  const Vector v = Eigen::Map<const Vector>(means.data(), static_cast<Index>(means.size()));
  return detail::cvar_report(v, std::move(alphas), confounder ? "replicates_c" : "replicates");
}

/// Joint-DRO style: CVaR over raw per-example losses.
inline RiskReport eval_joint(const ParamVector& params, const Dataset& data, LossKind kind,
                             std::vector<double> alphas) {
  return detail::cvar_report(losses(kind, params, data), std::move(alphas), "joint");
}

struct GroupSplitResult {
  Index column = 0;
  bool skipped = false;
  std::string reason;
  double mean_when_one = 0.0;
  double mean_when_zero = 0.0;
  double worst = 0.0;
};

/// Groups smaller than this are not reported.
inline constexpr Index kMinGroupRows = 10;

/// Worst of the two group-mean losses for each flagged 0/1 feature column.
inline std::vector<GroupSplitResult> eval_group_split(const ParamVector& params, const Dataset& data, LossKind kind,
                                                      const std::vector<Index>& columns) {
  const Vector l = losses(kind, params, data);
  std::vector<GroupSplitResult> out;
  for (Index col : columns) {
    if (col < 0 || col >= data.dim())
      throw std::invalid_argument("eval_group_split: column " + std::to_string(col) + " out of range");
    GroupSplitResult r;
    r.column = col;
    double s1 = 0, s0 = 0;
    Index n1 = 0, n0 = 0;
    for (Index i = 0; i < data.size(); ++i) {
      const double v = data.features(i, col);
      if (v == 1.0) {
        s1 += l(i);
        ++n1;
      } else if (v == 0.0) {
        s0 += l(i);
        ++n0;
      } else {
        throw std::invalid_argument("eval_group_split: column " + std::to_string(col) + " is not binary");
      }
    }
    if (n1 < kMinGroupRows || n0 < kMinGroupRows) {
      r.skipped = true;
      r.reason = "group sizes " + std::to_string(n0) + "/" + std::to_string(n1) + " below " +
                 std::to_string(kMinGroupRows) + " rows";
    } else {
      r.mean_when_one = s1 / static_cast<double>(n1);
      r.mean_when_zero = s0 / static_cast<double>(n0);
      r.worst = std::max(r.mean_when_one, r.mean_when_zero);
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// CSV rows: alpha0,risk,method
inline void write_csv(std::ostream& os, const RiskReport& report, bool header = true) {
  if (header) os << "alpha0,risk,method\n";
  for (std::size_t k = 0; k < report.alphas.size(); ++k)
    os << format_double(report.alphas[k]) << ',' << format_double(report.risks[k]) << ',' << report.method << '\n';
}

}  // namespace mdro
