#pragma once

// Seeded generators for the synthetic mixture-shift problems and their exact
// conditional risks.
//
// Randomness comes from std::mt19937_64 (its output sequence is fixed by the
// standard) with uniform and normal transforms written out here, because the
// standard distributions are implementation-defined. Each column draws from
// its own stream: seed and stream id are mixed with SplitMix64.

#include "mdro/model.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mdro {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL))) {}

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double prob) { return uniform() < prob; }
  /// Box-Muller, one draw per call.
  double normal() {
    const double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

enum class SimVariant { toy_1d, simdist, confounded };

inline std::string_view to_string(SimVariant v) {
  switch (v) {
    case SimVariant::toy_1d: return "toy_1d";
    case SimVariant::simdist: return "simdist";
    case SimVariant::confounded: return "confounded";
  }
  return "?";
}

inline SimVariant parse_sim_variant(std::string_view s) {
  if (s == "toy_1d" || s == "toy") return SimVariant::toy_1d;
  if (s == "simdist") return SimVariant::simdist;
  if (s == "confounded") return SimVariant::confounded;
  throw std::invalid_argument("unknown simulation variant '" + std::string(s) + "'");
}

/// Support of the confounder C. Symmetric five-point grid.
inline constexpr std::array<double, 5> kConfounderSupport{-1.0, -0.5, 0.0, 0.5, 1.0};

struct SimSpec {
  Index n = 1000;
  Index d = 1;
  double alpha_true = 0.15;
  SimVariant variant = SimVariant::simdist;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1) throw std::invalid_argument("simulation: n must be >= 1");
    if (d < 1) throw std::invalid_argument("simulation: d must be >= 1");
    if (variant == SimVariant::toy_1d && d != 1) throw std::invalid_argument("simulation: toy_1d requires d = 1");
    if (!(alpha_true > 0.0 && alpha_true < 1.0)) throw std::invalid_argument("simulation: alpha_true must lie in (0, 1)");
  }
};

namespace detail {

enum Stream : std::uint64_t {
  kGroupStream = 1,
  kMagnitudeStream = 2,
  kNoiseStream = 3,
  kConfounderStream = 4,
  kReplicateStream = 5,
  kCovariateStreamBase = 16,
};

inline double draw_confounder(Rng& rng) {
  auto k = static_cast<std::size_t>(rng.uniform() * kConfounderSupport.size());
  if (k >= kConfounderSupport.size()) k = kConfounderSupport.size() - 1;
  return kConfounderSupport[k];
}

inline double draw_label(SimVariant variant, double x1, Rng& noise) {
  const double base = std::abs(x1);
  if (x1 < 0) {
    // keep the streams aligned across rows regardless of group
    if (variant == SimVariant::confounded) (void)draw_confounder(noise); else (void)noise.normal();
    return base;
  }
  return base + (variant == SimVariant::confounded ? draw_confounder(noise) : noise.normal());
}

}  // namespace detail

/**
 * Mixture model with minority share alpha_true:
 *   Z ~ Bernoulli(alpha_true), X1 = (1 - 2Z) U[0,1],
 *   X2..Xd ~ U[-1,1] (U[0,1] for the confounded variant),
 *   Y = |X1| + 1{X1 >= 0} * noise,  noise ~ N(0,1) or the confounder C.
 */
inline Dataset generate(const SimSpec& spec) {
  spec.validate();
  const Index n = spec.n, d = spec.d;
  Dataset data;
  data.features.resize(n, d);
  data.labels.resize(n);
  data.group = Vector(n);
  Rng group_rng(spec.seed, detail::kGroupStream);
  Rng mag_rng(spec.seed, detail::kMagnitudeStream);
  const bool confounded = spec.variant == SimVariant::confounded;
  for (Index i = 0; i < n; ++i) {
    const bool minority = group_rng.bernoulli(spec.alpha_true);
    (*data.group)(i) = minority ? 1.0 : 0.0;
    data.features(i, 0) = (minority ? -1.0 : 1.0) * mag_rng.uniform();
  }
  for (Index k = 1; k < d; ++k) {
    Rng cov_rng(spec.seed, detail::kCovariateStreamBase + static_cast<std::uint64_t>(k));
    for (Index i = 0; i < n; ++i) data.features(i, k) = confounded ? cov_rng.uniform() : cov_rng.uniform(-1.0, 1.0);
  }
  if (confounded) {
    Rng conf_rng(spec.seed, detail::kConfounderStream);
    data.confounder = Vector(n);
    for (Index i = 0; i < n; ++i) {
      const double c = detail::draw_confounder(conf_rng);
      (*data.confounder)(i) = c;
      const double x1 = data.features(i, 0);
      data.labels(i) = std::abs(x1) + (x1 >= 0 ? c : 0.0);
    }
  } else {
    Rng noise_rng(spec.seed, detail::kNoiseStream);
    for (Index i = 0; i < n; ++i) data.labels(i) = detail::draw_label(spec.variant, data.features(i, 0), noise_rng);
  }
  return data;
}

/**
 * Same sample as generate(spec) plus m replicate labels per row drawn from
 * Y | X. For the confounded variant the row's confounder is part of the
 * conditioning, so every replicate equals |x1| + 1{x1 >= 0} c.
 */
inline Dataset generate_replicates(const SimSpec& spec, Index m) {
  if (m < 1) throw std::invalid_argument("replicates: m must be >= 1");
  Dataset data = generate(spec);
  const Index n = data.size();
  RowMatrix reps(n, m);
  if (spec.variant == SimVariant::confounded) {
    for (Index i = 0; i < n; ++i) reps.row(i).setConstant(data.labels(i));
  } else {
    Rng rep_rng(spec.seed, detail::kReplicateStream);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j) reps(i, j) = detail::draw_label(spec.variant, data.features(i, 0), rep_rng);
  }
  data.replicates = std::move(reps);
  return data;
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// E|mu - e| for e ~ N(0,1).
inline double expected_abs_gaussian(double mu) {
  return std::sqrt(2.0 / std::numbers::pi) * std::exp(-0.5 * mu * mu) + mu * (1.0 - 2.0 * normal_cdf(-mu));
}

/// E[|theta^T x + b - Y| | X = x] under the toy / simdist models.
template <class Derived>
double conditional_risk_oracle(const ParamVector& params, const Eigen::MatrixBase<Derived>& x, SimVariant variant) {
  if (variant == SimVariant::confounded)
    throw unsupported_error("conditional risk oracle is unavailable for the confounded variant; use replicates");
  const double pred = params.predict(x);
  const double x1 = x(0);
  if (x1 < 0) return std::abs(pred - std::abs(x1));
  return expected_abs_gaussian(pred - x1);
}

inline Vector conditional_risks(const ParamVector& params, const RowMatrix& features, SimVariant variant) {
  Vector r(features.rows());
  for (Index i = 0; i < features.rows(); ++i) r(i) = conditional_risk_oracle(params, features.row(i), variant);
  return r;
}

}  // namespace mdro
