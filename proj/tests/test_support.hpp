#pragma once

// Independent oracles used across the suites: brute-force eta grids,
// central differences and small random instances.

#include "mdro/mdro.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace mdro::testing {

using Rand = std::mt19937_64;

inline double uni(Rand& r, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(r);
}

inline Vector random_vector(Rand& r, Index n, double lo, double hi) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = uni(r, lo, hi);
  return v;
}

inline RowMatrix random_matrix(Rand& r, Index n, Index d, double lo, double hi) {
  RowMatrix m(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k) m(i, k) = uni(r, lo, hi);
  return m;
}

/// Plain ternary refinement of a convex scalar function on [a, b].
inline double refine_min(const std::function<double(double)>& f, double a, double b) {
  for (int it = 0; it < 300 && b - a > 1e-13 * (1.0 + std::abs(a)); ++it) {
    const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
    if (f(m1) <= f(m2)) b = m2; else a = m1;
  }
  return f(0.5 * (a + b));
}

/// Evaluates f on a grid of step `rel_step * range` over [lo, hi], then
/// refines around the best grid point.
inline double grid_min(const std::function<double(double)>& f, double lo, double hi, double rel_step = 1e-4) {
  const double range = std::max(hi - lo, 1e-12);
  const double step = rel_step * range;
  const long steps = static_cast<long>(std::ceil(range / step));
  double best = f(lo), best_x = lo;
  for (long k = 1; k <= steps; ++k) {
    const double x = std::min(lo + step * static_cast<double>(k), hi);
    const double fx = f(x);
    if (fx < best) {
      best = fx;
      best_x = x;
    }
  }
  return std::min(best, refine_min(f, std::max(lo, best_x - step), std::min(hi, best_x + step)));
}

/// (1/(alpha n)) sum (v - eta)_+ + eta, written out directly.
inline double cvar_objective(const Vector& v, double alpha, double eta) {
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += std::max(v(i) - eta, 0.0);
  return s / (alpha * static_cast<double>(v.size())) + eta;
}

inline double pnorm_objective(const Vector& v, double alpha, double p, double eta) {
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += std::pow(std::max(v(i) - eta, 0.0), p);
  return std::pow(s / static_cast<double>(v.size()), 1.0 / p) / alpha + eta;
}

inline double cvar_grid(const Vector& v, double alpha) {
  return grid_min([&](double e) { return cvar_objective(v, alpha, e); }, std::min(0.0, v.minCoeff()), v.maxCoeff());
}

inline double pnorm_grid(const Vector& v, double alpha, double p) {
  return grid_min([&](double e) { return pnorm_objective(v, alpha, p, e); }, std::min(0.0, v.minCoeff()),
                  v.maxCoeff());
}

inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace mdro::testing
