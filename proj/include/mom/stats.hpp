#pragma once

// Small descriptive-statistics helpers used by the experiment harness.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mom/error.hpp"
#include "mom/summation.hpp"

namespace mom {

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
inline double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == t) ++i;
    while (j < y.size() && y[j] == t) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na -
                              static_cast<double>(j) / nb));
  }
  return d;
}

// Type-1 (inverse empirical CDF) quantile: the ceil(level * R)-th order
// statistic, 1-based, clamped to [1, R].
inline double quantile_type1(std::span<const double> values, double level) {
  if (values.empty()) throw InvalidArgument("quantile of an empty list");
  if (!(level >= 0.0 && level <= 1.0)) {
    throw InvalidArgument("quantile level must lie in [0, 1]");
  }
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double R = static_cast<double>(v.size());
  // The small slack absorbs representation error in level * R.
  auto k = static_cast<std::size_t>(std::ceil(level * R - 1e-9));
  k = std::clamp<std::size_t>(k, 1, v.size());
  return v[k - 1];
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares of y on x.
inline LineFit ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidArgument("ols_fit: need at least two paired points");
  }
  const double n = static_cast<double>(x.size());
  CompensatedSum sx, sy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx.value() / n, my = sy.value() / n;
  CompensatedSum sxx, sxy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx.value() == 0.0) throw InvalidArgument("ols_fit: x values are all equal");
  LineFit f;
  f.slope = sxy.value() / sxx.value();
  f.intercept = my - f.slope * mx;
  return f;
}

/// Slope of log(y) against log(x).
inline double log_log_slope(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw InvalidArgument("log_log_slope: values must be positive");
    }
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  return ols_fit(lx, ly).slope;
}

inline double mean_of(std::span<const double> v) {
  CompensatedSum s;
  for (double x : v) s += x;
  return s.value() / static_cast<double>(v.size());
}

}  // namespace mom
