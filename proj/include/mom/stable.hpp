#pragma once

// Symmetric alpha-stable variates S(gamma, alpha), with characteristic
// function exp(-gamma^alpha |u|^alpha), and checks of their basic
// properties.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mom/error.hpp"
#include "mom/rng.hpp"
#include "mom/stats.hpp"
#include "mom/summation.hpp"

namespace mom {

struct StableParams {
  double gamma = 1.0;
  double alpha = 2.0;

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
      throw InvalidArgument("stable scale gamma must be positive");
    }
    if (!(alpha > 0.0 && alpha <= 2.0)) {
      throw InvalidArgument("stable index alpha must lie in (0, 2], got " +
                            std::to_string(alpha));
    }
  }
};

// Chambers-Mallows-Stuck transform of an angle u in (-pi/2, pi/2) and a
// standard exponential w, for unit scale. Odd in u.
inline double cms_unit(double alpha, double u, double w) {
  if (alpha == 2.0) return 2.0 * std::sin(u) * std::sqrt(w);
  if (alpha == 1.0) return std::tan(u);
  const double au = alpha * u;
  const double ru = (1.0 - alpha) * u;
  return std::sin(au) / std::pow(std::cos(u), 1.0 / alpha) *
         std::pow(std::cos(ru) / w, (1.0 - alpha) / alpha);
}

// Draws one (u, w) pair per variate, in that order, from the stream.
class StableSampler {
 public:
  StableSampler(StableParams p, SeededStream s) : p_(p), rng_(s) { p_.validate(); }

  double operator()() {
    const double u = std::numbers::pi * (rng_.uniform_open() - 0.5);
    const double w = rng_.exponential();
    return p_.gamma * cms_unit(p_.alpha, u, w);
  }

  Rng& rng() noexcept { return rng_; }

 private:
  StableParams p_;
  Rng rng_;
};

inline std::vector<double> sample_stable(const StableParams& p,
                                         SeededStream stream,
                                         std::size_t count) {
  StableSampler draw(p, stream);
  std::vector<double> out(count);
  for (auto& x : out) x = draw();
  return out;
}

/// Standard normal draws from an independent Box-Muller generator.
inline std::vector<double> sample_normal(SeededStream stream, std::size_t count) {
  Rng rng(stream);
  std::vector<double> out(count);
  for (auto& x : out) x = rng.normal();
  return out;
}

// KS distance between N draws of S_n / n^{1/alpha} and N direct draws of
// S(gamma, alpha). Zero in law for any n.
inline double sum_stability_check(const StableParams& p, std::size_t n,
                                  SeededStream stream, std::size_t N) {
  p.validate();
  if (n < 1) throw InvalidArgument("sum_stability_check: n must be >= 1");
  if (N < 1000) throw InvalidArgument("sum_stability_check: N must be >= 1000");
  StableSampler sums(p, stream.child(1));
  StableSampler direct(p, stream.child(2));
  const double scale = std::pow(static_cast<double>(n), 1.0 / p.alpha);
  std::vector<double> a(N), b(N);
  for (std::size_t i = 0; i < N; ++i) {
    CompensatedSum s;
    for (std::size_t j = 0; j < n; ++j) s += sums();
    a[i] = s.value() / scale;
  }
  for (auto& x : b) x = direct();
  return ks_two_sample(a, b);
}

inline double positive_fraction(std::span<const double> samples) {
  if (samples.empty()) throw InvalidArgument("positive_fraction: empty input");
  std::size_t pos = 0;
  for (double x : samples) pos += x > 0.0 ? 1 : 0;
  return static_cast<double>(pos) / static_cast<double>(samples.size());
}

// Hill estimator on the top-k order statistics of |x|:
//   alpha_hat = k / sum_{i<=k} log(|x|_(i) / |x|_(k+1)).
inline double tail_exponent_estimate(std::span<const double> samples,
                                     std::size_t k) {
  if (k < 50) throw InvalidArgument("tail_exponent_estimate: k must be >= 50");
  if (2 * k >= samples.size()) {
    throw InvalidArgument("tail_exponent_estimate: need k < n/2 (insufficient samples)");
  }
  std::vector<double> a(samples.size());
  std::transform(samples.begin(), samples.end(), a.begin(),
                 [](double x) { return std::fabs(x); });
  std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(k), a.end(),
                   std::greater<>());
  const double threshold = a[k];
  if (!(threshold > 0.0)) {
    throw InvalidArgument("tail_exponent_estimate: threshold order statistic is zero");
  }
  std::sort(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(k), std::greater<>());
  CompensatedSum s;
  for (std::size_t i = 0; i < k; ++i) s += std::log(a[i] / threshold);
  return static_cast<double>(k) / s.value();
}

/// E|X| = (2/pi) gamma Gamma(1 - 1/alpha) for X ~ S(gamma, alpha), alpha > 1.
inline double stable_mean_abs(const StableParams& p) {
  p.validate();
  if (!(p.alpha > 1.0)) throw InvalidArgument("E|X| is infinite for alpha <= 1");
  return 2.0 / std::numbers::pi * p.gamma * std::tgamma(1.0 - 1.0 / p.alpha);
}

/// E|X|^p = 2^p Gamma((1+p)/2) Gamma(1-p/alpha) / (sqrt(pi) Gamma(1-p/2)) gamma^p
/// for 0 < p < alpha (any p > 0 when alpha = 2).
inline double stable_abs_moment(const StableParams& sp, double p) {
  sp.validate();
  if (!(p > 0.0)) throw InvalidArgument("moment order must be positive");
  const double c = std::pow(2.0, p) * std::tgamma(0.5 * (1.0 + p)) /
                   std::sqrt(std::numbers::pi) * std::pow(sp.gamma, p);
  if (sp.alpha == 2.0) return c;
  if (!(p < sp.alpha)) throw InvalidArgument("E|X|^p is infinite for p >= alpha");
  return c * std::tgamma(1.0 - p / sp.alpha) / std::tgamma(1.0 - 0.5 * p);
}

/// Mean of |x|^p.
inline double absolute_moment(std::span<const double> samples, double p) {
  CompensatedSum s;
  for (double x : samples) s += std::pow(std::fabs(x), p);
  return s.value() / static_cast<double>(samples.size());
}

}  // namespace mom
