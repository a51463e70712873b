#pragma once

// Classical U-statistics, decoupled block U-statistics and the
// median-of-means U-estimator.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mom/blocks.hpp"
#include "mom/error.hpp"
#include "mom/kernels.hpp"
#include "mom/parallel.hpp"
#include "mom/rng.hpp"
#include "mom/summation.hpp"

namespace mom {

template <class Point>
class Sample {
 public:
  explicit Sample(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.empty()) throw InvalidArgument("sample must be nonempty");
  }

  std::size_t size() const noexcept { return points_.size(); }
  const Point& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<Point>& points() const noexcept { return points_; }

 private:
  std::vector<Point> points_;
};

enum class EstimateKind { Classical, Combinations, Diagonal };

inline const char* to_string(EstimateKind k) {
  switch (k) {
    case EstimateKind::Classical:
      return "classical";
    case EstimateKind::Combinations:
      return "combinations";
    case EstimateKind::Diagonal:
      return "diagonal";
  }
  return "?";
}

struct EstimateReport {
  double value = 0.0;
  EstimateKind kind = EstimateKind::Classical;
  std::size_t V = 0;
  std::uint64_t tuple_count = 0;
  std::uint64_t kernel_eval_count = 0;
  std::vector<std::size_t> block_sizes;
};

namespace detail {

template <class Point>
void require_symmetric(const Kernel<Point>& k, const char* who) {
  if (!k.symmetric()) {
    throw InvalidArgument(std::string(who) +
                          ": kernel is not symmetric; symmetrize it first");
  }
}

inline void check_finite(double v, std::span<const std::size_t> tuple,
                         std::span<const std::size_t> blocks) {
  if (!std::isfinite(v)) {
    throw PoisonedValue({tuple.begin(), tuple.end()},
                        {blocks.begin(), blocks.end()}, v);
  }
}

// U-statistic over the points selected by `idx`, summing unordered
// combinations in lexicographic order of positions within idx.
template <class Point>
double ustat_over(const Kernel<Point>& k, const std::vector<Point>& pts,
                  std::span<const std::size_t> idx,
                  std::span<const std::size_t> block_for_errors = {}) {
  const std::size_t m = k.arity();
  const std::size_t n = idx.size();
  std::vector<std::size_t> c(m);
  std::iota(c.begin(), c.end(), std::size_t{0});
  std::vector<const Point*> args(m);
  std::vector<std::size_t> tuple(m);
  CompensatedSum acc;
  for (;;) {
    for (std::size_t j = 0; j < m; ++j) args[j] = &pts[idx[c[j]]];
    const double v = k.eval(KernelArgs<Point>(args));
    if (!std::isfinite(v)) {
      for (std::size_t j = 0; j < m; ++j) tuple[j] = idx[c[j]];
      check_finite(v, tuple, block_for_errors);
    }
    acc += v;
    // Next combination.
    std::size_t j = m;
    while (j > 0 && c[j - 1] == n - m + (j - 1)) --j;
    if (j == 0) break;
    ++c[j - 1];
    for (std::size_t l = j; l < m; ++l) c[l] = c[l - 1] + 1;
  }
  return acc.value() / binomial(n, m);
}

template <class Point>
double decoupled_over(const Kernel<Point>& k, const std::vector<Point>& pts,
                      const RegularPartition& p,
                      std::span<const std::size_t> blocks) {
  const std::size_t m = blocks.size();
  std::vector<const std::vector<std::size_t>*> bs(m);
  double denom = 1.0;
  for (std::size_t j = 0; j < m; ++j) {
    bs[j] = &p.block(blocks[j]);
    denom *= static_cast<double>(bs[j]->size());
  }
  std::vector<std::size_t> pos(m, 0);
  std::vector<const Point*> args(m);
  std::vector<std::size_t> tuple(m);
  CompensatedSum acc;
  for (;;) {
    for (std::size_t j = 0; j < m; ++j) args[j] = &pts[(*bs[j])[pos[j]]];
    const double v = k.eval(KernelArgs<Point>(args));
    if (!std::isfinite(v)) {
      for (std::size_t j = 0; j < m; ++j) tuple[j] = (*bs[j])[pos[j]];
      check_finite(v, tuple, blocks);
    }
    acc += v;
    std::size_t j = m;
    while (j > 0) {
      if (++pos[j - 1] < bs[j - 1]->size()) break;
      pos[j - 1] = 0;
      --j;
    }
    if (j == 0) break;
  }
  return acc.value() / denom;
}

// Elementary symmetric polynomial e_m(sizes): kernel evaluations needed by
// combinations mode.
inline double combination_eval_count(std::span<const std::size_t> sizes,
                                     std::size_t m) {
  std::vector<double> e(m + 1, 0.0);
  e[0] = 1.0;
  for (std::size_t s : sizes) {
    for (std::size_t j = m; j >= 1; --j) e[j] += e[j - 1] * static_cast<double>(s);
  }
  return e[m];
}

inline double diagonal_eval_count(std::span<const std::size_t> sizes,
                                  std::size_t m) {
  double total = 0.0;
  for (std::size_t s : sizes) total += binomial(s, m);
  return total;
}

// All strictly increasing m-tuples of {0..V-1}, lexicographic, flattened.
inline std::vector<std::size_t> increasing_tuples(std::size_t V, std::size_t m) {
  std::vector<std::size_t> out;
  std::vector<std::size_t> c(m);
  std::iota(c.begin(), c.end(), std::size_t{0});
  for (;;) {
    out.insert(out.end(), c.begin(), c.end());
    std::size_t j = m;
    while (j > 0 && c[j - 1] == V - m + (j - 1)) --j;
    if (j == 0) break;
    ++c[j - 1];
    for (std::size_t l = j; l < m; ++l) c[l] = c[l - 1] + 1;
  }
  return out;
}

}  // namespace detail

/// Classical U-statistic: the average of h over all C(n, m) subsets.
template <class Point>
double u_statistic(const Kernel<Point>& k, const Sample<Point>& s) {
  detail::require_symmetric(k, "u_statistic");
  if (s.size() < k.arity()) {
    throw InvalidArgument("u_statistic: need n >= m");
  }
  std::vector<std::size_t> all(s.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return detail::ustat_over(k, s.points(), all);
}

template <class Point>
EstimateReport classical_estimate(const Kernel<Point>& k,
                                  const Sample<Point>& s) {
  EstimateReport r;
  r.value = u_statistic(k, s);
  r.kind = EstimateKind::Classical;
  r.V = 0;
  r.tuple_count = 1;
  r.kernel_eval_count = binomial_u64(s.size(), k.arity());
  return r;
}

template <class Point>
double decoupled_block_ustat(const Kernel<Point>& k, const Sample<Point>& s,
                             const RegularPartition& p,
                             std::span<const std::size_t> blocks) {
  if (blocks.size() != k.arity()) {
    throw InvalidArgument("decoupled_block_ustat: need exactly m blocks");
  }
  if (p.n() != s.size()) {
    throw InvalidArgument("decoupled_block_ustat: partition does not match sample");
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i] >= p.block_count()) {
      throw InvalidArgument("decoupled_block_ustat: block index out of range");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (blocks[i] == blocks[j]) {
        throw InvalidArgument("decoupled_block_ustat: repeated block index");
      }
    }
  }
  return detail::decoupled_over(k, s.points(), p, blocks);
}

template <class Point>
double diagonal_block_ustat(const Kernel<Point>& k, const Sample<Point>& s,
                            const RegularPartition& p, std::size_t block) {
  detail::require_symmetric(k, "diagonal_block_ustat");
  if (p.n() != s.size()) {
    throw InvalidArgument("diagonal_block_ustat: partition does not match sample");
  }
  if (block >= p.block_count()) {
    throw InvalidArgument("diagonal_block_ustat: block index out of range");
  }
  const auto& b = p.block(block);
  if (b.size() < k.arity()) {
    throw InvalidArgument("diagonal_block_ustat: block has fewer than m points");
  }
  const std::size_t tag[] = {block};
  return detail::ustat_over(k, s.points(), b, tag);
}

/// The block partition a plan induces on n points, including the optional
/// seeded pre-shuffle.
inline RegularPartition plan_partition(const MoMPlan& plan, std::size_t n) {
  if (!plan.shuffle_seed) return regular_partition(n, plan.V);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(SeededStream{*plan.shuffle_seed, 0});
  rng.shuffle(std::span<std::size_t>(order));
  return regular_partition(n, plan.V, order);
}

/// Block statistics whose median is the estimate, in canonical order:
/// lexicographic block tuples (combinations) or block order (diagonal).
template <class Point>
std::vector<double> block_statistics(const Kernel<Point>& k,
                                     const Sample<Point>& s,
                                     const RegularPartition& p, Mode mode) {
  detail::require_symmetric(k, "block_statistics");
  const std::size_t m = k.arity();
  std::vector<double> stats;
  if (mode == Mode::Combinations) {
    const auto tuples = detail::increasing_tuples(p.block_count(), m);
    stats.resize(tuples.size() / m);
    parallel_for(stats.size(), [&](std::size_t t) {
      stats[t] = detail::decoupled_over(
          k, s.points(), p, std::span<const std::size_t>(tuples).subspan(t * m, m));
    });
  } else {
    stats.resize(p.block_count());
    parallel_for(stats.size(), [&](std::size_t b) {
      const std::size_t tag[] = {b};
      stats[b] = detail::ustat_over(k, s.points(), p.block(b), tag);
    });
  }
  return stats;
}

// Median of decoupled block U-statistics over all i_1 < ... < i_m
// (combinations), or of the V within-block U-statistics (diagonal).
template <class Point>
EstimateReport mom_ustat(const Kernel<Point>& k, const Sample<Point>& s,
                         const MoMPlan& plan) {
  detail::require_symmetric(k, "mom_ustat");
  if (plan.m != k.arity()) {
    throw InvalidArgument("mom_ustat: plan arity " + std::to_string(plan.m) +
                          " does not match kernel arity " +
                          std::to_string(k.arity()));
  }
  plan.validate(s.size());
  const auto p = plan_partition(plan, s.size());
  const auto sizes = p.sizes();
  const std::size_t m = k.arity();

  const double evals = plan.mode == Mode::Combinations
                           ? detail::combination_eval_count(sizes, m)
                           : detail::diagonal_eval_count(sizes, m);
  if (evals > plan.eval_cap) {
    throw BudgetExceeded("mom_ustat: plan needs " + std::to_string(evals) +
                         " kernel evaluations, over the cap of " +
                         std::to_string(plan.eval_cap) +
                         "; use diagonal mode or fewer blocks");
  }

  const auto stats = block_statistics(k, s, p, plan.mode);
  EstimateReport r;
  r.value = median(stats);
  r.kind = plan.mode == Mode::Combinations ? EstimateKind::Combinations
                                           : EstimateKind::Diagonal;
  r.V = plan.V;
  r.tuple_count = stats.size();
  r.kernel_eval_count = static_cast<std::uint64_t>(evals);
  r.block_sizes = sizes;
  return r;
}

/// Median-of-means mean with V = 32 ceil(log(1/delta)) blocks.
inline EstimateReport mom_mean(const Sample<double>& s, double delta) {
  return mom_ustat(make_identity_kernel(), s,
                   MoMPlan::from_confidence(1, delta, s.size()));
}

inline EstimateReport mom_mean(const Sample<double>& s, const MoMPlan& plan) {
  return mom_ustat(make_identity_kernel(), s, plan);
}

}  // namespace mom
