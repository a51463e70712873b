#pragma once

// Kernels of m sample points and an exact Hoeffding-projection oracle over
// finite discrete distributions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "mom/error.hpp"
#include "mom/summation.hpp"

namespace mom {

// Read-only view of the m arguments of one kernel evaluation.
template <class Point>
class KernelArgs {
 public:
  explicit KernelArgs(std::span<const Point* const> points) : points_(points) {}

  const Point& operator[](std::size_t i) const { return *points_[i]; }
  std::size_t size() const noexcept { return points_.size(); }

 private:
  std::span<const Point* const> points_;
};

template <class Point>
class Kernel {
 public:
  using Fn = std::function<double(KernelArgs<Point>)>;

  Kernel(std::size_t arity, Fn fn, bool symmetric)
      : arity_(arity), fn_(std::move(fn)), symmetric_(symmetric) {
    if (arity_ == 0) throw InvalidArgument("kernel arity must be >= 1");
    if (!fn_) throw InvalidArgument("kernel function is empty");
  }

  std::size_t arity() const noexcept { return arity_; }
  bool symmetric() const noexcept { return symmetric_; }

  // Hot path: no arity check.
  double eval(KernelArgs<Point> args) const { return fn_(args); }

  double eval(std::span<const Point> points) const {
    if (points.size() != arity_) {
      throw InvalidArgument("kernel of arity " + std::to_string(arity_) +
                            " called with " + std::to_string(points.size()) +
                            " arguments");
    }
    std::vector<const Point*> ptrs(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) ptrs[i] = &points[i];
    return fn_(KernelArgs<Point>(ptrs));
  }

  template <class... Ts>
  double operator()(const Ts&... xs) const {
    if (sizeof...(Ts) != arity_) {
      throw InvalidArgument("kernel of arity " + std::to_string(arity_) +
                            " called with " + std::to_string(sizeof...(Ts)) +
                            " arguments");
    }
    const std::array<Point, sizeof...(Ts)> pts{static_cast<Point>(xs)...};
    std::array<const Point*, sizeof...(Ts)> ptrs{};
    for (std::size_t i = 0; i < pts.size(); ++i) ptrs[i] = &pts[i];
    return fn_(KernelArgs<Point>(ptrs));
  }

 private:
  std::size_t arity_;
  Fn fn_;
  bool symmetric_;
};

/// (x, y) -> x * y. Canonical for any centered law.
inline Kernel<double> make_product_kernel() {
  return Kernel<double>(
      2, [](KernelArgs<double> a) { return a[0] * a[1]; }, true);
}

/// x -> x. With arity 1 the median-of-means U-estimator is the plain
/// median-of-means mean.
inline Kernel<double> make_identity_kernel() {
  return Kernel<double>(
      1, [](KernelArgs<double> a) { return a[0]; }, true);
}

/// (x, y) -> (x - y)^2 / 2, the unbiased variance kernel.
inline Kernel<double> make_half_squared_difference_kernel() {
  return Kernel<double>(
      2,
      [](KernelArgs<double> a) {
        const double d = a[0] - a[1];
        return 0.5 * d * d;
      },
      true);
}

inline Kernel<double> make_sum_kernel(std::size_t arity) {
  return Kernel<double>(
      arity,
      [](KernelArgs<double> a) {
        CompensatedSum s;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
        return s.value();
      },
      true);
}

template <class Point>
Kernel<Point> make_constant_kernel(std::size_t arity, double c) {
  return Kernel<Point>(
      arity, [c](KernelArgs<Point>) { return c; }, true);
}

inline constexpr std::size_t kMaxSymmetrizeArity = 8;

// Averages k over all m! orderings of its arguments. The m! values are
// sorted before summation so the result does not depend on argument order.
template <class Point>
Kernel<Point> symmetrize(const Kernel<Point>& k) {
  const std::size_t m = k.arity();
  if (m > kMaxSymmetrizeArity) {
    throw InvalidArgument("symmetrize: arity " + std::to_string(m) +
                          " exceeds the limit of " +
                          std::to_string(kMaxSymmetrizeArity));
  }
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> perms;  // flattened, m entries per permutation
  do {
    perms.insert(perms.end(), perm.begin(), perm.end());
  } while (std::next_permutation(perm.begin(), perm.end()));
  const std::size_t count = perms.size() / m;

  auto avg = [k, m, count, perms = std::move(perms)](KernelArgs<Point> a) {
    std::vector<const Point*> permuted(m);
    std::vector<double> values(count);
    for (std::size_t p = 0; p < count; ++p) {
      for (std::size_t j = 0; j < m; ++j) permuted[j] = &a[perms[p * m + j]];
      values[p] = k.eval(KernelArgs<Point>(permuted));
    }
    std::sort(values.begin(), values.end());
    CompensatedSum s;
    for (double v : values) s += v;
    return s.value() / static_cast<double>(count);
  };
  return Kernel<Point>(m, std::move(avg), true);
}

// ---------------------------------------------------------------------------
// Finite discrete distributions and the Hoeffding-projection oracle.

template <class Point>
class FiniteDistribution {
 public:
  FiniteDistribution(std::vector<Point> support, std::vector<double> weights)
      : support_(std::move(support)), weights_(std::move(weights)) {
    if (support_.empty()) throw InvalidArgument("empty support");
    if (support_.size() != weights_.size()) {
      throw InvalidArgument("support and weights differ in length");
    }
    CompensatedSum total;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw InvalidArgument("weights must be finite and nonnegative");
      }
      total += w;
    }
    if (std::fabs(total.value() - 1.0) > 1e-12) {
      throw InvalidArgument("weights must sum to 1");
    }
    for (std::size_t i = 0; i < support_.size(); ++i) {
      for (std::size_t j = i + 1; j < support_.size(); ++j) {
        if (support_[i] == support_[j]) {
          throw InvalidArgument("support points must be distinct");
        }
      }
    }
  }

  static FiniteDistribution uniform(std::vector<Point> support) {
    const std::size_t s = support.size();
    if (s == 0) throw InvalidArgument("empty support");
    std::vector<double> w(s, 1.0 / static_cast<double>(s));
    // Guarantee an exact unit total for any support size.
    CompensatedSum head;
    for (std::size_t i = 0; i + 1 < s; ++i) head += w[i];
    w.back() = 1.0 - head.value();
    return FiniteDistribution(std::move(support), std::move(w));
  }

  const std::vector<Point>& support() const noexcept { return support_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return support_.size(); }

  std::size_t index_of(const Point& x) const {
    for (std::size_t i = 0; i < support_.size(); ++i) {
      if (support_[i] == x) return i;
    }
    throw InvalidArgument("point is not in the support");
  }

 private:
  std::vector<Point> support_;
  std::vector<double> weights_;
};

// pi_k h tabulated on the k-fold product of the support. Entries are stored
// lexicographically in support-index order (last coordinate fastest).
template <class Point>
class ProjectionResult {
 public:
  ProjectionResult(std::size_t order, std::size_t support_size,
                   std::vector<double> table)
      : order_(order), support_size_(support_size), table_(std::move(table)) {}

  std::size_t order() const noexcept { return order_; }
  const std::vector<double>& table() const noexcept { return table_; }

  double at(std::span<const std::size_t> indices) const {
    if (indices.size() != order_) {
      throw InvalidArgument("projection index tuple has the wrong length");
    }
    std::size_t flat = 0;
    for (std::size_t i : indices) {
      if (i >= support_size_) throw InvalidArgument("support index out of range");
      flat = flat * support_size_ + i;
    }
    return table_[flat];
  }

  double at(const FiniteDistribution<Point>& dist,
            std::span<const Point> points) const {
    std::vector<std::size_t> idx;
    idx.reserve(points.size());
    for (const auto& p : points) idx.push_back(dist.index_of(p));
    return at(idx);
  }

  double max_abs() const noexcept {
    double r = 0.0;
    for (double v : table_) r = std::max(r, std::fabs(v));
    return r;
  }

 private:
  std::size_t order_;
  std::size_t support_size_;
  std::vector<double> table_;
};

inline constexpr double kEnumerationBudget = 1e7;

namespace detail {

// Advances a base-`base` odometer; returns false after the last tuple.
inline bool next_tuple(std::vector<std::size_t>& idx, std::size_t base) {
  for (std::size_t j = idx.size(); j-- > 0;) {
    if (++idx[j] < base) return true;
    idx[j] = 0;
  }
  return false;
}

inline double ipow(double b, std::size_t e) {
  double r = 1.0;
  for (std::size_t i = 0; i < e; ++i) r *= b;
  return r;
}

// Conditional expectations E h(x_fixed, X_rest) for a symmetric kernel,
// memoized on the sorted multiset of fixed support indices.
template <class Point>
class ConditionalMeans {
 public:
  ConditionalMeans(const Kernel<Point>& k, const FiniteDistribution<Point>& d)
      : k_(k), d_(d) {}

  double operator()(std::vector<std::size_t> fixed) {
    std::sort(fixed.begin(), fixed.end());
    if (auto it = cache_.find(fixed); it != cache_.end()) return it->second;

    const std::size_t m = k_.arity();
    const std::size_t s = d_.size();
    const std::size_t free = m - fixed.size();
    const auto& sup = d_.support();
    const auto& w = d_.weights();

    std::vector<const Point*> args(m);
    for (std::size_t j = 0; j < fixed.size(); ++j) args[j] = &sup[fixed[j]];
    std::vector<std::size_t> idx(free, 0);
    CompensatedSum acc;
    do {
      double weight = 1.0;
      for (std::size_t j = 0; j < free; ++j) {
        args[fixed.size() + j] = &sup[idx[j]];
        weight *= w[idx[j]];
      }
      if (weight != 0.0) acc += weight * k_.eval(KernelArgs<Point>(args));
    } while (free > 0 && next_tuple(idx, s));
    const double v = acc.value();
    cache_.emplace(std::move(fixed), v);
    return v;
  }

 private:
  const Kernel<Point>& k_;
  const FiniteDistribution<Point>& d_;
  std::map<std::vector<std::size_t>, double> cache_;
};

template <class Point>
void check_oracle_inputs(const Kernel<Point>& k,
                         const FiniteDistribution<Point>& d,
                         std::size_t order) {
  if (!k.symmetric()) {
    throw InvalidArgument("Hoeffding projections require a symmetric kernel");
  }
  if (order > k.arity()) {
    throw InvalidArgument("projection order exceeds kernel arity");
  }
  const double s = static_cast<double>(d.size());
  // Tuples tabulated times subsets expanded, plus the full grid once.
  const double work =
      ipow(s, order) * ipow(2.0, order) + ipow(s, k.arity());
  if (work > kEnumerationBudget) {
    throw BudgetExceeded("projection enumeration needs " +
                         std::to_string(work) + " terms, over the budget of " +
                         std::to_string(kEnumerationBudget));
  }
}

template <class Point>
ProjectionResult<Point> project(const Kernel<Point>& k,
                                const FiniteDistribution<Point>& d,
                                std::size_t order,
                                ConditionalMeans<Point>& cond) {
  const std::size_t s = d.size();
  std::vector<double> table;
  table.reserve(static_cast<std::size_t>(ipow(static_cast<double>(s), order)));
  std::vector<std::size_t> idx(order, 0);
  std::vector<std::size_t> fixed;
  do {
    // (delta_{x_1} - P) x ... x (delta_{x_k} - P) x P^{m-k} h by
    // inclusion-exclusion over the coordinates kept at their Dirac mass.
    CompensatedSum acc;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << order); ++mask) {
      fixed.clear();
      for (std::size_t j = 0; j < order; ++j) {
        if (mask & (std::uint64_t{1} << j)) fixed.push_back(idx[j]);
      }
      const bool negative = ((order - fixed.size()) % 2) == 1;
      const double c = cond(fixed);
      acc += negative ? -c : c;
    }
    table.push_back(acc.value());
  } while (order > 0 && next_tuple(idx, s));
  return ProjectionResult<Point>(order, s, std::move(table));
}

}  // namespace detail

/// P^m h by exhaustive enumeration.
template <class Point>
double enumerated_mean(const Kernel<Point>& k,
                       const FiniteDistribution<Point>& d) {
  detail::check_oracle_inputs(k, d, 0);
  detail::ConditionalMeans<Point> cond(k, d);
  return cond({});
}

/// Var h(X_1, ..., X_m) by exhaustive enumeration.
template <class Point>
double enumerated_variance(const Kernel<Point>& k,
                           const FiniteDistribution<Point>& d) {
  detail::check_oracle_inputs(k, d, 0);
  const double mean = enumerated_mean(k, d);
  const std::size_t m = k.arity();
  const auto& sup = d.support();
  const auto& w = d.weights();
  std::vector<std::size_t> idx(m, 0);
  std::vector<const Point*> args(m);
  CompensatedSum acc;
  do {
    double weight = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      args[j] = &sup[idx[j]];
      weight *= w[idx[j]];
    }
    if (weight != 0.0) {
      const double c = k.eval(KernelArgs<Point>(args)) - mean;
      acc += weight * c * c;
    }
  } while (detail::next_tuple(idx, d.size()));
  return acc.value();
}

template <class Point>
ProjectionResult<Point> hoeffding_projection(const Kernel<Point>& k,
                                             const FiniteDistribution<Point>& d,
                                             std::size_t order) {
  detail::check_oracle_inputs(k, d, order);
  detail::ConditionalMeans<Point> cond(k, d);
  return detail::project(k, d, order, cond);
}

struct DegeneracyResult {
  std::size_t q = 1;
  bool canonical = false;
};

inline constexpr double kDefaultDegeneracyTol = 1e-10;

// Largest q <= m such that pi_1 h, ..., pi_{q-1} h all vanish within tol.
// Near-constancy of the q-th integral is not tested; strictness is left to
// the caller.
template <class Point>
DegeneracyResult degeneracy_order(const Kernel<Point>& k,
                                  const FiniteDistribution<Point>& d,
                                  double tol = kDefaultDegeneracyTol) {
  const std::size_t m = k.arity();
  detail::check_oracle_inputs(k, d, m > 1 ? m - 1 : 0);
  detail::ConditionalMeans<Point> cond(k, d);
  DegeneracyResult r;
  r.q = 1;
  for (std::size_t s = 1; s < m; ++s) {
    if (detail::project(k, d, s, cond).max_abs() > tol) break;
    r.q = s + 1;
  }
  if (m == 1) r.q = 1;
  r.canonical = (m >= 2 && r.q == m && std::fabs(cond({})) <= tol);
  return r;
}

struct VarianceContribution {
  std::size_t order;
  double value;  // C(m, s) * E[(pi_s h)^2]
};

template <class Point>
std::vector<VarianceContribution> variance_decomposition(
    const Kernel<Point>& k, const FiniteDistribution<Point>& d) {
  const std::size_t m = k.arity();
  detail::check_oracle_inputs(k, d, m);
  detail::ConditionalMeans<Point> cond(k, d);
  const auto& w = d.weights();
  std::vector<VarianceContribution> out;
  for (std::size_t s = 1; s <= m; ++s) {
    const auto proj = detail::project(k, d, s, cond);
    std::vector<std::size_t> idx(s, 0);
    std::size_t flat = 0;
    CompensatedSum acc;
    do {
      double weight = 1.0;
      for (std::size_t j : idx) weight *= w[j];
      const double v = proj.table()[flat++];
      acc += weight * v * v;
    } while (detail::next_tuple(idx, d.size()));
    out.push_back({s, binomial(m, s) * acc.value()});
  }
  return out;
}

}  // namespace mom
