#pragma once

// Regular block partitions, block-count prescriptions and the median.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mom/error.hpp"

namespace mom {

// Partition of the index set {0, ..., n-1} into V contiguous blocks whose
// sizes differ from n/V by at most one.
class RegularPartition {
 public:
  RegularPartition(std::size_t n, std::vector<std::vector<std::size_t>> blocks)
      : n_(n), blocks_(std::move(blocks)) {}

  std::size_t n() const noexcept { return n_; }
  std::size_t block_count() const noexcept { return blocks_.size(); }
  const std::vector<std::vector<std::size_t>>& blocks() const noexcept {
    return blocks_;
  }
  const std::vector<std::size_t>& block(std::size_t i) const {
    return blocks_.at(i);
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s;
    s.reserve(blocks_.size());
    for (const auto& b : blocks_) s.push_back(b.size());
    return s;
  }

  std::size_t min_block_size() const {
    std::size_t r = n_;
    for (const auto& b : blocks_) r = std::min(r, b.size());
    return r;
  }

 private:
  std::size_t n_;
  std::vector<std::vector<std::size_t>> blocks_;
};

// The first n mod V blocks get ceil(n/V) indices, the rest floor(n/V).
// `order`, when given, is a permutation of 0..n-1 dealt out in place of the
// identity.
inline RegularPartition regular_partition(
    std::size_t n, std::size_t V,
    std::span<const std::size_t> order = {}) {
  if (V == 0) throw InvalidArgument("regular_partition: V must be positive");
  if (V > n) {
    throw InvalidArgument("regular_partition: V = " + std::to_string(V) +
                          " exceeds n = " + std::to_string(n));
  }
  if (!order.empty() && order.size() != n) {
    throw InvalidArgument("regular_partition: order has the wrong length");
  }
  const std::size_t base = n / V;
  const std::size_t extra = n % V;
  std::vector<std::vector<std::size_t>> blocks(V);
  std::size_t next = 0;
  for (std::size_t b = 0; b < V; ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    blocks[b].reserve(size);
    for (std::size_t j = 0; j < size; ++j, ++next) {
      blocks[b].push_back(order.empty() ? next : order[next]);
    }
  }
  return RegularPartition(n, std::move(blocks));
}

// ceil(log(1/delta)) with log the natural logarithm. A relative slack of
// 1e-12 keeps exact integers (delta = e^-k) from rounding up.
inline std::size_t ceil_log_inverse(double x) {
  const double l = std::log(x);
  return static_cast<std::size_t>(std::ceil(l - 1e-12 * std::fabs(l)));
}

inline void check_confidence(double delta) {
  if (!(delta > 0.0 && delta < 0.5)) {
    throw InvalidArgument("delta must lie in (0, 1/2), got " +
                          std::to_string(delta));
  }
}

/// Smallest admissible sample size for arity m at confidence delta.
inline std::size_t minimal_sample_size(std::size_t m, double delta) {
  check_confidence(delta);
  return 64 * m * ceil_log_inverse(1.0 / delta);
}

/// V = 32 m ceil(log(1/delta)); requires ceil(log(1/delta)) <= n / (64 m).
inline std::size_t block_count(std::size_t m, double delta, std::size_t n) {
  if (m == 0) throw InvalidArgument("block_count: m must be positive");
  check_confidence(delta);
  const std::size_t L = ceil_log_inverse(1.0 / delta);
  if (64 * m * L > n) throw SampleTooSmall(n, 64 * m * L);
  return 32 * m * L;
}

enum class Mode { Combinations, Diagonal };

inline const char* to_string(Mode mode) {
  return mode == Mode::Combinations ? "combinations" : "diagonal";
}

inline Mode parse_mode(const std::string& s) {
  if (s == "combinations") return Mode::Combinations;
  if (s == "diagonal") return Mode::Diagonal;
  throw InvalidArgument("unknown mode '" + s +
                        "' (expected combinations or diagonal)");
}

inline constexpr double kDefaultEvalCap = 2e10;

struct MoMPlan {
  std::size_t m = 1;
  double delta = 0.0;  // 0 when V was set directly
  std::size_t V = 1;
  Mode mode = Mode::Combinations;
  std::optional<std::uint64_t> shuffle_seed;
  double eval_cap = kDefaultEvalCap;

  static MoMPlan from_confidence(std::size_t m, double delta, std::size_t n,
                                 Mode mode = Mode::Combinations) {
    MoMPlan p;
    p.m = m;
    p.delta = delta;
    p.V = block_count(m, delta, n);
    p.mode = mode;
    return p;
  }

  static MoMPlan with_blocks(std::size_t m, std::size_t V,
                             Mode mode = Mode::Combinations) {
    if (m == 0) throw InvalidArgument("plan arity must be positive");
    if (V == 0) throw InvalidArgument("plan block count must be positive");
    MoMPlan p;
    p.m = m;
    p.V = V;
    p.mode = mode;
    return p;
  }

  // Checks the plan against a sample of size n.
  void validate(std::size_t n) const {
    if (V > n) {
      throw InvalidArgument("plan uses V = " + std::to_string(V) +
                            " blocks for only n = " + std::to_string(n) +
                            " points");
    }
    if (mode == Mode::Combinations && V < m) {
      throw InvalidArgument("combinations mode needs V >= m");
    }
    if (mode == Mode::Diagonal && n / V < m) {
      throw InvalidArgument("diagonal mode needs floor(n/V) >= m");
    }
  }
};

// Midpoint of the two central order statistics for even N. Satisfies
// |{a_i <= b}| >= N/2 and |{a_i >= b}| >= N/2.
inline double median(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty list");
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("median of a non-finite value");
  }
  std::vector<double> a(values.begin(), values.end());
  const std::size_t N = a.size();
  const std::size_t mid = N / 2;
  std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(mid),
                   a.end());
  const double upper = a[mid];
  if (N % 2 == 1) return upper;
  const double lower =
      *std::max_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(mid));
  return std::midpoint(lower, upper);
}

}  // namespace mom
