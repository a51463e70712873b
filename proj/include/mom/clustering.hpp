#pragma once

// Clustering risk W(P) = E[D(X, X') 1{X, X' share a cell of P}], its
// U-statistic and median-of-means estimates, and risk minimization over a
// finite class of partitions.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mom/blocks.hpp"
#include "mom/error.hpp"
#include "mom/estimators.hpp"
#include "mom/kernels.hpp"
#include "mom/parallel.hpp"
#include "mom/rng.hpp"
#include "mom/summation.hpp"

namespace mom {

template <class Point>
struct Dissimilarity {
  std::function<double(const Point&, const Point&)> fn;
  std::string name = "D";

  double operator()(const Point& a, const Point& b) const { return fn(a, b); }
};

template <class Point>
struct CellPartition {
  std::size_t K = 1;
  std::function<std::size_t(const Point&)> assign;
  std::string label;

  bool same_cell(const Point& a, const Point& b) const {
    return assign(a) == assign(b);
  }
};

template <class Point>
class PartitionClass {
 public:
  explicit PartitionClass(std::vector<CellPartition<Point>> members)
      : members_(std::move(members)) {
    if (members_.empty()) throw InvalidArgument("partition class is empty");
    std::set<std::string> labels;
    for (const auto& p : members_) {
      if (!p.assign) throw InvalidArgument("partition '" + p.label + "' has no assign rule");
      if (!labels.insert(p.label).second) {
        throw InvalidArgument("duplicate partition label '" + p.label + "'");
      }
    }
  }

  std::size_t size() const noexcept { return members_.size(); }
  const CellPartition<Point>& operator[](std::size_t i) const { return members_[i]; }
  const std::vector<CellPartition<Point>>& members() const noexcept { return members_; }

 private:
  std::vector<CellPartition<Point>> members_;
};

struct RiskReport {
  std::string estimator;  // "mom" or "classical"
  std::vector<double> risks;
  std::size_t selected = 0;
  std::string selected_label;
  std::size_t V = 0;
  std::vector<std::size_t> block_sizes;
  // Plug-in sqrt(mean D^2) over sample pairs, and sigma_hat *
  // sqrt(ceil(log(N/delta)) / n): the uniform-deviation rate with unit
  // constant. Diagnostics only.
  double sigma_hat = 0.0;
  double deviation_bound = 0.0;
};

template <class Point>
Kernel<Point> clustering_kernel(const Dissimilarity<Point>& D,
                                const CellPartition<Point>& P) {
  return Kernel<Point>(
      2,
      [D, P](KernelArgs<Point> a) {
        return P.assign(a[0]) == P.assign(a[1]) ? D(a[0], a[1]) : 0.0;
      },
      true);
}

template <class Point>
double empirical_clustering_risk(const Dissimilarity<Point>& D,
                                 const CellPartition<Point>& P,
                                 const Sample<Point>& s) {
  if (s.size() < 2) throw InvalidArgument("clustering risk needs n >= 2");
  return u_statistic(clustering_kernel(D, P), s);
}

/// Block count 64 ceil(log(N/delta)) for a class of N partitions.
inline std::size_t clustering_block_count(std::size_t class_size, double delta) {
  check_confidence(delta);
  if (class_size == 0) throw InvalidArgument("class size must be positive");
  return 64 * ceil_log_inverse(static_cast<double>(class_size) / delta);
}

/// Minimal n = 128 ceil(log(N/delta)) for uniform deviation over N partitions.
inline std::size_t clustering_minimal_sample_size(std::size_t class_size,
                                                  double delta) {
  return 2 * clustering_block_count(class_size, delta);
}

template <class Point>
EstimateReport mom_clustering_risk(const Dissimilarity<Point>& D,
                                   const CellPartition<Point>& P,
                                   const Sample<Point>& s, const MoMPlan& plan) {
  return mom_ustat(clustering_kernel(D, P), s, plan);
}

// Standalone estimate with V = 64 ceil(log(N_effective/delta)).
template <class Point>
EstimateReport mom_clustering_risk(const Dissimilarity<Point>& D,
                                   const CellPartition<Point>& P,
                                   const Sample<Point>& s, double delta,
                                   std::size_t n_effective = 1,
                                   Mode mode = Mode::Combinations) {
  const std::size_t V = clustering_block_count(n_effective, delta);
  MoMPlan plan = MoMPlan::with_blocks(2, V, mode);
  plan.delta = delta;
  return mom_clustering_risk(D, P, s, plan);
}

namespace detail {

// Per-member cell ids of every sample point, computed once.
template <class Point>
std::vector<std::vector<std::size_t>> cell_ids(const PartitionClass<Point>& cls,
                                               const Sample<Point>& s) {
  std::vector<std::vector<std::size_t>> ids(cls.size());
  parallel_for(cls.size(), [&](std::size_t c) {
    ids[c].resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) ids[c][i] = cls[c].assign(s[i]);
  });
  return ids;
}

// The clustering kernel over sample indices: same values, same summation
// order as clustering_kernel on the points themselves.
template <class Point>
Kernel<std::size_t> indexed_clustering_kernel(const Dissimilarity<Point>& D,
                                              const Sample<Point>& s,
                                              const std::vector<std::size_t>& ids) {
  return Kernel<std::size_t>(
      2,
      [&D, &s, &ids](KernelArgs<std::size_t> a) {
        const std::size_t i = a[0], j = a[1];
        return ids[i] == ids[j] ? D(s[i], s[j]) : 0.0;
      },
      true);
}

inline Sample<std::size_t> index_sample(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return Sample<std::size_t>(std::move(idx));
}

template <class Point>
double second_moment_plugin(const Dissimilarity<Point>& D, const Sample<Point>& s) {
  Kernel<std::size_t> sq(
      2,
      [&D, &s](KernelArgs<std::size_t> a) {
        const double d = D(s[a[0]], s[a[1]]);
        return d * d;
      },
      true);
  return std::sqrt(u_statistic(sq, index_sample(s.size())));
}

inline std::size_t argmin_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[best]) best = i;
  }
  return best;
}

}  // namespace detail

// Minimizes the median-of-means risk over the class. Every member is
// evaluated on the same block partition with V = 64 ceil(log(N/delta));
// ties go to the lowest index.
template <class Point>
RiskReport select_partition(const Dissimilarity<Point>& D,
                            const PartitionClass<Point>& cls,
                            const Sample<Point>& s, double delta,
                            Mode mode = Mode::Combinations) {
  const std::size_t N = cls.size();
  const std::size_t minimal = clustering_minimal_sample_size(N, delta);
  if (s.size() < minimal) throw SampleTooSmall(s.size(), minimal);
  MoMPlan plan = MoMPlan::with_blocks(2, clustering_block_count(N, delta), mode);
  plan.delta = delta;

  const auto ids = detail::cell_ids(cls, s);
  const auto idx = detail::index_sample(s.size());
  RiskReport r;
  r.estimator = "mom";
  r.risks.resize(N);
  for (std::size_t c = 0; c < N; ++c) {
    const auto rep = mom_ustat(detail::indexed_clustering_kernel(D, s, ids[c]), idx, plan);
    r.risks[c] = rep.value;
    if (c == 0) {
      r.V = rep.V;
      r.block_sizes = rep.block_sizes;
    }
  }
  r.selected = detail::argmin_first(r.risks);
  r.selected_label = cls[r.selected].label;
  r.sigma_hat = detail::second_moment_plugin(D, s);
  r.deviation_bound =
      r.sigma_hat * std::sqrt(static_cast<double>(ceil_log_inverse(
                                  static_cast<double>(N) / delta)) /
                              static_cast<double>(s.size()));
  return r;
}

/// Minimizer of the classical U-statistic risk, for comparison.
template <class Point>
RiskReport select_partition_classical(const Dissimilarity<Point>& D,
                                      const PartitionClass<Point>& cls,
                                      const Sample<Point>& s) {
  if (s.size() < 2) throw InvalidArgument("clustering risk needs n >= 2");
  const auto ids = detail::cell_ids(cls, s);
  const auto idx = detail::index_sample(s.size());
  RiskReport r;
  r.estimator = "classical";
  r.risks.resize(cls.size());
  for (std::size_t c = 0; c < cls.size(); ++c) {
    r.risks[c] = u_statistic(detail::indexed_clustering_kernel(D, s, ids[c]), idx);
  }
  r.selected = detail::argmin_first(r.risks);
  r.selected_label = cls[r.selected].label;
  return r;
}

// ---------------------------------------------------------------------------
// Monte Carlo oracles for the population risk.

template <class Point>
using PointGenerator = std::function<Point(Rng&)>;

struct OracleRisk {
  double value = 0.0;
  double std_error = 0.0;
};

inline constexpr std::size_t kMinOracleDraws = 10000;

// W(P) for every member from the same N_mc independent pairs (X, X').
template <class Point>
std::vector<OracleRisk> oracle_risks(const Dissimilarity<Point>& D,
                                     const PartitionClass<Point>& cls,
                                     const PointGenerator<Point>& gen,
                                     std::size_t n_mc, SeededStream stream) {
  if (n_mc < kMinOracleDraws) {
    throw InvalidArgument("oracle risk needs at least 10^4 Monte Carlo pairs");
  }
  Rng rng(stream);
  const std::size_t N = cls.size();
  std::vector<CompensatedSum> sum(N), sum_sq(N);
  for (std::size_t t = 0; t < n_mc; ++t) {
    const Point x = gen(rng);
    const Point y = gen(rng);
    const double d = D(x, y);
    for (std::size_t c = 0; c < N; ++c) {
      if (cls[c].same_cell(x, y)) {
        sum[c] += d;
        sum_sq[c] += d * d;
      }
    }
  }
  std::vector<OracleRisk> out(N);
  const double n = static_cast<double>(n_mc);
  for (std::size_t c = 0; c < N; ++c) {
    const double mean = sum[c].value() / n;
    const double var = std::max(0.0, sum_sq[c].value() / n - mean * mean);
    out[c] = {mean, std::sqrt(var / (n - 1.0))};
  }
  return out;
}

template <class Point>
OracleRisk oracle_risk(const Dissimilarity<Point>& D, const CellPartition<Point>& P,
                       const PointGenerator<Point>& gen, std::size_t n_mc,
                       SeededStream stream) {
  return oracle_risks(D, PartitionClass<Point>({P}), gen, n_mc, stream).front();
}

struct LowNoiseRow {
  std::string label;
  double excess_risk = 0.0;   // W(P) - W(P*)
  double disagreement = 0.0;  // max over probes x of P{Phi_P(x,X) != Phi_P*(x,X)}
};

// Both sides of the low-noise condition for every member, using common
// random numbers so that partitions with identical co-membership get
// exactly (0, 0).
template <class Point>
std::vector<LowNoiseRow> low_noise_margin(const Dissimilarity<Point>& D,
                                          const PartitionClass<Point>& cls,
                                          std::size_t star,
                                          const PointGenerator<Point>& gen,
                                          std::size_t n_mc, SeededStream stream,
                                          std::span<const Point> probes) {
  if (star >= cls.size()) throw InvalidArgument("reference partition index out of range");
  if (probes.empty()) throw InvalidArgument("low_noise_margin needs probe points");
  if (n_mc < kMinOracleDraws) {
    throw InvalidArgument("low_noise_margin needs at least 10^4 Monte Carlo draws");
  }
  const std::size_t N = cls.size();
  // Pair draws for the risk gap; a separate stream for single draws.
  Rng pair_rng(stream.child(1));
  std::vector<CompensatedSum> gap(N);
  for (std::size_t t = 0; t < n_mc; ++t) {
    const Point x = gen(pair_rng);
    const Point y = gen(pair_rng);
    const double d = D(x, y);
    const double phi_star = cls[star].same_cell(x, y) ? 1.0 : 0.0;
    for (std::size_t c = 0; c < N; ++c) {
      const double phi = cls[c].same_cell(x, y) ? 1.0 : 0.0;
      if (phi != phi_star) gap[c] += d * (phi - phi_star);
    }
  }

  Rng single_rng(stream.child(2));
  std::vector<std::vector<std::size_t>> probe_cells(N, std::vector<std::size_t>(probes.size()));
  for (std::size_t c = 0; c < N; ++c) {
    for (std::size_t j = 0; j < probes.size(); ++j) probe_cells[c][j] = cls[c].assign(probes[j]);
  }
  std::vector<std::vector<std::size_t>> mismatch(N, std::vector<std::size_t>(probes.size(), 0));
  for (std::size_t t = 0; t < n_mc; ++t) {
    const Point x = gen(single_rng);
    const std::size_t x_star = cls[star].assign(x);
    for (std::size_t c = 0; c < N; ++c) {
      const std::size_t xc = cls[c].assign(x);
      for (std::size_t j = 0; j < probes.size(); ++j) {
        const bool a = probe_cells[c][j] == xc;
        const bool b = probe_cells[star][j] == x_star;
        mismatch[c][j] += (a != b) ? 1 : 0;
      }
    }
  }

  std::vector<LowNoiseRow> out(N);
  const double n = static_cast<double>(n_mc);
  for (std::size_t c = 0; c < N; ++c) {
    out[c].label = cls[c].label;
    out[c].excess_risk = gap[c].value() / n;
    std::size_t worst = 0;
    for (std::size_t j = 0; j < probes.size(); ++j) worst = std::max(worst, mismatch[c][j]);
    out[c].disagreement = static_cast<double>(worst) / n;
  }
  return out;
}

}  // namespace mom
