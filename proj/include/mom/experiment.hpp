#pragma once

// Experiment harness behind the command-line front end: configuration,
// data files, rate sweeps, stable-law self checks and clustering runs.
// Every run is a deterministic function of its configuration.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mom/blocks.hpp"
#include "mom/clustering.hpp"
#include "mom/error.hpp"
#include "mom/estimators.hpp"
#include "mom/kernels.hpp"
#include "mom/parallel.hpp"
#include "mom/rng.hpp"
#include "mom/stable.hpp"
#include "mom/stats.hpp"

namespace mom::experiment {

using json = nlohmann::json;
using Vec = std::vector<double>;

// Bad configuration or input data; maps to exit code 2.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// ---------------------------------------------------------------------------
// Formatting.

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(v[i]);
  }
  return s;
}

// Compact description of regular-partition block sizes, e.g. "21x64 22x128".
inline std::string summarize_sizes(const std::vector<std::size_t>& sizes) {
  std::string s;
  std::size_t i = 0;
  while (i < sizes.size()) {
    std::size_t j = i;
    while (j < sizes.size() && sizes[j] == sizes[i]) ++j;
    if (!s.empty()) s += ' ';
    s += std::to_string(sizes[i]) + "x" + std::to_string(j - i);
    i = j;
  }
  return s;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open output file '" + path + "'");
  f << content;
}

// ---------------------------------------------------------------------------
// Data files: one record per line, a scalar or comma-separated vector.
// Lines starting with '#' and blank lines are skipped.

inline std::vector<Vec> parse_records(std::string_view text,
                                      const std::string& origin = "<input>") {
  std::vector<Vec> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    if (line[first] == '#') continue;

    Vec rec;
    std::size_t f = 0;
    while (f <= line.size()) {
      std::size_t comma = line.find(',', f);
      if (comma == std::string_view::npos) comma = line.size();
      std::string_view field = line.substr(f, comma - f);
      while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
      while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
      if (!field.empty() && field.front() == '+') field.remove_prefix(1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() ||
          !std::isfinite(v)) {
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": cannot parse '" + std::string(field) + "' as a finite number");
      }
      rec.push_back(v);
      f = comma + 1;
      if (comma == line.size()) break;
    }
    if (!out.empty() && rec.size() != out.front().size()) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": record has " + std::to_string(rec.size()) +
                        " fields, expected " + std::to_string(out.front().size()));
    }
    out.push_back(std::move(rec));
    if (end == text.size()) break;
  }
  return out;
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::vector<Vec> load_records(const std::string& path) {
  return parse_records(read_text(path), path);
}

inline std::vector<double> load_scalars(const std::string& path) {
  const auto recs = load_records(path);
  std::vector<double> out;
  out.reserve(recs.size());
  for (const auto& r : recs) {
    if (r.size() != 1) throw ConfigError(path + ": expected one value per line");
    out.push_back(r[0]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Built-in kernels and scalar input distributions.

inline Kernel<double> kernel_by_id(const std::string& id) {
  if (id == "product") return make_product_kernel();
  if (id == "identity" || id == "mean") return make_identity_kernel();
  if (id == "half_sq_diff" || id == "variance") return make_half_squared_difference_kernel();
  if (id == "sum") return make_sum_kernel(2);
  throw ConfigError("unknown kernel '" + id +
                    "' (expected product, identity, half_sq_diff or sum)");
}

struct DistributionSpec {
  enum class Kind { Normal, Stable } kind = Kind::Normal;
  double scale = 1.0;    // standard deviation for Normal
  StableParams stable;   // for Stable

  std::vector<double> draw(SeededStream stream, std::size_t n) const {
    if (kind == Kind::Stable) return sample_stable(stable, stream, n);
    auto x = sample_normal(stream, n);
    for (auto& v : x) v *= scale;
    return x;
  }

  std::string describe() const {
    if (kind == Kind::Stable) {
      return "stable(gamma=" + fmt_double(stable.gamma) +
             ",alpha=" + fmt_double(stable.alpha) + ")";
    }
    return "normal(sd=" + fmt_double(scale) + ")";
  }
};

// m_h for the built-in kernel/distribution pairs whose mean is known in
// closed form.
inline std::optional<double> analytic_truth(const std::string& kernel,
                                            const DistributionSpec& d) {
  const bool normal = d.kind == DistributionSpec::Kind::Normal;
  const bool mean_zero = normal || d.stable.alpha > 1.0;
  if ((kernel == "product" || kernel == "identity" || kernel == "mean" ||
       kernel == "sum") && mean_zero) {
    return 0.0;
  }
  if ((kernel == "half_sq_diff" || kernel == "variance")) {
    if (normal) return d.scale * d.scale;
    if (d.stable.alpha == 2.0) return 2.0 * d.stable.gamma * d.stable.gamma;
  }
  return std::nullopt;
}

// Optional reference bound whose exceedance frequency a sweep reports.
struct BoundSpec {
  // none | canonical_pair | finite_variance | moment
  std::string kind = "none";
  double sigma = 1.0;  // sigma, or M_p for "moment"
  double q = 2.0;      // degeneracy order for finite_variance
  double p = 2.0;      // moment order for "moment"

  std::optional<double> at(std::size_t m, double delta, std::size_t n) const {
    const double nn = static_cast<double>(n);
    const double md = static_cast<double>(m);
    const double L = static_cast<double>(ceil_log_inverse(1.0 / delta));
    if (kind == "none") return std::nullopt;
    if (kind == "canonical_pair") {
      return 512.0 * sigma * (1.0 + std::log(1.0 / delta)) / nn;
    }
    if (kind == "finite_variance") {
      const double K = std::pow(2.0, 3.5 * md + 1.0) * std::pow(md, md / 2.0);
      return K * sigma * std::pow(L / nn, q / 2.0);
    }
    if (kind == "moment") {
      const double K = std::pow(2.0, 4.0 * md + 1.0) * std::pow(md, md / 2.0);
      return K * sigma * std::pow(L / nn, md * (p - 1.0) / p);
    }
    throw ConfigError("unknown bound kind '" + kind + "'");
  }
};

// ---------------------------------------------------------------------------
// Clustering scenarios.

struct PartitionSpec {
  std::string label;
  std::string type;            // threshold | halfplane | nearest_center
  std::size_t feature = 0;     // threshold
  double threshold = 0.0;      // threshold / halfplane offset
  Vec normal;                  // halfplane
  std::vector<Vec> centers;    // nearest_center
};

struct GeneratorSpec {
  std::vector<Vec> means;
  Vec weights;      // mixture weights; empty means equal
  double sd = 1.0;
  // When set, each point carries a trailing weight coordinate |t| with
  // t ~ S(gamma, alpha), independent of the features.
  std::optional<StableParams> weight_noise;
};

struct ClusterSpec {
  std::string data;                       // dataset path, or empty
  std::optional<GeneratorSpec> generator;
  std::size_t n = 0;                      // sample size when generated
  std::string dissimilarity = "squared_euclidean";
  std::vector<PartitionSpec> partitions;
  std::size_t oracle_draws = 1000000;
  bool compare_classical = false;
};

inline std::size_t feature_dim(const ClusterSpec& c) {
  if (c.generator) return c.generator->means.front().size();
  return 0;
}

inline Dissimilarity<Vec> make_dissimilarity(const std::string& name) {
  if (name == "squared_euclidean") {
    return {[](const Vec& a, const Vec& b) {
              double s = 0.0;
              for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = a[i] - b[i];
                s += d * d;
              }
              return s;
            },
            name};
  }
  if (name == "euclidean") {
    return {[](const Vec& a, const Vec& b) {
              double s = 0.0;
              for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = a[i] - b[i];
                s += d * d;
              }
              return std::sqrt(s);
            },
            name};
  }
  if (name == "weighted_squared_euclidean") {
    // Last coordinate is a nonnegative per-point weight.
    return {[](const Vec& a, const Vec& b) {
              const std::size_t d = a.size() - 1;
              double s = 0.0;
              for (std::size_t i = 0; i < d; ++i) {
                const double t = a[i] - b[i];
                s += t * t;
              }
              return s * a[d] * b[d];
            },
            name};
  }
  throw ConfigError("unknown dissimilarity '" + name +
                    "' (expected squared_euclidean, euclidean or "
                    "weighted_squared_euclidean)");
}

inline CellPartition<Vec> make_partition(const PartitionSpec& p) {
  CellPartition<Vec> cp;
  cp.label = p.label;
  if (p.type == "threshold") {
    cp.K = 2;
    cp.assign = [f = p.feature, t = p.threshold](const Vec& x) -> std::size_t {
      return x.at(f) >= t ? 1 : 0;
    };
  } else if (p.type == "halfplane") {
    if (p.normal.empty()) throw ConfigError("halfplane '" + p.label + "' needs a normal");
    cp.K = 2;
    cp.assign = [u = p.normal, t = p.threshold](const Vec& x) -> std::size_t {
      double s = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * x.at(i);
      return s >= t ? 1 : 0;
    };
  } else if (p.type == "nearest_center") {
    if (p.centers.empty()) throw ConfigError("partition '" + p.label + "' needs centers");
    cp.K = p.centers.size();
    cp.assign = [cs = p.centers](const Vec& x) -> std::size_t {
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t c = 0; c < cs.size(); ++c) {
        double d = 0.0;
        for (std::size_t i = 0; i < cs[c].size(); ++i) {
          const double t = x.at(i) - cs[c][i];
          d += t * t;
        }
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      return best;
    };
  } else {
    throw ConfigError("unknown partition type '" + p.type +
                      "' (expected threshold, halfplane or nearest_center)");
  }
  return cp;
}

inline PartitionClass<Vec> make_class(const ClusterSpec& c) {
  std::vector<CellPartition<Vec>> members;
  for (const auto& p : c.partitions) members.push_back(make_partition(p));
  try {
    return PartitionClass<Vec>(std::move(members));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

// Gaussian mixture draw; the weight coordinate, if any, comes last.
inline PointGenerator<Vec> make_generator(const GeneratorSpec& g,
                                          bool with_weight = true) {
  return [g, with_weight](Rng& rng) {
    std::size_t comp = 0;
    const std::size_t K = g.means.size();
    if (K > 1) {
      const double u = rng.uniform_open();
      double acc = 0.0;
      comp = K - 1;
      for (std::size_t k = 0; k < K; ++k) {
        acc += g.weights.empty() ? 1.0 / static_cast<double>(K) : g.weights[k];
        if (u < acc) {
          comp = k;
          break;
        }
      }
    }
    Vec x(g.means[comp].size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = g.means[comp][i] + g.sd * rng.normal();
    if (g.weight_noise && with_weight) {
      const double u = std::numbers::pi * (rng.uniform_open() - 0.5);
      const double w = rng.exponential();
      x.push_back(std::fabs(g.weight_noise->gamma * cms_unit(g.weight_noise->alpha, u, w)));
    }
    return x;
  };
}

inline std::vector<Vec> generate_points(const GeneratorSpec& g, std::size_t n,
                                        SeededStream stream) {
  Rng rng(stream);
  const auto gen = make_generator(g);
  std::vector<Vec> pts(n);
  for (auto& p : pts) p = gen(rng);
  return pts;
}

// Population risks W(P) of every member. With a weight coordinate and the
// weighted dissimilarity, independence gives W(P) = (E w)^2 E[D_0 Phi_P]
// with D_0 the unweighted squared distance, so only light-tailed features
// are simulated.
inline std::vector<OracleRisk> cluster_oracle(const ClusterSpec& c,
                                              SeededStream stream) {
  if (!c.generator) throw ConfigError("oracle risk needs a generator");
  const auto cls = make_class(c);
  if (c.generator->weight_noise && c.dissimilarity == "weighted_squared_euclidean") {
    const double ew = stable_mean_abs(*c.generator->weight_noise);
    auto base = oracle_risks(make_dissimilarity("squared_euclidean"), cls,
                             make_generator(*c.generator, false), c.oracle_draws, stream);
    for (auto& r : base) {
      r.value *= ew * ew;
      r.std_error *= ew * ew;
    }
    return base;
  }
  return oracle_risks(make_dissimilarity(c.dissimilarity), cls,
                      make_generator(*c.generator), c.oracle_draws, stream);
}

// ---------------------------------------------------------------------------
// Configuration.

struct StableCheckSpec {
  std::vector<double> alphas = {1.2, 1.5, 2.0};
  double gamma = 1.0;
  std::size_t N = 100000;        // sum-stability and symmetry sample size
  std::size_t hill_N = 1000000;
  std::size_t hill_k = 10000;
  bool self_test = false;        // mismatched-law harness sanity check
};

struct ExperimentConfig {
  std::string kind;  // estimate | rate-sweep | stable-check | cluster
  std::string kernel = "product";
  DistributionSpec distribution;
  std::vector<std::size_t> n_grid;
  double delta = 0.05;
  std::size_t replicates = 500;
  Mode mode = Mode::Combinations;
  std::uint64_t seed = 1;
  std::string out;
  std::string data;
  std::optional<std::size_t> blocks;
  std::optional<std::uint64_t> shuffle_seed;
  std::optional<double> truth;
  BoundSpec bound;
  StableCheckSpec stable_check;
  ClusterSpec cluster;
};

namespace detail {

inline std::vector<Vec> parse_matrix(const json& j, const char* what) {
  std::vector<Vec> out;
  for (const auto& row : j) out.push_back(row.get<Vec>());
  if (out.empty()) throw ConfigError(std::string(what) + " must be a nonempty list");
  for (const auto& r : out) {
    if (r.size() != out.front().size() || r.empty()) {
      throw ConfigError(std::string(what) + " rows must share a positive length");
    }
  }
  return out;
}

inline StableParams parse_stable(const json& j) {
  StableParams p;
  p.gamma = j.value("gamma", 1.0);
  p.alpha = j.value("alpha", 2.0);
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return p;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  ExperimentConfig c;
  try {
    c.kind = j.value("experiment", std::string());
    c.kernel = j.value("kernel", c.kernel);
    if (j.contains("distribution")) {
      const auto& d = j.at("distribution");
      const auto type = d.value("type", std::string("normal"));
      if (type == "normal") {
        c.distribution.kind = DistributionSpec::Kind::Normal;
        c.distribution.scale = d.value("sd", 1.0);
        if (!(c.distribution.scale > 0.0)) throw ConfigError("normal sd must be positive");
      } else if (type == "stable") {
        c.distribution.kind = DistributionSpec::Kind::Stable;
        c.distribution.stable = detail::parse_stable(d);
      } else {
        throw ConfigError("unknown distribution type '" + type + "'");
      }
    }
    if (j.contains("n_grid")) c.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
    c.delta = j.value("delta", c.delta);
    c.replicates = j.value("replicates", c.replicates);
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.out = j.value("out", c.out);
    c.data = j.value("data", c.data);
    if (j.contains("blocks")) c.blocks = j.at("blocks").get<std::size_t>();
    if (j.contains("shuffle_seed")) c.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
    if (j.contains("truth")) c.truth = j.at("truth").get<double>();
    if (j.contains("bound")) {
      const auto& b = j.at("bound");
      c.bound.kind = b.value("kind", std::string("none"));
      c.bound.sigma = b.value("sigma", 1.0);
      c.bound.q = b.value("q", 2.0);
      c.bound.p = b.value("p", 2.0);
    }
    if (j.contains("stable_check")) {
      const auto& s = j.at("stable_check");
      auto& sc = c.stable_check;
      if (s.contains("alphas")) sc.alphas = s.at("alphas").get<std::vector<double>>();
      sc.gamma = s.value("gamma", sc.gamma);
      sc.N = s.value("N", sc.N);
      sc.hill_N = s.value("hill_N", sc.hill_N);
      sc.hill_k = s.value("hill_k", sc.hill_k);
      sc.self_test = s.value("self_test", sc.self_test);
    }
    if (j.contains("cluster")) {
      const auto& cj = j.at("cluster");
      auto& cl = c.cluster;
      cl.data = cj.value("data", std::string());
      cl.n = cj.value("n", std::size_t{0});
      cl.dissimilarity = cj.value("dissimilarity", cl.dissimilarity);
      cl.oracle_draws = cj.value("oracle_draws", cl.oracle_draws);
      cl.compare_classical = cj.value("compare_classical", false);
      if (cj.contains("generator")) {
        const auto& g = cj.at("generator");
        GeneratorSpec gs;
        const auto type = g.value("type", std::string("gaussian_mixture"));
        if (type != "gaussian_mixture") throw ConfigError("unknown generator type '" + type + "'");
        gs.means = detail::parse_matrix(g.at("means"), "generator means");
        if (g.contains("weights")) gs.weights = g.at("weights").get<Vec>();
        gs.sd = g.value("sd", 1.0);
        if (g.contains("weight_noise")) gs.weight_noise = detail::parse_stable(g.at("weight_noise"));
        cl.generator = gs;
      }
      if (cj.contains("class")) {
        for (const auto& pj : cj.at("class")) {
          PartitionSpec p;
          p.label = pj.at("label").get<std::string>();
          p.type = pj.at("type").get<std::string>();
          p.feature = pj.value("feature", std::size_t{0});
          p.threshold = pj.value("threshold", pj.value("offset", 0.0));
          if (pj.contains("normal")) p.normal = pj.at("normal").get<Vec>();
          if (pj.contains("centers")) p.centers = detail::parse_matrix(pj.at("centers"), "centers");
          cl.partitions.push_back(std::move(p));
        }
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

inline void validate_delta(double delta) {
  if (!(delta > 0.0 && delta < 0.5)) {
    throw ConfigError("delta must lie in (0, 1/2), got " + fmt_double(delta));
  }
}

// Checks run before any computation.
inline void validate(const ExperimentConfig& c) {
  if (c.kind == "estimate") {
    validate_delta(c.delta);
    kernel_by_id(c.kernel);
    if (c.data.empty()) throw ConfigError("estimate needs a data file");
  } else if (c.kind == "rate-sweep") {
    validate_delta(c.delta);
    const auto k = kernel_by_id(c.kernel);
    std::vector<std::size_t> sorted = c.n_grid;
    std::sort(sorted.begin(), sorted.end());
    if (std::unique(sorted.begin(), sorted.end()) != sorted.end() || sorted.size() < 4) {
      throw ConfigError("rate-sweep needs at least 4 distinct n values");
    }
    if (c.replicates < 100) throw ConfigError("rate-sweep needs at least 100 replicates");
    const std::size_t minimal = minimal_sample_size(k.arity(), c.delta);
    for (std::size_t n : c.n_grid) {
      if (n < minimal) {
        throw ConfigError("n = " + std::to_string(n) + " is below the minimal admissible n = " +
                          std::to_string(minimal) + " for delta = " + fmt_double(c.delta) +
                          " and m = " + std::to_string(k.arity()));
      }
      if (n / block_count(k.arity(), c.delta, n) < k.arity()) {
        throw ConfigError("n = " + std::to_string(n) + " leaves blocks smaller than m");
      }
    }
    if (!c.truth && !analytic_truth(c.kernel, c.distribution)) {
      throw ConfigError("no analytic mean for kernel '" + c.kernel + "' under " +
                        c.distribution.describe() + "; set \"truth\"");
    }
    c.bound.at(k.arity(), c.delta, c.n_grid.front());
  } else if (c.kind == "stable-check") {
    const auto& s = c.stable_check;
    if (s.alphas.empty()) throw ConfigError("stable-check needs at least one alpha");
    for (double a : s.alphas) {
      if (!(a > 0.0 && a <= 2.0)) throw ConfigError("alpha must lie in (0, 2]");
    }
    if (!(s.gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (s.N < 1000) throw ConfigError("stable-check N must be >= 1000");
    if (s.hill_k < 50 || 2 * s.hill_k >= s.hill_N) {
      throw ConfigError("stable-check needs 50 <= hill_k < hill_N / 2");
    }
  } else if (c.kind == "cluster") {
    validate_delta(c.delta);
    const auto& cl = c.cluster;
    if (cl.partitions.empty()) throw ConfigError("cluster needs a nonempty partition class");
    make_class(cl);
    make_dissimilarity(cl.dissimilarity);
    if (cl.data.empty() && !cl.generator) {
      throw ConfigError("cluster needs a dataset or a generator");
    }
    if (cl.data.empty() && cl.n == 0) throw ConfigError("cluster generator needs n");
    if (cl.generator) {
      for (double w : cl.generator->weights) {
        if (!(w >= 0.0)) throw ConfigError("mixture weights must be nonnegative");
      }
      if (!cl.generator->weights.empty() &&
          cl.generator->weights.size() != cl.generator->means.size()) {
        throw ConfigError("mixture weights and means differ in length");
      }
      if (cl.oracle_draws < kMinOracleDraws) throw ConfigError("oracle_draws must be >= 10^4");
    }
    if (cl.data.empty()) {
      const std::size_t minimal =
          clustering_minimal_sample_size(cl.partitions.size(), c.delta);
      if (cl.n < minimal) {
        throw ConfigError("cluster n = " + std::to_string(cl.n) +
                          " is below the minimal admissible n = " + std::to_string(minimal));
      }
    }
  } else {
    throw ConfigError("unknown experiment kind '" + c.kind +
                      "' (expected estimate, rate-sweep, stable-check or cluster)");
  }
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateOutput {
  EstimateReport robust;
  EstimateReport classical;
  MoMPlan plan;
  std::string record;  // JSON
};

inline EstimateOutput run_estimate(const ExperimentConfig& c) {
  validate(c);
  const auto k = kernel_by_id(c.kernel);
  const Sample<double> s(load_scalars(c.data));
  EstimateOutput out;
  try {
    out.plan = c.blocks ? MoMPlan::with_blocks(k.arity(), *c.blocks, c.mode)
                        : MoMPlan::from_confidence(k.arity(), c.delta, s.size(), c.mode);
  } catch (const SampleTooSmall& e) {
    throw ConfigError(std::string("plan hypothesis violated: ") + e.what());
  }
  if (!c.blocks) out.plan.delta = c.delta;
  out.plan.shuffle_seed = c.shuffle_seed;
  try {
    out.plan.validate(s.size());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  out.robust = mom_ustat(k, s, out.plan);
  out.classical = classical_estimate(k, s);

  json r;
  r["experiment"] = "estimate";
  r["kernel"] = c.kernel;
  r["n"] = s.size();
  r["delta"] = c.delta;
  r["mode"] = to_string(c.mode);
  r["V"] = out.robust.V;
  r["block_sizes"] = out.robust.block_sizes;
  r["tuple_count"] = out.robust.tuple_count;
  r["robust"] = {{"value", out.robust.value},
                 {"kernel_eval_count", out.robust.kernel_eval_count}};
  r["classical"] = {{"value", out.classical.value},
                    {"kernel_eval_count", out.classical.kernel_eval_count}};
  if (c.shuffle_seed) r["shuffle_seed"] = *c.shuffle_seed;
  out.record = r.dump(2) + "\n";
  if (!c.out.empty()) write_file(c.out, out.record);
  return out;
}

// ---------------------------------------------------------------------------
// rate-sweep

inline constexpr const char* kRateSweepHeader =
    "estimator,n,delta,replicates,q50,q90,q1md,slope_group,nonfinite_count";

struct DeviationRow {
  std::string estimator;
  std::size_t n = 0;
  double delta = 0.0;
  std::size_t replicates = 0;
  std::vector<double> levels;     // 0.5, 0.9, 1 - delta
  std::vector<double> quantiles;  // of |estimate - truth|
  double slope = 0.0;             // log q_{1-delta} against log n, per estimator
  std::size_t nonfinite_count = 0;
  std::optional<double> bound;
  std::optional<double> exceedance;  // fraction of replicates above bound
  std::size_t V = 0;
  std::string mode;
  std::vector<std::size_t> block_sizes;
};

struct RateSweepResult {
  std::vector<DeviationRow> rows;
  std::string csv;
  std::string summary;  // JSON with plans and exceedance frequencies
};

inline const std::vector<std::string>& sweep_estimators() {
  static const std::vector<std::string> names = {"classical", "mom_combinations",
                                                 "mom_diagonal"};
  return names;
}

inline RateSweepResult run_rate_sweep(const ExperimentConfig& c) {
  validate(c);
  const auto k = kernel_by_id(c.kernel);
  const std::size_t m = k.arity();
  const double truth = c.truth ? *c.truth : *analytic_truth(c.kernel, c.distribution);
  const std::size_t R = c.replicates;
  const auto& names = sweep_estimators();
  const std::vector<double> levels = {0.5, 0.9, 1.0 - c.delta};

  RateSweepResult res;
  std::vector<std::vector<std::size_t>> group(names.size());
  for (std::size_t g = 0; g < c.n_grid.size(); ++g) {
    const std::size_t n = c.n_grid[g];
    MoMPlan comb = MoMPlan::from_confidence(m, c.delta, n, Mode::Combinations);
    MoMPlan diag = MoMPlan::from_confidence(m, c.delta, n, Mode::Diagonal);
    comb.shuffle_seed = diag.shuffle_seed = c.shuffle_seed;
    const auto sizes = regular_partition(n, comb.V).sizes();

    // dev[e][r]; non-finite estimates become +inf deviations.
    std::vector<std::vector<double>> dev(names.size(), std::vector<double>(R));
    parallel_for(R, [&](std::size_t r) {
      const Sample<double> s(c.distribution.draw(SeededStream{c.seed, r}.child(n), n));
      auto deviation = [&](auto&& f) {
        try {
          const double v = f();
          return std::isfinite(v) ? std::fabs(v - truth) : INFINITY;
        } catch (const PoisonedValue&) {
          return static_cast<double>(INFINITY);
        }
      };
      dev[0][r] = deviation([&] { return u_statistic(k, s); });
      dev[1][r] = deviation([&] { return mom_ustat(k, s, comb).value; });
      dev[2][r] = deviation([&] { return mom_ustat(k, s, diag).value; });
    });

    for (std::size_t e = 0; e < names.size(); ++e) {
      DeviationRow row;
      row.estimator = names[e];
      row.n = n;
      row.delta = c.delta;
      row.replicates = R;
      row.levels = levels;
      for (double lv : levels) row.quantiles.push_back(quantile_type1(dev[e], lv));
      for (double d : dev[e]) row.nonfinite_count += std::isfinite(d) ? 0 : 1;
      row.bound = c.bound.at(m, c.delta, n);
      if (row.bound) {
        std::size_t above = 0;
        for (double d : dev[e]) above += d > *row.bound ? 1 : 0;
        row.exceedance = static_cast<double>(above) / static_cast<double>(R);
      }
      if (e == 0) {
        row.mode = "classical";
      } else {
        row.V = comb.V;
        row.mode = e == 1 ? "combinations" : "diagonal";
        row.block_sizes = sizes;
      }
      group[e].push_back(res.rows.size());
      res.rows.push_back(std::move(row));
    }
  }

  for (auto& idx : group) {
    std::vector<double> ns, qs;
    for (std::size_t i : idx) {
      ns.push_back(static_cast<double>(res.rows[i].n));
      qs.push_back(res.rows[i].quantiles[2]);
    }
    double slope = NAN;
    try {
      slope = log_log_slope(ns, qs);
    } catch (const InvalidArgument&) {
    }
    for (std::size_t i : idx) res.rows[i].slope = slope;
  }

  // Estimator-major row order.
  std::string csv = std::string(kRateSweepHeader) + "\n";
  json summary;
  summary["experiment"] = "rate-sweep";
  summary["kernel"] = c.kernel;
  summary["distribution"] = c.distribution.describe();
  summary["truth"] = truth;
  summary["seed"] = c.seed;
  summary["bound"] = c.bound.kind;
  summary["rows"] = json::array();
  for (const auto& idx : group) {
    for (std::size_t i : idx) {
      const auto& r = res.rows[i];
      csv += r.estimator + "," + std::to_string(r.n) + "," + fmt_double(r.delta) + "," +
             std::to_string(r.replicates) + "," + fmt_double(r.quantiles[0]) + "," +
             fmt_double(r.quantiles[1]) + "," + fmt_double(r.quantiles[2]) + "," +
             fmt_double(r.slope) + "," + std::to_string(r.nonfinite_count) + "\n";
      json jr;
      jr["estimator"] = r.estimator;
      jr["n"] = r.n;
      jr["mode"] = r.mode;
      jr["V"] = r.V;
      jr["block_sizes"] = summarize_sizes(r.block_sizes);
      jr["q1md"] = fmt_double(r.quantiles[2]);
      jr["slope"] = fmt_double(r.slope);
      jr["nonfinite_count"] = r.nonfinite_count;
      if (r.bound) {
        jr["bound"] = fmt_double(*r.bound);
        jr["exceedance"] = fmt_double(*r.exceedance);
      }
      summary["rows"].push_back(jr);
    }
  }
  res.csv = std::move(csv);
  res.summary = summary.dump(2) + "\n";
  if (!c.out.empty()) {
    write_file(c.out, res.csv);
    write_file(c.out + ".json", res.summary);
  }
  return res;
}

// ---------------------------------------------------------------------------
// stable-check

struct CheckLine {
  std::string name;
  double alpha = 0.0;
  double value = 0.0;
  std::string rule;  // e.g. "< 0.015"
  bool pass = false;
};

struct StableCheckReport {
  std::vector<CheckLine> lines;
  std::string csv;
  bool all_pass() const {
    for (const auto& l : lines) {
      if (!l.pass) return false;
    }
    return true;
  }
};

inline constexpr double kKsThreshold = 0.015;
inline constexpr double kSignTolerance = 0.005;
inline constexpr double kHillTolerance = 0.15;
inline constexpr double kMismatchKsFloor = 0.05;

inline StableCheckReport run_stable_check(const ExperimentConfig& c) {
  validate(c);
  const auto& sc = c.stable_check;
  StableCheckReport rep;
  std::uint64_t stream = 0;
  for (double alpha : sc.alphas) {
    const StableParams p{sc.gamma, alpha};
    const std::size_t sum_n = alpha == 2.0 ? 4 : 8;
    const double ks = sum_stability_check(p, sum_n, {c.seed, stream++}, sc.N);
    rep.lines.push_back({"sum_stability_n" + std::to_string(sum_n), alpha, ks, "< 0.015",
                         ks < kKsThreshold});

    const auto x = sample_stable(p, {c.seed, stream++}, sc.N);
    const double frac = positive_fraction(x);
    rep.lines.push_back({"sign_symmetry", alpha, frac, "0.5 +- 0.005",
                         std::fabs(frac - 0.5) <= kSignTolerance});

    if (alpha == 2.0) {
      const StableParams unit_var{1.0 / std::numbers::sqrt2, 2.0};
      const auto g = sample_stable(unit_var, {c.seed, stream++}, sc.N);
      const auto z = sample_normal({c.seed, stream++}, sc.N);
      const double d = ks_two_sample(g, z);
      rep.lines.push_back({"ks_vs_normal", alpha, d, "< 0.015", d < kKsThreshold});
    } else {
      const auto big = sample_stable(p, {c.seed, stream++}, sc.hill_N);
      const double a_hat = tail_exponent_estimate(big, sc.hill_k);
      rep.lines.push_back({"hill_tail_index", alpha, a_hat, "alpha +- 0.15",
                           std::fabs(a_hat - alpha) <= kHillTolerance});
    }
  }
  if (sc.self_test) {
    const auto a = sample_stable({sc.gamma, 1.2}, {c.seed, stream++}, sc.N);
    const auto b = sample_stable({sc.gamma, 2.0}, {c.seed, stream++}, sc.N);
    const double d = ks_two_sample(a, b);
    rep.lines.push_back({"mismatch_ks_1.2_vs_2.0", 1.2, d, "> 0.05", d > kMismatchKsFloor});
  }
  std::string csv = "check,alpha,value,rule,pass\n";
  for (const auto& l : rep.lines) {
    csv += l.name + "," + fmt_double(l.alpha) + "," + fmt_double(l.value) + "," + l.rule +
           "," + (l.pass ? "1" : "0") + "\n";
  }
  rep.csv = std::move(csv);
  if (!c.out.empty()) write_file(c.out, rep.csv);
  return rep;
}

// ---------------------------------------------------------------------------
// cluster

struct ClusterOutput {
  RiskReport mom;
  std::optional<RiskReport> classical;
  std::vector<OracleRisk> oracle;     // empty without a generator
  std::optional<double> sup_deviation;
  std::optional<double> excess_risk;  // of the median-of-means selection
  std::optional<double> classical_excess_risk;
  std::string csv;
  std::string summary;
};

inline constexpr const char* kClusterHeader =
    "label,estimator,risk,oracle_risk,oracle_se,abs_deviation,selected";

// One clustering run. `oracle` may be supplied to reuse population risks
// across runs; otherwise they are simulated when a generator exists.
inline ClusterOutput run_cluster(const ExperimentConfig& c,
                                 const std::vector<OracleRisk>* oracle = nullptr) {
  validate(c);
  const auto& cl = c.cluster;
  const auto cls = make_class(cl);
  const auto D = make_dissimilarity(cl.dissimilarity);
  std::vector<Vec> pts = cl.data.empty()
                             ? generate_points(*cl.generator, cl.n, SeededStream{c.seed, 0})
                             : load_records(cl.data);
  if (pts.size() < 2) throw ConfigError("cluster dataset needs at least 2 points");
  if (cl.dissimilarity == "weighted_squared_euclidean" && pts.front().size() < 2) {
    throw ConfigError("weighted dissimilarity needs a trailing weight column");
  }
  const Sample<Vec> s(std::move(pts));

  ClusterOutput out;
  try {
    out.mom = select_partition(D, cls, s, c.delta, c.mode);
  } catch (const SampleTooSmall& e) {
    throw ConfigError(std::string("plan hypothesis violated: ") + e.what());
  }
  if (cl.compare_classical) out.classical = select_partition_classical(D, cls, s);
  if (oracle) {
    out.oracle = *oracle;
  } else if (cl.generator) {
    out.oracle = cluster_oracle(cl, SeededStream{c.seed, 0}.child(0xC1u));
  }

  const bool have_oracle = !out.oracle.empty();
  if (have_oracle) {
    double w_star = INFINITY;
    for (const auto& o : out.oracle) w_star = std::min(w_star, o.value);
    double sup = 0.0;
    for (std::size_t i = 0; i < cls.size(); ++i) {
      sup = std::max(sup, std::fabs(out.mom.risks[i] - out.oracle[i].value));
    }
    out.sup_deviation = sup;
    out.excess_risk = out.oracle[out.mom.selected].value - w_star;
    if (out.classical) {
      out.classical_excess_risk = out.oracle[out.classical->selected].value - w_star;
    }
  }

  std::string csv = std::string(kClusterHeader) + "\n";
  auto emit = [&](const RiskReport& r) {
    for (std::size_t i = 0; i < cls.size(); ++i) {
      csv += cls[i].label + "," + r.estimator + "," + fmt_double(r.risks[i]) + ",";
      if (have_oracle) {
        csv += fmt_double(out.oracle[i].value) + "," + fmt_double(out.oracle[i].std_error) +
               "," + fmt_double(std::fabs(r.risks[i] - out.oracle[i].value));
      } else {
        csv += ",,";
      }
      csv += std::string(",") + (i == r.selected ? "1" : "0") + "\n";
    }
  };
  emit(out.mom);
  if (out.classical) emit(*out.classical);

  json sm;
  sm["experiment"] = "cluster";
  sm["n"] = s.size();
  sm["delta"] = c.delta;
  sm["mode"] = to_string(c.mode);
  sm["V"] = out.mom.V;
  sm["block_sizes"] = summarize_sizes(out.mom.block_sizes);
  sm["selected"] = out.mom.selected_label;
  sm["sigma_hat"] = fmt_double(out.mom.sigma_hat);
  sm["deviation_rate"] = fmt_double(out.mom.deviation_bound);
  if (out.classical) sm["classical_selected"] = out.classical->selected_label;
  if (out.sup_deviation) sm["sup_deviation"] = fmt_double(*out.sup_deviation);
  if (out.excess_risk) sm["excess_risk"] = fmt_double(*out.excess_risk);
  if (out.classical_excess_risk) sm["classical_excess_risk"] = fmt_double(*out.classical_excess_risk);
  out.csv = std::move(csv);
  out.summary = sm.dump(2) + "\n";
  if (!c.out.empty()) {
    write_file(c.out, out.csv);
    write_file(c.out + ".json", out.summary);
  }
  return out;
}

}  // namespace mom::experiment
