// mom: median-of-means U-statistics from the command line.
//
//   mom estimate     --data x.txt --kernel product [--blocks V]
//   mom rate-sweep   --config sweep.json --out sweep.csv
//   mom stable-check [--config c.json] [--self-test]
//   mom cluster      --config cluster.json --out risks.csv
//
// Exit status: 0 ok, 2 bad configuration or input, 3 failed self checks,
// 1 anything else.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mom/experiment.hpp"

namespace ex = mom::experiment;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> delta;
  std::optional<std::string> mode;
  std::optional<std::string> out;
  std::optional<std::size_t> replicates;
  std::optional<std::string> data;
  std::optional<std::string> kernel;
  std::optional<std::size_t> blocks;
  std::optional<std::uint64_t> shuffle_seed;
  bool self_test = false;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON configuration file");
  sub->add_option("--seed", o.seed, "Master seed");
  sub->add_option("--delta", o.delta, "Confidence parameter in (0, 1/2)");
  sub->add_option("--mode", o.mode, "combinations | diagonal");
  sub->add_option("--out", o.out, "Output path");
  sub->add_option("--replicates", o.replicates, "Monte Carlo replicates");
}

ex::ExperimentConfig build_config(const std::string& kind, const Overrides& o) {
  ex::ExperimentConfig c = o.config.empty() ? ex::ExperimentConfig{} : ex::load_config(o.config);
  if (!c.kind.empty() && c.kind != kind) {
    throw ex::ConfigError("configuration is for '" + c.kind + "', not '" + kind + "'");
  }
  c.kind = kind;
  if (o.seed) c.seed = *o.seed;
  if (o.delta) c.delta = *o.delta;
  if (o.mode) {
    try {
      c.mode = mom::parse_mode(*o.mode);
    } catch (const mom::InvalidArgument& e) {
      throw ex::ConfigError(e.what());
    }
  }
  if (o.out) c.out = *o.out;
  if (o.replicates) c.replicates = *o.replicates;
  if (o.data) {
    if (kind == "cluster") {
      c.cluster.data = *o.data;
    } else {
      c.data = *o.data;
    }
  }
  if (o.kernel) c.kernel = *o.kernel;
  if (o.blocks) c.blocks = *o.blocks;
  if (o.shuffle_seed) c.shuffle_seed = *o.shuffle_seed;
  if (o.self_test) c.stable_check.self_test = true;
  return c;
}

int do_estimate(const ex::ExperimentConfig& c) {
  const auto r = ex::run_estimate(c);
  std::printf("robust     %s  (%s, V=%zu, tuples=%llu, kernel evals=%llu)\n",
              ex::fmt_double(r.robust.value).c_str(), mom::to_string(r.robust.kind),
              r.robust.V, static_cast<unsigned long long>(r.robust.tuple_count),
              static_cast<unsigned long long>(r.robust.kernel_eval_count));
  std::printf("classical  %s  (kernel evals=%llu)\n", ex::fmt_double(r.classical.value).c_str(),
              static_cast<unsigned long long>(r.classical.kernel_eval_count));
  std::printf("blocks     %s\n", ex::join_sizes(r.robust.block_sizes).c_str());
  if (c.out.empty()) std::fputs(r.record.c_str(), stdout);
  return 0;
}

int do_rate_sweep(const ex::ExperimentConfig& c) {
  const auto r = ex::run_rate_sweep(c);
  if (c.out.empty()) {
    std::fputs(r.csv.c_str(), stdout);
  } else {
    std::fprintf(stderr, "wrote %s and %s.json\n", c.out.c_str(), c.out.c_str());
  }
  return 0;
}

int do_stable_check(const ex::ExperimentConfig& c) {
  const auto r = ex::run_stable_check(c);
  for (const auto& l : r.lines) {
    std::printf("%-4s %-24s alpha=%-4g value=%.6g (%s)\n", l.pass ? "PASS" : "FAIL",
                l.name.c_str(), l.alpha, l.value, l.rule.c_str());
  }
  return r.all_pass() ? 0 : 3;
}

int do_cluster(const ex::ExperimentConfig& c) {
  const auto r = ex::run_cluster(c);
  std::printf("selected   %s (V=%zu, sigma_hat=%s)\n", r.mom.selected_label.c_str(), r.mom.V,
              ex::fmt_double(r.mom.sigma_hat).c_str());
  if (r.classical) std::printf("classical  %s\n", r.classical->selected_label.c_str());
  if (r.sup_deviation) {
    std::printf("sup |W_mom - W| = %s, excess risk = %s\n",
                ex::fmt_double(*r.sup_deviation).c_str(),
                ex::fmt_double(*r.excess_risk).c_str());
  }
  if (c.out.empty()) std::fputs(r.csv.c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Median-of-means estimation for U-statistics"};
  app.require_subcommand(1);

  Overrides o;
  auto* est = app.add_subcommand("estimate", "Robust and classical estimates on a data file");
  auto* sweep = app.add_subcommand("rate-sweep", "Deviation quantiles over a grid of n");
  auto* stable = app.add_subcommand("stable-check", "Self checks of the stable sampler");
  auto* clus = app.add_subcommand("cluster", "Partition selection by robust risk");
  for (auto* s : {est, sweep, stable, clus}) add_common(s, o);
  est->add_option("--data", o.data, "One numeric value per line");
  est->add_option("--kernel", o.kernel, "product | identity | half_sq_diff | sum");
  est->add_option("--blocks", o.blocks, "Override the block count V");
  est->add_option("--shuffle-seed", o.shuffle_seed, "Shuffle points before blocking");
  sweep->add_option("--kernel", o.kernel, "product | identity | half_sq_diff | sum");
  stable->add_flag("--self-test", o.self_test, "Also run a deliberately mismatched comparison");
  clus->add_option("--data", o.data, "Dataset, one comma-separated point per line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (est->parsed()) return do_estimate(build_config("estimate", o));
    if (sweep->parsed()) return do_rate_sweep(build_config("rate-sweep", o));
    if (stable->parsed()) return do_stable_check(build_config("stable-check", o));
    return do_cluster(build_config("cluster", o));
  } catch (const mom::SampleTooSmall& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const mom::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
