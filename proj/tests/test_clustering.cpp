#include <catch_amalgamated.hpp>

#include <array>
#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include "mom/clustering.hpp"

using Catch::Approx;
using mom::CellPartition;
using mom::Dissimilarity;
using mom::PartitionClass;
using mom::Sample;
using Pt = std::array<double, 2>;

namespace {

const Dissimilarity<double> kAbs{[](double a, double b) { return std::fabs(a - b); }, "abs"};
const Dissimilarity<Pt> kSq{[](const Pt& a, const Pt& b) {
                              const double dx = a[0] - b[0], dy = a[1] - b[1];
                              return dx * dx + dy * dy;
                            },
                            "sq"};

CellPartition<double> split_at(double t, std::string label) {
  return {2, [t](double x) -> std::size_t { return x >= t ? 1 : 0; }, std::move(label)};
}

CellPartition<double> one_cell() { return {1, [](double) -> std::size_t { return 0; }, "one"}; }

CellPartition<Pt> halfplane(double angle, std::string label) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {2, [c, s](const Pt& x) -> std::size_t { return c * x[0] + s * x[1] >= 0 ? 1 : 0; },
          std::move(label)};
}

mom::PointGenerator<Pt> mixture(double sep) {
  return [sep](mom::Rng& r) {
    const double mx = r.uniform_open() < 0.5 ? -sep : sep;
    const double x = mx + r.normal();
    return Pt{x, r.normal()};
  };
}

Sample<Pt> draw(const mom::PointGenerator<Pt>& g, std::size_t n, mom::SeededStream s) {
  mom::Rng r(s);
  std::vector<Pt> pts(n);
  for (auto& p : pts) p = g(r);
  return Sample<Pt>(std::move(pts));
}

}  // namespace

TEST_CASE("clustering kernel") {
  const auto p = split_at(5.0, "s");
  const auto k = mom::clustering_kernel(kAbs, p);
  CHECK(k.arity() == 2);
  CHECK(k.symmetric());
  CHECK(k(1.0, 3.5) == 2.5);
  CHECK(k(1.0, 7.0) == 0.0);
  CHECK(k(2.0, 2.0) == 0.0);
  const Dissimilarity<double> one{[](double, double) { return 1.0; }, "one"};
  CHECK(mom::clustering_kernel(one, p)(6.0, 6.0) == 1.0);
}

TEST_CASE("cell relabeling leaves the kernel unchanged") {
  const CellPartition<double> a{3, [](double x) -> std::size_t { return x < 0 ? 0 : x < 1 ? 1 : 2; }, "a"};
  const CellPartition<double> b{3, [](double x) -> std::size_t { return x < 0 ? 2 : x < 1 ? 0 : 1; }, "b"};
  const auto ka = mom::clustering_kernel(kAbs, a), kb = mom::clustering_kernel(kAbs, b);
  for (double x = -2; x < 3; x += 0.31) {
    for (double y = -2; y < 3; y += 0.29) CHECK(ka(x, y) == kb(x, y));
  }
}

TEST_CASE("empirical clustering risk") {
  const Dissimilarity<double> c{[](double, double) { return 2.5; }, "const"};
  CHECK(mom::empirical_clustering_risk(c, one_cell(), Sample<double>({1, 2, 3, 4})) == 2.5);
  const CellPartition<double> singletons{4, [](double x) { return static_cast<std::size_t>(x); },
                                         "singletons"};
  CHECK(mom::empirical_clustering_risk(kAbs, singletons, Sample<double>({0, 1, 2, 3})) == 0.0);
  CHECK(mom::empirical_clustering_risk(kAbs, split_at(5, "s"), Sample<double>({0, 1, 10})) ==
        Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(mom::empirical_clustering_risk(kAbs, one_cell(), Sample<double>({1})),
                  mom::InvalidArgument);
}

TEST_CASE("median-of-means clustering risk") {
  SECTION("constant dissimilarity") {
    const Dissimilarity<double> c{[](double, double) { return 0.75; }, "const"};
    std::vector<double> x(400);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
    const auto r = mom::mom_clustering_risk(c, one_cell(), Sample<double>(x), 0.05);
    CHECK(r.value == 0.75);
    CHECK(r.V == 64 * 3);
  }
  SECTION("bounded dissimilarity gives an estimate in [0, 1]") {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0, 1);
    const Dissimilarity<double> b{[](double a, double c) { return std::fabs(a - c); }, "b"};
    for (int t = 0; t < 20; ++t) {
      std::vector<double> x(200);
      for (auto& v : x) v = u(gen);
      const auto r = mom::mom_clustering_risk(b, split_at(0.5, "s"), Sample<double>(x),
                                              mom::MoMPlan::with_blocks(2, 9));
      CHECK(r.value >= 0.0);
      CHECK(r.value <= 1.0);
      CHECK(mom::empirical_clustering_risk(b, split_at(0.5, "s"), Sample<double>(x)) <= 1.0);
    }
  }
  SECTION("three blocks with a product-form dissimilarity") {
    // D(x, y) = x y on one cell: block means 1.5, 3.5, 5.5; pairs 5.25, 8.25, 19.25.
    const Dissimilarity<double> prod{[](double a, double b) { return a * b; }, "prod"};
    const auto r = mom::mom_clustering_risk(prod, one_cell(), Sample<double>({1, 2, 3, 4, 5, 6}),
                                            mom::MoMPlan::with_blocks(2, 3));
    CHECK(r.value == 8.25);
  }
}

TEST_CASE("block counts for a class") {
  CHECK(mom::clustering_block_count(8, 0.05) == 64 * 6);
  CHECK(mom::clustering_minimal_sample_size(8, 0.05) == 768);
  CHECK(mom::clustering_block_count(1, 0.05) == 192);
  CHECK_THROWS_AS(mom::clustering_block_count(0, 0.05), mom::InvalidArgument);
  CHECK_THROWS_AS(mom::clustering_block_count(3, 0.5), mom::InvalidArgument);
}

TEST_CASE("partition class validation") {
  CHECK_THROWS_AS(PartitionClass<double>({}), mom::InvalidArgument);
  CHECK_THROWS_AS(PartitionClass<double>({split_at(0, "x"), split_at(1, "x")}), mom::InvalidArgument);
  CHECK_THROWS_AS(PartitionClass<double>({CellPartition<double>{2, nullptr, "empty"}}),
                  mom::InvalidArgument);
}

TEST_CASE("partition selection") {
  std::vector<double> x(800);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(static_cast<double>(i)) * 4;
  const Sample<double> s(x);

  SECTION("single member") {
    const auto r = mom::select_partition(kAbs, PartitionClass<double>({split_at(0, "only")}), s, 0.05);
    CHECK(r.selected == 0);
    CHECK(r.selected_label == "only");
    CHECK(r.estimator == "mom");
  }
  SECTION("singleton cells attain zero risk") {
    const CellPartition<double> singletons{
        x.size(), [](double v) { return static_cast<std::size_t>(std::bit_cast<std::uint64_t>(v)); },
        "singletons"};
    const PartitionClass<double> cls({one_cell(), split_at(0, "half"), singletons});
    const auto r = mom::select_partition(kAbs, cls, s, 0.05);
    CHECK(r.selected_label == "singletons");
    CHECK(r.risks[2] == 0.0);
    for (double v : r.risks) CHECK(v >= 0.0);
    CHECK(mom::select_partition_classical(kAbs, cls, s).selected_label == "singletons");
  }
  SECTION("ties go to the lowest index") {
    const PartitionClass<double> cls({split_at(100, "a"), split_at(200, "b")});
    const auto r = mom::select_partition(kAbs, cls, s, 0.05);
    CHECK(r.risks[0] == r.risks[1]);
    CHECK(r.selected == 0);
  }
  SECTION("sample size hypothesis") {
    const PartitionClass<double> cls({split_at(0, "a"), split_at(1, "b")});
    try {
      mom::select_partition(kAbs, cls, Sample<double>(std::vector<double>(400, 1.0)), 0.05);
      FAIL("expected SampleTooSmall");
    } catch (const mom::SampleTooSmall& e) {
      CHECK(e.minimal_n() == 512);
    }
  }
  SECTION("the indexed evaluation matches the direct estimator") {
    const PartitionClass<double> cls({split_at(0, "a"), split_at(1.5, "b")});
    const auto r = mom::select_partition(kAbs, cls, s, 0.05);
    for (std::size_t c = 0; c < cls.size(); ++c) {
      CHECK(r.risks[c] == mom::mom_clustering_risk(kAbs, cls[c], s, 0.05, 2).value);
    }
    const auto cl = mom::select_partition_classical(kAbs, cls, s);
    for (std::size_t c = 0; c < cls.size(); ++c) {
      CHECK(cl.risks[c] == mom::empirical_clustering_risk(kAbs, cls[c], s));
    }
    CHECK(r.sigma_hat > 0);
    CHECK(r.deviation_bound ==
          Approx(r.sigma_hat * std::sqrt(4.0 / 800.0)).epsilon(1e-12));
  }
  SECTION("deterministic") {
    const PartitionClass<double> cls({split_at(0, "a"), split_at(1.5, "b")});
    CHECK(mom::select_partition(kAbs, cls, s, 0.05).risks ==
          mom::select_partition(kAbs, cls, s, 0.05).risks);
  }
}

TEST_CASE("the natural split wins on a two-cluster mixture") {
  const PartitionClass<Pt> cls({halfplane(0.0, "true"), halfplane(1.3, "random")});
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = draw(mixture(2.0), 2000, {seed, 0});
    wins += mom::select_partition(kSq, cls, s, 0.05).selected == 0 ? 1 : 0;
  }
  CHECK(wins >= 95);
}

TEST_CASE("oracle risk") {
  SECTION("unit dissimilarity, one cell") {
    const Dissimilarity<double> one{[](double, double) { return 1.0; }, "one"};
    const auto g = [](mom::Rng& r) { return r.normal(); };
    const auto o = mom::oracle_risk<double>(one, one_cell(), g, 20000, {1, 0});
    CHECK(o.value == 1.0);
    CHECK(o.std_error == 0.0);
  }
  SECTION("unit dissimilarity, two symmetric cells") {
    const Dissimilarity<double> one{[](double, double) { return 1.0; }, "one"};
    const auto g = [](mom::Rng& r) { return r.normal(); };
    const auto o = mom::oracle_risk<double>(one, split_at(0, "s"), g, 100000, {2, 0});
    CHECK(std::fabs(o.value - 0.5) <= 3 * o.std_error);
    CHECK(o.std_error == Approx(std::sqrt(0.25 / 100000)).epsilon(0.01));
  }
  SECTION("absolute difference on a two-point law") {
    const auto g = [](mom::Rng& r) { return r.uniform_open() < 0.5 ? -1.0 : 1.0; };
    const auto o = mom::oracle_risk<double>(kAbs, one_cell(), g, 100000, {3, 0});
    CHECK(std::fabs(o.value - 1.0) <= 3 * o.std_error);
  }
  SECTION("too few draws") {
    const auto g = [](mom::Rng& r) { return r.normal(); };
    CHECK_THROWS_AS(mom::oracle_risk<double>(kAbs, one_cell(), g, 9999, {3, 0}), mom::InvalidArgument);
  }
}

TEST_CASE("low-noise diagnostic") {
  const CellPartition<Pt> flipped{2, [](const Pt& x) -> std::size_t { return x[0] >= 0 ? 0 : 1; },
                                  "flipped"};
  const PartitionClass<Pt> cls({halfplane(0.0, "star"), flipped, halfplane(0.6, "tilted")});
  const std::vector<Pt> probes = {{0.5, 0.5}, {-1, 2}, {3, -1}, {0, 0}};
  const auto rows = mom::low_noise_margin(kSq, cls, 0, mixture(2.0), 50000, {4, 0},
                                          std::span<const Pt>(probes));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].excess_risk == 0.0);
  CHECK(rows[0].disagreement == 0.0);
  CHECK(rows[1].excess_risk == 0.0);
  CHECK(rows[1].disagreement == 0.0);
  CHECK(rows[2].excess_risk > 0.0);
  CHECK(rows[2].disagreement > 0.0);
  CHECK(rows[2].disagreement < 1.0);
  CHECK_THROWS_AS(mom::low_noise_margin(kSq, cls, 3, mixture(2.0), 50000, {4, 0},
                                        std::span<const Pt>(probes)),
                  mom::InvalidArgument);
  CHECK_THROWS_AS(mom::low_noise_margin(kSq, cls, 0, mixture(2.0), 50000, {4, 0},
                                        std::span<const Pt>{}),
                  mom::InvalidArgument);
}

TEST_CASE("kernel variance is bounded by the second moment of D") {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int t = 0; t < 40; ++t) {
    const std::size_t s = 2 + t % 5;
    std::vector<double> support(s), w(s);
    double tot = 0;
    for (std::size_t i = 0; i < s; ++i) {
      support[i] = static_cast<double>(i) * u(gen) * 3 + static_cast<double>(i);
      tot += (w[i] = u(gen));
    }
    double head = 0;
    for (std::size_t i = 0; i + 1 < s; ++i) head += (w[i] /= tot);
    w.back() = 1.0 - head;
    const mom::FiniteDistribution<double> d(support, w);
    const auto k = mom::clustering_kernel(kAbs, split_at(support[s / 2], "s"));
    const mom::Kernel<double> d2(
        2, [](mom::KernelArgs<double> a) { return (a[0] - a[1]) * (a[0] - a[1]); }, true);
    CHECK(mom::enumerated_variance(k, d) <= mom::enumerated_mean(d2, d) + 1e-12);
  }
}

TEST_CASE("excess risk is at most twice the uniform deviation") {
  // Small instance: the oracle is exact because the law is finite.
  const std::vector<double> support = {-2.0, -1.0, 0.5, 1.0, 3.0};
  const std::vector<double> w = {0.1, 0.3, 0.2, 0.25, 0.15};
  const PartitionClass<double> cls({split_at(-1.5, "a"), split_at(0, "b"), split_at(2, "c"),
                                    one_cell()});
  std::vector<double> W;
  for (const auto& p : cls.members()) {
    W.push_back(mom::enumerated_mean(mom::clustering_kernel(kAbs, p),
                                     mom::FiniteDistribution<double>(support, w)));
  }
  const double w_star = *std::min_element(W.begin(), W.end());
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    mom::Rng r({seed, 9});
    std::vector<double> x(800);
    for (auto& v : x) {
      const double z = r.uniform_open();
      double acc = 0;
      v = support.back();
      for (std::size_t i = 0; i < support.size(); ++i) {
        if (z < (acc += w[i])) {
          v = support[i];
          break;
        }
      }
    }
    const auto rep = mom::select_partition(kAbs, cls, Sample<double>(x), 0.05);
    double sup = 0;
    for (std::size_t c = 0; c < cls.size(); ++c) sup = std::max(sup, std::fabs(rep.risks[c] - W[c]));
    CHECK(W[rep.selected] - w_star <= 2 * sup + 1e-12);
  }
}
