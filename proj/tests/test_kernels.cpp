#include <catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "mom/kernels.hpp"

using Catch::Approx;
using mom::FiniteDistribution;
using mom::Kernel;
using mom::KernelArgs;

namespace {

Kernel<double> kernel2(double (*f)(double, double), bool sym) {
  return Kernel<double>(2, [f](KernelArgs<double> a) { return f(a[0], a[1]); }, sym);
}

// Random symmetric kernel on support indices: h(i, j) = table[min][max].
Kernel<double> random_symmetric_kernel(std::mt19937_64& gen, std::size_t s) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> t(s * s);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = i; j < s; ++j) t[i * s + j] = t[j * s + i] = u(gen);
  }
  return Kernel<double>(
      2,
      [t, s](KernelArgs<double> a) {
        return t[static_cast<std::size_t>(a[0]) * s + static_cast<std::size_t>(a[1])];
      },
      true);
}

}  // namespace

TEST_CASE("product kernel values") {
  const auto h = mom::make_product_kernel();
  CHECK(h.arity() == 2);
  CHECK(h.symmetric());
  CHECK(h(3.0, 4.0) == 12.0);
  CHECK(h(0.0, 9.0) == 0.0);
  CHECK(h(-2.0, 5.0) == -10.0);
}

TEST_CASE("kernel argument count is checked on the checked paths") {
  const auto h = mom::make_product_kernel();
  const std::vector<double> three = {1, 2, 3};
  CHECK_THROWS_AS(h.eval(std::span<const double>(three)), mom::InvalidArgument);
  CHECK_THROWS_AS(h(1.0), mom::InvalidArgument);
  CHECK_THROWS_AS(Kernel<double>(0, [](KernelArgs<double>) { return 0.0; }, true),
                  mom::InvalidArgument);
}

TEST_CASE("built-in kernels") {
  CHECK(mom::make_identity_kernel()(4.5) == 4.5);
  CHECK(mom::make_half_squared_difference_kernel()(0.0, 2.0) == 2.0);
  CHECK(mom::make_sum_kernel(3)(1.0, 2.0, 3.5) == 6.5);
  CHECK(mom::make_constant_kernel<double>(3, 5.0)(1.0, 2.0, 3.0) == 5.0);
}

TEST_CASE("symmetrize") {
  SECTION("antisymmetric kernel averages to zero") {
    const auto k = mom::symmetrize(kernel2([](double x, double y) { return x - y; }, false));
    CHECK(k.symmetric());
    CHECK(k(3.0, 7.0) == 0.0);
    CHECK(k(-1.5, 2.25) == 0.0);
  }
  SECTION("symmetric kernel is unchanged") {
    const auto k = mom::symmetrize(mom::make_product_kernel());
    CHECK(k(3.0, 4.0) == 12.0);
    CHECK(k(-2.0, 5.0) == -10.0);
  }
  SECTION("x^2 y at (2, 3)") {
    const auto k = mom::symmetrize(kernel2([](double x, double y) { return x * x * y; }, false));
    CHECK(k(2.0, 3.0) == 15.0);
  }
  SECTION("arity above 8 is rejected") {
    const Kernel<double> big(9, [](KernelArgs<double>) { return 0.0; }, false);
    CHECK_THROWS_AS(mom::symmetrize(big), mom::InvalidArgument);
  }
}

TEST_CASE("symmetrized kernels are exactly permutation invariant") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const Kernel<double> raw(
      3,
      [](KernelArgs<double> a) { return std::sin(a[0]) * a[1] + std::exp(a[2] * 0.3) * a[0]; },
      false);
  const auto k = mom::symmetrize(raw);
  for (int trial = 0; trial < 200; ++trial) {
    std::array<double, 3> x = {u(gen), u(gen), u(gen)};
    const double ref = k.eval(std::span<const double>(x));
    std::sort(x.begin(), x.end());
    do {
      CHECK(k.eval(std::span<const double>(x)) == ref);
    } while (std::next_permutation(x.begin(), x.end()));
  }
}

TEST_CASE("kernel evaluation is repeatable") {
  const auto k = mom::symmetrize(kernel2([](double x, double y) { return std::cos(x) * y; }, false));
  for (double x = -2.0; x < 2.0; x += 0.37) CHECK(k(x, 1.3) == k(x, 1.3));
}

TEST_CASE("finite distribution validation") {
  CHECK_THROWS_AS(FiniteDistribution<double>({1.0, 2.0}, {0.5, 0.6}), mom::InvalidArgument);
  CHECK_THROWS_AS(FiniteDistribution<double>({1.0, 2.0}, {1.5, -0.5}), mom::InvalidArgument);
  CHECK_THROWS_AS(FiniteDistribution<double>({1.0, 1.0}, {0.5, 0.5}), mom::InvalidArgument);
  CHECK_THROWS_AS(FiniteDistribution<double>({}, {}), mom::InvalidArgument);
  CHECK_THROWS_AS(FiniteDistribution<double>({1.0}, {0.5, 0.5}), mom::InvalidArgument);
  CHECK_NOTHROW(FiniteDistribution<double>({1.0, 2.0, 3.0}, {0.2, 0.3, 0.5}));
  const auto d = FiniteDistribution<double>::uniform({0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  CHECK(d.index_of(4.0) == 4);
  CHECK_THROWS_AS(d.index_of(9.0), mom::InvalidArgument);
}

TEST_CASE("hoeffding projections of the product kernel") {
  const auto h = mom::make_product_kernel();
  const auto pm = FiniteDistribution<double>::uniform({-1.0, 1.0});

  SECTION("order 0 is the mean") {
    const auto p0 = mom::hoeffding_projection(h, pm, 0);
    REQUIRE(p0.table().size() == 1);
    CHECK(p0.table()[0] == mom::enumerated_mean(h, pm));
    const auto shifted = FiniteDistribution<double>::uniform({0.0, 2.0});
    CHECK(mom::hoeffding_projection(h, shifted, 0).table()[0] == 1.0);
  }
  SECTION("order 1 vanishes for a centered law") {
    const auto p1 = mom::hoeffding_projection(h, pm, 1);
    CHECK(p1.table().size() == 2);
    CHECK(p1.max_abs() == 0.0);
  }
  SECTION("order 2 at (1, 1)") {
    const auto p2 = mom::hoeffding_projection(h, pm, 2);
    CHECK(p2.table().size() == 4);
    const std::array<double, 2> pt = {1.0, 1.0};
    CHECK(p2.at(pm, std::span<const double>(pt)) == 1.0);
    const std::array<std::size_t, 2> idx = {0, 1};
    CHECK(p2.at(idx) == -1.0);
  }
  SECTION("errors") {
    CHECK_THROWS_AS(mom::hoeffding_projection(h, pm, 3), mom::InvalidArgument);
    const auto asym = kernel2([](double x, double y) { return x - y; }, false);
    CHECK_THROWS_AS(mom::hoeffding_projection(asym, pm, 1), mom::InvalidArgument);
  }
}

TEST_CASE("projection enumeration budget") {
  std::vector<double> support(60);
  for (std::size_t i = 0; i < support.size(); ++i) support[i] = static_cast<double>(i);
  const auto d = FiniteDistribution<double>::uniform(support);
  const auto k = mom::make_sum_kernel(4);
  CHECK_THROWS_AS(mom::hoeffding_projection(k, d, 4), mom::BudgetExceeded);
  CHECK_THROWS_AS(mom::variance_decomposition(k, d), mom::BudgetExceeded);
  CHECK_NOTHROW(mom::hoeffding_projection(mom::make_product_kernel(), d, 2));
}

TEST_CASE("degeneracy order") {
  const auto h = mom::make_product_kernel();
  SECTION("centered product kernel is canonical") {
    const auto r = mom::degeneracy_order(h, FiniteDistribution<double>::uniform({-1.0, 1.0}), 1e-12);
    CHECK(r.q == 2);
    CHECK(r.canonical);
  }
  SECTION("non-centered law") {
    const auto r = mom::degeneracy_order(h, FiniteDistribution<double>::uniform({0.0, 2.0}), 1e-12);
    CHECK(r.q == 1);
    CHECK_FALSE(r.canonical);
  }
  SECTION("constant kernel") {
    const auto c = mom::make_constant_kernel<double>(3, 5.0);
    const auto r = mom::degeneracy_order(c, FiniteDistribution<double>::uniform({0.0, 1.0, 4.0}));
    CHECK(r.q == 3);
    CHECK_FALSE(r.canonical);
  }
  SECTION("any mean-zero law gives q = 2 for the product kernel") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int t = 0; t < 50; ++t) {
      const std::size_t s = 2 + t % 4;
      std::vector<double> w(s), x(s);
      double tot = 0.0;
      for (auto& v : w) tot += (v = u(gen));
      for (auto& v : w) v /= tot;
      double mean = 0.0;
      for (std::size_t i = 0; i < s; ++i) mean += w[i] * (x[i] = 4.0 * u(gen) + static_cast<double>(i));
      for (auto& v : x) v -= mean;
      double wsum = 0.0;
      for (std::size_t i = 0; i + 1 < s; ++i) wsum += w[i];
      w.back() = 1.0 - wsum;
      const auto r = mom::degeneracy_order(h, FiniteDistribution<double>(x, w));
      CHECK(r.q == 2);
    }
  }
}

TEST_CASE("variance decomposition examples") {
  SECTION("product kernel on a centered two-point law") {
    const auto h = mom::make_product_kernel();
    const auto d = FiniteDistribution<double>::uniform({-1.0, 1.0});
    const auto v = mom::variance_decomposition(h, d);
    REQUIRE(v.size() == 2);
    CHECK(v[0].order == 1);
    CHECK(v[0].value == Approx(0.0).margin(1e-15));
    CHECK(v[1].value == Approx(1.0).epsilon(1e-15));
    CHECK(mom::enumerated_variance(h, d) == Approx(1.0).epsilon(1e-15));
  }
  SECTION("constant kernel") {
    const auto v = mom::variance_decomposition(mom::make_constant_kernel<double>(2, 3.0),
                                               FiniteDistribution<double>::uniform({0.0, 1.0}));
    for (const auto& c : v) CHECK(c.value == Approx(0.0).margin(1e-15));
  }
  SECTION("sum kernel on a Bernoulli law") {
    const auto d = FiniteDistribution<double>::uniform({0.0, 1.0});
    const auto v = mom::variance_decomposition(mom::make_sum_kernel(2), d);
    CHECK(v[0].value == Approx(0.5).epsilon(1e-14));
    CHECK(v[1].value == Approx(0.0).margin(1e-15));
    CHECK(mom::enumerated_variance(mom::make_sum_kernel(2), d) == Approx(0.5).epsilon(1e-14));
    // pi_1 h(x) = x - 1/2
    const auto p1 = mom::hoeffding_projection(mom::make_sum_kernel(2), d, 1);
    CHECK(p1.table()[0] == Approx(-0.5));
    CHECK(p1.table()[1] == Approx(0.5));
  }
}

TEST_CASE("variance decomposition sums to the variance on random instances") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int t = 0; t < 60; ++t) {
    const std::size_t s = 1 + t % 5;
    std::vector<double> support(s), w(s);
    double tot = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
      support[i] = static_cast<double>(i);
      tot += (w[i] = u(gen));
    }
    for (auto& v : w) v /= tot;
    double head = 0.0;
    for (std::size_t i = 0; i + 1 < s; ++i) head += w[i];
    w.back() = 1.0 - head;
    const FiniteDistribution<double> d(support, w);
    const auto k = random_symmetric_kernel(gen, s);
    double total = 0.0;
    for (const auto& c : mom::variance_decomposition(k, d)) total += c.value;
    CHECK(total == Approx(mom::enumerated_variance(k, d)).margin(1e-10));
  }
}

TEST_CASE("projections of order m for arity 3") {
  // h(x, y, z) = xyz under a centered law: pi_3 h = h, the rest vanish.
  const Kernel<double> h(3, [](KernelArgs<double> a) { return a[0] * a[1] * a[2]; }, true);
  const auto d = FiniteDistribution<double>({-1.0, 0.5}, {1.0 / 3.0, 2.0 / 3.0});
  CHECK(mom::hoeffding_projection(h, d, 1).max_abs() < 1e-15);
  CHECK(mom::hoeffding_projection(h, d, 2).max_abs() < 1e-15);
  const auto p3 = mom::hoeffding_projection(h, d, 3);
  const std::array<std::size_t, 3> idx = {0, 1, 1};
  CHECK(p3.at(idx) == Approx(-0.25));
  const auto r = mom::degeneracy_order(h, d);
  CHECK(r.q == 3);
  CHECK(r.canonical);
}
