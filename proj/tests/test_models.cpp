#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "catch_amalgamated.hpp"
#include "exclust/models.hpp"
#include "exclust/theory.hpp"

using namespace exclust;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double lag1_corr_phase(const std::vector<double>& v, int d, int phase) {
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, n = 0;
  for (std::size_t k = static_cast<std::size_t>(phase - 1); k + 1 < v.size(); k += static_cast<std::size_t>(d)) {
    const double x = v[k], y = v[k + 1];
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
    n += 1;
  }
  const double cxy = sxy / n - sx / n * sy / n;
  return cxy / std::sqrt((sxx / n - sx / n * sx / n) * (syy / n - sy / n * sy / n));
}

}  // namespace

TEST_CASE("RngStream golden values", "[models][rng]") {
  // Reference values from an independent Python implementation of
  // splitmix64 keying + xoshiro256**.
  RngStream a(42, 0);
  CHECK(a() == 0xc986fd807e5b8ab5ULL);
  CHECK(a() == 0xe071ea15f19664d1ULL);
  CHECK(a() == 0x728624137f1e7291ULL);
  RngStream b(42, 7, 3);
  CHECK(b() == 0x0e167c1f927e7a94ULL);
  CHECK(b() == 0x0b9248eb5fbcb0e3ULL);
  CHECK(b() == 0x68a8e68a5de94dd4ULL);
}

TEST_CASE("RngStream uniform and normal", "[models][rng]") {
  RngStream r(1, 2);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    s += u;
  }
  CHECK_THAT(s / n, WithinAbs(0.5, 0.003));
  s = 0;
  for (int k = 0; k < n; ++k) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK_THAT(s / n, WithinAbs(0.0, 0.01));
  CHECK_THAT(s2 / n, WithinAbs(1.0, 0.015));
}

TEST_CASE("presets", "[models]") {
  const auto g = preset("paper-gaussian");
  const auto l = preset("paper-logistic");
  CHECK(g.family == Family::kGaussianAr);
  CHECK(l.family == Family::kLogisticMarkov);
  CHECK(g.d == 7);
  CHECK(g.params == l.params);
  for (int i = 1; i <= 7; ++i)
    CHECK_THAT(g.param_for_phase(i), WithinAbs(0.5 + 0.25 * std::sin(2.0 * std::numbers::pi * (i - 1) / 7.0), 1e-15));
  // Upper bounds 2^alpha_i - 1 as published, two decimals.
  const std::vector<double> bound{0.41, 0.62, 0.67, 0.52, 0.31, 0.19, 0.24};
  double mean = 0.0;
  for (int i = 1; i <= 7; ++i) {
    const double b = std::pow(2.0, l.param_for_phase(i)) - 1.0;
    CHECK_THAT(b, WithinAbs(bound[static_cast<std::size_t>(i - 1)], 0.005));
    mean += b / 7.0;
  }
  CHECK_THAT(mean, WithinAbs(0.42, 0.005));
  CHECK_THROWS_AS(preset("nope"), InvalidSpec);
}

TEST_CASE("logistic conditional cdf worked value", "[models]") {
  // s = 2, F = 1 * 2^{-1/2} * exp(1 - 2^{1/2}).
  const double expected = std::exp(1.0 - std::sqrt(2.0)) / std::sqrt(2.0);
  CHECK_THAT(logistic_conditional_cdf(1.0, 1.0, 0.5), WithinAbs(expected, 1e-15));
  CHECK_THAT(expected, WithinAbs(0.4672984, 1e-6));
  // Finite-difference oracle: dF(x, y)/dx divided by the marginal density.
  const double h = 1e-6;
  const double fd = (logistic_joint_cdf(1.0 + h, 1.0, 0.5) - logistic_joint_cdf(1.0 - h, 1.0, 0.5)) / (2.0 * h);
  CHECK_THAT(fd / std::exp(-1.0), WithinAbs(expected, 1e-8));
}

TEST_CASE("logistic conditional cdf limits and monotonicity", "[models][property]") {
  for (double a : {0.1, 0.25, 0.5, 0.75, 0.99, 1.0})
    for (double x : {0.05, 0.3, 1.0, 4.0, 50.0}) {
      CHECK(logistic_conditional_cdf(x, 0.0, a) == 0.0);
      CHECK(logistic_conditional_cdf(x, std::numeric_limits<double>::infinity(), a) == 1.0);
      CHECK_THAT(logistic_conditional_cdf(x, 1e12, a), WithinAbs(1.0, 1e-6));
      double prev = 0.0;
      for (double ly = -6.0; ly <= 8.0; ly += 0.05) {
        const double f = logistic_conditional_cdf(x, std::exp(ly), a);
        CHECK(f >= prev);
        CHECK(f <= 1.0);
        prev = f;
      }
    }
  // alpha = 1 is independence.
  for (double y : {0.2, 1.0, 7.0}) CHECK_THAT(logistic_conditional_cdf(3.0, y, 1.0), WithinRel(std::exp(-1.0 / y), 1e-12));
  CHECK_THROWS_AS(logistic_conditional_cdf(1.0, 1.0, 0.0), InvalidSpec);
  CHECK_THROWS_AS(logistic_conditional_cdf(1.0, 1.0, 1.5), InvalidSpec);
  CHECK_THROWS_AS(logistic_conditional_cdf(0.0, 1.0, 0.5), DomainError);
}

TEST_CASE("logistic derivative identity", "[models][property]") {
  // F(y | x) * x^{-2} e^{-1/x} = dF(x, y)/dx, central differences on a log grid.
  for (double a : {0.25, 0.5, 0.75})
    for (double lx = -1.5; lx <= 2.5; lx += 0.5)
      for (double ly = -1.5; ly <= 2.5; ly += 0.5) {
        const double x = std::exp(lx), y = std::exp(ly);
        const double h = 1e-5 * x;
        const double fd = (logistic_joint_cdf(x + h, y, a) - logistic_joint_cdf(x - h, y, a)) / (2.0 * h);
        const double lhs = logistic_conditional_cdf(x, y, a) * std::exp(-1.0 / x) / (x * x);
        CHECK_THAT(lhs, WithinAbs(fd, 1e-6));
      }
}

TEST_CASE("logistic conditional density is the y-derivative of the cdf", "[models]") {
  for (double a : {0.3, 0.5, 0.8})
    for (double x : {0.5, 2.0, 10.0})
      for (double y : {0.3, 1.0, 3.0, 20.0}) {
        const double h = 1e-6 * y;
        const double fd = (logistic_conditional_cdf(x, y + h, a) - logistic_conditional_cdf(x, y - h, a)) / (2.0 * h);
        CHECK_THAT(logistic_conditional_density(x, y, a), WithinRel(fd, 1e-6));
      }
}

TEST_CASE("logistic conditional quantile inverts the cdf", "[models]") {
  for (double a : {0.1, 0.26, 0.5, 0.74, 0.95})
    for (double x : {0.02, 0.5, 1.0, 10.0, 1e4})
      for (double u : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.9, 0.999, 1.0 - 1e-9}) {
        const double y = logistic_conditional_quantile(x, a, u);
        CHECK(y > 0.0);
        CHECK_THAT(logistic_conditional_cdf(x, y, a), WithinAbs(u, 1e-10));
      }
  CHECK_THROWS_AS(logistic_conditional_quantile(1.0, 0.5, 1.0, 1e-10, 17), SimulationFailure);
  try {
    logistic_conditional_quantile(2.0, 0.5, 1.0, 1e-10, 17);
  } catch (const SimulationFailure& e) {
    CHECK(e.step() == 17);
    CHECK(e.x() == 2.0);
    CHECK(e.u() == 1.0);
  }
}

TEST_CASE("simulation is reproducible", "[models][property]") {
  for (const auto& spec : {paper_gaussian(), paper_logistic()}) {
    RngStream a(123, 4), b(123, 4), c(123, 5);
    const auto s1 = simulate(spec, 5000, a);
    const auto s2 = simulate(spec, 5000, b);
    const auto s3 = simulate(spec, 5000, c);
    CHECK(s1.values == s2.values);
    CHECK(s1.values != s3.values);
    CHECK(s1.seed == 123);
    CHECK(s1.stream == 4);
    CHECK(s1.n() == 5000);
  }
  RngStream r(1, 1);
  CHECK_THROWS_AS(simulate_logistic_markov(paper_gaussian(), 10, r), InvalidSpec);
  CHECK_THROWS_AS(simulate_gaussian_ar(paper_logistic(), 10, r), InvalidSpec);
  CHECK_THROWS_AS(simulate(PeriodicModelSpec{Family::kGaussianAr, 1, {1.0}}, 10, r), InvalidSpec);
  CHECK_THROWS_AS(simulate(PeriodicModelSpec{Family::kLogisticMarkov, 1, {1.2}}, 10, r), InvalidSpec);
  CHECK_THROWS_AS(simulate(paper_gaussian(), 0, r), InvalidSpec);
}

TEST_CASE("gaussian autoregression", "[models]") {
  SECTION("independent case") {
    RngStream r(9, 0);
    const auto s = simulate(PeriodicModelSpec{Family::kGaussianAr, 1, {0.0}}, 100000, r);
    CHECK(std::abs(lag1_corr_phase(s.values, 1, 1)) < 0.01);
    CHECK(validate_margins(s).pass);
  }
  SECTION("periodic margins and lag-one correlations") {
    const auto spec = paper_gaussian();
    RngStream r(10, 0);
    const auto s = simulate(spec, 1000000, r);
    // KS per phase and pooled, cutoff widened twofold for dependence.
    CHECK(validate_margins(std::span<const double>(s.values).first(100000), Family::kGaussianAr, 2.0).pass);
    for (int i = 1; i <= 7; ++i) {
      std::vector<double> ph;
      for (std::size_t k = static_cast<std::size_t>(i - 1); k < 100000; k += 7) ph.push_back(s.values[k]);
      CHECK(validate_margins(ph, Family::kGaussianAr, 2.0).pass);
      CHECK_THAT(lag1_corr_phase(s.values, 7, i), WithinAbs(spec.param_for_phase(i), 0.01));
    }
  }
}

TEST_CASE("logistic markov chain", "[models]") {
  SECTION("stationary alpha = 0.5: margins and chi(1)") {
    const PeriodicModelSpec spec{Family::kLogisticMarkov, 1, {0.5}};
    RngStream r(11, 0);
    const auto s = simulate(spec, 1000000, r);
    CHECK(validate_margins(std::span<const double>(s.values).first(100000), Family::kLogisticMarkov, 2.0).pass);
    const double u = resolve_threshold(ThresholdSpec::exceedance_prob(0.01), spec.family);
    const auto chi = chi_lag(s, 1, u);
    CHECK_THAT(chi[0].value, WithinAbs(2.0 - std::sqrt(2.0), 0.02));
  }
  SECTION("periodic chi_i(1) tracks 2 - 2^alpha_i") {
    const auto spec = paper_logistic();
    RngStream r(12, 0);
    const auto s = simulate(spec, 4000000, r);
    const double u = resolve_threshold(ThresholdSpec::exceedance_prob(0.005), spec.family);
    const auto chi = chi_lag(s, 1, u);
    for (int i = 1; i <= 7; ++i)
      CHECK_THAT(chi[static_cast<std::size_t>(i - 1)].value, WithinAbs(2.0 - std::pow(2.0, spec.param_for_phase(i)), 0.03));
    for (int i = 1; i <= 7; ++i) {
      std::vector<double> ph;
      for (std::size_t k = static_cast<std::size_t>(i - 1); k < 700000; k += 7) ph.push_back(s.values[k]);
      CHECK(validate_margins(ph, Family::kLogisticMarkov, 2.0).pass);
    }
  }
}

TEST_CASE("validate_margins", "[models]") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  std::vector<double> z(20000);
  for (auto& x : z) x = nd(gen);
  CHECK(validate_margins(z, Family::kGaussianAr).pass);
  RngStream r(3, 3);
  std::vector<double> fr(1000);
  for (auto& x : fr) x = draw_marginal(Family::kLogisticMarkov, r);
  CHECK_FALSE(validate_margins(fr, Family::kGaussianAr).pass);
  CHECK(validate_margins(fr, Family::kLogisticMarkov).pass);
  CHECK_THROWS_AS(validate_margins(std::vector<double>(10, 0.0), Family::kGaussianAr), InvalidSpec);
}

TEST_CASE("draw_marginal_tail exceeds u with the right law", "[models]") {
  for (auto f : {Family::kGaussianAr, Family::kLogisticMarkov}) {
    const double u = marginal_upper_quantile(f, 0.01);
    const double u2 = marginal_upper_quantile(f, 0.005);
    RngStream r(8, 8);
    int above = 0;
    const int n = 40000;
    for (int k = 0; k < n; ++k) {
      const double x = draw_marginal_tail(f, u, r);
      REQUIRE(x > u);
      above += x > u2;
    }
    // P(X > u2 | X > u) = 0.5.
    CHECK_THAT(above / double(n), WithinAbs(0.5, 4.0 * std::sqrt(0.25 / n)));
  }
}

TEST_CASE("series text round trip is exact", "[models]") {
  RngStream r(2, 2);
  const auto s = simulate(paper_logistic(), 2000, r);
  std::stringstream ss;
  write_series(ss, s.values);
  CHECK(read_series(ss) == s.values);
  std::stringstream bad("1.0\nabc\n");
  CHECK_THROWS_AS(read_series(bad), Error);
  std::stringstream comments("# header\n1.5\n\n2.5\n");
  CHECK(read_series(comments) == std::vector<double>{1.5, 2.5});
}
