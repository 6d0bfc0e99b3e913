#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "catch_amalgamated.hpp"
#include "exclust/estimators.hpp"

using namespace exclust;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

using Times = std::vector<std::int64_t>;

InterexceedanceSet make_set(std::vector<Times> classes, std::int64_t total_exceedances = 0,
                            std::int64_t series_length = 0) {
  InterexceedanceSet ix;
  ix.d = static_cast<int>(classes.size());
  ix.classes = std::move(classes);
  ix.total_exceedances = total_exceedances ? total_exceedances : ix.total_times() + 1;
  ix.series_length = series_length;
  return ix;
}

// 20 times equal to 1 and 80 larger times with sum(T - 1) = 900.
Times stationary_example() {
  Times t(20, 1);
  t.insert(t.end(), 60, 12);
  t.insert(t.end(), 20, 13);
  return t;
}

// Direct evaluation of the likelihood, written independently of the library:
// loops over every time and classifies it.
double brute_loglik(const std::vector<Times>& classes, const std::vector<double>& theta, const std::vector<int>& k,
                    double fbar) {
  double l = 0.0, sum_theta = 0.0, n_tot = 0.0, excess = 0.0;
  int m = 0;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].empty()) continue;
    ++m;
    sum_theta += theta[i];
    for (auto t : classes[i]) {
      if (t > k[i]) {
        l += std::log(theta[i]);
        n_tot += 1.0;
        excess += static_cast<double>(t - 1);
      } else {
        l += std::log(1.0 - theta[i]);
      }
    }
  }
  const double gamma = sum_theta / m;
  return l + n_tot * std::log(gamma) - gamma * fbar * (excess + n_tot);
}

std::vector<Times> random_classes(std::mt19937_64& gen, int d, int per_class) {
  std::geometric_distribution<int> geo(0.05);
  std::bernoulli_distribution zero(0.4);
  std::vector<Times> c(static_cast<std::size_t>(d));
  for (auto& cls : c)
    for (int j = 0; j < per_class; ++j) cls.push_back(zero(gen) ? 1 : 1 + geo(gen));
  return c;
}

}  // namespace

TEST_CASE("intervals_hat", "[estimators]") {
  CHECK(intervals_hat(Times{2, 2, 2}) == 2.0);
  CHECK_THAT(intervals_hat(Times{1, 3}), WithinAbs(1.6, 1e-15));
  CHECK(intervals_hat(Times{1, 1, 1, 1}) == 2.0);
  CHECK_THROWS_AS(intervals_hat(Times{}), MissingData);
}

TEST_CASE("intervals_tilde", "[estimators]") {
  CHECK_THAT(intervals_tilde(Times{1, 1, 8, 1, 9}), WithinAbs(450.0 / 490.0, 1e-15));
  CHECK_THAT(intervals_tilde(Times{4, 4, 4, 4}), WithinAbs(3.0, 1e-15));
  for (std::int64_t t = 3; t < 40; ++t)
    CHECK_THAT(intervals_tilde(Times(5, t)), WithinRel(2.0 * (t - 1.0) / (t - 2.0), 1e-14));
  CHECK_THROWS_AS(intervals_tilde(Times{1, 2, 2}), ZeroDenominator);
  CHECK_THROWS_AS(intervals_tilde(Times{}), MissingData);
}

TEST_CASE("intervals_star", "[estimators]") {
  CHECK(intervals_star(Times{1, 2, 1}) == 1.0);
  CHECK_THAT(intervals_hat(Times{1, 2, 1}), WithinAbs(32.0 / 18.0, 1e-15));
  CHECK_THAT(intervals_star(Times{1, 1, 8, 1, 9}), WithinAbs(0.918367346938775, 1e-12));
  CHECK(intervals_star(Times{5, 5, 5, 5}) == 1.0);
  CHECK_THROWS_AS(intervals_star(Times{}), MissingData);
}

TEST_CASE("estimate_thetas_intervals", "[estimators]") {
  const auto ix = make_set({{1, 1, 8, 1, 9}, {}});
  const auto rec = estimate_thetas_intervals(ix);
  REQUIRE(rec.theta[0].has_value());
  CHECK_THAT(*rec.theta[0], WithinAbs(450.0 / 490.0, 1e-15));
  CHECK_FALSE(rec.theta[1].has_value());
  CHECK(rec.missing_phases == std::vector<int>{2});
  CHECK_THAT(rec.gamma, WithinAbs(450.0 / 490.0, 1e-15));
  CHECK_THROWS_AS(estimate_thetas_intervals(make_set({{}, {}}, 1)), NoExceedances);
}

TEST_CASE("intervals estimators: range, permutation and stationary collapse", "[estimators][property]") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 40; ++trial) {
    auto c = random_classes(gen, 1 + trial % 7, 3 + trial);
    const auto rec = estimate_thetas_intervals(make_set(c));
    for (const auto& t : rec.theta) {
      REQUIRE(t.has_value());
      CHECK(*t >= 0.0);
      CHECK(*t <= 1.0);
    }
    CHECK(rec.gamma >= 0.0);
    CHECK(rec.gamma <= 1.0);
    for (auto& cls : c) std::shuffle(cls.begin(), cls.end(), gen);
    const auto rec2 = estimate_thetas_intervals(make_set(c));
    for (std::size_t i = 0; i < c.size(); ++i) CHECK_THAT(*rec2.theta[i], WithinRel(*rec.theta[i], 1e-13));
    // d = 1 equals the classical estimator on the pooled times.
    if (c.size() == 1) CHECK(*rec.theta[0] == intervals_star(c[0]));
  }
}

TEST_CASE("moments_T", "[estimators]") {
  // Exact-summation oracle: E T = sum_{n>=0} P(T > n), E T^2 = sum_{n>=0} (2n + 1) P(T > n),
  // with P(T > 0) = 1 and P(T > n) = theta p^{n gamma} for n >= 1.
  auto oracle = [](double theta, double gamma, double p) {
    double m1 = 1.0, m2 = 1.0;
    for (int n = 1; n < 20000; ++n) {
      const double s = theta * std::pow(p, n * gamma);
      m1 += s;
      m2 += (2.0 * n + 1.0) * s;
    }
    return std::pair{m1, m2};
  };
  const auto [a, b] = moments_T(1.0, 1.0, 0.9);
  CHECK_THAT(a, WithinAbs(10.0, 1e-10));
  CHECK_THAT(b, WithinAbs(190.0, 1e-9));
  for (double theta : {0.1, 0.4, 0.9})
    for (double gamma : {0.3, 0.7, 1.0})
      for (double p : {0.5, 0.9, 0.97}) {
        const auto [m1, m2] = moments_T(theta, gamma, p);
        const auto [o1, o2] = oracle(theta, gamma, p);
        CHECK_THAT(m1, WithinRel(o1, 1e-10));
        CHECK_THAT(m2, WithinRel(o2, 1e-10));
      }
  const auto [z1, z2] = moments_T(0.0, 0.5, 0.9);
  CHECK(z1 == 1.0);
  CHECK(z2 == 1.0);
  CHECK_THROWS_AS(moments_T(0.5, 0.5, 1.0), DomainError);
  CHECK_THROWS_AS(moments_T(0.5, 1e-300, 0.5), DomainError);
}

TEST_CASE("moments_T ratio and bias expansion", "[estimators][property]") {
  // h(p) = 2 E(T)^2 / E(T^2) = theta + gamma (2 - 3 theta / 2)(1 - p) + O((1 - p)^2);
  // coefficient from a symbolic series expansion of h at p = 1.
  for (double theta : {0.2, 0.5, 0.8})
    for (double gamma : {0.4, 0.9}) {
      auto resid = [&](double p) {
        const auto [m1, m2] = moments_T(theta, gamma, p);
        return std::abs(2.0 * m1 * m1 / m2 - theta - gamma * (2.0 - 1.5 * theta) * (1.0 - p));
      };
      // C fitted at 1 - p = 1e-2, then every smaller step must stay under C (1 - p)^2
      // and halving 1 - p must cut the residual by about four.
      const double c_fit = resid(0.99) / 1e-4;
      for (double eps = 5e-3; eps > 1e-4; eps /= 2.0) {
        CHECK(resid(1.0 - eps) <= 1.5 * c_fit * eps * eps);
        const double ratio = resid(1.0 - eps) / resid(1.0 - eps / 2.0);
        CHECK_THAT(ratio, WithinAbs(4.0, 0.1));
      }
      const auto [m1, m2] = moments_T(theta, gamma, 1.0 - 1e-7);
      CHECK_THAT(2.0 * m1 * m1 / m2, WithinAbs(theta, 1e-6));
    }
}

TEST_CASE("moment_solution", "[estimators]") {
  CHECK(moment_solution(1.0, 2.0) == std::pair{1.0, 1.0});
  CHECK(moment_solution(0.5, 1.0) == std::pair{1.0, 0.5});
  // Mixture oracle: mass 1 - theta at 0, exponential(gamma) with probability theta.
  for (double theta : {0.1, 0.5, 1.0})
    for (double gamma : {0.2, 0.7, 1.0}) {
      const auto [g, t] = moment_solution(theta / gamma, 2.0 * theta / (gamma * gamma));
      CHECK_THAT(g, WithinRel(gamma, 1e-14));
      CHECK_THAT(t, WithinRel(theta, 1e-14));
    }
  CHECK_THROWS_AS(moment_solution(1.0, 0.0), DomainError);
  CHECK_THROWS_AS(moment_solution(1.0, -1.0), DomainError);
}

TEST_CASE("log_likelihood worked example", "[estimators]") {
  const auto ix = make_set({stationary_example()});
  MleOptions o;
  o.run_lengths = {1};
  o.fbar = 0.01;
  const std::vector<double> half{0.5};
  // 20 log .5 + 80 log .5 + 80 log .5 - .5 (.01)(900) - .5 (.01)(80).
  const double expected = 180.0 * std::log(0.5) - 4.5 - 0.4;
  CHECK_THAT(log_likelihood(half, ix, o), WithinAbs(expected, 1e-12));
  CHECK_THAT(log_likelihood(half, ix, o), WithinAbs(-129.66654, 1e-4));
  CHECK_THAT(log_likelihood(half, ix, o), WithinAbs(brute_loglik(ix.classes, {0.5}, {1}, 0.01), 1e-12));
}

TEST_CASE("log_likelihood matches direct evaluation", "[estimators][property]") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> ud(0.05, 0.95);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + trial % 7;
    auto c = random_classes(gen, d, 20 + trial);
    if (d > 1 && trial % 4 == 0) c[0].clear();
    MleOptions o;
    o.fbar = 0.02;
    std::vector<int> k(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) k[static_cast<std::size_t>(i)] = (trial + i) % 6;
    o.run_lengths = k;
    std::vector<double> th(static_cast<std::size_t>(d));
    for (auto& t : th) t = ud(gen);
    const auto ix = make_set(c);
    CHECK_THAT(log_likelihood(th, ix, o), WithinRel(brute_loglik(c, th, k, 0.02), 1e-12));
  }
}

TEST_CASE("log_likelihood edge cases", "[estimators]") {
  const auto ix = make_set({{1, 5, 9}});
  MleOptions o;
  o.fbar = 0.1;
  const std::vector<double> one{1.0}, zero{0.0}, neg{-0.1};
  CHECK(std::isinf(log_likelihood(one, ix, o)));
  CHECK(log_likelihood(one, ix, o) < 0.0);
  CHECK_THROWS_AS(log_likelihood(zero, ix, o), DomainError);
  CHECK_THROWS_AS(log_likelihood(neg, ix, o), DomainError);
  const std::vector<double> two{0.5, 0.5};
  CHECK_THROWS_AS(log_likelihood(two, ix, o), InvalidSpec);
  o.run_lengths = {1, 2};
  const std::vector<double> half{0.5};
  CHECK_THROWS_AS(log_likelihood(half, ix, o), InvalidSpec);
}

TEST_CASE("log_likelihood eventually decreases in theta when every time is large", "[estimators]") {
  // n_i = N_i: the partial derivative is N/theta + N/theta - Fbar (sum + N) / 1 for d = 1,
  // negative once Fbar * sum T is large.
  const auto ix = make_set({Times(10, 500)});
  MleOptions o;
  o.fbar = 0.05;
  double prev = -std::numeric_limits<double>::infinity();
  bool decreased = false;
  for (int j = 1; j <= 20; ++j) {
    const std::vector<double> th{0.05 * j};
    const double v = log_likelihood(th, ix, o);
    if (v < prev) decreased = true;
    prev = v;
  }
  CHECK(decreased);
}

TEST_CASE("mle_fit worked example against a dense grid", "[estimators]") {
  const auto ix = make_set({stationary_example()});
  MleOptions o;
  o.fbar = 0.01;
  const auto rec = mle_fit(ix, o);
  REQUIRE(rec.theta[0].has_value());
  // Grid oracle over (0, 1] with step 1e-4 on the direct evaluation.
  double best_t = 0.0, best_v = -std::numeric_limits<double>::infinity();
  for (int j = 1; j <= 10000; ++j) {
    const double t = j * 1e-4;
    const double v = brute_loglik(ix.classes, {t}, {1}, 0.01);
    if (v > best_v) {
      best_v = v;
      best_t = t;
    }
  }
  CHECK_THAT(best_t, WithinAbs(0.883, 5e-4));
  CHECK_THAT(*rec.theta[0], WithinAbs(best_t, 1.5e-4));
  // Closed form: the stationary score is 9.8 t^2 - 189.8 t + 160 = 0.
  const double root = (189.8 - std::sqrt(189.8 * 189.8 - 4.0 * 9.8 * 160.0)) / (2.0 * 9.8);
  CHECK_THAT(*rec.theta[0], WithinAbs(root, 1e-6));
  CHECK_THAT(rec.gamma, WithinAbs(root, 1e-6));
  CHECK(rec.boundary_phases.empty());
  CHECK_FALSE(rec.all_within_cluster);
}

TEST_CASE("mle_fit score vanishes at interior optima", "[estimators][property]") {
  std::mt19937_64 gen(99);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + trial % 7;
    auto c = random_classes(gen, d, 60);
    const auto ix = make_set(c);
    MleOptions o;
    o.fbar = 0.05;
    o.run_lengths = {1 + trial % 3};
    const auto rec = mle_fit(ix, o);
    if (!rec.boundary_phases.empty()) continue;
    ++checked;
    std::vector<double> th;
    for (const auto& t : rec.theta) th.push_back(*t);
    const double f0 = log_likelihood(th, ix, o);
    for (std::size_t j = 0; j < th.size(); ++j) {
      auto up = th, dn = th;
      up[j] += 1e-6;
      dn[j] -= 1e-6;
      const double score = (log_likelihood(up, ix, o) - log_likelihood(dn, ix, o)) / 2e-6;
      CHECK(std::abs(score) < 1e-4 * std::max(1.0, std::abs(f0) / 1e3));
    }
  }
  CHECK(checked >= 20);
}

TEST_CASE("mle_fit properties", "[estimators][property]") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 7;
    auto c = random_classes(gen, d, 40);
    MleOptions o;
    o.fbar = 0.03;
    o.run_lengths = {2};
    const auto rec = mle_fit(make_set(c), o);
    for (const auto& t : rec.theta) {
      CHECK(*t >= kThetaFloor);
      CHECK(*t <= 1.0);
    }
    // Permutation invariance.
    for (auto& cls : c) std::shuffle(cls.begin(), cls.end(), gen);
    const auto rec2 = mle_fit(make_set(c), o);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(*rec2.theta[i] == *rec.theta[i]);
    // Determinism.
    const auto rec3 = mle_fit(make_set(c), o);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(*rec3.theta[i] == *rec2.theta[i]);
  }
}

TEST_CASE("run-length counts are nonincreasing in k", "[estimators][property]") {
  std::mt19937_64 gen(21);
  const auto c = random_classes(gen, 7, 80);
  const auto ix = make_set(c);
  std::vector<double> prev(7, 1e300);
  for (int k = 0; k <= 30; ++k) {
    MleOptions o;
    o.run_lengths = {k};
    o.fbar = 0.05;
    const auto counts = detail::phase_counts(ix, o);
    for (const auto& pc : counts) {
      CHECK(pc.small_n <= prev[static_cast<std::size_t>(pc.phase - 1)]);
      prev[static_cast<std::size_t>(pc.phase - 1)] = pc.small_n;
    }
  }
}

TEST_CASE("mle_fit degenerate and missing cases", "[estimators]") {
  MleOptions o;
  o.fbar = 0.05;
  o.run_lengths = {10};
  SECTION("all within cluster") {
    const auto rec = mle_fit(make_set({{1, 2, 3}, {4, 1}}), o);
    CHECK(rec.all_within_cluster);
    CHECK(*rec.theta[0] == kThetaFloor);
    CHECK(rec.boundary_phases == std::vector<int>{1, 2});
  }
  SECTION("no times at all") {
    CHECK_THROWS_AS(mle_fit(make_set({{}, {}}, 1), o), NoExceedances);
  }
  SECTION("missing phase excluded from gamma") {
    o.run_lengths = {1};
    const auto rec = mle_fit(make_set({{1, 30, 40, 1, 50, 60}, {}}), o);
    CHECK(rec.missing_phases == std::vector<int>{2});
    CHECK_FALSE(rec.theta[1].has_value());
    CHECK(rec.gamma == *rec.theta[0]);
  }
  SECTION("k = 0 puts every time in the exponential part") {
    o.run_lengths = {0};
    const auto rec = mle_fit(make_set({{1, 1, 2, 30}}), o);
    CHECK(*rec.theta[0] == 1.0);
    CHECK(rec.boundary_phases == std::vector<int>{1});
  }
  SECTION("empirical Fbar needs the series length") {
    MleOptions e;
    CHECK_THROWS_AS(mle_fit(make_set({{1, 5}}), e), InvalidSpec);
    const auto rec = mle_fit(make_set({{1, 5}}, 3, 100), e);
    CHECK(rec.fbar == 0.03);
  }
  SECTION("bad options") {
    o.run_lengths = {1, 2, 3};
    CHECK_THROWS_AS(mle_fit(make_set({{1, 5}, {2}}), o), InvalidSpec);
    o.run_lengths = {-1};
    CHECK_THROWS_AS(mle_fit(make_set({{1, 5}}), o), InvalidSpec);
    o.run_lengths = {1};
    o.fbar = 1.5;
    CHECK_THROWS_AS(mle_fit(make_set({{1, 5}}), o), InvalidSpec);
  }
}
