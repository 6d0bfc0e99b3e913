#ifndef EXCLUST_THEORY_HPP
#define EXCLUST_THEORY_HPP

// Monte Carlo and quadrature oracles for the local extremal indices
// theta_{i,n} = P(M_{i,i+p_n} <= u | X_i > u), their average gamma_n, the
// limit law of the maximum and of normalized interexceedance times, and the
// lag-k tail dependence chi_i(k).
//
// Conditional Monte Carlo starts each path at position i with X_i drawn from
// the marginal restricted to (u, inf). Every simulator here is a Markov chain
// with a common marginal, so this is the conditional law of the path given
// X_i > u and avoids discarding non-exceeding draws.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "exclust/core.hpp"
#include "exclust/models.hpp"
#include "exclust/parallel.hpp"
#include "exclust/quadrature.hpp"
#include "exclust/rng.hpp"

namespace exclust {

struct BlockingPlan {
  std::int64_t n = 0;
  std::int64_t p_n = 0;  // window
  std::int64_t q_n = 0;  // separation

  // q_n = floor(n^{1/3}), p_n = floor(sqrt(n q_n)).
  static BlockingPlan default_for(std::int64_t n) {
    BlockingPlan b;
    b.n = n;
    b.q_n = static_cast<std::int64_t>(std::floor(std::cbrt(static_cast<double>(n)) + 1e-9));
    b.p_n = static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(n * b.q_n)) + 1e-9));
    b.validate();
    return b;
  }

  void validate() const {
    if (!(q_n >= 1 && q_n < p_n && p_n < n)) throw InvalidSpec("blocking plan requires 1 <= q_n < p_n < n");
  }
};

// A Monte Carlo proportion with its binomial (or delta-method) standard error.
struct ProbEstimate {
  double value = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  std::int64_t count = 0;  // conditioning events
  bool defined = false;
};

inline ProbEstimate proportion(std::int64_t successes, std::int64_t trials) {
  ProbEstimate e;
  e.count = trials;
  if (trials <= 0) return e;
  e.value = static_cast<double>(successes) / static_cast<double>(trials);
  e.se = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(trials));
  e.defined = true;
  return e;
}

// |observed - predicted| < z * se. A zero SE degenerates to exact equality up
// to rounding.
inline bool within_se(double observed, double predicted, double se, double z = 3.0) {
  return std::abs(observed - predicted) <= std::max(z * se, 1e-12);
}

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t s = seed ^ (tag * 0xd1b54a32d192ed03ULL);
  return splitmix64(s);
}

// Sums per-chunk integer counters over `reps` replicates in index order.
template <class PerRep>
std::vector<std::int64_t> sum_over_reps(std::int64_t reps, unsigned workers, std::size_t width, PerRep&& per_rep) {
  constexpr std::int64_t kChunk = 256;
  const auto chunks = static_cast<std::size_t>((reps + kChunk - 1) / kChunk);
  auto partial = parallel_map(chunks, workers, [&](std::size_t c) {
    std::vector<std::int64_t> acc(width, 0);
    const std::int64_t lo = static_cast<std::int64_t>(c) * kChunk;
    const std::int64_t hi = std::min(reps, lo + kChunk);
    for (std::int64_t r = lo; r < hi; ++r) per_rep(r, acc);
    return acc;
  });
  std::vector<std::int64_t> total(width, 0);
  for (const auto& p : partial)
    for (std::size_t k = 0; k < width; ++k) total[k] += p[k];
  return total;
}

// True iff X_{i+1..i+window} all stay <= u, starting from x0 at position i.
inline bool stays_below(const PeriodicModelSpec& spec, std::int64_t i, double x0, std::int64_t window, double u,
                        RngStream& rng) {
  double x = x0;
  for (std::int64_t k = 0; k < window; ++k) {
    x = step_from(spec, i + k, x, rng);
    if (x > u) return false;
  }
  return true;
}

}  // namespace detail

// Conditional Monte Carlo estimate of theta_{i,n} with window p_n.
inline ProbEstimate empirical_theta_local(const PeriodicModelSpec& spec, std::int64_t i, std::int64_t window,
                                          double u, std::int64_t reps, std::uint64_t seed, unsigned workers = 0) {
  spec.validate();
  if (i < 1 || window < 1 || reps < 1) throw InvalidSpec("empirical_theta_local: i, window, reps must be >= 1");
  const auto phase = static_cast<std::uint64_t>(phase_of(i, spec.d));
  auto tot = detail::sum_over_reps(reps, workers, 1, [&](std::int64_t r, std::vector<std::int64_t>& acc) {
    RngStream rng(seed, static_cast<std::uint64_t>(r), phase);
    const double x0 = draw_marginal_tail(spec.family, u, rng);
    if (detail::stays_below(spec, i, x0, window, u, rng)) ++acc[0];
  });
  return proportion(tot[0], reps);
}

inline ProbEstimate empirical_theta_local(const PeriodicModelSpec& spec, std::int64_t i, const BlockingPlan& plan,
                                          double u, std::int64_t reps, std::uint64_t seed, unsigned workers = 0) {
  plan.validate();
  return empirical_theta_local(spec, i, plan.p_n, u, reps, seed, workers);
}

struct GammaEstimate {
  double value = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;
  std::vector<ProbEstimate> per_phase;  // period mode only
};

enum class GammaMode { kPeriod, kFullSum };

// gamma_n = n^{-1} sum_j theta_{j,n}.
//
// kPeriod: mean of the d conditional estimates theta_{i,n}, i = 1..d.
// kFullSum: simulates whole series X_1..X_{n+p_n} and pools, over j <= n,
// the events {X_j > u} and {X_j > u, M_{j,j+p_n} <= u}. The marginal is
// common to every position, so the pooled ratio estimates the same average.
// Its SE is the delta-method SE of a ratio of per-realization sums.
inline GammaEstimate empirical_gamma_n(const PeriodicModelSpec& spec, const BlockingPlan& plan, double u,
                                       std::int64_t reps, std::uint64_t seed, unsigned workers = 0,
                                       GammaMode mode = GammaMode::kPeriod) {
  spec.validate();
  plan.validate();
  GammaEstimate g;
  if (mode == GammaMode::kPeriod) {
    double sum = 0.0, var = 0.0;
    g.defined = true;
    for (int i = 1; i <= spec.d; ++i) {
      auto e = empirical_theta_local(spec, i, plan.p_n, u, reps, seed, workers);
      g.defined = g.defined && e.defined;
      sum += e.value;
      var += e.se * e.se;
      g.per_phase.push_back(e);
    }
    g.value = sum / spec.d;
    g.se = std::sqrt(var) / spec.d;
    return g;
  }

  const std::int64_t total_len = plan.n + plan.p_n;
  auto per_rep = parallel_map(static_cast<std::size_t>(reps), workers, [&](std::size_t r) {
    RngStream rng(seed, r, 0x5eedULL);
    const auto v = simulate_stretch(spec, 1, draw_marginal(spec.family, rng), total_len, rng);
    std::int64_t a = 0, b = 0;
    // next_exc: index (0-based) of the next exceedance strictly after k.
    std::int64_t next_exc = total_len + plan.p_n + 1;
    for (std::int64_t k = total_len - 1; k >= 0; --k) {
      const bool exc = v[static_cast<std::size_t>(k)] > u;
      if (k < plan.n && exc) {
        ++b;
        if (next_exc > k + plan.p_n) ++a;
      }
      if (exc) next_exc = k;
    }
    return std::pair<std::int64_t, std::int64_t>{a, b};
  });
  double sa = 0.0, sb = 0.0;
  for (auto [a, b] : per_rep) {
    sa += static_cast<double>(a);
    sb += static_cast<double>(b);
  }
  if (sb <= 0.0) return g;
  g.value = sa / sb;
  double ss = 0.0;
  for (auto [a, b] : per_rep) {
    const double r = static_cast<double>(a) - g.value * static_cast<double>(b);
    ss += r * r;
  }
  const double rn = static_cast<double>(reps);
  g.se = reps > 1 ? std::sqrt(ss * rn / (rn - 1.0)) / sb : 0.0;
  g.defined = true;
  return g;
}

struct MaxDistRow {
  double tail_p = 0.0;
  double tau = 0.0;
  double level = 0.0;
  double empirical = 0.0;  // P(M_n <= u)
  double se = 0.0;
  double gamma_hat = 0.0;
  double predicted = 0.0;  // exp(-tau gamma_hat)
  double discrepancy = 0.0;
  double reference = 0.0;  // exp(-tau)
};

// Empirical P(M_n <= q_p) over `reps` realizations for each tail probability,
// against exp(-n p gamma_hat) with gamma_hat from empirical_gamma_n under the
// default blocking plan. One set of realizations serves every p.
inline std::vector<MaxDistRow> max_dist_check(const PeriodicModelSpec& spec, std::int64_t n,
                                              std::span<const double> tail_probs, std::int64_t reps,
                                              std::uint64_t seed, unsigned workers = 0,
                                              std::int64_t gamma_reps = 4000) {
  spec.validate();
  auto maxima = parallel_map(static_cast<std::size_t>(reps), workers, [&](std::size_t r) {
    RngStream rng(seed, r);
    double x = draw_marginal(spec.family, rng);
    double m = x;
    for (std::int64_t k = 1; k < n; ++k) {
      x = step_from(spec, k, x, rng);
      m = std::max(m, x);
    }
    return m;
  });
  const auto plan = BlockingPlan::default_for(n);
  std::vector<MaxDistRow> rows;
  for (double p : tail_probs) {
    MaxDistRow row;
    row.tail_p = p;
    row.tau = static_cast<double>(n) * p;
    row.level = resolve_threshold(ThresholdSpec::exceedance_prob(p), spec.family);
    const auto below = std::count_if(maxima.begin(), maxima.end(), [&](double m) { return m <= row.level; });
    const auto est = proportion(below, reps);
    row.empirical = est.value;
    row.se = est.se;
    row.gamma_hat = empirical_gamma_n(spec, plan, row.level, gamma_reps, detail::derive_seed(seed, 1), workers).value;
    row.predicted = std::exp(-row.tau * row.gamma_hat);
    row.discrepancy = row.empirical - row.predicted;
    row.reference = std::exp(-row.tau);
    rows.push_back(row);
  }
  return rows;
}

struct TailPoint {
  double t = 0.0;
  double empirical = 0.0;  // P(Fbar(u) T_i(u) > t)
  double se = 0.0;
  double model = std::numeric_limits<double>::quiet_NaN();  // theta_i exp(-gamma t)
};

struct TailCurve {
  std::vector<TailPoint> points;
  std::int64_t conditioning_count = 0;
  std::int64_t censored = 0;
  bool defined = false;
};

// Survival of the normalized interexceedance time Fbar(u) T_i(u), starting
// from an exceedance at position i. Paths with no exceedance within
// `max_steps` are censored and count as surviving every grid point below
// Fbar(u) max_steps. `oracle_theta`/`oracle_gamma` (NaN to omit) give the
// model curve theta_i exp(-gamma t).
inline TailCurve interexceedance_tail(const PeriodicModelSpec& spec, std::int64_t i, double u,
                                      std::span<const double> t_grid, std::int64_t reps, std::uint64_t seed,
                                      unsigned workers = 0,
                                      double oracle_theta = std::numeric_limits<double>::quiet_NaN(),
                                      double oracle_gamma = std::numeric_limits<double>::quiet_NaN(),
                                      std::int64_t max_steps = 0) {
  spec.validate();
  for (double t : t_grid)
    if (!(t > 0.0)) throw InvalidSpec("interexceedance_tail: t grid must be positive");
  const double fbar = marginal_survival(spec.family, u);
  if (max_steps <= 0) max_steps = static_cast<std::int64_t>(std::ceil(60.0 / fbar));
  const auto phase = static_cast<std::uint64_t>(phase_of(i, spec.d));
  // Slot k counts paths with Fbar T > t_k; the last slot counts censored paths.
  auto tot = detail::sum_over_reps(reps, workers, t_grid.size() + 1, [&](std::int64_t r, std::vector<std::int64_t>& acc) {
    RngStream rng(seed, static_cast<std::uint64_t>(r), phase);
    double x = draw_marginal_tail(spec.family, u, rng);
    std::int64_t steps = 0;
    bool hit = false;
    while (steps < max_steps) {
      x = step_from(spec, i + steps, x, rng);
      ++steps;
      if (x > u) {
        hit = true;
        break;
      }
    }
    if (!hit) ++acc[t_grid.size()];
    const double scaled = hit ? fbar * static_cast<double>(steps) : std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < t_grid.size(); ++k)
      if (scaled > t_grid[k]) ++acc[k];
  });
  TailCurve curve;
  curve.conditioning_count = reps;
  curve.censored = tot[t_grid.size()];
  curve.defined = reps > 0;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const auto e = proportion(tot[k], reps);
    TailPoint pt{t_grid[k], e.value, e.se, std::numeric_limits<double>::quiet_NaN()};
    if (std::isfinite(oracle_theta) && std::isfinite(oracle_gamma))
      pt.model = oracle_theta * std::exp(-oracle_gamma * t_grid[k]);
    curve.points.push_back(pt);
  }
  return curve;
}

// Per-phase proportion of {X_{j+k} > u} among {X_j > u}, j + k <= n.
inline std::vector<ProbEstimate> chi_lag(std::span<const double> values, int d, std::int64_t k, double u) {
  if (d < 1 || k < 1) throw InvalidSpec("chi_lag: d and k must be >= 1");
  std::vector<std::int64_t> hits(static_cast<std::size_t>(d), 0), base(static_cast<std::size_t>(d), 0);
  const auto n = static_cast<std::int64_t>(values.size());
  for (std::int64_t j = 1; j + k <= n; ++j) {
    if (!(values[static_cast<std::size_t>(j - 1)] > u)) continue;
    const auto ph = static_cast<std::size_t>(phase_of(j, d) - 1);
    ++base[ph];
    if (values[static_cast<std::size_t>(j + k - 1)] > u) ++hits[ph];
  }
  std::vector<ProbEstimate> out;
  for (std::size_t ph = 0; ph < hits.size(); ++ph) out.push_back(proportion(hits[ph], base[ph]));
  return out;
}

inline std::vector<ProbEstimate> chi_lag(const Series& s, std::int64_t k, double u) {
  return chi_lag(std::span<const double>(s.values), s.spec.d, k, u);
}

// ---------------------------------------------------------------------------
// Quadrature oracle for the logistic chain

enum class QuadratureMapping {
  kSquare,  // y = u s^2, s in (0, 1]
  kLog,     // y = exp(v), v in [log y_min, log u]
};

struct QuadratureResult {
  double value = std::numeric_limits<double>::quiet_NaN();          // at `nodes`
  double value_refined = std::numeric_limits<double>::quiet_NaN();  // at 2 * nodes
  double relative_change = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
};

namespace detail {

inline QuadratureRule logistic_grid(int nodes, double u, QuadratureMapping mapping) {
  if (mapping == QuadratureMapping::kSquare) {
    auto rule = gauss_legendre(nodes, 0.0, 1.0);
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const double s = rule.nodes[k];
      rule.nodes[k] = u * s * s;
      rule.weights[k] *= 2.0 * u * s;
    }
    return rule;
  }
  // Unit Frechet mass below 1/40 is e^{-40}.
  const double lo = std::log(std::min(1.0 / 40.0, 0.5 * u));
  auto rule = gauss_legendre(nodes, lo, std::log(u));
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    rule.nodes[k] = std::exp(rule.nodes[k]);
    rule.weights[k] *= rule.nodes[k];
  }
  return rule;
}

// P(max X_{i+1..i+k} <= u, X_i > u) on a fixed grid.
inline double logistic_joint_tail_stay(const PeriodicModelSpec& spec, std::int64_t i, std::int64_t k, double u,
                                       int nodes, QuadratureMapping mapping) {
  const auto alpha_at = [&](std::int64_t pos) { return spec.param_for_phase(phase_of(pos, spec.d)); };
  const double a0 = alpha_at(i);
  if (k == 1) return std::exp(-1.0 / u) - logistic_joint_cdf(u, u, a0);

  const auto grid = logistic_grid(nodes, u, mapping);
  const std::size_t m = grid.nodes.size();
  // g(y): density of X_{i+1} on (0, u] jointly with X_i > u,
  //   d/dy [F(y) - F(u, y)] = y^{-2} e^{-1/y} - F(u,y) s^{a-1} y^{-1/a-1}.
  std::vector<double> g(m), next(m);
  const double ia = 1.0 / a0;
  const double us = std::pow(u, -ia);
  for (std::size_t l = 0; l < m; ++l) {
    const double y = grid.nodes[l];
    const double ys = std::pow(y, -ia);
    const double s = us + ys;
    const double frechet = std::exp(-1.0 / y - 2.0 * std::log(y));
    const double joint = std::exp(-std::pow(s, a0) + (a0 - 1.0) * std::log(s) + std::log(ys) - std::log(y));
    g[l] = std::max(0.0, frechet - joint);
  }
  // Kernel matrices cached per distinct alpha.
  std::vector<std::pair<double, std::vector<double>>> kernels;
  auto kernel_for = [&](double a) -> const std::vector<double>& {
    for (const auto& [ka, mat] : kernels)
      if (ka == a) return mat;
    std::vector<double> mat(m * m);
    for (std::size_t l = 0; l < m; ++l)
      for (std::size_t r = 0; r < m; ++r)
        mat[l * m + r] = grid.weights[l] * logistic_conditional_density(grid.nodes[l], grid.nodes[r], a);
    kernels.emplace_back(a, std::move(mat));
    return kernels.back().second;
  };
  for (std::int64_t j = 1; j + 1 < k; ++j) {
    const auto& mat = kernel_for(alpha_at(i + j));
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t l = 0; l < m; ++l) {
      const double gl = g[l];
      if (gl == 0.0) continue;
      const double* row = &mat[l * m];
      for (std::size_t r = 0; r < m; ++r) next[r] += gl * row[r];
    }
    g.swap(next);
  }
  const double a_last = alpha_at(i + k - 1);
  double total = 0.0;
  for (std::size_t l = 0; l < m; ++l) total += grid.weights[l] * g[l] * logistic_conditional_cdf(grid.nodes[l], u, a_last);
  return total;
}

}  // namespace detail

// theta_i^{(k)}(u) = P(M_{i,i+k} <= u | X_i > u) for the logistic chain by
// forward recursion of the sub-threshold density through the transition
// kernel on a Gauss-Legendre grid over (0, u]. Convergence is judged by
// repeating the computation with twice the nodes. The default grid is
// uniform in log y: the square-root grid starves the bulk of the Frechet law
// of nodes once u is large (p below about 1e-5).
inline QuadratureResult logistic_theta_quadrature(const PeriodicModelSpec& spec, std::int64_t i, std::int64_t k,
                                                  double u, int nodes = 256,
                                                  QuadratureMapping mapping = QuadratureMapping::kLog,
                                                  double rel_tol = 1e-4) {
  spec.validate();
  if (spec.family != Family::kLogisticMarkov) throw InvalidSpec("quadrature oracle needs a logistic-markov spec");
  if (k < 1) throw InvalidSpec("window k must be >= 1");
  if (nodes < 64) throw InvalidSpec("node count must be >= 64");
  if (!(u > 0.0)) throw InvalidSpec("threshold must be positive");
  const double tail = marginal_survival(Family::kLogisticMarkov, u);
  QuadratureResult res;
  res.value = detail::logistic_joint_tail_stay(spec, i, k, u, nodes, mapping) / tail;
  res.value_refined = k == 1 ? res.value : detail::logistic_joint_tail_stay(spec, i, k, u, 2 * nodes, mapping) / tail;
  res.relative_change = std::abs(res.value_refined - res.value) / std::max(std::abs(res.value_refined), 1e-300);
  res.converged = res.relative_change < rel_tol;
  return res;
}

// ---------------------------------------------------------------------------
// Verification report

struct VerificationRow {
  std::string check;
  std::string params;
  double observed = 0.0;
  double predicted = 0.0;
  double se = 0.0;
  bool pass = false;
};

inline void write_verification_csv(std::ostream& os, std::span<const VerificationRow> rows) {
  os << "check,params,observed,predicted,se,pass\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g", r.observed, r.predicted, r.se);
    os << r.check << ",\"" << r.params << "\"," << buf << ',' << (r.pass ? "true" : "false") << '\n';
  }
}

inline void write_verification_csv(const std::string& path, std::span<const VerificationRow> rows) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_verification_csv(os, rows);
}

}  // namespace exclust

#endif  // EXCLUST_THEORY_HPP
