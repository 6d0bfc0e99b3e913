#ifndef EXCLUST_ESTIMATORS_HPP
#define EXCLUST_ESTIMATORS_HPP

// Moment (intervals) and likelihood estimators of the per-phase extremal
// clustering values theta_1..theta_d and their mean gamma, computed from the
// interexceedance times of a periodic sequence.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "exclust/core.hpp"

namespace exclust {

// ---------------------------------------------------------------------------
// Intervals estimators

namespace detail {

inline void require_times(std::span<const std::int64_t> times, const char* who) {
  if (times.empty()) throw MissingData(std::string(who) + ": no interexceedance times");
  for (auto t : times)
    if (t < 1) throw DomainError(std::string(who) + ": interexceedance times must be >= 1");
}

}  // namespace detail

// 2 (sum T)^2 / (N sum T^2). Uncapped.
inline double intervals_hat(std::span<const std::int64_t> times) {
  detail::require_times(times, "intervals_hat");
  double s1 = 0.0, s2 = 0.0;
  for (auto t : times) {
    const double x = static_cast<double>(t);
    s1 += x;
    s2 += x * x;
  }
  return 2.0 * s1 * s1 / (static_cast<double>(times.size()) * s2);
}

// 2 (sum (T-1))^2 / (N sum (T-1)(T-2)); first-order unbiased. Uncapped.
inline double intervals_tilde(std::span<const std::int64_t> times) {
  detail::require_times(times, "intervals_tilde");
  double s1 = 0.0, s2 = 0.0;
  for (auto t : times) {
    const double x = static_cast<double>(t);
    s1 += x - 1.0;
    s2 += (x - 1.0) * (x - 2.0);
  }
  if (!(s2 > 0.0)) throw ZeroDenominator("intervals_tilde: max(T) <= 2");
  return 2.0 * s1 * s1 / (static_cast<double>(times.size()) * s2);
}

inline double intervals_star(std::span<const std::int64_t> times) {
  detail::require_times(times, "intervals_star");
  const auto tmax = *std::max_element(times.begin(), times.end());
  return std::min(1.0, tmax <= 2 ? intervals_hat(times) : intervals_tilde(times));
}

// theta*_i for every phase with at least one time; gamma is the mean of the
// present values. Phases without times are reported missing.
inline EstimateRecord estimate_thetas_intervals(const InterexceedanceSet& ix) {
  EstimateRecord rec;
  rec.method = EstimatorMethod::kIntervals;
  rec.theta.assign(static_cast<std::size_t>(ix.d), std::nullopt);
  double sum = 0.0;
  int present = 0;
  for (int i = 1; i <= ix.d; ++i) {
    if (ix.times(i).empty()) {
      rec.missing_phases.push_back(i);
      continue;
    }
    const double th = intervals_star(ix.times(i));
    rec.theta[static_cast<std::size_t>(i - 1)] = th;
    sum += th;
    ++present;
  }
  if (present == 0) throw NoExceedances("no interexceedance times in any phase");
  rec.gamma = sum / present;
  return rec;
}

// ---------------------------------------------------------------------------
// Moment algebra of the limiting interexceedance law P(T > n) = theta p^{n gamma}

// (E T, E T^2).
inline std::pair<double, double> moments_T(double theta, double gamma, double p) {
  if (!(theta >= 0.0 && theta <= 1.0) || !(gamma > 0.0 && gamma <= 1.0) || !(p > 0.0 && p < 1.0))
    throw DomainError("moments_T: argument out of range");
  const double q = std::exp(gamma * std::log(p));
  const double one_minus_q = -std::expm1(gamma * std::log(p));
  if (!(one_minus_q > 0.0)) throw DomainError("moments_T: p^gamma == 1, moments overflow");
  const double r = theta * q / one_minus_q;
  const double m2 = 1.0 + r + 2.0 * r / one_minus_q;
  if (!std::isfinite(m2)) throw DomainError("moments_T: p^gamma == 1, moments overflow");
  return {1.0 + r, m2};
}

// Inverts E(Fbar T) = theta/gamma, E((Fbar T)^2) = 2 theta/gamma^2.
// Returns (gamma, theta).
inline std::pair<double, double> moment_solution(double m1, double m2) {
  if (!(m2 > 0.0)) throw DomainError("moment_solution: second moment must be positive");
  return {2.0 * m1 / m2, 2.0 * m1 * m1 / m2};
}

// ---------------------------------------------------------------------------
// Likelihood

struct MleOptions {
  // One shared run length, or one per phase.
  std::vector<int> run_lengths{1};
  // Exceedance probability Fbar(u); nullopt means the empirical proportion
  // |E| / n of the data.
  std::optional<double> fbar;
  double tolerance = 1e-8;
  int multistart = 2;

  int k_for_phase(int phase) const {
    return run_lengths.size() == 1 ? run_lengths[0] : run_lengths[static_cast<std::size_t>(phase - 1)];
  }
};

inline constexpr double kThetaFloor = 1e-6;

namespace detail {

struct PhaseCounts {
  int phase = 0;
  double big_n = 0.0;   // N_i
  double small_n = 0.0; // n_i = #{T > k_i}
  double excess = 0.0;  // sum over T > k_i of (T - 1)
};

inline void validate_options(const MleOptions& opts, int d) {
  if (opts.run_lengths.size() != 1 && opts.run_lengths.size() != static_cast<std::size_t>(d))
    throw InvalidSpec("run lengths: expected 1 or d entries");
  for (int k : opts.run_lengths)
    if (k < 0) throw InvalidSpec("run lengths must be >= 0");
  if (!(opts.tolerance > 0.0)) throw InvalidSpec("optimizer tolerance must be positive");
  if (opts.fbar && !(*opts.fbar > 0.0 && *opts.fbar < 1.0)) throw InvalidSpec("Fbar must lie in (0,1)");
}

inline double resolve_fbar(const InterexceedanceSet& ix, const MleOptions& opts) {
  if (opts.fbar) return *opts.fbar;
  if (ix.series_length <= 0) throw InvalidSpec("empirical Fbar needs the series length");
  const double f = static_cast<double>(ix.total_exceedances) / static_cast<double>(ix.series_length);
  if (!(f > 0.0 && f < 1.0)) throw InvalidSpec("empirical Fbar outside (0,1)");
  return f;
}

inline std::vector<PhaseCounts> phase_counts(const InterexceedanceSet& ix, const MleOptions& opts) {
  std::vector<PhaseCounts> out;
  for (int i = 1; i <= ix.d; ++i) {
    const auto& t = ix.times(i);
    if (t.empty()) continue;
    PhaseCounts c;
    c.phase = i;
    c.big_n = static_cast<double>(t.size());
    const int k = opts.k_for_phase(i);
    for (auto v : t)
      if (v > k) {
        c.small_n += 1.0;
        c.excess += static_cast<double>(v - 1);
      }
    out.push_back(c);
  }
  return out;
}

// Objective over the modeled phases only; theta has one entry per element of
// `counts`.
struct Likelihood {
  std::vector<PhaseCounts> counts;
  double fbar = 0.0;
  double n_total = 0.0;
  double excess_total = 0.0;

  Likelihood(std::vector<PhaseCounts> c, double f) : counts(std::move(c)), fbar(f) {
    for (const auto& pc : counts) {
      n_total += pc.small_n;
      excess_total += pc.excess;
    }
  }

  std::size_t size() const { return counts.size(); }

  double value(std::span<const double> theta) const {
    double l = 0.0, sum = 0.0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
      const double th = theta[j];
      const auto& c = counts[j];
      if (!(th > 0.0) || th > 1.0) throw DomainError("log_likelihood: theta outside (0,1]");
      const double zero_part = c.big_n - c.small_n;
      if (zero_part > 0.0) {
        if (th >= 1.0) return -std::numeric_limits<double>::infinity();
        l += zero_part * std::log1p(-th);
      }
      if (c.small_n > 0.0) l += c.small_n * std::log(th);
      sum += th;
    }
    const double gamma = sum / static_cast<double>(counts.size());
    if (n_total > 0.0) l += n_total * std::log(gamma);
    return l - gamma * fbar * (excess_total + n_total);
  }

  void gradient(std::span<const double> theta, std::span<double> g) const {
    const double m = static_cast<double>(counts.size());
    const double gamma = std::accumulate(theta.begin(), theta.end(), 0.0) / m;
    const double common = (n_total / gamma - fbar * (excess_total + n_total)) / m;
    for (std::size_t j = 0; j < counts.size(); ++j) {
      const auto& c = counts[j];
      const double zero_part = c.big_n - c.small_n;
      double gj = common;
      if (zero_part > 0.0) gj -= zero_part / (1.0 - theta[j]);
      if (c.small_n > 0.0) gj += c.small_n / theta[j];
      g[j] = gj;
    }
  }

  // Negative Hessian = diag(p) + c 11^T.
  void neg_hessian(std::span<const double> theta, std::span<double> diag, double& rank_one) const {
    const double m = static_cast<double>(counts.size());
    const double gamma = std::accumulate(theta.begin(), theta.end(), 0.0) / m;
    rank_one = n_total / (m * m * gamma * gamma);
    for (std::size_t j = 0; j < counts.size(); ++j) {
      const auto& c = counts[j];
      const double zero_part = c.big_n - c.small_n;
      double p = 0.0;
      if (zero_part > 0.0) p += zero_part / ((1.0 - theta[j]) * (1.0 - theta[j]));
      if (c.small_n > 0.0) p += c.small_n / (theta[j] * theta[j]);
      diag[j] = p;
    }
  }
};

struct FitResult {
  std::vector<double> theta;
  double value = -std::numeric_limits<double>::infinity();
};

// Projected Newton ascent on the box [lo, 1]^m for the concave objective.
// Coordinates sitting on a bound with the gradient pointing outwards are held
// fixed; the Newton system on the free block is diagonal plus rank one and is
// solved by Sherman-Morrison. Stops when an accepted step improves the
// objective by less than `tol`.
inline FitResult maximize_box(const Likelihood& lik, std::vector<double> x, double lo, double tol) {
  const std::size_t m = lik.size();
  const double hi = 1.0;
  for (auto& v : x) v = std::clamp(v, lo, hi);
  double fx = lik.value(x);
  std::vector<double> g(m), diag(m), dir(m), trial(m);
  std::vector<char> is_free(m);
  for (int iter = 0; iter < 500; ++iter) {
    lik.gradient(x, g);
    for (std::size_t j = 0; j < m; ++j)
      is_free[j] = !((x[j] <= lo && g[j] < 0.0) || (x[j] >= hi && g[j] > 0.0));

    double c = 0.0;
    lik.neg_hessian(x, diag, c);
    double s_g = 0.0, s_1 = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (is_free[j]) {
        s_g += g[j] / diag[j];
        s_1 += 1.0 / diag[j];
      }
    const double corr = c * s_g / (1.0 + c * s_1);
    bool any_free = false;
    for (std::size_t j = 0; j < m; ++j) {
      dir[j] = is_free[j] ? (g[j] - corr) / diag[j] : 0.0;
      any_free = any_free || (is_free[j] && dir[j] != 0.0);
    }
    if (!any_free) break;

    double step = 1.0;
    bool accepted = false;
    double f_new = fx;
    for (int ls = 0; ls < 60; ++ls) {
      double slope = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        trial[j] = std::clamp(x[j] + step * dir[j], lo, hi);
        slope += g[j] * (trial[j] - x[j]);
      }
      f_new = lik.value(trial);
      if (f_new >= fx + 1e-4 * slope && f_new >= fx) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double gain = f_new - fx;
    x = trial;
    fx = f_new;
    if (gain < tol) break;
  }
  return {std::move(x), fx};
}

}  // namespace detail

// l(theta) = sum_i [(N_i - n_i) log(1 - theta_i) + n_i log theta_i]
//            + (sum n_i) log gamma - gamma Fbar (sum_{T > k_i} (T - 1) + sum n_i),
// with n_i = #{T in I_i : T > k_i} and gamma the mean of theta over the phases
// that have data. theta holds d entries; entries of empty phases are ignored.
inline double log_likelihood(std::span<const double> theta, const InterexceedanceSet& ix, const MleOptions& opts) {
  detail::validate_options(opts, ix.d);
  if (theta.size() != static_cast<std::size_t>(ix.d)) throw InvalidSpec("theta must have d entries");
  detail::Likelihood lik(detail::phase_counts(ix, opts), detail::resolve_fbar(ix, opts));
  if (lik.size() == 0) throw NoExceedances("no interexceedance times in any phase");
  std::vector<double> th;
  for (const auto& c : lik.counts) th.push_back(theta[static_cast<std::size_t>(c.phase - 1)]);
  return lik.value(th);
}

inline EstimateRecord mle_fit(const InterexceedanceSet& ix, const MleOptions& opts) {
  detail::validate_options(opts, ix.d);
  EstimateRecord rec;
  rec.method = EstimatorMethod::kMle;
  rec.theta.assign(static_cast<std::size_t>(ix.d), std::nullopt);
  for (int i = 1; i <= ix.d; ++i) {
    rec.run_lengths.push_back(opts.k_for_phase(i));
    if (ix.times(i).empty()) rec.missing_phases.push_back(i);
  }
  auto counts = detail::phase_counts(ix, opts);
  if (counts.empty()) throw NoExceedances("no interexceedance times in any phase");
  rec.fbar = detail::resolve_fbar(ix, opts);
  detail::Likelihood lik(std::move(counts), rec.fbar);
  const std::size_t m = lik.size();

  std::vector<double> best;
  if (lik.n_total == 0.0) {
    // Every time is within-cluster: the likelihood increases towards theta = 0.
    best.assign(m, kThetaFloor);
    rec.all_within_cluster = true;
  } else {
    std::vector<std::vector<double>> starts;
    std::vector<double> a(m);
    for (std::size_t j = 0; j < m; ++j) a[j] = lik.counts[j].small_n / lik.counts[j].big_n;
    starts.push_back(a);
    if (opts.multistart > 1) starts.emplace_back(m, 0.5);
    double best_value = -std::numeric_limits<double>::infinity();
    for (auto& s : starts) {
      // Start strictly inside where log(1 - theta) is finite.
      for (std::size_t j = 0; j < m; ++j)
        if (lik.counts[j].big_n > lik.counts[j].small_n) s[j] = std::min(s[j], 1.0 - 1e-3);
      auto fit = detail::maximize_box(lik, s, kThetaFloor, opts.tolerance);
      if (fit.value > best_value) {
        best_value = fit.value;
        best = std::move(fit.theta);
      }
    }
  }

  double sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const int phase = lik.counts[j].phase;
    rec.theta[static_cast<std::size_t>(phase - 1)] = best[j];
    sum += best[j];
    if (best[j] <= kThetaFloor * (1.0 + 1e-9) || best[j] >= 1.0 - kThetaFloor) rec.boundary_phases.push_back(phase);
  }
  rec.gamma = sum / static_cast<double>(m);
  return rec;
}

}  // namespace exclust

#endif  // EXCLUST_ESTIMATORS_HPP
