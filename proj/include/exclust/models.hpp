#ifndef EXCLUST_MODELS_HPP
#define EXCLUST_MODELS_HPP

// Seeded simulators for the periodic Gaussian autoregression and the periodic
// bivariate-logistic Markov chain, plus marginal checks and series text I/O.
//
// Phase convention: the parameter of phase i drives the step from a position
// i to position i + 1, i.e. X_{i+1} = rho_i X_i + eps_i and (X_i, X_{i+1})
// has the bivariate logistic distribution with parameter alpha_i.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "exclust/core.hpp"
#include "exclust/rng.hpp"

namespace exclust {

// ---------------------------------------------------------------------------
// Presets

// d = 7, parameter of phase i = 0.5 + 0.25 sin(2 pi (i - 1) / 7).
inline std::vector<double> paper_periodic_params() {
  std::vector<double> p(7);
  for (int i = 1; i <= 7; ++i) p[static_cast<std::size_t>(i - 1)] = 0.5 + 0.25 * std::sin(2.0 * std::numbers::pi * (i - 1) / 7.0);
  return p;
}

inline PeriodicModelSpec paper_gaussian() { return {Family::kGaussianAr, 7, paper_periodic_params()}; }
inline PeriodicModelSpec paper_logistic() { return {Family::kLogisticMarkov, 7, paper_periodic_params()}; }

inline PeriodicModelSpec preset(std::string_view name) {
  if (name == "paper-gaussian") return paper_gaussian();
  if (name == "paper-logistic") return paper_logistic();
  throw InvalidSpec("unknown preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Bivariate logistic with unit Frechet margins:
//   F(x, y) = exp{-(x^{-1/a} + y^{-1/a})^a}.

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidSpec("alpha must lie in (0,1], got " + std::to_string(alpha));
}

inline double logistic_joint_cdf(double x, double y, double alpha) {
  check_alpha(alpha);
  if (x <= 0.0 || y <= 0.0) return 0.0;
  const double s = std::pow(x, -1.0 / alpha) + std::pow(y, -1.0 / alpha);
  return std::exp(-std::pow(s, alpha));
}

// F(y | x) = P(X_{k+1} <= y | X_k = x)
//          = x^{1-1/a} s^{a-1} exp(1/x - s^a),  s = x^{-1/a} + y^{-1/a}.
inline double logistic_conditional_cdf(double x, double y, double alpha) {
  check_alpha(alpha);
  if (!(x > 0.0)) throw DomainError("logistic_conditional_cdf: x must be positive");
  if (y <= 0.0) return 0.0;
  if (std::isinf(y)) return 1.0;
  const double ia = 1.0 / alpha;
  const double s = std::pow(x, -ia) + std::pow(y, -ia);
  const double log_f = (1.0 - ia) * std::log(x) + (alpha - 1.0) * std::log(s) + 1.0 / x - std::pow(s, alpha);
  return std::min(1.0, std::exp(log_f));
}

// Conditional density dF(y|x)/dy.
inline double logistic_conditional_density(double x, double y, double alpha) {
  if (!(x > 0.0) || !(y > 0.0)) return 0.0;
  const double ia = 1.0 / alpha;
  const double xs = std::pow(x, -ia);
  const double ys = std::pow(y, -ia);
  const double s = xs + ys;
  const double sa = std::pow(s, alpha);
  // (1-a) s^{a-2} + a s^{2a-2} = s^{a-2} (1 - a + a s^a)
  const double log_f = (1.0 - ia) * std::log(x) + 1.0 / x - sa + (alpha - 2.0) * std::log(s) +
                       std::log1p(alpha * (sa - 1.0)) - std::log(alpha) + std::log(ys) - std::log(y);
  return std::exp(log_f);
}

// Solves F(y | x) = U for y.
//
// With w = s^a and w0 = 1/x the conditional cdf is (w/w0)^{1-1/a} e^{-(w-w0)};
// writing l = log(w/w0) >= 0 the equation becomes
//   h(l) = -log U - (1/a - 1) l - w0 expm1(l) = 0,
// h concave and decreasing with h(0) > 0. Newton started from an upper
// bracket therefore decreases monotonically onto the root; bisection guards
// any step that leaves the bracket. y = x expm1(l/a)^{-a}.
inline double logistic_conditional_quantile(double x, double alpha, double u, double prob_tol = 1e-10,
                                            std::int64_t step = 0) {
  const double c = 1.0 / alpha - 1.0;
  const double w0 = 1.0 / x;
  const double big_l = -std::log(u);
  double lo = 0.0;
  double hi = std::log1p(big_l / w0);
  if (c > 0.0) hi = std::min(hi, big_l / c);
  if (!(hi > 0.0) || !std::isfinite(hi)) throw SimulationFailure(step, x, u);

  auto h = [&](double l) { return big_l - c * l - w0 * std::expm1(l); };
  double l = hi;
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    const double hv = h(l);
    if (hv == 0.0) {
      converged = true;
      break;
    }
    if (hv > 0.0) lo = l; else hi = l;
    const double dh = -c - w0 * std::exp(l);
    double next = l - hv / dh;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double delta = std::abs(next - l);
    l = next;
    if (delta <= 1e-13 * l || hi - lo <= 1e-15 * hi) {
      converged = true;
      break;
    }
  }
  if (!converged || !(u * std::abs(std::expm1(h(l))) <= prob_tol)) throw SimulationFailure(step, x, u);
  const double y = x * std::pow(std::expm1(l / alpha), -alpha);
  return std::max(y, std::numeric_limits<double>::min());
}

// ---------------------------------------------------------------------------
// Marginal draws

inline double draw_marginal(Family f, RngStream& rng) {
  if (f == Family::kGaussianAr) return rng.normal();
  return -1.0 / std::log(rng.uniform());
}

// Draw from the marginal conditioned on exceeding u.
inline double draw_marginal_tail(Family f, double u, RngStream& rng) {
  const double pu = marginal_survival(f, u);
  const double v = pu * rng.uniform();
  if (f == Family::kGaussianAr)
    return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), v));
  return -1.0 / std::log1p(-v);
}

// One Markov step from position `pos` (value x) to pos + 1.
inline double step_from(const PeriodicModelSpec& spec, std::int64_t pos, double x, RngStream& rng) {
  const double a = spec.param_for_phase(phase_of(pos, spec.d));
  if (spec.family == Family::kGaussianAr) return a * x + std::sqrt(1.0 - a * a) * rng.normal();
  if (a == 1.0) return -1.0 / std::log(rng.uniform());
  return logistic_conditional_quantile(x, a, rng.uniform(), 1e-10, pos);
}

// Values X_{start}, ..., X_{start + length - 1} given X_{start} = x0.
inline std::vector<double> simulate_stretch(const PeriodicModelSpec& spec, std::int64_t start, double x0,
                                            std::int64_t length, RngStream& rng) {
  std::vector<double> v(static_cast<std::size_t>(length));
  if (length == 0) return v;
  v[0] = x0;
  for (std::int64_t k = 1; k < length; ++k)
    v[static_cast<std::size_t>(k)] = step_from(spec, start + k - 1, v[static_cast<std::size_t>(k - 1)], rng);
  return v;
}

inline Series simulate(const PeriodicModelSpec& spec, std::int64_t n, RngStream& rng) {
  spec.validate();
  if (n < 1) throw InvalidSpec("series length must be >= 1");
  Series s;
  s.spec = spec;
  s.seed = rng.seed();
  s.stream = rng.stream();
  s.values = simulate_stretch(spec, 1, draw_marginal(spec.family, rng), n, rng);
  return s;
}

inline Series simulate_gaussian_ar(const PeriodicModelSpec& spec, std::int64_t n, RngStream& rng) {
  if (spec.family != Family::kGaussianAr) throw InvalidSpec("simulate_gaussian_ar needs a gaussian-ar spec");
  return simulate(spec, n, rng);
}

inline Series simulate_logistic_markov(const PeriodicModelSpec& spec, std::int64_t n, RngStream& rng) {
  if (spec.family != Family::kLogisticMarkov)
    throw InvalidSpec("simulate_logistic_markov needs a logistic-markov spec");
  return simulate(spec, n, rng);
}

// ---------------------------------------------------------------------------
// Marginal validation

struct KsResult {
  double statistic = 0.0;
  double critical = 0.0;
  bool pass = false;
};

inline double ks_statistic(std::vector<double> sample, Family f) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double dmax = 0.0;
  for (std::size_t k = 0; k < sample.size(); ++k) {
    const double fx = marginal_cdf(f, sample[k]);
    dmax = std::max({dmax, (static_cast<double>(k) + 1.0) / n - fx, fx - static_cast<double>(k) / n});
  }
  return dmax;
}

// One-sample KS test against the family marginal at the asymptotic 1% level
// 1.628 / sqrt(n). `widen` scales the cutoff for dependent samples.
inline KsResult validate_margins(std::span<const double> values, Family f, double widen = 1.0) {
  if (values.size() < 100) throw InvalidSpec("validate_margins needs at least 100 values");
  KsResult r;
  r.statistic = ks_statistic({values.begin(), values.end()}, f);
  r.critical = widen * 1.628 / std::sqrt(static_cast<double>(values.size()));
  r.pass = r.statistic < r.critical;
  return r;
}

inline KsResult validate_margins(const Series& s, double widen = 1.0) {
  return validate_margins(std::span<const double>(s.values), s.spec.family, widen);
}

// ---------------------------------------------------------------------------
// Plain-text series: one value per line, 17 significant digits.

inline void write_series(std::ostream& os, std::span<const double> values) {
  char buf[40];
  for (double v : values) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    os << buf;
  }
}

inline void write_series(const std::string& path, std::span<const double> values) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_series(os, values);
  if (!os) throw Error("write to '" + path + "' failed");
}

inline std::vector<double> read_series(std::istream& is) {
  std::vector<double> v;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::size_t used = 0;
    double x;
    try {
      x = std::stod(line, &used);
    } catch (const std::exception&) {
      throw Error("series line " + std::to_string(lineno) + ": not a number");
    }
    if (!std::isfinite(x)) throw Error("series line " + std::to_string(lineno) + ": non-finite value");
    v.push_back(x);
  }
  return v;
}

inline std::vector<double> read_series(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "'");
  return read_series(is);
}

}  // namespace exclust

#endif  // EXCLUST_MODELS_HPP
