#ifndef EXCLUST_CORE_HPP
#define EXCLUST_CORE_HPP

// Domain types and the phase/threshold/exceedance bookkeeping shared by the
// simulators, estimators and Monte Carlo harness.
//
// Positions and phases are 1-based at every interface: position i of a series
// belongs to phase ((i - 1) mod d) + 1. Storage is 0-based.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "exclust/error.hpp"

namespace exclust {

enum class Family { kGaussianAr, kLogisticMarkov };

inline std::string_view to_string(Family f) {
  return f == Family::kGaussianAr ? "gaussian-ar" : "logistic-markov";
}

inline Family parse_family(std::string_view s) {
  if (s == "gaussian-ar" || s == "gaussian") return Family::kGaussianAr;
  if (s == "logistic-markov" || s == "logistic") return Family::kLogisticMarkov;
  throw InvalidSpec("unknown model family '" + std::string(s) + "'");
}

// A periodic Markov model. params[i - 1] is the dependence parameter of the
// pair (X_i, X_{i+1}) for every position i in phase i: rho for the Gaussian
// autoregression, alpha for the bivariate logistic transition.
struct PeriodicModelSpec {
  Family family = Family::kGaussianAr;
  int d = 1;
  std::vector<double> params;

  double param_for_phase(int phase) const { return params[static_cast<std::size_t>(phase - 1)]; }

  // Throws InvalidSpec when any invariant fails.
  void validate() const {
    if (d < 1) throw InvalidSpec("period d must be >= 1");
    if (params.size() != static_cast<std::size_t>(d))
      throw InvalidSpec("expected " + std::to_string(d) + " parameters, got " +
                        std::to_string(params.size()));
    for (double p : params) {
      if (!std::isfinite(p)) throw InvalidSpec("non-finite dependence parameter");
      if (family == Family::kGaussianAr && !(std::abs(p) < 1.0))
        throw InvalidSpec("gaussian-ar requires |rho| < 1, got " + std::to_string(p));
      if (family == Family::kLogisticMarkov && !(p > 0.0 && p <= 1.0))
        throw InvalidSpec("logistic-markov requires alpha in (0,1], got " + std::to_string(p));
    }
  }

  friend bool operator==(const PeriodicModelSpec&, const PeriodicModelSpec&) = default;
};

struct ThresholdSpec {
  enum class Kind { kAbsolute, kExceedanceProb };
  Kind kind = Kind::kExceedanceProb;
  double value = 0.05;

  static ThresholdSpec absolute(double level) { return {Kind::kAbsolute, level}; }
  static ThresholdSpec exceedance_prob(double p) { return {Kind::kExceedanceProb, p}; }
};

struct Series {
  std::vector<double> values;
  PeriodicModelSpec spec;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::int64_t n() const { return static_cast<std::int64_t>(values.size()); }
  // 1-based access.
  double at(std::int64_t i) const { return values[static_cast<std::size_t>(i - 1)]; }
};

struct InterexceedanceSet {
  int d = 1;
  // classes[i - 1] holds the times whose starting exceedance lies in phase i.
  std::vector<std::vector<std::int64_t>> classes;
  double threshold = 0.0;
  std::int64_t total_exceedances = 0;
  // Length of the series the exceedances came from; 0 when unknown.
  std::int64_t series_length = 0;

  const std::vector<std::int64_t>& times(int phase) const {
    return classes[static_cast<std::size_t>(phase - 1)];
  }
  std::int64_t count(int phase) const { return static_cast<std::int64_t>(times(phase).size()); }
  std::int64_t total_times() const {
    std::int64_t s = 0;
    for (const auto& c : classes) s += static_cast<std::int64_t>(c.size());
    return s;
  }
};

enum class EstimatorMethod { kIntervals, kMle };

inline std::string_view to_string(EstimatorMethod m) {
  return m == EstimatorMethod::kIntervals ? "intervals" : "mle";
}

struct EstimateRecord {
  EstimatorMethod method = EstimatorMethod::kIntervals;
  // theta[i - 1]; nullopt for phases without interexceedance times.
  std::vector<std::optional<double>> theta;
  double gamma = 0.0;
  std::vector<int> run_lengths;  // mle only
  double fbar = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> missing_phases;
  std::vector<int> boundary_phases;
  bool all_within_cluster = false;

  int d() const { return static_cast<int>(theta.size()); }
};

// ---------------------------------------------------------------------------
// Marginal distributions: standard Gaussian and unit Frechet P(X <= x) = exp(-1/x).

inline double marginal_cdf(Family f, double x) {
  if (f == Family::kGaussianAr) return boost::math::cdf(boost::math::normal_distribution<double>(), x);
  return x <= 0.0 ? 0.0 : std::exp(-1.0 / x);
}

inline double marginal_survival(Family f, double x) {
  if (f == Family::kGaussianAr)
    return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), x));
  return x <= 0.0 ? 1.0 : -std::expm1(-1.0 / x);
}

// Level exceeded with probability p under the family marginal.
inline double marginal_upper_quantile(Family f, double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidSpec("tail probability must lie in (0,1)");
  if (f == Family::kGaussianAr)
    return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), p));
  return -1.0 / std::log1p(-p);
}

// ---------------------------------------------------------------------------
// Operations

inline int phase_of(std::int64_t index, int d) {
  return static_cast<int>((index - 1) % d) + 1;
}

inline double resolve_threshold(const ThresholdSpec& spec, Family family) {
  if (spec.kind == ThresholdSpec::Kind::kAbsolute) return spec.value;
  if (!(spec.value > 0.0 && spec.value < 1.0))
    throw InvalidSpec("exceedance probability must lie in (0,1), got " + std::to_string(spec.value));
  const double u = marginal_upper_quantile(family, spec.value);
  if (!std::isfinite(u)) throw InvalidSpec("resolved threshold is not finite");
  return u;
}

// Strict inequality: ties at u are not exceedances.
inline std::vector<std::int64_t> extract_exceedances(std::span<const double> values, double u) {
  std::vector<std::int64_t> e;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (values[k] > u) e.push_back(static_cast<std::int64_t>(k) + 1);
  return e;
}

inline std::vector<std::int64_t> extract_exceedances(const Series& s, double u) {
  return extract_exceedances(std::span<const double>(s.values), u);
}

// The gap j' - j between consecutive exceedances goes to the class of
// phase_of(j); the last exceedance has no successor and contributes nothing.
inline InterexceedanceSet interexceedance_partition(std::span<const std::int64_t> exceedances, int d,
                                                    double u, std::int64_t series_length = 0) {
  if (d < 1) throw InvalidSpec("period d must be >= 1");
  InterexceedanceSet ix;
  ix.d = d;
  ix.classes.assign(static_cast<std::size_t>(d), {});
  ix.threshold = u;
  ix.total_exceedances = static_cast<std::int64_t>(exceedances.size());
  ix.series_length = series_length;
  for (std::size_t k = 1; k < exceedances.size(); ++k) {
    const std::int64_t j = exceedances[k - 1];
    ix.classes[static_cast<std::size_t>(phase_of(j, d) - 1)].push_back(exceedances[k] - j);
  }
  return ix;
}

inline InterexceedanceSet interexceedance_partition(const Series& s, double u) {
  const auto e = extract_exceedances(s, u);
  return interexceedance_partition(e, s.spec.d, u, s.n());
}

// Type-7 sample quantiles: linear interpolation between order statistics at
// h = (N - 1) p.
inline std::vector<double> empirical_quantiles(std::vector<double> samples, std::span<const double> probs) {
  if (samples.empty()) throw MissingData("empirical_quantiles: empty sample");
  std::sort(samples.begin(), samples.end());
  std::vector<double> out;
  out.reserve(probs.size());
  const double last = static_cast<double>(samples.size() - 1);
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile probability outside [0,1]");
    const double h = last * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, samples.size() - 1);
    const double frac = h - static_cast<double>(lo);
    out.push_back(samples[lo] + frac * (samples[hi] - samples[lo]));
  }
  return out;
}

}  // namespace exclust

#endif  // EXCLUST_CORE_HPP
