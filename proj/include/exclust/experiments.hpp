#ifndef EXCLUST_EXPERIMENTS_HPP
#define EXCLUST_EXPERIMENTS_HPP

// Config-driven Monte Carlo studies: simulate R realizations per series
// length, estimate (theta_1..theta_d, gamma) for every threshold and
// estimator, and summarize each phase and gamma by empirical quantiles.
//
// Realization r at length n always uses RngStream(seed, r, n), so the result
// is a pure function of the config whatever the worker count.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exclust/core.hpp"
#include "exclust/estimators.hpp"
#include "exclust/models.hpp"
#include "exclust/parallel.hpp"

#ifndef EXCLUST_VERSION
#define EXCLUST_VERSION "0.1.0"
#endif

namespace exclust {

enum class FbarMode { kEmpirical, kExact };

struct EstimatorConfig {
  EstimatorMethod method = EstimatorMethod::kIntervals;
  std::vector<int> k{1};  // mle only
  FbarMode fbar = FbarMode::kEmpirical;
  double tolerance = 1e-8;

  // Run lengths as written in the CSV "k" column: empty for intervals.
  std::string k_label() const {
    if (method == EstimatorMethod::kIntervals) return {};
    std::string s;
    for (std::size_t j = 0; j < k.size(); ++j) s += (j ? ";" : "") + std::to_string(k[j]);
    return s;
  }
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string model_label;  // preset name or family name
  PeriodicModelSpec model;
  std::vector<std::int64_t> lengths;
  std::vector<double> tail_probs;
  // Per-length override of tail_probs.
  std::map<std::int64_t, std::vector<double>> tail_probs_by_length;
  std::vector<EstimatorConfig> estimators;
  std::int64_t realizations = 1000;
  std::uint64_t seed = 1;
  // (low, mid, high); written to the q025 / median / q975 CSV columns.
  std::array<double, 3> quantile_probs{0.025, 0.5, 0.975};
  unsigned workers = 0;

  const std::vector<double>& tail_probs_for(std::int64_t n) const {
    const auto it = tail_probs_by_length.find(n);
    return it == tail_probs_by_length.end() ? tail_probs : it->second;
  }

  void validate() const {
    model.validate();
    if (realizations < 1) throw InvalidSpec("realizations must be >= 1");
    if (lengths.empty() || tail_probs.empty() || estimators.empty())
      throw InvalidSpec("config needs at least one length, tail probability and estimator");
    for (auto n : lengths)
      if (n < 2) throw InvalidSpec("series lengths must be >= 2");
    for (auto n : lengths) {
      if (tail_probs_for(n).empty()) throw InvalidSpec("no tail probabilities for length " + std::to_string(n));
      for (double p : tail_probs_for(n))
        if (!(p > 0.0 && p < 1.0)) throw InvalidSpec("tail probabilities must lie in (0,1)");
    }
    for (const auto& e : estimators) {
      MleOptions o;
      o.run_lengths = e.k;
      o.tolerance = e.tolerance;
      if (e.method == EstimatorMethod::kMle) detail::validate_options(o, model.d);
    }
    if (!(quantile_probs[0] <= quantile_probs[1] && quantile_probs[1] <= quantile_probs[2] &&
          quantile_probs[0] >= 0.0 && quantile_probs[2] <= 1.0))
      throw InvalidSpec("quantile probabilities must be nondecreasing in [0,1]");
  }
};

// ---------------------------------------------------------------------------
// JSON schema
//
// {
//   "name": "table1",
//   "model": {"preset": "paper-gaussian"}
//         |  {"family": "gaussian-ar" | "logistic-markov", "d": 7, "params": [...],
//             "label": "..."},                      // label optional
//   "lengths": [10000, 100000],
//   "tail_probs": [0.10, 0.05],
//   "tail_probs_by_length": {"1000000": [0.05, 0.01]},   // optional override
//   "estimators": [{"method": "intervals"},
//                  {"method": "mle", "k": 5 | [k_1, ..., k_d],
//                   "fbar": "empirical" | "exact", "tolerance": 1e-8}],
//   "realizations": 1000,
//   "seed": 20240101,
//   "quantile_probs": [0.025, 0.5, 0.975],   // optional
//   "workers": 0                               // optional; 0 = default
// }
//
// A preset may be combined with "params" to override the parameters.

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    c.name = j.value("name", std::string("experiment"));
    const auto& m = j.at("model");
    if (m.contains("preset")) {
      c.model_label = m.at("preset").get<std::string>();
      c.model = preset(c.model_label);
      if (m.contains("params")) c.model.params = m.at("params").get<std::vector<double>>();
      if (m.contains("d")) c.model.d = m.at("d").get<int>();
    } else {
      c.model.family = parse_family(m.at("family").get<std::string>());
      c.model.d = m.at("d").get<int>();
      c.model.params = m.at("params").get<std::vector<double>>();
      c.model_label = m.value("label", std::string(to_string(c.model.family)));
    }
    c.lengths = j.at("lengths").get<std::vector<std::int64_t>>();
    c.tail_probs = j.at("tail_probs").get<std::vector<double>>();
    if (j.contains("tail_probs_by_length"))
      for (const auto& [key, val] : j.at("tail_probs_by_length").items())
        c.tail_probs_by_length[std::stoll(key)] = val.get<std::vector<double>>();
    for (const auto& e : j.at("estimators")) {
      EstimatorConfig ec;
      const auto method = e.at("method").get<std::string>();
      if (method == "intervals") {
        ec.method = EstimatorMethod::kIntervals;
      } else if (method == "mle") {
        ec.method = EstimatorMethod::kMle;
        if (e.contains("k")) {
          if (e.at("k").is_array()) ec.k = e.at("k").get<std::vector<int>>();
          else ec.k = {e.at("k").get<int>()};
        }
        const auto fb = e.value("fbar", std::string("empirical"));
        if (fb == "empirical") ec.fbar = FbarMode::kEmpirical;
        else if (fb == "exact") ec.fbar = FbarMode::kExact;
        else throw InvalidSpec("fbar must be 'empirical' or 'exact'");
        ec.tolerance = e.value("tolerance", 1e-8);
      } else {
        throw InvalidSpec("unknown estimator '" + method + "'");
      }
      c.estimators.push_back(ec);
    }
    c.realizations = j.at("realizations").get<std::int64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("quantile_probs")) {
      const auto q = j.at("quantile_probs").get<std::vector<double>>();
      if (q.size() != 3) throw InvalidSpec("quantile_probs must have exactly three entries");
      c.quantile_probs = {q[0], q[1], q[2]};
    }
    c.workers = j.value("workers", 0u);
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidSpec(std::string("config: ") + ex.what());
  } catch (const std::logic_error&) {
    throw InvalidSpec("config: tail_probs_by_length keys must be integers");
  }
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["model"] = {{"label", c.model_label},
                {"family", std::string(to_string(c.model.family))},
                {"d", c.model.d},
                {"params", c.model.params}};
  j["lengths"] = c.lengths;
  j["tail_probs"] = c.tail_probs;
  if (!c.tail_probs_by_length.empty()) {
    auto& by = j["tail_probs_by_length"] = nlohmann::json::object();
    for (const auto& [n, ps] : c.tail_probs_by_length) by[std::to_string(n)] = ps;
  }
  auto& ests = j["estimators"] = nlohmann::json::array();
  for (const auto& e : c.estimators) {
    nlohmann::json ej{{"method", std::string(to_string(e.method))}};
    if (e.method == EstimatorMethod::kMle) {
      ej["k"] = e.k;
      ej["fbar"] = e.fbar == FbarMode::kExact ? "exact" : "empirical";
      ej["tolerance"] = e.tolerance;
    }
    ests.push_back(ej);
  }
  j["realizations"] = c.realizations;
  j["seed"] = c.seed;
  j["quantile_probs"] = c.quantile_probs;
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidSpec("config '" + path + "': " + ex.what());
  }
  return config_from_json(j);
}

// FNV-1a over the canonical JSON of the config (worker count excluded).
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string text = config_to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Results

struct ResultRow {
  std::string model;
  std::int64_t n = 0;
  double tail_p = 0.0;
  std::string estimator;
  std::string k;
  std::string phase;  // "1".."d" or "gamma"
  double q025 = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double q975 = std::numeric_limits<double>::quiet_NaN();
  std::int64_t reps_used = 0;
  std::int64_t undefined_count = 0;
  std::uint64_t seed = 0;

  bool operator==(const ResultRow& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return model == o.model && n == o.n && tail_p == o.tail_p && estimator == o.estimator && k == o.k &&
           phase == o.phase && same(q025, o.q025) && same(median, o.median) && same(q975, o.q975) &&
           reps_used == o.reps_used && undefined_count == o.undefined_count && seed == o.seed;
  }
};

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string code_version = EXCLUST_VERSION;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  Provenance provenance;
  std::array<double, 3> quantile_probs{0.025, 0.5, 0.975};
  // Realizations that failed before estimation (simulation errors).
  std::int64_t failed_realizations = 0;

  // Rows of one (n, tail_p, estimator) cell.
  std::vector<const ResultRow*> cell(std::int64_t n, double tail_p, std::string_view estimator,
                                     std::string_view k = {}) const {
    std::vector<const ResultRow*> out;
    for (const auto& r : rows)
      if (r.n == n && r.tail_p == tail_p && r.estimator == estimator && (k.empty() || r.k == k)) out.push_back(&r);
    return out;
  }

  const ResultRow* find(std::int64_t n, double tail_p, std::string_view estimator, std::string_view phase) const {
    for (const auto& r : rows)
      if (r.n == n && r.tail_p == tail_p && r.estimator == estimator && r.phase == phase) return &r;
    return nullptr;
  }

  // A cell whose gamma row has no usable realization.
  bool any_cell_failed() const {
    for (const auto& r : rows)
      if (r.phase == "gamma" && r.reps_used == 0) return true;
    return false;
  }
};

namespace detail {

// Estimates of one realization for one (tail_p, estimator) cell.
struct CellDraw {
  bool ok = false;
  std::vector<std::optional<double>> theta;
  double gamma = 0.0;
};

inline CellDraw estimate_cell(const InterexceedanceSet& ix, const EstimatorConfig& e, double tail_p) {
  CellDraw out;
  try {
    EstimateRecord rec;
    if (e.method == EstimatorMethod::kIntervals) {
      rec = estimate_thetas_intervals(ix);
    } else {
      MleOptions o;
      o.run_lengths = e.k;
      o.tolerance = e.tolerance;
      if (e.fbar == FbarMode::kExact) o.fbar = tail_p;
      rec = mle_fit(ix, o);
    }
    out.ok = true;
    out.theta = std::move(rec.theta);
    out.gamma = rec.gamma;
  } catch (const MissingData&) {
  } catch (const NoExceedances&) {
  } catch (const InvalidSpec&) {
    // Empirical Fbar undefined (no exceedances at all).
  }
  return out;
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::optional<unsigned> workers = std::nullopt) {
  cfg.validate();
  const unsigned w = workers.value_or(cfg.workers);
  const int d = cfg.model.d;

  ExperimentResult result;
  result.provenance.config_hash = config_hash(cfg);
  result.provenance.seed = cfg.seed;
  result.quantile_probs = cfg.quantile_probs;

  for (const std::int64_t n : cfg.lengths) {
    const auto& tail_probs = cfg.tail_probs_for(n);
    const std::size_t n_cells = tail_probs.size() * cfg.estimators.size();
    // draws[r][cell]; an empty vector marks a failed simulation.
    auto draws = parallel_map(static_cast<std::size_t>(cfg.realizations), w, [&](std::size_t r) {
      std::vector<detail::CellDraw> cells;
      Series s;
      try {
        RngStream rng(cfg.seed, r, static_cast<std::uint64_t>(n));
        s = simulate(cfg.model, n, rng);
      } catch (const SimulationFailure&) {
        return cells;
      }
      cells.reserve(n_cells);
      for (double p : tail_probs) {
        const double u = resolve_threshold(ThresholdSpec::exceedance_prob(p), cfg.model.family);
        const auto ix = interexceedance_partition(s, u);
        for (const auto& e : cfg.estimators) cells.push_back(detail::estimate_cell(ix, e, p));
      }
      return cells;
    });
    for (const auto& dr : draws)
      if (dr.empty()) ++result.failed_realizations;

    std::size_t cell = 0;
    for (double p : tail_probs) {
      for (const auto& e : cfg.estimators) {
        auto summarize = [&](const std::string& phase, auto&& pick) {
          ResultRow row;
          row.model = cfg.model_label;
          row.n = n;
          row.tail_p = p;
          row.estimator = std::string(to_string(e.method));
          row.k = e.k_label();
          row.phase = phase;
          row.seed = cfg.seed;
          std::vector<double> vals;
          for (const auto& dr : draws) {
            std::optional<double> v;
            if (!dr.empty() && dr[cell].ok) v = pick(dr[cell]);
            if (v) vals.push_back(*v);
            else ++row.undefined_count;
          }
          row.reps_used = static_cast<std::int64_t>(vals.size());
          if (!vals.empty()) {
            const auto q = empirical_quantiles(std::move(vals), cfg.quantile_probs);
            row.q025 = q[0];
            row.median = q[1];
            row.q975 = q[2];
          }
          result.rows.push_back(row);
        };
        for (int i = 1; i <= d; ++i)
          summarize(std::to_string(i), [i](const detail::CellDraw& c) { return c.theta[static_cast<std::size_t>(i - 1)]; });
        summarize("gamma", [](const detail::CellDraw& c) { return std::optional<double>(c.gamma); });
        ++cell;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kResultsHeader =
    "model,n,tail_p,estimator,k,phase,q025,median,q975,reps_used,undefined_count,seed";

namespace detail {

// Shortest text that reads back to the same double.
inline std::string exact_number(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline void write_results_csv(std::ostream& os, const ExperimentResult& result) {
  using detail::exact_number;
  os << kResultsHeader << '\n';
  for (const auto& r : result.rows)
    os << r.model << ',' << r.n << ',' << exact_number(r.tail_p) << ',' << r.estimator << ',' << r.k << ','
       << r.phase << ',' << exact_number(r.q025) << ',' << exact_number(r.median) << ',' << exact_number(r.q975)
       << ',' << r.reps_used << ',' << r.undefined_count << ',' << r.seed << '\n';
}

inline void write_results_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_results_csv(os, result);
  os.flush();
  if (!os) throw Error("write to '" + path + "' failed");
}

inline std::vector<ResultRow> parse_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kResultsHeader) throw Error("results csv: unexpected header");
  std::vector<ResultRow> rows;
  std::int64_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 12) throw Error("results csv line " + std::to_string(lineno) + ": expected 12 fields");
    ResultRow r;
    try {
      r.model = f[0];
      r.n = std::stoll(f[1]);
      r.tail_p = std::strtod(f[2].c_str(), nullptr);
      r.estimator = f[3];
      r.k = f[4];
      r.phase = f[5];
      r.q025 = std::strtod(f[6].c_str(), nullptr);
      r.median = std::strtod(f[7].c_str(), nullptr);
      r.q975 = std::strtod(f[8].c_str(), nullptr);
      r.reps_used = std::stoll(f[9]);
      r.undefined_count = std::stoll(f[10]);
      r.seed = std::stoull(f[11]);
    } catch (const std::exception&) {
      throw Error("results csv line " + std::to_string(lineno) + ": malformed number");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_provenance(const ExperimentConfig& cfg, const ExperimentResult& result, const std::string& path) {
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  j["config_hash"] = result.provenance.config_hash;
  j["seed"] = result.provenance.seed;
  j["code_version"] = result.provenance.code_version;
  j["failed_realizations"] = result.failed_realizations;
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// SVG figure: per-phase medians of each estimator over a shaded band from the
// pointwise minimum q025 to the pointwise maximum q975, with the bound curve
// drawn solid. Phases without estimates leave gaps.

inline void render_theta_figure(std::ostream& os, const ExperimentResult& result, std::int64_t n, double tail_p,
                                std::span<const double> bound) {
  std::vector<std::string> estimators;
  int d = 0;
  for (const auto& r : result.rows) {
    if (r.n != n || r.tail_p != tail_p || r.phase == "gamma") continue;
    d = std::max(d, std::stoi(r.phase));
    const std::string label = r.estimator + (r.k.empty() ? "" : " k=" + r.k);
    if (std::find(estimators.begin(), estimators.end(), label) == estimators.end()) estimators.push_back(label);
  }
  if (d == 0) d = static_cast<int>(bound.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> lo(static_cast<std::size_t>(d), nan), hi(static_cast<std::size_t>(d), nan);
  std::map<std::string, std::vector<double>> medians;
  for (const auto& e : estimators) medians[e].assign(static_cast<std::size_t>(d), nan);
  for (const auto& r : result.rows) {
    if (r.n != n || r.tail_p != tail_p || r.phase == "gamma" || r.reps_used == 0) continue;
    const auto i = static_cast<std::size_t>(std::stoi(r.phase) - 1);
    medians[r.estimator + (r.k.empty() ? "" : " k=" + r.k)][i] = r.median;
    lo[i] = std::isnan(lo[i]) ? r.q025 : std::min(lo[i], r.q025);
    hi[i] = std::isnan(hi[i]) ? r.q975 : std::max(hi[i], r.q975);
  }

  const double width = 640, height = 420, left = 60, right = 150, top = 30, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  auto xpos = [&](double phase) { return d == 1 ? left + pw / 2 : left + pw * (phase - 1) / (d - 1); };
  auto ypos = [&](double v) { return top + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };
  auto fmt = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", v);
    return std::string(b);
  };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  // Axes and ticks.
  os << "<g stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n";
  os << "</g>\n<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    os << "<text x=\"" << left - 8 << "\" y=\"" << fmt(ypos(v) + 4) << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }
  for (int i = 1; i <= d; ++i)
    os << "<text x=\"" << fmt(xpos(i)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << i << "</text>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">phase i</text>\n";
  os << "<text x=\"15\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 15 " << top + ph / 2
     << ")\" text-anchor=\"middle\">theta_i</text>\n";
  os << "<text x=\"" << left << "\" y=\"18\">n=" << n << ", p=" << tail_p << "</text>\n</g>\n";

  // Band, one polygon per run of consecutive present phases.
  const double half_w = d == 1 ? 12.0 : 0.0;
  for (int i = 1; i <= d;) {
    if (std::isnan(lo[static_cast<std::size_t>(i - 1)])) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 <= d && !std::isnan(lo[static_cast<std::size_t>(j)])) ++j;
    std::string pts;
    if (i == j) {
      const double x = xpos(i), l = lo[static_cast<std::size_t>(i - 1)], h = hi[static_cast<std::size_t>(i - 1)];
      const double hw = std::max(half_w, 6.0);
      pts = fmt(x - hw) + "," + fmt(ypos(l)) + " " + fmt(x + hw) + "," + fmt(ypos(l)) + " " + fmt(x + hw) + "," +
            fmt(ypos(h)) + " " + fmt(x - hw) + "," + fmt(ypos(h));
    } else {
      for (int q = i; q <= j; ++q) pts += fmt(xpos(q)) + "," + fmt(ypos(hi[static_cast<std::size_t>(q - 1)])) + " ";
      for (int q = j; q >= i; --q) pts += fmt(xpos(q)) + "," + fmt(ypos(lo[static_cast<std::size_t>(q - 1)])) + " ";
    }
    os << "<polygon class=\"band\" points=\"" << pts << "\" fill=\"#bbbbbb\" fill-opacity=\"0.5\" stroke=\"none\"/>\n";
    i = j + 1;
  }

  // Bound curve.
  if (!bound.empty()) {
    std::string pts;
    for (std::size_t i = 0; i < bound.size() && static_cast<int>(i) < d; ++i)
      pts += fmt(xpos(static_cast<double>(i + 1))) + "," + fmt(ypos(bound[i])) + " ";
    if (d == 1)
      os << "<line class=\"bound\" x1=\"" << fmt(xpos(1) - 20) << "\" y1=\"" << fmt(ypos(bound[0])) << "\" x2=\""
         << fmt(xpos(1) + 20) << "\" y2=\"" << fmt(ypos(bound[0])) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    else
      os << "<polyline class=\"bound\" points=\"" << pts << "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
  }

  // Median markers: triangles for intervals, circles for mle, squares otherwise.
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::size_t ci = 0;
  double legend_y = top + 10;
  for (const auto& e : estimators) {
    const char* col = colours[ci++ % 4];
    auto marker = [&](double x, double y, const char* cls) {
      std::ostringstream m;
      if (e.rfind("intervals", 0) == 0)
        m << "<polygon class=\"" << cls << "\" points=\"" << fmt(x) << "," << fmt(y - 6) << " " << fmt(x - 5.5) << ","
          << fmt(y + 4) << " " << fmt(x + 5.5) << "," << fmt(y + 4) << "\" fill=\"" << col << "\"/>\n";
      else if (e.rfind("mle", 0) == 0)
        m << "<circle class=\"" << cls << "\" cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"5\" fill=\"" << col << "\"/>\n";
      else
        m << "<rect class=\"" << cls << "\" x=\"" << fmt(x - 5) << "\" y=\"" << fmt(y - 5)
          << "\" width=\"10\" height=\"10\" fill=\"" << col << "\"/>\n";
      return m.str();
    };
    const auto& med = medians[e];
    for (int i = 1; i <= d; ++i)
      if (!std::isnan(med[static_cast<std::size_t>(i - 1)])) os << marker(xpos(i), ypos(med[static_cast<std::size_t>(i - 1)]), "median");
    os << marker(left + pw + 20, legend_y, "legend");
    os << "<text x=\"" << left + pw + 32 << "\" y=\"" << legend_y + 4
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << e << "</text>\n";
    legend_y += 20;
  }
  if (!bound.empty()) {
    os << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << legend_y << "\" x2=\"" << left + pw + 28 << "\" y2=\""
       << legend_y << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 32 << "\" y=\"" << legend_y + 4
       << "\" font-family=\"sans-serif\" font-size=\"12\">bound</text>\n";
  }
  os << "</svg>\n";
}

inline void render_theta_figure(const ExperimentResult& result, std::int64_t n, double tail_p,
                                std::span<const double> bound, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  render_theta_figure(os, result, n, tail_p, bound);
}

// 2^{alpha_i} - 1 for a logistic spec.
inline std::vector<double> logistic_theta_bound(const PeriodicModelSpec& spec) {
  std::vector<double> b;
  for (double a : spec.params) b.push_back(std::exp2(a) - 1.0);
  return b;
}

}  // namespace exclust

#endif  // EXCLUST_EXPERIMENTS_HPP
