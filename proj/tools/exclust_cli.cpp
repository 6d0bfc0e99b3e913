// Command-line front end: simulate / estimate / verify / experiment.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "exclust/exclust.hpp"

namespace fs = std::filesystem;
using namespace exclust;

namespace {

struct ModelFlags {
  std::string preset;
  std::string family;
  int d = 0;
  std::vector<double> params;

  void add_to(CLI::App* app) {
    app->add_option("--preset", preset, "Named model: paper-gaussian | paper-logistic");
    app->add_option("--family", family, "Model family: gaussian-ar | logistic-markov");
    app->add_option("-d,--period", d, "Fundamental period d");
    app->add_option("--params", params, "Dependence parameters, one per phase (overrides the preset)")->delimiter(',');
  }

  PeriodicModelSpec resolve() const {
    PeriodicModelSpec spec;
    if (!preset.empty()) {
      spec = exclust::preset(preset);
    } else {
      if (family.empty()) throw InvalidSpec("give --preset or --family");
      spec.family = parse_family(family);
      spec.d = d > 0 ? d : 1;
    }
    if (!family.empty()) spec.family = parse_family(family);
    if (!params.empty()) {
      spec.params = params;
      spec.d = d > 0 ? d : static_cast<int>(params.size());
    } else if (d > 0 && d != spec.d) {
      throw InvalidSpec("--period changes d; give matching --params");
    }
    spec.validate();
    return spec;
  }

  std::string label() const { return preset.empty() ? family : preset; }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string join_ints(const std::vector<int>& v, char sep = ';') {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? std::string(1, sep) : "") + std::to_string(v[k]);
  return s;
}

// ---------------------------------------------------------------------------

struct SimulateCmd {
  ModelFlags model;
  std::int64_t n = 1000;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  std::string out;

  int run() const {
    const auto spec = model.resolve();
    RngStream rng(seed, stream);
    const auto s = simulate(spec, n, rng);
    if (out.empty() || out == "-") {
      write_series(std::cout, s.values);
      std::cerr << "simulate: " << model.label() << " n=" << n << " seed=" << seed << '\n';
    } else {
      write_series(out, s.values);
      std::cout << "simulate: wrote " << n << " values to " << out << " (" << model.label() << ", seed=" << seed
                << ")\n";
    }
    return 0;
  }
};

struct EstimateCmd {
  ModelFlags model;
  std::string input;
  std::int64_t n = 10000;
  std::uint64_t seed = 1;
  double tail_p = std::nan("");
  double level = std::nan("");
  std::string estimator = "intervals";
  std::vector<int> k{1};
  std::string fbar = "empirical";

  int run() const {
    PeriodicModelSpec spec;
    std::vector<double> values;
    if (!input.empty()) {
      if (!model.preset.empty()) spec = model.resolve();
      else {
        if (model.family.empty()) throw InvalidSpec("estimating from --input needs --family or --preset");
        spec.family = parse_family(model.family);
        spec.d = model.d > 0 ? model.d : 1;
        spec.params.assign(static_cast<std::size_t>(spec.d), spec.family == Family::kGaussianAr ? 0.0 : 1.0);
      }
      values = read_series(input);
    } else {
      spec = model.resolve();
      RngStream rng(seed, 0);
      values = simulate(spec, n, rng).values;
    }
    if (std::isnan(tail_p) == std::isnan(level)) throw InvalidSpec("give exactly one of --tail-p or --level");
    const auto th = std::isnan(level) ? ThresholdSpec::exceedance_prob(tail_p) : ThresholdSpec::absolute(level);
    const double u = resolve_threshold(th, spec.family);
    const auto e = extract_exceedances(std::span<const double>(values), u);
    const auto ix = interexceedance_partition(e, spec.d, u, static_cast<std::int64_t>(values.size()));

    EstimateRecord rec;
    if (estimator == "intervals") {
      rec = estimate_thetas_intervals(ix);
    } else if (estimator == "mle") {
      MleOptions o;
      o.run_lengths = k;
      if (fbar == "exact") {
        if (std::isnan(tail_p)) throw InvalidSpec("--fbar exact needs --tail-p");
        o.fbar = tail_p;
      } else if (fbar != "empirical") {
        throw InvalidSpec("--fbar must be empirical or exact");
      }
      rec = mle_fit(ix, o);
    } else {
      throw InvalidSpec("--estimator must be intervals or mle");
    }

    std::cout << "estimator,k,n,tail_p,level,fbar,gamma";
    for (int i = 1; i <= spec.d; ++i) std::cout << ",theta_" << i;
    std::cout << ",missing,boundary\n";
    std::cout << to_string(rec.method) << ',' << (rec.method == EstimatorMethod::kMle ? join_ints(k) : "") << ','
              << values.size() << ',' << (std::isnan(tail_p) ? "" : num(tail_p)) << ',' << num(u) << ','
              << (std::isnan(rec.fbar) ? "" : num(rec.fbar)) << ',' << num(rec.gamma);
    for (const auto& t : rec.theta) std::cout << ',' << (t ? num(*t) : "NA");
    std::cout << ',' << join_ints(rec.missing_phases) << ',' << join_ints(rec.boundary_phases) << '\n';
    return 0;
  }
};

struct VerifyCmd {
  ModelFlags model;
  std::int64_t n = 10000;
  std::int64_t reps = 1000;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::string out;
  bool strict = false;

  int run() const {
    const auto spec = model.resolve();
    std::vector<VerificationRow> rows;
    const std::string tag = model.label();

    // Limit law of the maximum at tau = n p.
    const std::vector<double> taus{0.5, 1.0, 2.0};
    std::vector<double> probs;
    for (double t : taus) probs.push_back(t / static_cast<double>(n));
    for (const auto& r : max_dist_check(spec, n, probs, reps, seed, workers)) {
      rows.push_back({"max_dist_predicted", tag + " n=" + std::to_string(n) + " tau=" + num(r.tau), r.empirical,
                      r.predicted, r.se, within_se(r.empirical, r.predicted, r.se)});
      if (spec.family == Family::kGaussianAr)
        rows.push_back({"max_dist_exp_tau", tag + " n=" + std::to_string(n) + " tau=" + num(r.tau), r.empirical,
                        r.reference, r.se, within_se(r.empirical, r.reference, r.se)});
    }

    // Lag-one tail dependence per phase on one long realization.
    const double p_chi = 0.01;
    const double u_chi = resolve_threshold(ThresholdSpec::exceedance_prob(p_chi), spec.family);
    RngStream rng(seed, 1u << 30);
    const auto s = simulate(spec, std::max<std::int64_t>(n * 20, 100000), rng);
    const auto chi = chi_lag(s, 1, u_chi);
    for (int i = 1; i <= spec.d; ++i) {
      const auto& c = chi[static_cast<std::size_t>(i - 1)];
      double expected;
      if (spec.family == Family::kLogisticMarkov) {
        // Finite-threshold value (1 - 2F(u) + F(u,u)) / Fbar(u).
        const double a = spec.param_for_phase(i);
        const double fu = std::exp(-1.0 / u_chi);
        expected = (1.0 - 2.0 * fu + logistic_joint_cdf(u_chi, u_chi, a)) / p_chi;
      } else {
        const double rho = spec.param_for_phase(i);
        const boost::math::normal_distribution<double> nd;
        // P(X2 > u | X1 > u) by one-dimensional integration over X1 > u.
        const auto rule = gauss_legendre(200, 0.0, 1.0);
        double acc = 0.0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
          const double x = u_chi + rule.nodes[q] / (1.0 - rule.nodes[q]);
          const double jac = 1.0 / ((1.0 - rule.nodes[q]) * (1.0 - rule.nodes[q]));
          acc += rule.weights[q] * jac * boost::math::pdf(nd, x) *
                 boost::math::cdf(boost::math::complement(nd, (u_chi - rho * x) / std::sqrt(1.0 - rho * rho)));
        }
        expected = acc / p_chi;
      }
      rows.push_back({"chi_lag1", tag + " phase=" + std::to_string(i) + " p=" + num(p_chi), c.value, expected, c.se,
                      c.defined && within_se(c.value, expected, c.se)});
    }

    // Local extremal index: conditional Monte Carlo vs quadrature (logistic).
    if (spec.family == Family::kLogisticMarkov) {
      const double p_th = 0.01;
      const double u = resolve_threshold(ThresholdSpec::exceedance_prob(p_th), spec.family);
      for (int i = 1; i <= spec.d; ++i) {
        const auto q = logistic_theta_quadrature(spec, i, 10, u);
        const auto mc = empirical_theta_local(spec, i, 10, u, reps * 10, seed + 17, workers);
        rows.push_back({"theta_local_vs_quadrature", tag + " phase=" + std::to_string(i) + " k=10 p=" + num(p_th),
                        mc.value, q.value, mc.se, within_se(mc.value, q.value, mc.se) && q.converged});
      }
    }

    std::size_t passed = 0;
    for (const auto& r : rows) passed += r.pass ? 1 : 0;
    if (out.empty() || out == "-") write_verification_csv(std::cout, rows);
    else write_verification_csv(out, rows);
    std::cerr << "verify: " << passed << "/" << rows.size() << " checks passed\n";
    return strict && passed != rows.size() ? 1 : 0;
  }
};

struct ExperimentCmd {
  std::string config;
  std::string out = "out";
  unsigned workers = 0;

  int run() const {
    const auto cfg = load_config(config);
    fs::create_directories(out);
    const auto result = run_experiment(cfg, workers ? std::optional<unsigned>(workers) : std::nullopt);
    const std::string csv = (fs::path(out) / "results.csv").string();
    write_results_csv(result, csv);
    write_provenance(cfg, result, (fs::path(out) / "provenance.json").string());
    const auto bound = cfg.model.family == Family::kLogisticMarkov ? logistic_theta_bound(cfg.model)
                                                                   : std::vector<double>{};
    for (auto n : cfg.lengths)
      for (double p : cfg.tail_probs_for(n)) {
        std::ostringstream name;
        name << "theta_n" << n << "_p" << p << ".svg";
        render_theta_figure(result, n, p, bound, (fs::path(out) / name.str()).string());
      }
    const bool failed = result.any_cell_failed();
    std::cout << "experiment " << cfg.name << ": " << result.rows.size() << " rows to " << csv
              << " (config " << result.provenance.config_hash << ", seed " << cfg.seed << ")"
              << (failed ? ", some cells failed" : "") << '\n';
    return failed ? 1 : 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extremal clustering of periodic sequences: simulation, estimation and verification"};
  app.require_subcommand(1);

  SimulateCmd sim;
  auto* s = app.add_subcommand("simulate", "Simulate a series and write one value per line");
  sim.model.add_to(s);
  s->add_option("-n,--length", sim.n, "Series length")->check(CLI::PositiveNumber);
  s->add_option("--seed", sim.seed, "Master seed");
  s->add_option("--stream", sim.stream, "Stream id");
  s->add_option("-o,--out", sim.out, "Output file (default stdout)");

  EstimateCmd est;
  auto* e = app.add_subcommand("estimate", "Estimate theta_1..theta_d and gamma; prints a CSV row");
  est.model.add_to(e);
  e->add_option("--input", est.input, "Series file (one value per line) instead of simulating");
  e->add_option("-n,--length", est.n, "Series length when simulating")->check(CLI::PositiveNumber);
  e->add_option("--seed", est.seed, "Master seed when simulating");
  e->add_option("--tail-p", est.tail_p, "Threshold as marginal exceedance probability");
  e->add_option("--level", est.level, "Threshold as absolute level");
  e->add_option("--estimator", est.estimator, "intervals | mle");
  e->add_option("--k", est.k, "Run length(s) for mle: one value or one per phase")->delimiter(',');
  e->add_option("--fbar", est.fbar, "Fbar for mle: empirical | exact");

  VerifyCmd ver;
  auto* v = app.add_subcommand("verify", "Run limit-theorem and oracle checks; writes a verification CSV");
  ver.model.add_to(v);
  v->add_option("-n,--length", ver.n, "Series length for the maximum check")->check(CLI::PositiveNumber);
  v->add_option("--reps", ver.reps, "Monte Carlo realizations")->check(CLI::PositiveNumber);
  v->add_option("--seed", ver.seed, "Master seed");
  v->add_option("--workers", ver.workers, "Worker threads (default: EXCLUST_WORKERS or all cores)");
  v->add_option("-o,--out", ver.out, "Output CSV (default stdout)");
  v->add_flag("--strict", ver.strict, "Exit 1 if any check fails");

  ExperimentCmd exp;
  auto* x = app.add_subcommand("experiment", "Run a Monte Carlo study from a JSON config");
  x->add_option("--config", exp.config, "Config file (JSON)")->required()->check(CLI::ExistingFile);
  x->add_option("-o,--out", exp.out, "Output directory");
  x->add_option("--workers", exp.workers, "Worker threads (default: config, EXCLUST_WORKERS or all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& err) {
    std::cerr << "error: " << err.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*s) return sim.run();
    if (*e) return est.run();
    if (*v) return ver.run();
    if (*x) return exp.run();
  } catch (const InvalidSpec& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 2;
}
