#include "rwre/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "rwre/exactdist.hpp"
#include "rwre/io.hpp"
#include "rwre/mcsim.hpp"
#include "rwre/parallel.hpp"
#include "rwre/qmoments.hpp"
#include "rwre/ratelab.hpp"
#include "rwre/rng.hpp"

namespace rwre {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return kExitUsage;
    case ErrorKind::config:
    case ErrorKind::parameter: return kExitConfig;
    case ErrorKind::regime: return kExitRegime;
    case ErrorKind::range:
    case ErrorKind::horizon:
    case ErrorKind::numeric: return kExitNumeric;
  }
  return kExitNumeric;
}

namespace {

std::string num(double x) { return format_double(x); }
std::string num(std::int64_t x) { return std::to_string(x); }
std::string num(std::uint64_t x) { return std::to_string(x); }

nlohmann::json tags_json(const RegimeReport& r) {
  nlohmann::json tags = nlohmann::json::array();
  for (auto t : r.applicable_theorems) tags.push_back(to_string(t));
  return tags;
}

// Runs `body` inside a run directory; on a library error the manifest is still
// written with a failure marker before the error propagates.
template <typename Body>
CommandResult with_run_dir(const RunConfig& cfg, Body&& body) {
  RunDirectory dir(cfg.out_dir, cfg.command, cfg.seed);
  CommandResult res;
  res.dir = dir.path();
  try {
    body(dir, res);
  } catch (const std::exception& e) {
    dir.finish(to_json(cfg), std::string("error: ") + e.what());
    throw;
  }
  dir.finish(to_json(cfg), res.exit_code == kExitOk ? "ok" : "failed");
  return res;
}

}  // namespace

// ---------------------------------------------------------------------------

CommandResult cmd_env_info(const RunConfig& cfg, std::ostream& out) {
  const RegimeReport reg = regime_report(cfg.dist);
  return with_run_dir(cfg, [&](RunDirectory& dir, CommandResult& res) {
    nlohmann::json s;
    s["law"] = format_law(cfg.dist);
    s["kappa"] = json_number(reg.kappa);
    s["r1"] = json_number(reg.r1);
    s["r2"] = json_number(reg.r2);
    s["log_rho_mean"] = reg.log_rho_mean;
    s["speed"] = reg.r1 < 1.0 ? (1.0 - reg.r1) / (1.0 + reg.r1) : 0.0;
    if (reg.r1 < 1.0 && reg.r2 < 1.0) {
      const LawConstants c = law_constants_from_moments(reg.r1, reg.r2);
      s["sigma2"] = c.sigma2;
      s["mu0_sq_mean"] = c.mu0_sq_mean;
    } else {
      s["sigma2"] = "inf";
      s["mu0_sq_mean"] = "inf";
    }
    s["applicable_theorems"] = tags_json(reg);
    res.summary = s;

    // r_p over a grid, to show where it crosses 1.
    CsvWriter csv({"p", "r_p"});
    const double p_hi = std::isinf(reg.kappa) ? 10.0 : std::min(1.25 * reg.kappa, 64.0);
    for (int i = 0; i <= 100; ++i) {
      const double p = p_hi * i / 100.0;
      csv.add_row({num(p), num(moment_rp(cfg.dist, p))});
    }
    dir.write("data.csv", csv.str());
    dir.write_json("summary.json", s);
    dir.write("plot.gp",
              "set datafile separator ','\n"
              "set key autotitle columnhead\n"
              "set xlabel 'p'\nset ylabel 'E[rho^p]'\n"
              "set logscale y\n"
              "set terminal pngcairo size 800,600\nset output 'r_p.png'\n"
              "plot 'data.csv' using 1:2 with lines title 'r_p', 1 with lines dashtype 2 title '1'\n");
    out << s.dump(2) << "\n";
  });
}

// ---------------------------------------------------------------------------

CommandResult cmd_rates(const RunConfig& cfg, std::ostream& out) {
  RateExperimentConfig rc;
  rc.dist = cfg.dist;
  rc.n_grid = cfg.n_grid;
  rc.n_envs = cfg.quick ? std::min<std::int64_t>(cfg.n_envs, 4) : cfg.n_envs;
  rc.target = cfg.target;
  rc.epsilon = cfg.epsilon;
  rc.epsilon_prime = cfg.epsilon_prime;
  rc.master_seed = cfg.seed;
  rc.tol = cfg.tol;
  rc.threads = cfg.threads;
  validate(rc);
  regime_report(cfg.dist);  // fail fast on a bad regime before creating outputs

  return with_run_dir(cfg, [&](RunDirectory& dir, CommandResult& res) {
    const RateExperimentResult r = rate_experiment(rc);

    CsvWriter csv({"seed", "n", "statistic", "normalized_statistic", "distance", "bound", "tail_mass"});
    for (const auto& rep : r.replicates) {
      for (std::size_t i = 0; i < rc.n_grid.size(); ++i) {
        const double n = static_cast<double>(rc.n_grid[i]);
        const double d = rep.distances[i];
        csv.add_row({num(rep.seed), num(rc.n_grid[i]), num(d), num(d * std::pow(n, r.theory.exponent)), num(d),
                     num(rep.envelope_C * std::pow(n, -r.envelope_exponent)), num(rep.tail_bounds[i])});
      }
    }

    nlohmann::json s;
    s["law"] = format_law(rc.dist);
    s["kappa"] = json_number(r.regime.kappa);
    s["applicable_theorems"] = tags_json(r.regime);
    s["target"] = to_string(rc.target);
    s["n_grid"] = rc.n_grid;
    s["n_envs"] = rc.n_envs;
    s["theory"] = {{"exponent", r.theory.exponent}, {"two_sided", r.theory.two_sided}, {"rate", r.theory.label}};
    nlohmann::json slopes = nlohmann::json::array();
    for (const auto& rep : r.replicates) slopes.push_back(rep.fit.slope);
    s["slopes"] = slopes;
    s["median_slope"] = r.median_slope;
    s["slope_iqr"] = r.slope_iqr;
    s["envelope_exponent"] = r.envelope_exponent;
    s["envelope_pass_fraction"] = r.envelope_pass_fraction;
    s["checks"] = {{"slope_in_band", r.slope_in_band}, {"envelope", r.envelope_ok}};
    s["passed"] = r.passed;
    res.summary = s;
    res.exit_code = r.passed ? kExitOk : kExitNumeric;

    // Median envelope constant for the reference line.
    std::vector<double> cs;
    for (const auto& rep : r.replicates) cs.push_back(rep.envelope_C);
    const double c_med = quantile(cs, 0.5);
    std::ostringstream gp;
    gp << "set datafile separator ','\n"
       << "set key autotitle columnhead\n"
       << "set logscale xy\n"
       << "set xlabel 'n'\nset ylabel 'Kolmogorov distance (" << to_string(rc.target) << ")'\n"
       << "set terminal pngcairo size 800,600\nset output 'distance.png'\n"
       << "plot 'data.csv' using 2:5 with points pointtype 7 title 'replicates', \\\n"
       << "     " << format_double(c_med) << " * x**(-" << format_double(r.envelope_exponent)
       << ") with lines title 'envelope', \\\n"
       << "     " << format_double(c_med) << " * x**(-" << format_double(r.theory.exponent)
       << ") with lines dashtype 2 title 'theory rate'\n";
    dir.write("data.csv", csv.str());
    dir.write_json("summary.json", s);
    dir.write("plot.gp", gp.str());
    out << s.dump(2) << "\n";
  });
}

// ---------------------------------------------------------------------------

namespace {

struct CheckRow {
  std::string check;
  std::uint64_t seed;
  std::int64_t n;
  double value;
  double tolerance;
  bool pass;
};

}  // namespace

CommandResult cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const RegimeReport reg = regime_report(cfg.dist);
  const LawConstants law = law_constants(cfg.dist);
  const std::vector<std::int64_t> ns =
      cfg.quick ? std::vector<std::int64_t>{256} : std::vector<std::int64_t>{256, 1024, 4096};
  const std::int64_t n_seeds = cfg.quick ? 1 : cfg.verify_seeds;
  const std::int64_t n_max = ns.back();
  const std::int64_t mc_k = cfg.quick ? 20 : 50;
  const bool fault = cfg.inject_fault == "v-sign";
  if (!cfg.inject_fault.empty() && !fault) throw ConfigError("unknown fault '" + cfg.inject_fault + "'");

  return with_run_dir(cfg, [&](RunDirectory& dir, CommandResult& res) {
    std::vector<CheckRow> rows;
    for (std::int64_t si = 0; si < n_seeds; ++si) {
      const std::uint64_t seed = replicate_seed(cfg.seed, static_cast<std::uint64_t>(si));
      const EnvContext ctx = make_context(cfg.dist, seed, n_max, cfg.tol.trunc_tol, cfg.tol.reflect_tol);

      TableOptions opts;
      opts.estimate_truncation_error = true;
      opts.enforce_variance_routes = false;
      opts.inject_variance_fault = fault;
      const QuenchedMomentTable probe(ctx.env, -ctx.L, opts);
      const double vgap = probe.variance_route_disagreement();
      rows.push_back({"variance_two_route", seed, n_max, vgap, kVarianceRouteTol, vgap <= kVarianceRouteTol});
      rows.push_back({"truncation_error", seed, n_max, probe.trunc_error_bound(), cfg.tol.trunc_tol,
                      probe.trunc_error_bound() <= cfg.tol.trunc_tol});

      const MartingaleCheckReport mart = martingale_identity_check(ctx.table, law, reg.kappa, ns, cfg.epsilon);
      rows.push_back({"identity_M", seed, n_max, mart.residual_M, 1e-9, mart.residual_M <= 1e-9});
      rows.push_back({"identity_L", seed, n_max, mart.residual_L, 1e-9, mart.residual_L <= 1e-9});
      rows.push_back({"identity_H", seed, n_max, mart.residual_H, 1e-9, mart.residual_H <= 1e-9});

      for (std::int64_t n : ns) {
        if (n <= 2048) {
          const TransferReport tr = transfer_check(ctx.env, ctx.table, law, n, linear_grid(-3.0, 3.0, 21));
          rows.push_back({"transfer", seed, n, tr.max_residual, 1e-12, tr.max_residual <= 1e-12});
        }
        const BerryEsseenReport be = berry_esseen_bound_eval(ctx.env, ctx.table, n, cfg.A1, cfg.tol.tail_tol);
        rows.push_back({"berry_esseen", seed, n, be.distance - be.bound, be.tail_mass_bound, be.holds});

        const PositionLaw pos = position_pmf(ctx.env, n, -ctx.L);
        const double miss = std::abs(pos.cdf.total() - 1.0);
        rows.push_back({"position_mass", seed, n, miss, 1e-12, miss <= 1e-12});
      }

      const LatticeCdf exact = first_passage_auto(ctx.env, ctx.table, mc_k, cfg.tol.tail_tol);
      const SimBatch mc = simulate_hitting_time(ctx.env, mc_k, cfg.mc_samples, seed, kDefaultStepCap, cfg.threads);
      const EcdfDistance ed = ecdf_distance(mc.samples, exact, cfg.dkw_delta);
      const double band = ed.dkw_epsilon + exact.tail_mass;
      rows.push_back({"dp_vs_mc", seed, mc_k, ed.distance, band, ed.distance <= band});
    }

    CsvWriter csv({"check", "seed", "n", "value", "tolerance", "pass"});
    nlohmann::json checks = nlohmann::json::array();
    bool all = true;
    for (const auto& r : rows) {
      csv.add_row({r.check, num(r.seed), num(r.n), num(r.value), num(r.tolerance), r.pass ? "true" : "false"});
      checks.push_back({{"check", r.check}, {"seed", r.seed}, {"n", r.n}, {"value", json_number(r.value)},
                        {"tolerance", r.tolerance}, {"pass", r.pass}});
      if (!r.pass) {
        all = false;
        err << "FAIL seed=" << r.seed << " n=" << r.n << " check=" << r.check << " value=" << format_double(r.value)
            << " tolerance=" << format_double(r.tolerance) << "\n";
      }
    }
    nlohmann::json s;
    s["law"] = format_law(cfg.dist);
    s["kappa"] = json_number(reg.kappa);
    s["quick"] = cfg.quick;
    s["checks"] = checks;
    s["passed"] = all;
    res.summary = s;
    res.exit_code = all ? kExitOk : kExitNumeric;

    dir.write("data.csv", csv.str());
    dir.write_json("summary.json", s);
    dir.write("plot.gp",
              "set datafile separator ','\n"
              "set key autotitle columnhead\n"
              "set logscale y\n"
              "set xlabel 'row'\nset ylabel 'value / tolerance'\n"
              "set terminal pngcairo size 800,600\nset output 'checks.png'\n"
              "plot 'data.csv' using 0:(abs($4)/$5) with points pointtype 7 title 'checks', "
              "1 with lines dashtype 2 title 'limit'\n");
    out << "verify " << (all ? "passed" : "FAILED") << ": " << rows.size() << " checks, law "
        << format_law(cfg.dist) << "\n";
  });
}

// ---------------------------------------------------------------------------

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quenched CLT rate workbench for random walks in i.i.d. random environments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, law, target, n_grid, fault;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::int64_t envs = 0;
  bool quick = false;

  struct Opts {
    CLI::Option *config, *seed, *threads, *out, *law, *target, *n, *envs, *fault;
  };
  auto add_common = [&](CLI::App* sub) {
    Opts o{};
    o.config = sub->add_option("--config", config_path, "TOML config file");
    o.seed = sub->add_option("--seed", seed, "master seed");
    o.threads = sub->add_option("--threads", threads, "worker threads (default: logical cores)");
    o.out = sub->add_option("--out", out_dir, "output root (default: out)");
    sub->add_flag("--quick", quick, "reduced matrix");
    o.law = sub->add_option("--law", law, "law, e.g. beta:7,1 or degenerate:2/3");
    o.target = sub->add_option("--target", target, "fbar, f or g");
    o.n = sub->add_option("--n", n_grid, "n grid: 128..16384 or 100,200,400");
    o.envs = sub->add_option("--envs", envs, "number of environments");
    o.fault = sub->add_option("--inject-fault", fault)->group("");
    return o;
  };
  CLI::App* env_info = app.add_subcommand("env-info", "regime report for a law");
  CLI::App* rates = app.add_subcommand("rates", "convergence-rate experiment");
  CLI::App* verify = app.add_subcommand("verify", "identity and oracle checks");
  const Opts o_env = add_common(env_info);
  const Opts o_rates = add_common(rates);
  const Opts o_verify = add_common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = env_info->parsed() ? env_info : rates->parsed() ? rates : verify;
  const Opts& o = sub == env_info ? o_env : sub == rates ? o_rates : o_verify;

  try {
    RunConfig cfg;
    cfg.command = sub->get_name();
    if (o.config->count()) apply_config_file(cfg, config_path);
    if (o.seed->count()) cfg.seed = seed;
    if (o.threads->count()) cfg.threads = threads;
    if (o.out->count()) cfg.out_dir = out_dir;
    if (quick) cfg.quick = true;
    if (o.law->count()) cfg.dist = parse_law(law);
    if (o.target->count()) cfg.target = parse_rate_target(target);
    if (o.n->count()) cfg.n_grid = parse_n_grid(n_grid);
    if (o.envs->count()) {
      if (envs < 1) throw ConfigError("--envs must be >= 1");
      cfg.n_envs = envs;
    }
    if (o.fault->count()) cfg.inject_fault = fault;
    if (cfg.threads) set_default_threads(cfg.threads);

    CommandResult res;
    if (sub == env_info) res = cmd_env_info(cfg, out);
    else if (sub == rates) res = cmd_rates(cfg, out);
    else res = cmd_verify(cfg, out, err);
    err << "output: " << res.dir.string() << "\n";
    return res.exit_code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace rwre
