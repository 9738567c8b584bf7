// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rwre/envmodel.hpp"
#include "rwre/exactdist.hpp"
#include "rwre/mcsim.hpp"
#include "rwre/parallel.hpp"
#include "rwre/qmoments.hpp"
#include "rwre/ratelab.hpp"
#include "rwre/rng.hpp"

using namespace rwre;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome c1_homogeneous() {
  const double p = 2.0 / 3.0;
  const auto law = law_constants(Degenerate{p});
  const auto env = sample_environment(Degenerate{p}, -256, 200, 1);
  const QuenchedMomentTable t(env, -256);
  double err = 0.0;
  for (double e : {law.speed - 1.0 / 3.0, law.inv_speed - 3.0, law.sigma2 - 24.0, law.mu0_sq_mean - 9.0,
                   t.mu(100) - 3.0, t.var(100) - 24.0, t.mu(100) * t.mu(100) - 9.0})
    err = std::max(err, std::abs(e));
  double pos_err = 0.0;
  for (int n : {1, 10, 100, 200}) {
    const auto pos = position_pmf(env, n, -256);
    for (Eigen::Index i = 0; i < pos.cdf.atoms(); ++i) {
      const int j = static_cast<int>((pos.cdf.value(i) + n) / 2);
      pos_err = std::max(pos_err, std::abs(pos.cdf.probs[i] - oracle::binom_pmf(n, j, p)));
    }
  }
  return {err <= 1e-10 && pos_err <= 1e-12, fmt("closed-form err %.2e, binomial err %.2e", err, pos_err)};
}

Outcome c2_kappa() {
  double worst = 0.0;
  for (double a : {5.0, 6.0}) {
    const double k = solve_kappa(BetaLaw{a, 1.0});
    const double ref = oracle::bisect([&](double q) { return oracle::beta_rp(a, 1.0, q) - 1.0; }, 0.5, a - 1e-9);
    worst = std::max({worst, std::abs(k - (a - 1.0)), std::abs(k - ref)});
  }
  return {worst <= 1e-6, fmt("max |kappa - oracle| = %.2e", worst)};
}

Outcome c3_ensemble() {
  const BetaLaw d{5.0, 1.0};
  const std::size_t N = 100000;
  struct Row {
    double mu, mu2, V;
  };
  const auto rows = parallel_map(N, [&](std::size_t e) {
    const std::uint64_t seed = replicate_seed(2024, e);
    const auto base = sample_environment(d, 0, 0, seed);
    const std::int64_t L = truncation_control(base).L;
    TableOptions o;
    o.estimate_truncation_error = false;
    const QuenchedMomentTable t(base.resized(-L, 0), -L, o);
    return Row{t.mu(0), t.mu(0) * t.mu(0), t.var(0)};
  });
  const auto law = law_constants(d);
  const double target[3] = {law.inv_speed, law.mu0_sq_mean, law.sigma2};
  bool ok = std::abs(target[0] - 5.0 / 3.0) < 1e-12 && std::abs(target[2] - 40.0 / 9.0) < 1e-12;
  std::string detail;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(N);
    for (std::size_t i = 0; i < N; ++i) x[i] = c == 0 ? rows[i].mu : c == 1 ? rows[i].mu2 : rows[i].V;
    const double m = pairwise_sum(x) / N;
    for (auto& v : x) v = (v - m) * (v - m);
    const double se = std::sqrt(pairwise_sum(x) / (N - 1) / N);
    const double z = (m - target[c]) / se;
    ok = ok && std::abs(z) <= 4.0;
    static const char* names[3] = {"mu0", "mu0^2", "V0"};
    detail += std::string(names[c]) + fmt(" %.4f (target %.4f, z = %.2f); ", m, target[c], z);
  }
  return {ok, detail};
}

Outcome c4_dp_vs_mc() {
  bool ok = true;
  double worst = 0.0, eps = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const std::uint64_t seed = replicate_seed(404, s);
    for (std::int64_t k : {20, 50}) {
      const auto ctx = make_context(BetaLaw{5.0, 1.0}, seed, k);
      const auto law = first_passage_auto(ctx.env, ctx.table, k);
      const auto mc = simulate_hitting_time(ctx.env, k, 100000, seed ^ 0x55u);
      const auto d = ecdf_distance(mc.samples, law, 0.01);
      ok = ok && d.within_band && mc.truncated_count == 0;
      worst = std::max(worst, d.distance);
      eps = d.dkw_epsilon;
    }
  }
  return {ok, fmt("max ECDF distance %.4f, DKW 99%% eps %.4f", worst, eps)};
}

Outcome c5_identities() {
  const BetaLaw d{5.0, 1.0};
  const auto law = law_constants(d);
  const double kappa = solve_kappa(d);
  double res = 0.0, tr = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const std::uint64_t seed = replicate_seed(505, s);
    const auto ctx = make_context(d, seed, 10000);
    res = std::max(res, martingale_identity_check(ctx.table, law, kappa, {10000}).max_residual());
    const auto t = transfer_check(ctx.env, ctx.table, law, 2048, linear_grid(-3.0, 3.0, 21));
    tr = std::max(tr, t.max_residual);
  }
  return {res <= 1e-9 && tr <= 1e-12, fmt("max M/L/H residual %.2e, transfer residual %.2e", res, tr)};
}

Outcome c6_berry_esseen() {
  bool ok = true;
  double ratio = 0.0;
  int cases = 0;
  for (const BetaLaw d : {BetaLaw{5.0, 1.0}, BetaLaw{7.0, 1.0}}) {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto ctx = make_context(d, replicate_seed(606, s), 4096);
      for (std::int64_t n : {64, 256, 1024, 4096}) {
        const auto r = berry_esseen_bound_eval(ctx.env, ctx.table, n);
        ok = ok && r.holds;
        ratio = std::max(ratio, r.distance / r.bound);
        ++cases;
      }
    }
  }
  return {ok, fmt("%g cases, max distance/bound %.3f", cases, ratio)};
}

RateExperimentConfig rate_cfg(EnvDistribution d, std::uint64_t seed) {
  RateExperimentConfig cfg;
  cfg.dist = d;
  cfg.n_grid = dyadic_grid(7, 14);
  cfg.n_envs = 20;
  cfg.target = RateTarget::Fbar;
  cfg.master_seed = seed;
  return cfg;
}

Outcome c7_fast_rate() {
  const auto r = rate_experiment(rate_cfg(BetaLaw{7.0, 1.0}, 707));
  const bool ok = r.median_slope >= -0.65 && r.median_slope <= -0.35;
  return {ok, fmt("median slope %.3f, IQR %.3f", r.median_slope, r.slope_iqr)};
}

Outcome c8_slow_envelope() {
  const auto r = rate_experiment(rate_cfg(BetaLaw{3.2, 1.0}, 808));
  return {r.envelope_pass_fraction >= 0.8,
          fmt("envelope exponent %.4f, pass fraction %.2f, median slope %.3f", r.envelope_exponent,
              r.envelope_pass_fraction, r.median_slope)};
}

Outcome c9_fluctuations() {
  const BetaLaw d{5.0, 1.0};
  const auto g = dyadic_grid(8, 14);
  const auto m = mean_fluctuation_experiment(d, g, 0.1, 0.05, 20, 909);
  const auto v = variance_fluctuation_experiment(d, g, 0.1, 20, 909);
  const bool ok = m.median_decreasing && m.median_as_decreasing && v.median_decreasing;
  return {ok, fmt("mean median %.4g -> %.4g, variance median %.4g -> %.4g", m.median_normalized.front(),
                  m.median_normalized.back(), v.median_normalized.front(), v.median_normalized.back())};
}

Outcome c10_backtrack() {
  const std::int64_t n = 10000;
  bool ok = true;
  std::string detail;
  for (const EnvDistribution d : {EnvDistribution{Degenerate{2.0 / 3.0}}, EnvDistribution{BetaLaw{5.0, 1.0}}}) {
    const auto ctx = make_context(d, 1010, n);
    const auto e = backtrack_probability(ctx.env, n, 6.0, 100000, 1011);
    ok = ok && e.ci_hi <= 1.0 / std::sqrt(static_cast<double>(n));
    detail += describe(d) + fmt(" hits %g, upper CI %.2e; ", static_cast<double>(e.hits), e.ci_hi);
  }
  return {ok, detail};
}

Outcome c11_position_clt() {
  const BetaLaw d{7.0, 1.0};
  const auto law = law_constants(d);
  const auto ctx = make_context(d, 1111, 10000);
  const double a = target_distance(ctx, RateTarget::G, 1000, law).distance;
  const double b = target_distance(ctx, RateTarget::G, 10000, law).distance;
  return {b <= 0.1 && b < a, fmt("d(1e3) = %.4f, d(1e4) = %.4f", a, b)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"homogeneous closed forms", c1_homogeneous},
      {"kappa solver", c2_kappa},
      {"ensemble moments", c3_ensemble},
      {"DP vs Monte Carlo", c4_dp_vs_mc},
      {"algebraic identities", c5_identities},
      {"Berry-Esseen dominance", c6_berry_esseen},
      {"fast-regime rate", c7_fast_rate},
      {"slow-regime envelope", c8_slow_envelope},
      {"fluctuation scalings", c9_fluctuations},
      {"backtracking", c10_backtrack},
      {"quenched position CLT", c11_position_clt},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), sec);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
