#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "rwre/error.hpp"
#include "rwre/ratelab.hpp"

using namespace rwre;

namespace {

// E|tau - mu|^3 for the crossing time at state `start` of a dense chain.
double abs_third_oracle(const std::vector<double>& omega, int start, double mu, int t_max) {
  const auto pmf = oracle::hitting_pmf(omega, start, start + 1, t_max);
  double s = 0.0;
  for (std::size_t t = 0; t < pmf.size(); ++t) s += std::pow(std::abs(static_cast<double>(t) - mu), 3) * pmf[t];
  return s;
}

}  // namespace

TEST_CASE("grids, fits and quantiles") {
  CHECK(dyadic_grid(3, 5) == std::vector<std::int64_t>{8, 16, 32});
  CHECK_THROWS_AS(dyadic_grid(5, 3), ConfigError);

  const std::vector<std::int64_t> x{10, 100, 1000, 10000};
  std::vector<double> y;
  for (auto n : x) y.push_back(3.0 * std::pow(static_cast<double>(n), -0.5));
  const auto f = loglog_fit(x, y);
  CHECK(f.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  y[1] = 0.0;
  CHECK_THROWS_AS(loglog_fit(x, y), NumericError);

  CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == 2.5);
  CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.25) == doctest::Approx(1.75));

  const auto g = linear_grid(-2.0, 2.0, 21);
  CHECK(g.size() == 21);
  CHECK(g[10] == doctest::Approx(0.0));
  CHECK(g.back() == 2.0);
}

TEST_CASE("theory exponents by regime") {
  CHECK(theory_rate(RateTarget::Fbar, 6.0).exponent == 0.5);
  CHECK(theory_rate(RateTarget::Fbar, 6.0).two_sided);
  CHECK(theory_rate(RateTarget::Fbar, 2.2).exponent == doctest::Approx(1.5 - 3.0 / 2.2));
  CHECK_FALSE(theory_rate(RateTarget::Fbar, 3.0).two_sided);
  CHECK(theory_rate(RateTarget::F, 5.0).exponent == 0.5);
  CHECK(theory_rate(RateTarget::F, 3.0).exponent == doctest::Approx(1.0 / 3.0));
  CHECK(theory_rate(RateTarget::G, 2.4).exponent == 0.25);
  CHECK(theory_rate(RateTarget::G, 2.2).exponent == doctest::Approx(1.5 - 3.0 / 2.2));
  CHECK(theory_rate(RateTarget::G, kInf).exponent == 0.25);

  CHECK(parse_rate_target("fbar") == RateTarget::Fbar);
  CHECK(parse_rate_target("G") == RateTarget::G);
  CHECK_THROWS_AS(parse_rate_target("H"), ConfigError);
}

TEST_CASE("envelope check") {
  const std::vector<std::int64_t> n{1, 4, 16};
  double C = 0.0;
  CHECK(envelope_holds(n, {1.0, 0.5, 0.25}, 0.5, &C));
  CHECK(C == 1.0);
  CHECK_FALSE(envelope_holds(n, {1.0, 0.5, 0.26}, 0.5));
  CHECK_THROWS_AS(envelope_holds(n, {1.0}, 0.5), ParameterError);
}

TEST_CASE("identity residual scale") {
  CHECK(identity_residual(0.0, 1e-12) == doctest::Approx(1e-12));
  CHECK(identity_residual(1e6, 1e6 + 1.0) == doctest::Approx(1e-6).epsilon(1e-6));
  CHECK(identity_residual(-2.0, -2.0) == 0.0);
}

TEST_CASE("martingale identities") {
  SUBCASE("homogeneous environment: every martingale vanishes") {
    const auto ctx = make_context(Degenerate{2.0 / 3.0}, 1, 2000);
    const auto law = law_constants(Degenerate{2.0 / 3.0});
    const auto rep = martingale_identity_check(ctx.table, law, kInf, {10, 100, 1000, 2000});
    for (const auto& v : rep.values) {
      CHECK(std::abs(v.M_sum) < 1e-9);
      CHECK(std::abs(v.L_sum) < 1e-9);
      CHECK(std::abs(v.H_sum) < 1e-9);
    }
    CHECK(rep.max_residual() < 1e-10);
  }
  SUBCASE("random environments") {
    const auto law = law_constants(BetaLaw{5.0, 1.0});
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto ctx = make_context(BetaLaw{5.0, 1.0}, seed, 5000);
      const auto rep = martingale_identity_check(ctx.table, law, 4.0, {1, 2, 50, 1000, 5000});
      CHECK(rep.values.size() == 5);
      CHECK(rep.residual_M < 1e-9);
      CHECK(rep.residual_L < 1e-9);
      CHECK(rep.residual_H < 1e-9);
      CHECK(rep.normalized_W_M > 0.0);
      // M_1 by hand.
      const double m1 = ctx.table.mu(0) - 1.0 - law.r1 - law.r1 * ctx.table.mu(-1);
      CHECK(rep.values[0].M_sum == doctest::Approx(m1).epsilon(1e-14));
    }
  }
  SUBCASE("errors") {
    const auto env = sample_environment(BetaLaw{5.0, 1.0}, -1, 100, 1);
    const QuenchedMomentTable t(env, -1);
    const auto law = law_constants(BetaLaw{5.0, 1.0});
    CHECK_THROWS_AS(martingale_identity_check(t, law, 4.0, {10}), RangeError);
    const auto ctx = make_context(BetaLaw{5.0, 1.0}, 1, 100);
    CHECK_THROWS_AS(martingale_identity_check(ctx.table, law, 4.0, {10, 200}), RangeError);
  }
}

TEST_CASE("transfer identity") {
  const auto law = law_constants(BetaLaw{5.0, 1.0});
  for (std::uint64_t seed : {4u, 5u}) {
    const auto ctx = make_context(BetaLaw{5.0, 1.0}, seed, 512);
    const auto rep = transfer_check(ctx.env, ctx.table, law, 512, linear_grid(-3.0, 3.0, 13));
    CHECK(rep.points.size() == 13);
    CHECK(rep.max_residual < 1e-12);
    for (std::size_t i = 1; i < rep.points.size(); ++i) CHECK(rep.points[i].G_star >= rep.points[i - 1].G_star);
  }
  // Far left of the window every k is below 1 and the point is skipped;
  // far right k exceeds n and both sides are 1.
  const auto ctx = make_context(BetaLaw{5.0, 1.0}, 4, 64);
  const auto rep = transfer_check(ctx.env, ctx.table, law, 64, {-100.0, 100.0});
  CHECK(rep.skipped == 1);
  CHECK(rep.points[0].skipped);
  CHECK(rep.points[1].G_star == 1.0);
  CHECK(rep.points[1].survival == 1.0);
}

TEST_CASE("fluctuation statistics") {
  SUBCASE("window") {
    const auto w = fluctuation_window(1024, 0.6, 0.1);
    CHECK(w.first == static_cast<std::int64_t>(std::ceil(614.4 - std::pow(1024.0, 0.6))));
    CHECK(w.second == static_cast<std::int64_t>(std::floor(614.4 + std::pow(1024.0, 0.6))));
    CHECK_THROWS_AS(fluctuation_window(2, 0.6, 0.1), ConfigError);
  }
  SUBCASE("homogeneous environment has no fluctuation") {
    const auto g = dyadic_grid(6, 9);
    const auto m = mean_fluctuation_experiment(Degenerate{2.0 / 3.0}, g, 0.1, 0.05, 2, 1);
    const auto v = variance_fluctuation_experiment(Degenerate{2.0 / 3.0}, g, 0.1, 2, 1);
    for (const auto& row : m.raw)
      for (double x : row) CHECK(x < 1e-8);
    for (const auto& row : v.raw)
      for (double x : row) CHECK(x < 1e-6);
  }
  SUBCASE("shapes and raw values in a random environment") {
    const auto g = dyadic_grid(7, 10);
    const auto v = variance_fluctuation_experiment(BetaLaw{5.0, 1.0}, g, 0.1, 3, 2);
    REQUIRE(v.raw.size() == 3);
    REQUIRE(v.seeds.size() == 3);
    const auto ctx = make_context(BetaLaw{5.0, 1.0}, v.seeds[1], 1024);
    const double sigma2 = 40.0 / 9.0;
    CHECK(v.raw[1][3] == doctest::Approx(std::abs(ctx.table.var_T(1024) - sigma2 * 1024)).epsilon(1e-9));
    CHECK(v.normalized[1][0] == doctest::Approx(v.raw[1][0] / std::pow(128.0, 0.5 + 0.1)));
    CHECK(v.median_normalized.size() == 4);
  }
  CHECK_THROWS_AS(mean_fluctuation_experiment(BetaLaw{2.5, 1.0}, dyadic_grid(6, 9), 0.1, 0.05, 2, 1),
                  RegimeError);
}

TEST_CASE("Berry-Esseen bound") {
  SUBCASE("third absolute moment against a dense oracle") {
    const auto env = sample_environment(BetaLaw{5.0, 1.0}, -20, 10, 3);
    const QuenchedMomentTable t(env, -20);
    std::vector<double> omega;
    for (std::int64_t x = -20; x <= 10; ++x) omega.push_back(env.omega(x));
    for (std::int64_t k : {-19, -2, 0, 7}) {
      const double want = abs_third_oracle(omega, static_cast<int>(k + 20), t.mu(k), 20000);
      CHECK(third_abs_central_moment(env, t, k) == doctest::Approx(want).epsilon(1e-7));
    }
    CHECK(third_abs_central_moment(env, t, -20) == 0.0);
  }
  SUBCASE("homogeneous closed form") {
    const auto ctx = make_context(Degenerate{2.0 / 3.0}, 1, 300);
    std::vector<double> omega(200, 2.0 / 3.0);
    const double c3 = abs_third_oracle(omega, 150, 3.0, 4000);
    const auto rep = berry_esseen_bound_eval(ctx.env, ctx.table, 256);
    CHECK(rep.bound == doctest::Approx(kDefaultA1 * 256 * c3 / std::pow(24.0 * 256, 1.5)).epsilon(1e-8));
    CHECK(rep.holds);
  }
  SUBCASE("bound holds and decays like n^-1/2") {
    const auto ctx = make_context(BetaLaw{7.0, 1.0}, 2, 4096);
    const auto a = berry_esseen_bound_eval(ctx.env, ctx.table, 256);
    const auto b = berry_esseen_bound_eval(ctx.env, ctx.table, 4096);
    CHECK(a.holds);
    CHECK(b.holds);
    CHECK(b.bound / a.bound > 0.15);
    CHECK(b.bound / a.bound < 0.4);
    CHECK_THROWS_AS(berry_esseen_bound_eval(ctx.env, ctx.table, 5000), RangeError);
    CHECK_THROWS_AS(berry_esseen_bound_eval(ctx.env, ctx.table, 64, 0.0), ParameterError);
  }
}

TEST_CASE("rate experiment") {
  SUBCASE("homogeneous walk converges at n^-1/2") {
    RateExperimentConfig cfg;
    cfg.dist = Degenerate{2.0 / 3.0};
    cfg.n_grid = dyadic_grid(5, 10);
    cfg.n_envs = 2;
    const auto r = rate_experiment(cfg);
    CHECK(r.median_slope == doctest::Approx(-0.5).epsilon(0.3));
    CHECK(r.slope_in_band);
    CHECK(r.passed);
    CHECK(r.replicates.size() == 2);
    CHECK(r.replicates[0].distances == r.replicates[1].distances);
  }
  SUBCASE("deterministic under a fixed seed, different across seeds") {
    RateExperimentConfig cfg;
    cfg.dist = BetaLaw{7.0, 1.0};
    cfg.n_grid = dyadic_grid(5, 8);
    cfg.n_envs = 3;
    cfg.master_seed = 9;
    cfg.threads = 1;
    const auto a = rate_experiment(cfg);
    cfg.threads = 3;
    const auto b = rate_experiment(cfg);
    for (std::size_t r = 0; r < 3; ++r) CHECK(a.replicates[r].distances == b.replicates[r].distances);
    cfg.master_seed = 10;
    const auto c = rate_experiment(cfg);
    CHECK(a.replicates[0].distances != c.replicates[0].distances);
  }
  SUBCASE("validation") {
    RateExperimentConfig cfg;
    cfg.n_grid = {8, 16, 32};
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.n_grid = {8, 16, 32, 32};
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.n_grid = dyadic_grid(3, 6);
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.epsilon = 0.1;
    cfg.n_envs = 0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.n_envs = 2;
    cfg.dist = BetaLaw{2.5, 1.0};
    CHECK_THROWS_AS(rate_experiment(cfg), RegimeError);
  }
}
