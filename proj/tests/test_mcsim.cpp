#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "rwre/error.hpp"
#include "rwre/exactdist.hpp"
#include "rwre/mcsim.hpp"
#include "rwre/qmoments.hpp"

using namespace rwre;

TEST_CASE("nearly deterministic walk") {
  const auto env = sample_environment(Degenerate{0.999}, -64, 50, 1);
  const auto b = simulate_hitting_time(env, 50, 2000, 3);
  int straight = 0;
  for (auto s : b.samples) straight += s == 50;
  // P(T_50 = 50) = 0.999^50
  const double p = std::pow(0.999, 50);
  CHECK(std::abs(straight / 2000.0 - p) < 5 * std::sqrt(p * (1 - p) / 2000));
}

TEST_CASE("parity and mean of hitting times") {
  const auto env = sample_environment(BetaLaw{5.0, 1.0}, -128, 30, 4);
  const QuenchedMomentTable t(env, -128);
  const auto b = simulate_hitting_time(env, 30, 20000, 5);
  CHECK(b.size() == 20000);
  CHECK(b.truncated_count == 0);
  for (auto s : b.samples) CHECK((s - 30) % 2 == 0);
  const double se = std::sqrt(t.var_T(30) / 20000.0);
  CHECK(std::abs(b.mean() - t.mean_T(30)) < 5 * se);
  CHECK(b.variance() == doctest::Approx(t.var_T(30)).epsilon(0.1));
}

TEST_CASE("step cap marks truncated samples") {
  const auto env = sample_environment(BetaLaw{5.0, 1.0}, -64, 200, 4);
  const auto b = simulate_hitting_time(env, 200, 200, 5, 150);
  CHECK(b.truncated_count == 200);
  CHECK(b.truncated_fraction() == 1.0);
  for (auto s : b.samples) CHECK(s == kTruncatedSample);
}

TEST_CASE("one step of the position walk is Bernoulli") {
  const auto env = sample_environment(BetaLaw{2.0, 1.0}, -10, 10, 8);
  const auto b = simulate_position(env, 1, 40000, 9);
  int right = 0;
  for (auto x : b.samples) {
    CHECK((x == 1 || x == -1));
    right += x == 1;
  }
  const double w = env.omega(0);
  CHECK(std::abs(right / 40000.0 - w) < 5 * std::sqrt(w * (1 - w) / 40000));
}

TEST_CASE("positions: parity, running max and the exact law") {
  const auto env = sample_environment(BetaLaw{5.0, 1.0}, -128, 200, 12);
  const auto b = simulate_position(env, 101, 20000, 13, true);
  REQUIRE(b.maxima.size() == b.samples.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    CHECK((b.samples[i] + 101) % 2 == 0);
    CHECK(b.maxima[i] >= b.samples[i]);
    CHECK(b.maxima[i] >= 0);
  }
  const auto law = position_pmf(env, 101, -128);
  const auto d = ecdf_distance(b.samples, law.cdf, 0.01);
  CHECK(d.within_band);
}

TEST_CASE("ECDF of hitting times sits in the DKW band of the DP") {
  const auto env = sample_environment(BetaLaw{5.0, 1.0}, -128, 20, 21);
  const QuenchedMomentTable t(env, -128);
  const auto law = first_passage_auto(env, t, 20);
  int failures = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto b = simulate_hitting_time(env, 20, 2000, 1000 + s);
    failures += !ecdf_distance(b.samples, law, 0.01).within_band;
  }
  // Each trial fails with probability at most 0.01.
  CHECK(failures <= 3);
}

TEST_CASE("ecdf_distance edge cases") {
  CHECK_THROWS_AS(ecdf_distance(std::vector<std::int64_t>{}, [](double) { return 0.5; }), ParameterError);
  CHECK_THROWS_AS(dkw_epsilon(0, 0.01), ParameterError);
  CHECK_THROWS_AS(dkw_epsilon(10, 1.5), ParameterError);
  CHECK(dkw_epsilon(100, 0.01) == doctest::Approx(std::sqrt(std::log(2.0 / 0.01) / 200.0)));

  LatticeCdf fair;
  fair.probs = Eigen::VectorXd::Constant(2, 0.5);
  const auto exact = ecdf_distance({0, 0, 1, 1}, fair);
  CHECK(exact.distance == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(exact.n == 4);

  // Samples off the reference support still count.
  const auto shifted = ecdf_distance({5, 5, 5, 5}, fair);
  CHECK(shifted.distance == doctest::Approx(1.0));

  LatticeCdf point;
  point.probs = Eigen::VectorXd::Ones(1);
  CHECK(ecdf_distance({kTruncatedSample}, point).distance == doctest::Approx(1.0));
  CHECK(ecdf_distance({0, kTruncatedSample}, point).distance == doctest::Approx(0.5));

  // Continuous reference: both one-sided limits at the atom.
  const auto c = ecdf_distance({0}, [](double x) { return oracle::phi(x); });
  CHECK(c.distance == doctest::Approx(0.5));
}

TEST_CASE("Wilson interval") {
  const auto z = wilson_interval(0, 100);
  CHECK(z.estimate == 0.0);
  CHECK(z.ci_lo == doctest::Approx(0.0).epsilon(1e-15));
  const double zz = 1.959963984540054 * 1.959963984540054;
  CHECK(z.ci_hi == doctest::Approx(zz / (100 + zz)));
  const auto h = wilson_interval(50, 100);
  CHECK(h.ci_lo < 0.5);
  CHECK(h.ci_hi > 0.5);
  CHECK((h.ci_lo + h.ci_hi) / 2 == doctest::Approx(0.5));
}

TEST_CASE("backtracking probabilities shrink with B") {
  const auto env = sample_environment(BetaLaw{5.0, 1.0}, -256, 1000, 2);
  const auto est = backtrack_probability(env, 1000, {0.5, 1.0, 2.0, 4.0}, 4000, 3);
  REQUIRE(est.size() == 4);
  for (std::size_t i = 1; i < est.size(); ++i) CHECK(est[i].hits <= est[i - 1].hits);
  CHECK(est[0].threshold == doctest::Approx(0.5 * std::log(1000.0)));
  const auto single = backtrack_probability(env, 1000, 2.0, 4000, 3);
  CHECK(single.hits == est[2].hits);
  CHECK(single.ci_hi >= single.estimate);
}

TEST_CASE("annealed sigma0 plug-in") {
  const auto hom = annealed_sigma0_estimate(Degenerate{2.0 / 3.0}, 10, 5, 1);
  CHECK(hom.estimate == doctest::Approx(24.0).epsilon(1e-10));
  CHECK(hom.var_mu0 == doctest::Approx(0.0).epsilon(1e-12));

  const auto k0 = annealed_sigma0_estimate(BetaLaw{5.0, 1.0}, 400, 0, 2);
  CHECK(k0.estimate == doctest::Approx(k0.mean_V0 + k0.var_mu0).epsilon(1e-12));
  CHECK(k0.lag_terms.empty());

  const auto a = annealed_sigma0_estimate(BetaLaw{5.0, 1.0}, 2000, 30, 3);
  const auto b = annealed_sigma0_estimate(BetaLaw{5.0, 1.0}, 2000, 60, 3);
  CHECK(a.lag_terms.size() == 30);
  CHECK(std::abs(a.estimate - b.estimate) < 4 * std::max(a.se, b.se));
  double sum = a.mean_V0 + a.var_mu0;
  for (double l : a.lag_terms) sum += l;
  CHECK(a.estimate == doctest::Approx(sum).epsilon(1e-10));
  CHECK_THROWS_AS(annealed_sigma0_estimate(BetaLaw{2.5, 1.0}, 10, 5, 1), RegimeError);
  CHECK_THROWS_AS(annealed_sigma0_estimate(BetaLaw{5.0, 1.0}, 1, 5, 1), ParameterError);
}

TEST_CASE("results do not depend on the thread count") {
  const auto env = sample_environment(BetaLaw{5.0, 1.0}, -64, 40, 7);
  const auto a = simulate_hitting_time(env, 40, 500, 11, kDefaultStepCap, 1);
  const auto b = simulate_hitting_time(env, 40, 500, 11, kDefaultStepCap, 4);
  CHECK(a.samples == b.samples);
  const auto p = simulate_position(env, 30, 500, 11, true, 1);
  const auto q = simulate_position(env, 30, 500, 11, true, 3);
  CHECK(p.samples == q.samples);
  CHECK(p.maxima == q.maxima);
  const auto c = simulate_hitting_time(env, 40, 500, 12, kDefaultStepCap, 1);
  CHECK(a.samples != c.samples);
}
