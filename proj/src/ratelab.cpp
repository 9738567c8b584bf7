#include "rwre/ratelab.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cctype>
#include <cmath>

#include "rwre/error.hpp"
#include "rwre/parallel.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

double inv_kappa(double kappa) { return std::isinf(kappa) ? 0.0 : 1.0 / kappa; }

TableOptions fast_table() {
  TableOptions opts;
  opts.estimate_truncation_error = false;
  return opts;
}

bool last_below_first(const std::vector<double>& v) { return v.size() >= 2 && v.back() < v.front(); }

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t i) {
  std::vector<double> c;
  c.reserve(rows.size());
  for (const auto& r : rows) c.push_back(r[i]);
  return c;
}

void check_grid(const std::vector<std::int64_t>& n_grid, std::int64_t n_envs) {
  if (n_grid.empty()) throw ConfigError("n_grid is empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) throw ConfigError("n_grid entries must be >= 1");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ConfigError("n_grid must be strictly increasing");
  }
  if (n_envs < 1) throw ConfigError("n_envs must be >= 1");
}

}  // namespace

EnvContext make_context(const EnvDistribution& dist, std::uint64_t seed, std::int64_t right,
                        double trunc_tol, double reflect_tol) {
  if (right < 1) throw ParameterError("make_context: right edge must be >= 1");
  const EnvironmentWindow base = sample_environment(dist, 0, right, seed);
  const std::int64_t L =
      std::max(truncation_control(base, trunc_tol).L, certify_reflection(dist, seed, right, reflect_tol));
  EnvironmentWindow env = base.resized(-L, right);
  QuenchedMomentTable table(env, -L, fast_table());
  return EnvContext{seed, L, std::move(env), std::move(table)};
}

std::string to_string(RateTarget t) {
  switch (t) {
    case RateTarget::Fbar: return "Fbar";
    case RateTarget::F: return "F";
    case RateTarget::G: return "G";
  }
  return "Fbar";
}

RateTarget parse_rate_target(const std::string& s) {
  std::string t;
  for (char c : s) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "fbar") return RateTarget::Fbar;
  if (t == "f") return RateTarget::F;
  if (t == "g") return RateTarget::G;
  throw ConfigError("unknown target '" + s + "' (expected fbar, f or g)");
}

void validate(const RateExperimentConfig& cfg) {
  check_grid(cfg.n_grid, cfg.n_envs);
  if (cfg.n_grid.size() < 4) throw ConfigError("n_grid needs at least 4 points");
  if (!(cfg.epsilon > 0.0) || !(cfg.epsilon_prime > 0.0)) {
    throw ConfigError("epsilon and epsilon_prime must be positive");
  }
  validate(cfg.dist);
}

std::vector<std::int64_t> dyadic_grid(int lo, int hi) {
  if (lo < 0 || hi < lo || hi > 40) throw ConfigError("dyadic grid exponents out of range");
  std::vector<std::int64_t> g;
  for (int e = lo; e <= hi; ++e) g.push_back(std::int64_t{1} << e);
  return g;
}

LineFit loglog_fit(const std::vector<std::int64_t>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ParameterError("loglog_fit: need >= 2 paired points");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(y[i] > 0.0)) throw NumericError("loglog_fit: nonpositive value");
    A(i, 0) = 1.0;
    A(i, 1) = std::log(static_cast<double>(x[i]));
    b[i] = std::log(y[i]);
  }
  const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
  return {c[1], c[0]};
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ParameterError("quantile of empty data");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(i);
  return v[i] + frac * (v[i + 1] - v[i]);
}

TheoryRate theory_rate(RateTarget target, double kappa) {
  const double ik = inv_kappa(kappa);
  switch (target) {
    case RateTarget::Fbar:
      if (kappa > 3.0) return {0.5, true, "n^-1/2"};
      return {1.5 - 3.0 * ik, false, "n^-(3/2-3/kappa)"};
    case RateTarget::F:
      if (kappa > 4.0) return {0.5, true, "n^-1/2"};
      return {1.0 - 2.0 * ik, false, "n^-(1-2/kappa)"};
    case RateTarget::G:
      if (kappa >= 12.0 / 5.0) return {0.25, false, "n^-1/4 in probability"};
      return {1.5 - 3.0 * ik, false, "n^-(3/2-3/kappa) in probability"};
  }
  return {};
}

KolmogorovReport target_distance(const EnvContext& ctx, RateTarget target, std::int64_t n,
                                 const LawConstants& law, double tail_tol) {
  switch (target) {
    case RateTarget::Fbar:
      return kolmogorov_distance_T(ctx.env, ctx.table, n, Normalization::quenched_scaling, law, tail_tol);
    case RateTarget::F:
      return kolmogorov_distance_T(ctx.env, ctx.table, n, Normalization::deterministic_scaling, law,
                                   tail_tol);
    case RateTarget::G: return kolmogorov_distance_X(ctx.env, ctx.table, n, law, tail_tol);
  }
  throw ParameterError("unknown target");
}

bool envelope_holds(const std::vector<std::int64_t>& n_grid, const std::vector<double>& d,
                    double e, double* C) {
  if (n_grid.size() != d.size() || d.empty()) throw ParameterError("envelope_holds: size mismatch");
  const double c = d[0] * std::pow(static_cast<double>(n_grid[0]), e);
  if (C) *C = c;
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (d[i] > c * std::pow(static_cast<double>(n_grid[i]), -e)) return false;
  }
  return true;
}

RateExperimentResult rate_experiment(const RateExperimentConfig& cfg) {
  validate(cfg);
  RateExperimentResult res;
  res.config = cfg;
  res.regime = regime_report(cfg.dist);
  if (!(res.regime.kappa > 2.0)) {
    throw RegimeError("rate experiments need kappa > 2 (kappa = " + std::to_string(res.regime.kappa) + ")");
  }
  const LawConstants law = law_constants(cfg.dist);
  res.theory = theory_rate(cfg.target, res.regime.kappa);
  res.envelope_exponent = res.theory.exponent - cfg.tol.envelope_slack;
  const std::int64_t n_max = cfg.n_grid.back();

  res.replicates = parallel_map(
      static_cast<std::size_t>(cfg.n_envs),
      [&](std::size_t r) {
        ReplicateFit fit;
        fit.seed = replicate_seed(cfg.master_seed, r);
        const EnvContext ctx = make_context(cfg.dist, fit.seed, n_max, cfg.tol.trunc_tol, cfg.tol.reflect_tol);
        for (std::int64_t n : cfg.n_grid) {
          const KolmogorovReport rep = target_distance(ctx, cfg.target, n, law, cfg.tol.tail_tol);
          fit.distances.push_back(rep.distance);
          fit.tail_bounds.push_back(rep.tail_mass_bound);
        }
        fit.fit = loglog_fit(cfg.n_grid, fit.distances);
        fit.envelope_pass = envelope_holds(cfg.n_grid, fit.distances, res.envelope_exponent, &fit.envelope_C);
        return fit;
      },
      cfg.threads);

  std::vector<double> slopes;
  std::int64_t passes = 0;
  for (const auto& f : res.replicates) {
    slopes.push_back(f.fit.slope);
    passes += f.envelope_pass ? 1 : 0;
  }
  res.median_slope = quantile(slopes, 0.5);
  res.slope_iqr = quantile(slopes, 0.75) - quantile(slopes, 0.25);
  res.envelope_pass_fraction = static_cast<double>(passes) / static_cast<double>(cfg.n_envs);
  res.slope_in_band = std::abs(res.median_slope + res.theory.exponent) <= cfg.tol.slope_band;
  res.envelope_ok = res.envelope_pass_fraction >= cfg.tol.envelope_pass_fraction;
  res.passed = res.theory.two_sided ? res.slope_in_band : res.envelope_ok;
  return res;
}

// ---------------------------------------------------------------------------

double MartingaleCheckReport::max_residual() const {
  return std::max({residual_M, residual_L, residual_H});
}

double identity_residual(double a, double b) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / scale;
}

MartingaleCheckReport martingale_identity_check(const QuenchedMomentTable& table,
                                                const LawConstants& law, double kappa,
                                                const std::vector<std::int64_t>& n_grid,
                                                double epsilon) {
  check_grid(n_grid, 1);
  if (table.trunc_left() > -2) {
    throw RangeError("martingale_identity_check: table must reach site -1 past the reflection");
  }
  const std::int64_t n_last = n_grid.back();
  if (n_last > table.n_max()) throw RangeError("martingale_identity_check: n beyond table range");

  const double r1 = law.r1, r2 = law.r2, s = r1 + r2;
  const double v = law.speed, sigma2 = law.sigma2, Emu2 = law.mu0_sq_mean;
  const double mu_m1 = table.mu(-1), V_m1 = table.var(-1);

  MartingaleCheckReport rep;
  rep.n_grid = n_grid;
  double M = 0.0, L = 0.0, H = 0.0;
  double sum_mu2 = 0.0;  // sum_{k<n} (mu_k^2 - E mu^2)
  double Wm = 0.0, Wl = 0.0, Wh = 0.0;
  const double pM = 1.0 / std::min(std::isinf(kappa) ? 2.0 : kappa, 2.0) + epsilon;
  const double half = std::isinf(kappa) ? kInf : kappa / 2.0;
  const double pLH = 1.0 / std::min(half, 2.0) + epsilon;

  std::size_t gi = 0;
  double prev_mu = mu_m1, prev_V = V_m1;
  for (std::int64_t k = 0; k < n_last; ++k) {
    const double mu = table.mu(k), V = table.var(k);
    M += mu - 1.0 - r1 - r1 * prev_mu;
    L += V - s * (1.0 + prev_mu) * (1.0 + prev_mu) - r1 * prev_V;
    H += mu * mu - 1.0 - 2.0 * r1 - r2 - 2.0 * s * prev_mu - r2 * prev_mu * prev_mu;
    sum_mu2 += mu * mu - Emu2;
    Wm = std::max(Wm, std::abs(M));
    Wl = std::max(Wl, std::abs(L));
    Wh = std::max(Wh, std::abs(H));
    prev_mu = mu;
    prev_V = V;

    const std::int64_t n = k + 1;
    if (gi < n_grid.size() && n == n_grid[gi]) {
      const double dn = static_cast<double>(n);
      const double ET = table.mean_T(n), VT = table.var_T(n);
      const double mu_last = mu, V_last = V;
      MartingaleValues val;
      val.n = n;

      const double m_a = (1.0 - r1) * (ET - dn / v), m_b = r1 * (mu_last - mu_m1);
      val.M_sum = M;
      val.M_closed = m_a + m_b;

      const double l_a = (1.0 - r1) * (VT - sigma2 * dn);
      const double l_b = -s * (2.0 * (ET - dn / v) + sum_mu2);
      const double l_c = s * (2.0 * mu_last + mu_last * mu_last - 2.0 * mu_m1 - mu_m1 * mu_m1);
      const double l_d = r1 * (V_last - V_m1);
      val.L_sum = L;
      val.L_closed = l_a + l_b + l_c + l_d;

      const double h_a = (1.0 - r2) * sum_mu2;
      const double h_b = -2.0 * s * (ET - dn / v);
      const double h_c = 2.0 * s * (mu_last - mu_m1) + r2 * (mu_last * mu_last - mu_m1 * mu_m1);
      val.H_sum = H;
      val.H_closed = h_a + h_b + h_c;

      rep.residual_M = std::max(rep.residual_M, identity_residual(val.M_sum, val.M_closed));
      rep.residual_L = std::max(rep.residual_L, identity_residual(val.L_sum, val.L_closed));
      rep.residual_H = std::max(rep.residual_H, identity_residual(val.H_sum, val.H_closed));

      rep.normalized_W_M = std::max(rep.normalized_W_M, Wm / std::pow(dn, pM));
      rep.normalized_W_L = std::max(rep.normalized_W_L, Wl / std::pow(dn, pLH));
      rep.normalized_W_H = std::max(rep.normalized_W_H, Wh / std::pow(dn, pLH));
      rep.values.push_back(val);
      ++gi;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------

std::pair<std::int64_t, std::int64_t> fluctuation_window(std::int64_t n, double speed, double epsilon) {
  const double dn = static_cast<double>(n);
  const double half = std::pow(dn, 0.5 + epsilon);
  const double lo = dn * speed - half, hi = dn * speed + half;
  if (lo < 0.0) {
    throw ConfigError("fluctuation window for n = " + std::to_string(n) +
                      " starts below 0; use larger n or smaller epsilon");
  }
  return {static_cast<std::int64_t>(std::ceil(lo)), static_cast<std::int64_t>(std::floor(hi))};
}

namespace {

FluctuationResult summarize(FluctuationResult res) {
  const std::size_t m = res.n_grid.size();
  for (std::size_t i = 0; i < m; ++i) {
    res.median_normalized.push_back(quantile(column(res.normalized, i), 0.5));
    if (!res.normalized_as.empty()) res.median_normalized_as.push_back(quantile(column(res.normalized_as, i), 0.5));
  }
  for (const auto& r : res.normalized) res.replicate_decreasing.push_back(last_below_first(r));
  res.median_decreasing = last_below_first(res.median_normalized);
  res.median_as_decreasing = last_below_first(res.median_normalized_as);
  return res;
}

}  // namespace

FluctuationResult mean_fluctuation_experiment(const EnvDistribution& dist,
                                              const std::vector<std::int64_t>& n_grid,
                                              double epsilon, double epsilon_prime,
                                              std::int64_t n_envs, std::uint64_t seed,
                                              unsigned threads) {
  check_grid(n_grid, n_envs);
  const double kappa = solve_kappa(dist);
  const LawConstants law = law_constants(dist);
  const double ik = inv_kappa(kappa);
  std::int64_t right = 1;
  for (std::int64_t n : n_grid) right = std::max(right, fluctuation_window(n, law.speed, epsilon).second);

  struct Row {
    std::vector<double> raw, ip, as;
  };
  const std::vector<Row> rows = parallel_map(
      static_cast<std::size_t>(n_envs),
      [&](std::size_t r) {
        const std::uint64_t s = replicate_seed(seed, r);
        const EnvironmentWindow base = sample_environment(dist, 0, right, s);
        const std::int64_t L = truncation_control(base).L;
        const QuenchedMomentTable table(base.resized(-L, right), -L, fast_table());
        Row row;
        for (std::int64_t n : n_grid) {
          const auto [lo, hi] = fluctuation_window(n, law.speed, epsilon);
          double dmax = -kInf, dmin = kInf;
          for (std::int64_t k = lo; k <= hi; ++k) {
            const double d = table.mean_T(k) - static_cast<double>(k) * law.inv_speed;
            dmax = std::max(dmax, d);
            dmin = std::min(dmin, d);
          }
          const double stat = dmax - dmin;
          const double dn = static_cast<double>(n);
          row.raw.push_back(stat);
          row.ip.push_back(stat / std::pow(dn, 0.25 + epsilon / 2.0 + epsilon_prime));
          row.as.push_back(stat / std::pow(dn, 0.25 + ik / 2.0 + epsilon * (0.5 - ik) + epsilon_prime));
        }
        return row;
      },
      threads);

  FluctuationResult res;
  res.n_grid = n_grid;
  for (std::int64_t r = 0; r < n_envs; ++r) res.seeds.push_back(replicate_seed(seed, r));
  for (const auto& row : rows) {
    res.raw.push_back(row.raw);
    res.normalized.push_back(row.ip);
    res.normalized_as.push_back(row.as);
  }
  return summarize(std::move(res));
}

FluctuationResult variance_fluctuation_experiment(const EnvDistribution& dist,
                                                  const std::vector<std::int64_t>& n_grid,
                                                  double epsilon, std::int64_t n_envs,
                                                  std::uint64_t seed, unsigned threads) {
  check_grid(n_grid, n_envs);
  const double kappa = solve_kappa(dist);
  const LawConstants law = law_constants(dist);
  const double expo = 2.0 / std::min(4.0, kappa) + epsilon;
  const std::int64_t right = n_grid.back();

  struct Row {
    std::vector<double> raw, norm;
  };
  const std::vector<Row> rows = parallel_map(
      static_cast<std::size_t>(n_envs),
      [&](std::size_t r) {
        const std::uint64_t s = replicate_seed(seed, r);
        const EnvironmentWindow base = sample_environment(dist, 0, right, s);
        const std::int64_t L = truncation_control(base).L;
        const QuenchedMomentTable table(base.resized(-L, right), -L, fast_table());
        Row row;
        for (std::int64_t n : n_grid) {
          const double dn = static_cast<double>(n);
          const double stat = std::abs(table.var_T(n) - law.sigma2 * dn);
          row.raw.push_back(stat);
          row.norm.push_back(stat / std::pow(dn, expo));
        }
        return row;
      },
      threads);

  FluctuationResult res;
  res.n_grid = n_grid;
  for (std::int64_t r = 0; r < n_envs; ++r) res.seeds.push_back(replicate_seed(seed, r));
  for (const auto& row : rows) {
    res.raw.push_back(row.raw);
    res.normalized.push_back(row.norm);
  }
  return summarize(std::move(res));
}

// ---------------------------------------------------------------------------

double third_abs_central_moment(const EnvironmentWindow& env, const QuenchedMomentTable& table,
                                std::int64_t k) {
  const double mu = table.mu(k), m2 = table.m2(k), m3 = table.m3(k);
  const double central3 = m3 - 3.0 * mu * m2 + 2.0 * mu * mu * mu;
  if (k == table.trunc_left()) return 0.0;  // deterministic crossing
  // E|X|^3 = E[X^3] + 2 E[(-X)^3; X < 0] with X = tau - mu.
  FirstPassagePropagator prop(env, k, k + 1, table.trunc_left());
  const auto t_max = static_cast<std::int64_t>(std::ceil(mu)) - 1;
  double below = 0.0;
  if (t_max >= 1) {
    prop.advance_to(t_max);
    const LatticeCdf law = prop.result();
    for (Eigen::Index i = 0; i < law.atoms(); ++i) {
      const double t = static_cast<double>(law.value(i));
      if (t >= mu) break;
      const double d = mu - t;
      below += d * d * d * law.probs[i];
    }
  }
  return std::max(central3 + 2.0 * below, 0.0);
}

BerryEsseenReport berry_esseen_bound_eval(const EnvironmentWindow& env,
                                          const QuenchedMomentTable& table, std::int64_t n,
                                          double A1, double tail_tol) {
  if (n < 1 || n > table.n_max()) throw RangeError("berry_esseen_bound_eval: n out of table range");
  if (!(A1 > 0.0)) throw ParameterError("berry_esseen_bound_eval: A1 must be positive");
  BerryEsseenReport rep;
  rep.n = n;
  std::vector<double> terms(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) terms[static_cast<std::size_t>(k)] = third_abs_central_moment(env, table, k);
  rep.third_abs_sum = pairwise_sum(terms);
  rep.var_Tn = table.var_T(n);
  rep.bound = A1 * rep.third_abs_sum / std::pow(rep.var_Tn, 1.5);
  const LawConstants unused{};
  const KolmogorovReport k =
      kolmogorov_distance_T(env, table, n, Normalization::quenched_scaling, unused, tail_tol);
  rep.distance = k.distance;
  rep.tail_mass_bound = k.tail_mass_bound;
  rep.holds = rep.distance <= rep.bound + rep.tail_mass_bound;
  return rep;
}

TransferReport transfer_check(const EnvironmentWindow& env, const QuenchedMomentTable& table,
                              const LawConstants& law, std::int64_t n,
                              const std::vector<double>& x_grid) {
  if (n < 1) throw ParameterError("transfer_check: n must be >= 1");
  TransferReport rep;
  rep.n = n;
  const double v = law.speed;
  const double zn = centering_Zn(table, n, v);
  const double scale = std::sqrt(law.sigma2) * std::pow(v, 1.5) * std::sqrt(static_cast<double>(n));
  const Eigen::VectorXd below = running_max_direct(env, n, table.trunc_left());

  for (double x : x_grid) {
    TransferPoint p;
    p.x = x;
    p.k = static_cast<std::int64_t>(std::ceil(static_cast<double>(n) * v - zn + x * scale));
    if (p.k < 1) {
      p.skipped = true;
      ++rep.skipped;
      rep.points.push_back(p);
      continue;
    }
    p.G_star = p.k < below.size() ? below[static_cast<Eigen::Index>(p.k)] : 1.0;
    if (p.k > n) {
      p.survival = 1.0;
    } else {
      const LatticeCdf law_k = first_passage_cdf(env, p.k, n, table.trunc_left());
      p.survival = clamp_probability(1.0 - law_k.cdf(n));
    }
    p.residual = std::abs(p.G_star - p.survival);
    rep.max_residual = std::max(rep.max_residual, p.residual);
    rep.points.push_back(p);
  }
  return rep;
}

std::vector<double> linear_grid(double lo, double hi, int n_points) {
  if (n_points < 2) throw ParameterError("linear_grid: need >= 2 points");
  std::vector<double> g(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n_points - 1);
  return g;
}

}  // namespace rwre
