#include "rwre/mcsim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rwre/error.hpp"
#include "rwre/parallel.hpp"
#include "rwre/qmoments.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

constexpr double kTwo53 = 9007199254740992.0;

// Per-site acceptance thresholds: step right iff (bits >> 11) < thr. The left
// edge of the window always steps right.
std::vector<std::uint64_t> step_thresholds(const EnvironmentWindow& env) {
  std::vector<std::uint64_t> thr(static_cast<std::size_t>(env.size()));
  const Eigen::VectorXd& w = env.omega_values();
  for (std::size_t i = 0; i < thr.size(); ++i) {
    thr[i] = static_cast<std::uint64_t>(std::ldexp(w[static_cast<Eigen::Index>(i)], 53));
  }
  thr[0] = static_cast<std::uint64_t>(kTwo53);
  return thr;
}

void check_samples(std::int64_t n_samples) {
  if (n_samples < 1) throw ParameterError("n_samples must be >= 1");
}

struct PathEnd {
  std::int64_t position;
  std::int64_t maximum;
};

}  // namespace

std::string to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::hitting_time: return "hitting_time";
    case SampleKind::position: return "position";
    case SampleKind::backtrack: return "backtrack";
  }
  return "hitting_time";
}

double SimBatch::truncated_fraction() const {
  return samples.empty() ? 0.0 : static_cast<double>(truncated_count) / samples.size();
}

double SimBatch::mean() const {
  double s = 0.0;
  std::size_t n = 0;
  for (auto x : samples) {
    if (x == kTruncatedSample) continue;
    s += static_cast<double>(x);
    ++n;
  }
  return n ? s / n : 0.0;
}

double SimBatch::variance() const {
  const double m = mean();
  double s = 0.0;
  std::size_t n = 0;
  for (auto x : samples) {
    if (x == kTruncatedSample) continue;
    const double d = static_cast<double>(x) - m;
    s += d * d;
    ++n;
  }
  return n > 1 ? s / (n - 1) : 0.0;
}

SimBatch simulate_hitting_time(const EnvironmentWindow& env, std::int64_t k,
                               std::int64_t n_samples, std::uint64_t seed, std::int64_t cap,
                               unsigned threads) {
  check_samples(n_samples);
  if (k < 1) throw RangeError("simulate_hitting_time: k must be >= 1");
  if (!env.contains(0) || !env.contains(k - 1)) {
    throw RangeError("simulate_hitting_time: window must cover sites 0..k-1");
  }
  const std::vector<std::uint64_t> thr = step_thresholds(env);
  const std::int64_t origin = -env.left_index();
  const std::int64_t target = k - env.left_index();

  SimBatch batch;
  batch.kind = SampleKind::hitting_time;
  batch.param = k;
  batch.seed = seed;
  batch.cap = cap;
  batch.samples = parallel_map(
      static_cast<std::size_t>(n_samples),
      [&](std::size_t i) -> std::int64_t {
        std::mt19937_64 eng = path_engine(seed, i);
        std::int64_t x = origin;
        std::int64_t t = 0;
        while (x != target) {
          if (t == cap) return kTruncatedSample;
          x += ((eng() >> 11) < thr[static_cast<std::size_t>(x)]) ? 1 : -1;
          ++t;
        }
        return t;
      },
      threads);
  batch.truncated_count =
      std::count(batch.samples.begin(), batch.samples.end(), kTruncatedSample);
  return batch;
}

SimBatch simulate_position(const EnvironmentWindow& env, std::int64_t n, std::int64_t n_samples,
                           std::uint64_t seed, bool track_max, unsigned threads) {
  check_samples(n_samples);
  if (n < 0) throw ParameterError("simulate_position: n must be >= 0");
  if (!env.contains(0) || (n > 0 && !env.contains(n - 1))) {
    throw RangeError("simulate_position: window must cover sites 0..n-1");
  }
  const std::vector<std::uint64_t> thr = step_thresholds(env);
  const std::int64_t origin = -env.left_index();

  const std::vector<PathEnd> ends = parallel_map(
      static_cast<std::size_t>(n_samples),
      [&](std::size_t i) {
        std::mt19937_64 eng = path_engine(seed, i);
        std::int64_t x = origin;
        std::int64_t m = origin;
        for (std::int64_t t = 0; t < n; ++t) {
          x += ((eng() >> 11) < thr[static_cast<std::size_t>(x)]) ? 1 : -1;
          m = std::max(m, x);
        }
        return PathEnd{x - origin, m - origin};
      },
      threads);

  SimBatch batch;
  batch.kind = SampleKind::position;
  batch.param = n;
  batch.seed = seed;
  batch.cap = n;
  batch.samples.reserve(ends.size());
  for (const auto& e : ends) batch.samples.push_back(e.position);
  if (track_max) {
    batch.maxima.reserve(ends.size());
    for (const auto& e : ends) batch.maxima.push_back(e.maximum);
  }
  return batch;
}

ProportionEstimate wilson_interval(std::int64_t hits, std::int64_t trials, double z) {
  if (trials < 1) throw ParameterError("wilson_interval: trials must be >= 1");
  ProportionEstimate est;
  est.hits = hits;
  est.trials = trials;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  est.estimate = p;
  est.ci_lo = std::max(0.0, center - half);
  est.ci_hi = std::min(1.0, center + half);
  return est;
}

std::vector<ProportionEstimate> backtrack_probability(const EnvironmentWindow& env, std::int64_t n,
                                                      const std::vector<double>& B_grid,
                                                      std::int64_t n_samples, std::uint64_t seed,
                                                      unsigned threads) {
  if (n < 2) throw ParameterError("backtrack_probability: n must be >= 2");
  for (double B : B_grid) {
    if (!(B > 0.0)) throw ParameterError("backtrack_probability: B must be positive");
  }
  const SimBatch paths = simulate_position(env, n, n_samples, seed, true, threads);
  std::vector<std::int64_t> gaps(paths.size());
  for (std::size_t i = 0; i < gaps.size(); ++i) gaps[i] = paths.maxima[i] - paths.samples[i];

  std::vector<ProportionEstimate> out;
  out.reserve(B_grid.size());
  const double log_n = std::log(static_cast<double>(n));
  for (double B : B_grid) {
    const double threshold = B * log_n;
    const auto hits = std::count_if(gaps.begin(), gaps.end(),
                                    [&](std::int64_t g) { return static_cast<double>(g) >= threshold; });
    ProportionEstimate est = wilson_interval(hits, static_cast<std::int64_t>(gaps.size()));
    est.B = B;
    est.threshold = threshold;
    out.push_back(est);
  }
  return out;
}

ProportionEstimate backtrack_probability(const EnvironmentWindow& env, std::int64_t n, double B,
                                         std::int64_t n_samples, std::uint64_t seed,
                                         unsigned threads) {
  return backtrack_probability(env, n, std::vector<double>{B}, n_samples, seed, threads).front();
}

Sigma0Estimate annealed_sigma0_estimate(const EnvDistribution& dist, std::int64_t n_envs,
                                        std::int64_t series_cutoff, std::uint64_t seed,
                                        unsigned threads) {
  if (n_envs < 2) throw ParameterError("annealed_sigma0_estimate: need at least 2 environments");
  if (series_cutoff < 0) throw ParameterError("annealed_sigma0_estimate: K must be >= 0");
  law_constants(dist);  // regime guard
  const std::int64_t K = series_cutoff;

  struct Row {
    double V0;
    Eigen::VectorXd mu;  // mu_0..mu_K
  };
  const std::vector<Row> rows = parallel_map(
      static_cast<std::size_t>(n_envs),
      [&](std::size_t e) {
        const std::uint64_t env_seed = replicate_seed(seed, e);
        const EnvironmentWindow base = sample_environment(dist, 0, K, env_seed);
        const std::int64_t L = truncation_control(base).L;
        const EnvironmentWindow env = base.resized(-L, K);
        TableOptions opts;
        opts.estimate_truncation_error = false;
        const QuenchedMomentTable table(env, -L, opts);
        return Row{table.var(0), table.mu_values().tail(K + 1)};
      },
      threads);

  const auto N = static_cast<double>(n_envs);
  Eigen::VectorXd mbar = Eigen::VectorXd::Zero(K + 1);
  for (const auto& r : rows) mbar += r.mu;
  mbar /= N;

  Sigma0Estimate est;
  est.series_cutoff = K;
  est.n_envs = n_envs;
  est.lag_terms.assign(static_cast<std::size_t>(K), 0.0);
  std::vector<double> y(rows.size()), v0(rows.size()), d0(rows.size());
  for (std::size_t e = 0; e < rows.size(); ++e) {
    const Eigen::VectorXd d = rows[e].mu - mbar;
    double cross = 0.0;
    for (std::int64_t k = 1; k <= K; ++k) cross += d[0] * d[k];
    y[e] = rows[e].V0 + d[0] * d[0] + 2.0 * cross;
    v0[e] = rows[e].V0;
    d0[e] = d[0] * d[0];
  }
  for (std::int64_t k = 1; k <= K; ++k) {
    std::vector<double> c(rows.size());
    for (std::size_t e = 0; e < rows.size(); ++e) c[e] = (rows[e].mu[0] - mbar[0]) * (rows[e].mu[k] - mbar[k]);
    est.lag_terms[static_cast<std::size_t>(k - 1)] = 2.0 * pairwise_sum(c) / N;
  }
  est.mean_V0 = pairwise_sum(v0) / N;
  est.var_mu0 = pairwise_sum(d0) / N;
  est.estimate = pairwise_sum(y) / N;
  std::vector<double> sq(y.size());
  for (std::size_t e = 0; e < y.size(); ++e) sq[e] = (y[e] - est.estimate) * (y[e] - est.estimate);
  est.se = std::sqrt(pairwise_sum(sq) / (N - 1.0) / N);
  return est;
}

double dkw_epsilon(std::size_t n, double delta) {
  if (n == 0) throw ParameterError("dkw_epsilon: n must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("dkw_epsilon: delta must lie in (0,1)");
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

EcdfDistance ecdf_distance(const std::vector<std::int64_t>& samples,
                           const std::function<double(double)>& ref, double delta) {
  if (samples.empty()) throw ParameterError("ecdf_distance: empty sample");
  std::vector<std::int64_t> s = samples;
  std::sort(s.begin(), s.end());
  const double N = static_cast<double>(s.size());
  EcdfDistance out;
  out.n = s.size();
  out.dkw_epsilon = dkw_epsilon(s.size(), delta);
  std::size_t i = 0;
  while (i < s.size() && s[i] != kTruncatedSample) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const double x = static_cast<double>(s[i]);
    const double left = std::abs(static_cast<double>(i) / N - ref(std::nextafter(x, -kInf)));
    const double right = std::abs(static_cast<double>(j) / N - ref(x));
    const double d = std::max(left, right);
    if (d > out.distance) {
      out.distance = d;
      out.arg_sup = x;
    }
    i = j;
  }
  out.within_band = out.distance <= out.dkw_epsilon;
  return out;
}

EcdfDistance ecdf_distance(const std::vector<std::int64_t>& samples, const LatticeCdf& ref,
                           double delta) {
  if (samples.empty()) throw ParameterError("ecdf_distance: empty sample");
  std::vector<std::int64_t> atoms = samples;
  atoms.erase(std::remove(atoms.begin(), atoms.end(), kTruncatedSample), atoms.end());
  for (Eigen::Index a = 0; a < ref.atoms(); ++a) atoms.push_back(ref.value(a));
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());

  std::vector<std::int64_t> s = samples;
  std::sort(s.begin(), s.end());
  const Eigen::VectorXd ref_cdf = ref.cdf_values();
  const double N = static_cast<double>(s.size());

  EcdfDistance out;
  out.n = s.size();
  out.dkw_epsilon = dkw_epsilon(s.size(), delta);
  std::size_t si = 0;
  Eigen::Index ri = 0;
  double prev_gap = 0.0;  // |ECDF - ref| just left of the current atom
  for (std::int64_t x : atoms) {
    while (si < s.size() && s[si] <= x) ++si;
    while (ri < ref.atoms() && ref.value(ri) <= x) ++ri;
    const double F = ri > 0 ? ref_cdf[ri - 1] : 0.0;
    const double gap = std::abs(static_cast<double>(si) / N - F);
    const double d = std::max(prev_gap, gap);
    if (d > out.distance) {
      out.distance = d;
      out.arg_sup = static_cast<double>(x);
    }
    prev_gap = gap;
  }
  out.within_band = out.distance <= out.dkw_epsilon;
  return out;
}

}  // namespace rwre
