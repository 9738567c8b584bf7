#include "rwre/exactdist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rwre/error.hpp"

namespace rwre {

namespace {

using Eigen::ArrayXd;
using Eigen::Index;

// Moves the mass of cur on [a, b] one step into next, which must already be
// zero on [max(a-1, 0), min(b+1, last)]. State 0 is reflecting (q[0] = 0).
// Returns the mass that steps right out of state `last`.
double step_band(const ArrayXd& cur, ArrayXd& next, const ArrayXd& w, const ArrayXd& q, Index a,
                 Index b, Index last) {
  const Index len = b - a + 1;
  double escaped = 0.0;
  if (b < last) {
    next.segment(a + 1, len) += cur.segment(a, len) * w.segment(a, len);
  } else {
    if (len > 1) next.segment(a + 1, len - 1) += cur.segment(a, len - 1) * w.segment(a, len - 1);
    escaped = cur[b] * w[b];
  }
  if (a >= 1) {
    next.segment(a - 1, len) += cur.segment(a, len) * q.segment(a, len);
  } else if (len > 1) {
    next.segment(0, len - 1) += cur.segment(1, len - 1) * q.segment(1, len - 1);
  }
  return escaped;
}

// Per-state step probabilities for sites trunc_left .. trunc_left + count - 1,
// with the reflection forced at the first state.
void load_steps(const EnvironmentWindow& env, std::int64_t trunc_left, Index count,
                std::int64_t last_site_needed, ArrayXd& w, ArrayXd& q) {
  if (!env.contains(trunc_left) || !env.contains(last_site_needed)) {
    throw RangeError("environment window [" + std::to_string(env.left_index()) + ", " +
                     std::to_string(env.right_index()) + "] does not cover sites [" +
                     std::to_string(trunc_left) + ", " + std::to_string(last_site_needed) + "]");
  }
  w.setOnes(count);
  const Index avail = std::min<Index>(count, static_cast<Index>(env.right_index() - trunc_left + 1));
  w.head(avail) = env.omega_values().segment(static_cast<Index>(trunc_left - env.left_index()), avail).array();
  w[0] = 1.0;
  q = 1.0 - w;
}

std::int64_t round_up_to_parity(std::int64_t t, std::int64_t parity_ref) {
  if (((t - parity_ref) % 2 + 2) % 2 != 0) ++t;
  return t;
}

double log_sum_exp_step(double acc, double x) {
  if (acc == -std::numeric_limits<double>::infinity()) return x;
  const double m = std::max(acc, x);
  return m + std::log(std::exp(acc - m) + std::exp(x - m));
}

}  // namespace

std::string to_string(LatticeKind kind) {
  switch (kind) {
    case LatticeKind::hitting_time: return "hitting_time";
    case LatticeKind::position: return "position";
    case LatticeKind::running_max: return "running_max";
  }
  return "hitting_time";
}

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::quenched_scaling: return "quenched_scaling";
    case Normalization::deterministic_scaling: return "deterministic_scaling";
    case Normalization::position: return "position";
  }
  return "quenched_scaling";
}

double clamp_probability(double p) {
  if (p < -kNegativeClamp) {
    throw NumericError("negative probability " + std::to_string(p) + " beyond roundoff");
  }
  return std::max(p, 0.0);
}

double LatticeCdf::cdf(std::int64_t x) const {
  if (probs.size() == 0 || x < support_offset) return 0.0;
  const std::int64_t last = (x - support_offset) / step;
  const Index n = std::min<Index>(static_cast<Index>(last) + 1, probs.size());
  return probs.head(n).sum();
}

Eigen::VectorXd LatticeCdf::cdf_values() const {
  Eigen::VectorXd out(probs.size());
  double acc = 0.0;
  for (Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    out[i] = acc;
  }
  return out;
}

double LatticeCdf::mean() const {
  double m = 0.0;
  for (Index i = 0; i < probs.size(); ++i) m += probs[i] * static_cast<double>(value(i));
  return m / probs.sum();
}

double LatticeCdf::variance() const {
  const double m = mean();
  double v = 0.0;
  for (Index i = 0; i < probs.size(); ++i) {
    const double d = static_cast<double>(value(i)) - m;
    v += probs[i] * d * d;
  }
  return v / probs.sum();
}

// ---------------------------------------------------------------------------
// First passage
// ---------------------------------------------------------------------------

FirstPassagePropagator::FirstPassagePropagator(const EnvironmentWindow& env, std::int64_t start,
                                               std::int64_t target, std::int64_t trunc_left,
                                               double prune)
    : start_(start), target_(target), trunc_left_(trunc_left), prune_(prune) {
  if (target <= start) throw ParameterError("first passage: target must lie right of start");
  if (start < trunc_left) throw RangeError("first passage: start left of the reflecting site");
  const auto states = static_cast<Index>(target - trunc_left);
  load_steps(env, trunc_left, states, target - 1, w_, q_);
  cur_.setZero(states);
  next_.setZero(states);
  lo_ = hi_ = static_cast<Index>(start - trunc_left);
  cur_[lo_] = 1.0;
  next_dirty_lo_ = 1;
  next_dirty_hi_ = 0;
  hits_.push_back(0.0);
}

void FirstPassagePropagator::advance_to(std::int64_t t) {
  const Index last = cur_.size() - 1;
  hits_.reserve(static_cast<std::size_t>(std::max<std::int64_t>(t + 1, 0)));
  while (time_ < t) {
    if (next_dirty_lo_ <= next_dirty_hi_) {
      next_.segment(next_dirty_lo_, next_dirty_hi_ - next_dirty_lo_ + 1).setZero();
    }
    const double absorbed = step_band(cur_, next_, w_, q_, lo_, hi_, last);
    Index nlo = std::max<Index>(lo_ - 1, 0);
    const Index nhi = std::min<Index>(hi_ + 1, last);
    while (nlo + 1 < nhi && next_[nlo] < prune_ && next_[nlo + 1] < prune_) {
      pruned_ += next_[nlo];
      next_[nlo] = 0.0;
      ++nlo;
    }
    next_dirty_lo_ = lo_;
    next_dirty_hi_ = hi_;
    cur_.swap(next_);
    lo_ = nlo;
    hi_ = nhi;
    ++time_;
    hits_.push_back(absorbed);
  }
}

double FirstPassagePropagator::survival() const {
  return cur_.segment(lo_, hi_ - lo_ + 1).sum() + pruned_;
}

LatticeCdf FirstPassagePropagator::result() const {
  LatticeCdf out;
  out.kind = LatticeKind::hitting_time;
  out.step = 2;
  out.support_offset = target_ - start_;
  const std::int64_t count =
      time_ >= out.support_offset ? (time_ - out.support_offset) / 2 + 1 : 0;
  out.probs.resize(static_cast<Index>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    out.probs[static_cast<Index>(i)] = hits_[static_cast<std::size_t>(out.support_offset + 2 * i)];
  }
  out.tail_mass = survival();
  return out;
}

LatticeCdf first_passage_cdf(const EnvironmentWindow& env, std::int64_t k, std::int64_t t_max,
                             std::int64_t trunc_left) {
  if (k < 1) throw RangeError("first_passage_cdf: target site must be >= 1");
  if (t_max < k) throw ParameterError("first_passage_cdf: t_max must be >= k");
  FirstPassagePropagator prop(env, 0, k, trunc_left);
  prop.advance_to(t_max);
  return prop.result();
}

LatticeCdf first_passage_auto(const EnvironmentWindow& env, const QuenchedMomentTable& table,
                              std::int64_t k, double tail_tol, std::int64_t max_steps) {
  if (k < 1) throw RangeError("first_passage_auto: target site must be >= 1");
  const double mean = table.mean_T(k);
  const double sd = std::sqrt(table.var_T(k));
  std::int64_t t = round_up_to_parity(static_cast<std::int64_t>(std::ceil(mean + 12.0 * sd)), k);
  t = std::min(std::max(t, k), std::max(max_steps, k));
  FirstPassagePropagator prop(env, 0, k, table.trunc_left());
  for (;;) {
    prop.advance_to(t);
    if (prop.survival() < tail_tol) return prop.result();
    if (t >= max_steps) {
      throw HorizonError("first passage to " + std::to_string(k) + ": tail mass " +
                         std::to_string(prop.survival()) + " above tolerance at step cap");
    }
    t = std::min(round_up_to_parity(2 * t, k), max_steps);
  }
}

LatticeCdf crossing_time_pmf(const EnvironmentWindow& env, std::int64_t k, std::int64_t trunc_left,
                             double tail_tol, std::int64_t max_steps) {
  FirstPassagePropagator prop(env, k, k + 1, trunc_left);
  std::int64_t t = 63;
  for (;;) {
    prop.advance_to(t);
    if (prop.survival() < tail_tol) return prop.result();
    t = 2 * t + 1;
    if (t > max_steps) {
      throw HorizonError("crossing time at site " + std::to_string(k) +
                         ": tail mass above tolerance at step cap");
    }
  }
}

// ---------------------------------------------------------------------------
// Position and running maximum
// ---------------------------------------------------------------------------

PositionLaw position_pmf(const EnvironmentWindow& env, std::int64_t n, std::int64_t trunc_left,
                         double prune) {
  if (n < 0) throw ParameterError("position_pmf: n must be nonnegative");
  if (trunc_left > 0) throw RangeError("position_pmf: reflecting site must be <= 0");
  PositionLaw law;
  law.cdf.kind = LatticeKind::position;
  law.cdf.step = 2;
  if (n == 0) {
    law.cdf.support_offset = 0;
    law.cdf.probs = Eigen::VectorXd::Ones(1);
    return law;
  }
  const auto states = static_cast<Index>(n - trunc_left + 1);  // sites trunc_left..n
  ArrayXd w, q;
  load_steps(env, trunc_left, states, std::max<std::int64_t>(n - 1, trunc_left), w, q);
  const Index last = states - 1;

  ArrayXd cur = ArrayXd::Zero(states), next = ArrayXd::Zero(states);
  Index lo = static_cast<Index>(-trunc_left), hi = lo;
  Index dirty_lo = 1, dirty_hi = 0;
  cur[lo] = 1.0;
  double pruned = 0.0;
  for (std::int64_t t = 0; t < n; ++t) {
    if (lo == 0) law.boundary_contamination += cur[0];
    if (dirty_lo <= dirty_hi) next.segment(dirty_lo, dirty_hi - dirty_lo + 1).setZero();
    step_band(cur, next, w, q, lo, hi, last);
    Index nlo = std::max<Index>(lo - 1, 0);
    Index nhi = std::min<Index>(hi + 1, last);
    while (nlo + 1 < nhi && next[nlo] < prune && next[nlo + 1] < prune) {
      pruned += next[nlo];
      next[nlo++] = 0.0;
    }
    while (nhi - 1 > nlo && next[nhi] < prune && next[nhi - 1] < prune) {
      pruned += next[nhi];
      next[nhi--] = 0.0;
    }
    dirty_lo = lo;
    dirty_hi = hi;
    cur.swap(next);
    lo = nlo;
    hi = nhi;
  }

  // Keep only sites of the parity of n.
  std::int64_t first = trunc_left + lo;
  if (((first - n) % 2 + 2) % 2 != 0) ++first;
  const std::int64_t last_site = trunc_left + hi;
  const std::int64_t count = first <= last_site ? (last_site - first) / 2 + 1 : 0;
  law.cdf.support_offset = first;
  law.cdf.probs.resize(static_cast<Index>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    law.cdf.probs[static_cast<Index>(i)] = cur[static_cast<Index>(first + 2 * i - trunc_left)];
  }
  law.cdf.tail_mass = pruned;
  return law;
}

Eigen::VectorXd running_max_below(const EnvironmentWindow& env, std::int64_t n, std::int64_t k_max,
                                  std::int64_t trunc_left) {
  if (n < 0 || k_max < 0) throw ParameterError("running_max_below: n and k_max must be >= 0");
  Eigen::VectorXd below(static_cast<Index>(k_max + 1));
  below[0] = 0.0;
  for (std::int64_t k = 1; k <= k_max; ++k) {
    if (k > n) {
      below[static_cast<Index>(k)] = 1.0;
      continue;
    }
    const LatticeCdf law = first_passage_cdf(env, k, n, trunc_left);
    below[static_cast<Index>(k)] = clamp_probability(1.0 - law.cdf(n));
  }
  return below;
}

LatticeCdf running_max_cdf(const EnvironmentWindow& env, std::int64_t n, std::int64_t k_max,
                           std::int64_t trunc_left) {
  const Eigen::VectorXd below = running_max_below(env, n, k_max, trunc_left);
  LatticeCdf out;
  out.kind = LatticeKind::running_max;
  out.step = 1;
  out.support_offset = 0;
  out.probs.resize(static_cast<Index>(k_max));
  for (Index j = 0; j < k_max; ++j) out.probs[j] = clamp_probability(below[j + 1] - below[j]);
  out.tail_mass = clamp_probability(1.0 - below[static_cast<Index>(k_max)]);
  return out;
}

Eigen::VectorXd running_max_direct(const EnvironmentWindow& env, std::int64_t n,
                                   std::int64_t trunc_left, double prune) {
  if (n < 0) throw ParameterError("running_max_direct: n must be nonnegative");
  if (n > 0 && (!env.contains(trunc_left) || !env.contains(n - 1))) {
    throw RangeError("running_max_direct: window does not cover the walk");
  }
  // rows[m][g]: probability that the running max is m and the walk sits g below it.
  const auto rows_count = static_cast<std::size_t>(n + 2);
  std::vector<std::vector<double>> cur(rows_count), next(rows_count);
  cur[0] = {1.0};
  std::size_t mlo = 0, mhi = 0;
  auto omega_at = [&](std::int64_t x) { return x == trunc_left ? 1.0 : env.omega(x); };

  for (std::int64_t t = 0; t < n; ++t) {
    for (std::size_t m = mlo; m <= mhi; ++m) next[m].assign(cur[m].size() + 1, 0.0);
    next[mhi + 1].assign(1, 0.0);
    for (std::size_t m = mlo; m <= mhi; ++m) {
      const auto& row = cur[m];
      for (std::size_t g = 0; g < row.size(); ++g) {
        const double p = row[g];
        if (p == 0.0) continue;
        const std::int64_t x = static_cast<std::int64_t>(m) - static_cast<std::int64_t>(g);
        const double w = omega_at(x);
        if (g == 0)
          next[m + 1][0] += p * w;
        else
          next[m][g - 1] += p * w;
        if (x > trunc_left) next[m][g + 1] += p * (1.0 - w);
      }
    }
    std::size_t nlo = mlo, nhi = mhi + 1;
    auto trim = [&](std::vector<double>& row) {
      while (row.size() > 1 && row.back() < prune) row.pop_back();
    };
    auto row_mass = [](const std::vector<double>& row) {
      double s = 0.0;
      for (double v : row) s += v;
      return s;
    };
    for (std::size_t m = nlo; m <= nhi; ++m) trim(next[m]);
    while (nlo < nhi && row_mass(next[nlo]) < prune) next[nlo++].clear();
    while (nhi > nlo && row_mass(next[nhi]) < prune) next[nhi--].clear();
    std::swap(cur, next);
    mlo = nlo;
    mhi = nhi;
  }

  Eigen::VectorXd below = Eigen::VectorXd::Zero(static_cast<Index>(n + 2));
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < rows_count + 1 && k <= static_cast<std::size_t>(n + 1); ++k) {
    below[static_cast<Index>(k)] = acc;
    if (k >= mlo && k <= mhi) {
      for (double v : cur[k]) acc += v;
    }
  }
  return below;
}

// ---------------------------------------------------------------------------
// Ruin probabilities and reflection certificates
// ---------------------------------------------------------------------------

double ruin_probability(const EnvironmentWindow& env, std::int64_t left_site,
                        std::int64_t right_site) {
  if (!(left_site < 0 && right_site > 0)) {
    throw ParameterError("ruin_probability: need left < 0 < right");
  }
  const double neg_inf = -std::numeric_limits<double>::infinity();
  // log sum_{i=0}^{right-1} prod_{y=1}^{i} rho_y
  double log_num = neg_inf;
  double acc = 0.0;
  for (std::int64_t i = 0; i < right_site; ++i) {
    if (i > 0) acc += std::log(env.rho(i));
    log_num = log_sum_exp_step(log_num, acc);
  }
  // log sum_{i=left}^{-1} 1 / prod_{y=i+1}^{0} rho_y
  double log_other = neg_inf;
  acc = 0.0;
  for (std::int64_t i = -1; i >= left_site; --i) {
    acc -= std::log(env.rho(i + 1));
    log_other = log_sum_exp_step(log_other, acc);
  }
  const double ratio = std::exp(log_other - log_num);
  return 1.0 / (1.0 + ratio);
}

std::int64_t certify_reflection(const EnvDistribution& dist, std::uint64_t seed,
                                std::int64_t target, double tol) {
  const std::int64_t right = std::max<std::int64_t>(target, 1);
  constexpr std::int64_t kMaxL = std::int64_t{1} << 24;
  for (std::int64_t L = kMinTruncation; L <= kMaxL; L *= 2) {
    const EnvironmentWindow env = sample_environment(dist, -L, right, seed);
    if (ruin_probability(env, -L, right) < tol) return L;
  }
  throw NumericError("certify_reflection: no reflection distance up to 2^24 meets tolerance");
}

// ---------------------------------------------------------------------------
// Kolmogorov distances
// ---------------------------------------------------------------------------

LatticeSup lattice_kolmogorov(const LatticeCdf& law, double center, double scale) {
  if (!(scale > 0.0)) throw ParameterError("lattice_kolmogorov: scale must be positive");
  LatticeSup best;
  double cdf = 0.0;
  for (Index i = 0; i < law.probs.size(); ++i) {
    const double z = (static_cast<double>(law.value(i)) - center) / scale;
    const double phi = normal_cdf(z);
    const double left = std::abs(cdf - phi);
    cdf += law.probs[i];
    const double right = std::abs(cdf - phi);
    const double d = std::max(left, right);
    if (d > best.distance) {
      best.distance = d;
      best.arg_sup = z;
    }
  }
  return best;
}

KolmogorovReport kolmogorov_distance_T(const LatticeCdf& hitting_law,
                                       const QuenchedMomentTable& table, std::int64_t n,
                                       Normalization normalization, const LawConstants& law,
                                       double tail_tol) {
  if (n < 1) throw ParameterError("kolmogorov_distance_T: n must be >= 1");
  if (hitting_law.tail_mass > tail_tol) {
    throw HorizonError("hitting-time law of T_" + std::to_string(n) + " misses mass " +
                       std::to_string(hitting_law.tail_mass));
  }
  double scale = 0.0;
  switch (normalization) {
    case Normalization::quenched_scaling: scale = std::sqrt(table.var_T(n)); break;
    case Normalization::deterministic_scaling:
      scale = std::sqrt(law.sigma2 * static_cast<double>(n));
      break;
    case Normalization::position:
      throw ParameterError("kolmogorov_distance_T: position normalization applies to X_n");
  }
  const LatticeSup sup = lattice_kolmogorov(hitting_law, table.mean_T(n), scale);
  KolmogorovReport r;
  r.n = n;
  r.distance = sup.distance;
  r.arg_sup = sup.arg_sup;
  r.normalization = normalization;
  r.tail_mass_bound = hitting_law.tail_mass + 1e-10;
  return r;
}

KolmogorovReport kolmogorov_distance_T(const EnvironmentWindow& env,
                                       const QuenchedMomentTable& table, std::int64_t n,
                                       Normalization normalization, const LawConstants& law,
                                       double tail_tol) {
  const LatticeCdf hitting = first_passage_auto(env, table, n, tail_tol);
  return kolmogorov_distance_T(hitting, table, n, normalization, law, tail_tol);
}

KolmogorovReport kolmogorov_distance_X(const EnvironmentWindow& env,
                                       const QuenchedMomentTable& table, std::int64_t n,
                                       const LawConstants& law, double tail_tol) {
  KolmogorovReport r;
  r.n = n;
  r.normalization = Normalization::position;
  if (n == 0) {
    // Point mass at the origin against Phi.
    r.distance = 0.5;
    r.arg_sup = 0.0;
    return r;
  }
  const PositionLaw pos = position_pmf(env, n, table.trunc_left());
  if (pos.boundary_contamination > tail_tol) {
    throw HorizonError("position law at n = " + std::to_string(n) +
                       ": reflecting boundary reached with mass " +
                       std::to_string(pos.boundary_contamination));
  }
  const double v = law.speed;
  const double zn = centering_Zn(table, n, v);
  const double center = static_cast<double>(n) * v - zn;
  const double scale = std::sqrt(law.sigma2) * std::pow(v, 1.5) * std::sqrt(static_cast<double>(n));
  const LatticeSup sup = lattice_kolmogorov(pos.cdf, center, scale);
  r.distance = sup.distance;
  r.arg_sup = sup.arg_sup;
  r.tail_mass_bound = pos.cdf.tail_mass + pos.boundary_contamination + 1e-10;
  return r;
}

}  // namespace rwre
