#include "pamlab/walk_mc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "pamlab/error.hpp"
#include "pamlab/numerics.hpp"
#include "pamlab/pam_solver.hpp"
#include "pamlab/rng.hpp"

namespace pamlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::uint64_t pack(const Site& z) {
  constexpr std::uint64_t kOff = 1u << 20;
  return ((static_cast<std::uint64_t>(z[0]) + kOff) << 42) | ((static_cast<std::uint64_t>(z[1]) + kOff) << 21) |
         (static_cast<std::uint64_t>(z[2]) + kOff);
}

// Parallel replica loop; exceptions are carried out of the region.
std::vector<double> replica_log_weights(int n, const std::function<double(std::uint64_t)>& fn) {
  std::vector<double> out(static_cast<std::size_t>(n));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 256)
  for (int i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = fn(static_cast<std::uint64_t>(i));
    } catch (...) {
#pragma omp critical(pamlab_replica_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

void check_common(int d, double t, int R, int n) {
  if (d < 1 || d > 3) throw ValidationError("dimension must be 1, 2 or 3");
  if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("t must be finite and nonnegative");
  if (R < 0) throw ValidationError("box radius must be nonnegative");
  if (n < 2) throw ValidationError("need at least two replicas");
}

// Pooled local times of `walks` independent walks, or nothing if one of
// them leaves the box.
std::optional<std::unordered_map<std::uint64_t, double>> pooled(int walks, int d, double t, int R, std::uint64_t seed) {
  std::unordered_map<std::uint64_t, double> acc;
  for (int j = 0; j < walks; ++j) {
    const LocalTimes lt = simulate_walk(t, d, derive_seed(seed, static_cast<std::uint64_t>(j)), R);
    if (lt.support_radius() > R) return std::nullopt;
    for (std::size_t k = 0; k < lt.sites.size(); ++k) acc[pack(lt.sites[k])] += lt.times[k];
  }
  return acc;
}

}  // namespace

// ---------------------------------------------------------------- LocalTimes

double LocalTimes::at(const Site& z) const {
  const auto it = index_.find(pack(z));
  return it == index_.end() ? 0.0 : times[it->second];
}

double LocalTimes::total() const { return pairwise_sum(times); }

int LocalTimes::support_radius() const {
  int r = 0;
  for (const Site& z : sites) {
    for (int a = 0; a < d; ++a) r = std::max(r, std::abs(z[static_cast<std::size_t>(a)]));
  }
  return r;
}

void LocalTimes::add(const Site& z, double dt) {
  const auto [it, inserted] = index_.try_emplace(pack(z), sites.size());
  if (inserted) {
    sites.push_back(z);
    times.push_back(dt);
  } else {
    times[it->second] += dt;
  }
}

LocalTimes simulate_walk(double t, int d, std::uint64_t seed, std::optional<int> exit_radius) {
  if (d < 1 || d > 3) throw ValidationError("simulate_walk: dimension must be 1, 2 or 3");
  if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("simulate_walk: t must be finite and nonnegative");
  LocalTimes lt;
  lt.d = d;
  lt.t = t;
  Rng rng(seed);
  Site z{};
  double elapsed = 0.0;
  const double rate = 2.0 * d;
  for (;;) {
    const double hold = rng.exponential(rate);
    if (elapsed + hold >= t) {
      lt.add(z, t - elapsed);
      break;
    }
    lt.add(z, hold);
    elapsed += hold;
    const int dir = rng.below(2 * d);
    z[static_cast<std::size_t>(dir / 2)] += (dir % 2 == 0) ? 1 : -1;
    ++lt.jumps;
    if (exit_radius && std::abs(z[static_cast<std::size_t>(dir / 2)]) > *exit_radius) {
      lt.add(z, 0.0);
      break;
    }
  }
  return lt;
}

// ---------------------------------------------------------------- estimators

MassEstimate summarize_log_weights(const std::vector<double>& log_w) {
  MassEstimate out;
  out.replicas = static_cast<int>(log_w.size());
  if (log_w.empty()) throw ValidationError("no replicas to summarize");
  const double m = *std::max_element(log_w.begin(), log_w.end());
  if (std::isnan(m)) throw NumericalError("replica weight is NaN");
  if (m == kNegInf) {
    out.log_estimate = kNegInf;
    out.flagged = true;
    return out;
  }
  std::vector<double> w(log_w.size()), w2(log_w.size());
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    w[i] = std::exp(log_w[i] - m);
    w2[i] = w[i] * w[i];
    if (w[i] > 0.0) ++out.nonzero;
  }
  const double n = static_cast<double>(log_w.size());
  const double sum = pairwise_sum(w);
  const double mean = sum / n;
  std::vector<double> dev(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) dev[i] = (w[i] - mean) * (w[i] - mean);
  const double var = pairwise_sum(dev) / (n - 1.0);
  const double se_mean = std::sqrt(var / n);
  out.log_estimate = m + std::log(mean);
  out.log_se = se_mean / mean;
  out.estimate = std::exp(out.log_estimate);
  out.se = std::exp(m) * se_mean;
  out.ess = sum * sum / pairwise_sum(w2);
  out.flagged = out.ess < 100.0;
  return out;
}

MassEstimate annealed_mass_walk(const HFunction& H, int d, double t, int R, int n, std::uint64_t seed) {
  return moment_walk(H, d, 1.0, t, R, n, seed);
}

MassEstimate annealed_mass_walk(const PotentialModel& model, int d, double t, int R, int n, std::uint64_t seed) {
  return annealed_mass_walk(fast_cumulant(model, std::max(t, 1.0)), d, t, R, n, seed);
}

MassEstimate annealed_mass_potential(const PotentialModel& model, int d, double t, int R, int n, std::uint64_t seed) {
  check_common(d, t, R, n);
  model.validate();
  const Box box(d, R);
  const auto log_w = replica_log_weights(n, [&](std::uint64_t i) {
    const LatticeField xi = sample_field(model, box, derive_seed(seed, i));
    return solve_pam(xi, t, InitialCondition::Flat).log_value_at(Site{});
  });
  return summarize_log_weights(log_w);
}

MassEstimate moment_walk(const HFunction& H, int d, double p, double t, int R, int n, std::uint64_t seed) {
  check_common(d, t, R, n);
  if (!(p > 0.0)) throw ValidationError("moment order p must be positive");
  if (p != std::floor(p)) throw ValidationError("walk representation needs an integer p");
  const int walks = static_cast<int>(p);
  const auto log_w = replica_log_weights(n, [&](std::uint64_t i) {
    const auto acc = pooled(walks, d, t, R, derive_seed(seed, i));
    if (!acc) return kNegInf;
    // Summation order must not depend on the hash map layout.
    std::vector<double> terms;
    terms.reserve(acc->size());
    std::vector<std::pair<std::uint64_t, double>> items(acc->begin(), acc->end());
    std::sort(items.begin(), items.end());
    for (const auto& kv : items) terms.push_back(H(kv.second));
    return pairwise_sum(terms);
  });
  return summarize_log_weights(log_w);
}

namespace {

MassEstimate moment_potential(const PotentialModel& model, int d, double p, double t, int R, int n, std::uint64_t seed) {
  check_common(d, t, R, n);
  const Box box(d, R);
  const auto log_w = replica_log_weights(n, [&](std::uint64_t i) {
    const LatticeField xi = sample_field(model, box, derive_seed(seed, i));
    return p * solve_pam(xi, t, InitialCondition::Flat).log_value_at(Site{});
  });
  return summarize_log_weights(log_w);
}

}  // namespace

MomentEstimate moment_estimator(const PotentialModel& model, const ScaleFunction& alpha, int d, double p, double t,
                                int R, int n, std::uint64_t seed) {
  if (!(t > 0.0)) throw ValidationError("moment_estimator: t must be positive");
  MomentEstimate out;
  out.p = p;
  out.t = t;
  const HFunction H = cumulant_function(model);
  if (p == std::floor(p) && p >= 1.0) {
    out.moment = moment_walk(fast_cumulant(model, std::max(p * t, 1.0)), d, p, t, R, n, seed);
  } else {
    out.moment = moment_potential(model, d, p, t, R, n, seed);
  }
  out.rate = out.moment.log_estimate / (p * t);
  out.rate_se = out.moment.log_se / (p * t);
  try {
    out.alpha = alpha(p * t);
    out.leading = leading_term(H, alpha, d, p, t);
  } catch (const NumericalError&) {
    out.alpha = out.leading = std::numeric_limits<double>::quiet_NaN();
  }
  out.centered = out.alpha * out.alpha * (out.leading - out.rate);
  out.centered_se = out.alpha * out.alpha * out.rate_se;
  out.flagged = out.moment.flagged;
  return out;
}

// ---------------------------------------------------------------- norms

double lq_norm(const LocalTimes& lt, double q) {
  if (!(q >= 1.0)) throw ValidationError("lq_norm: q must be at least 1");
  if (q == 1.0) return lt.total();
  double m = 0.0;
  for (double v : lt.times) m = std::max(m, v);
  if (m == 0.0) return 0.0;
  std::vector<double> terms;
  terms.reserve(lt.times.size());
  for (double v : lt.times) terms.push_back(std::pow(v / m, q));
  return m * std::pow(pairwise_sum(terms), 1.0 / q);
}

double sum_of_squares(const LocalTimes& lt) {
  std::vector<double> terms;
  terms.reserve(lt.times.size());
  for (double v : lt.times) terms.push_back(v * v);
  return pairwise_sum(terms);
}

SecondMoment self_intersection_second_moment(double t, int d, std::optional<int> truncation_radius) {
  if (d < 1 || d > 3) throw ValidationError("self_intersection: dimension must be 1, 2 or 3");
  if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("self_intersection: t must be finite and nonnegative");
  SecondMoment out;
  if (t == 0.0) return out;
  const auto attempt = [&](int M) {
    const Box box(1, M);
    const EigenDecomposition spec = eig(LatticeField(box));
    const auto o = static_cast<Eigen::Index>(box.center_index());
    std::vector<double> c0, c1, lam;
    for (std::size_t k = 0; k < spec.eigenvalues.size(); ++k) {
      const auto col = spec.vectors.col(static_cast<Eigen::Index>(k));
      lam.push_back(spec.eigenvalues[k]);
      c0.push_back(col[o] * col[o]);
      c1.push_back(col[o] * col.sum());
    }
    const auto series = [&lam](const std::vector<double>& c, double r) {
      std::vector<double> terms(lam.size());
      for (std::size_t k = 0; k < lam.size(); ++k) terms[k] = std::exp(r * lam[k]) * c[k];
      return pairwise_sum(terms);
    };
    SecondMoment s;
    s.truncation_radius = M;
    s.escape_mass = std::max(0.0, 1.0 - std::pow(series(c1, t), d));
    const auto integrand = [&](double r) { return (t - r) * std::pow(series(c0, r), d); };
    s.value = 2.0 * integrate(integrand, 0.0, t, 1e-12).value;
    return s;
  };
  constexpr double kEscape = 1e-8;
  if (truncation_radius) {
    out = attempt(*truncation_radius);
    if (out.escape_mass >= kEscape) {
      throw NumericalError("self_intersection: truncation too small (escape mass " + std::to_string(out.escape_mass) +
                           ")");
    }
    return out;
  }
  int M = static_cast<int>(std::ceil(2.0 * t)) + 8;
  for (;;) {
    out = attempt(M);
    if (out.escape_mass < kEscape) return out;
    if (M > 4000) throw NumericalError("self_intersection: no admissible truncation below radius 4000");
    M = M + M / 2 + 1;
  }
}

Profile rescaled_local_times(const LocalTimes& lt, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("rescaled_local_times: alpha must be positive");
  if (!(lt.t > 0.0)) throw ValidationError("rescaled_local_times: horizon must be positive");
  const int N = lt.support_radius() + 1;
  Grid grid;
  grid.kind = GridKind::Cartesian;
  grid.d = lt.d;
  grid.h = 1.0 / alpha;
  grid.n = 2 * N + 1;
  Profile p(grid);
  const double scale = std::pow(alpha, lt.d) / lt.t;
  for (std::size_t k = 0; k < lt.sites.size(); ++k) {
    std::array<int, 3> m{};
    for (int a = 0; a < lt.d; ++a) m[static_cast<std::size_t>(a)] = lt.sites[k][static_cast<std::size_t>(a)] + N;
    p.values[grid.linear_index(m)] = scale * lt.times[k];
  }
  return p;
}

}  // namespace pamlab
