#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "pamlab/lattice.hpp"
#include "pamlab/potential_models.hpp"
#include "pamlab/profile.hpp"
#include "pamlab/scale_functions.hpp"

namespace pamlab {

/// Occupation times of a walk path up to time t, in first-visit order.
struct LocalTimes {
  int d = 1;
  double t = 0.0;
  std::vector<Site> sites;
  std::vector<double> times;
  std::int64_t jumps = 0;

  double at(const Site& z) const;
  /// Pairwise sum of the occupation times (equals t up to rounding).
  double total() const;
  /// max |z|_inf over the support.
  int support_radius() const;
  void add(const Site& z, double dt);

 private:
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// Continuous-time simple random walk from the origin: Exp(2d) holding
/// times, uniform neighbour. If `exit_radius` is set, the path stops as soon
/// as it leaves the box of that radius (the returned support then exceeds it).
LocalTimes simulate_walk(double t, int d, std::uint64_t seed, std::optional<int> exit_radius = std::nullopt);

/// Monte Carlo estimate of a positive mean, kept in log space.
struct MassEstimate {
  double log_estimate = 0.0;  ///< log of the replica mean (-inf when every weight vanishes)
  double log_se = 0.0;        ///< delta-method standard error of log_estimate
  double estimate = 0.0;
  double se = 0.0;
  double ess = 0.0;           ///< (sum w)^2 / sum w^2
  int replicas = 0;
  int nonzero = 0;
  bool flagged = false;       ///< ess < 100
};

/// Reduces per-replica log weights (fixed order, pairwise sums).
MassEstimate summarize_log_weights(const std::vector<double>& log_w);

/// <u_R(t,0)> as the replica mean of exp(sum_x H(l_t(x))) 1{supp l_t in B_R}.
/// Replica i uses the seed derive_seed(seed, i).
MassEstimate annealed_mass_walk(const HFunction& H, int d, double t, int R, int n, std::uint64_t seed);
MassEstimate annealed_mass_walk(const PotentialModel& model, int d, double t, int R, int n, std::uint64_t seed);

/// <u_R(t,0)> by averaging exact flat-initial solves over n potential draws.
MassEstimate annealed_mass_potential(const PotentialModel& model, int d, double t, int R, int n, std::uint64_t seed);

/// <u_R(t,0)^p>: integer p through p independent walks per replica with
/// pooled local times, otherwise potential Monte Carlo.
MassEstimate moment_walk(const HFunction& H, int d, double p, double t, int R, int n, std::uint64_t seed);

struct MomentEstimate {
  double p = 1.0;
  double t = 0.0;
  MassEstimate moment;        ///< <U^p>
  double rate = 0.0;          ///< log<U^p> / (p t)
  double rate_se = 0.0;
  double leading = 0.0;       ///< H(pt a^{-d}) / (pt a^{-d}), a = alpha(pt); NaN if alpha is undefined
  double alpha = 0.0;
  double centered = 0.0;      ///< alpha^2 (leading - rate)
  double centered_se = 0.0;
  bool flagged = false;
};

MomentEstimate moment_estimator(const PotentialModel& model, const ScaleFunction& alpha, int d, double p, double t,
                                int R, int n, std::uint64_t seed);

/// (sum_x l(x)^q)^{1/q}; q = 1 gives t.
double lq_norm(const LocalTimes& lt, double q);
double sum_of_squares(const LocalTimes& lt);

struct SecondMoment {
  double value = 0.0;
  int truncation_radius = 0;
  double escape_mass = 0.0;
};

/// E sum_x l_t(x)^2 = 2 int_0^t (t - r) p_r(0,0) dr, with p_r(0,0) the d-th
/// power of the one-dimensional return probability computed on [-M, M].
/// M defaults to the smallest radius whose escape mass by time t is below
/// 1e-8; an explicit M violating that throws NumericalError.
SecondMoment self_intersection_second_moment(double t, int d, std::optional<int> truncation_radius = std::nullopt);

/// L_t(x) = (alpha^d / t) l_t(floor(x alpha)) as a step profile on a
/// cartesian grid of spacing 1/alpha (one padding node per side).
Profile rescaled_local_times(const LocalTimes& lt, double alpha);

}  // namespace pamlab
