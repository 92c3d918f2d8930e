#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>

#include <json.hpp>

#include "pamlab/lattice.hpp"

namespace pamlab {

/// Callable t -> H(t).
using HFunction = std::function<double(double)>;

enum class ModelKind {
  DoubleExponential,  ///< P(xi > r) = exp(-e^{r/rho})
  Constant,           ///< xi = c almost surely
  TailPower,          ///< f(r) = sign(r)|r|^a, unbounded above
  TailInversePower,   ///< f(r) = |r|^{-b} - |r|^{b} on r < 0, esssup 0
  TailLog,            ///< f(r) = -(gamma/(1-gamma)) log|r| on r < 0, esssup 0
};

/// Law of xi(0), given through its tail P(xi > r) = exp(-e^{f(r)}) for
/// r >= essinf. Bounded kinds are normalized to esssup = 0; `offset` is a
/// user shift that is only added back when values are reported.
struct PotentialModel {
  ModelKind kind = ModelKind::DoubleExponential;
  double param = 1.0;  ///< rho, c, a, b or gamma depending on kind
  double essinf = -std::numeric_limits<double>::infinity();
  double offset = 0.0;

  static PotentialModel double_exponential(double rho);
  static PotentialModel constant(double c);
  static PotentialModel tail_power(double a);
  static PotentialModel tail_inverse_power(double b);
  static PotentialModel tail_log(double gamma);

  /// Named catalog instances: single_peak, double_exponential,
  /// almost_bounded, bounded_above, bounded_inverse_power.
  static PotentialModel catalog(const std::string& name);

  /// Throws ValidationError on out-of-range parameters.
  void validate() const;

  bool bounded_above() const;
  double esssup() const;
  bool is_tail_family() const;

  double f(double r) const;
  double f_prime(double r) const;
  /// Quantile map: the r with f(r) = y (before clamping at essinf).
  double f_inverse(double y) const;
  /// P(xi(0) > r).
  double survival(double r) const;
  /// max(essinf, f^{-1}(log e)) for e ~ Exp(1); the sampling transform.
  double from_exponential(double e) const;
};

/// H(t) = log <exp(t xi(0))>, by adaptive quadrature in the variable
/// y = log(e^{f(xi)}) (offset excluded). Throws NumericalError if the
/// quadrature fails, quoting the achieved error bound.
double cumulant_H(const PotentialModel& model, double t);

/// H as a callable. DoubleExponential with essinf = -inf uses log Gamma,
/// Constant is linear; other kinds call the quadrature.
HFunction cumulant_function(const PotentialModel& model);

/// Cheap H for inner Monte Carlo loops on [0, t_max]: exact forms where
/// available, else a cubic B-spline table of the quadrature values.
HFunction fast_cumulant(const PotentialModel& model, double t_max);

/// Solves t = f'(r) e^{f(r)} (tail families and DoubleExponential).
/// Throws NumericalError carrying the scanned bracket if no root is found.
double laplace_point_r(const PotentialModel& model, double t);

/// Laplace approximation t r(t) - e^{f(r(t))}.
double cumulant_H_laplace(const PotentialModel& model, double t);

/// One i.i.d. draw per site; site i uses the stream derive_seed(seed, i), so
/// the field is identical for any thread count.
LatticeField sample_field(const PotentialModel& model, const Box& box, std::uint64_t seed,
                          bool require_finite_essinf = false);

nlohmann::json to_json(const PotentialModel& model);
PotentialModel model_from_json(const nlohmann::json& j);
std::string kind_name(ModelKind kind);

}  // namespace pamlab
