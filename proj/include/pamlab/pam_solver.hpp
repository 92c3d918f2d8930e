#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pamlab/lattice.hpp"
#include "pamlab/potential_models.hpp"
#include "pamlab/scale_functions.hpp"

namespace pamlab {

enum class InitialCondition { Delta0, Flat };

std::string initial_name(InitialCondition initial);

/// Solution of the PAM at time t. The field is stored as exp(log_scale) * v
/// so that large potentials do not overflow; total_mass may be +inf when
/// only log_total_mass is representable.
struct PamSolution {
  LatticeField v;
  double log_scale = 0.0;
  double total_mass = 0.0;
  double log_total_mass = 0.0;
  double t = 0.0;
  InitialCondition initial = InitialCondition::Delta0;

  /// Unscaled solution; throws NumericalError on overflow.
  LatticeField values() const;
  double log_value_at(const Site& z) const;
};

/// du/dt = Delta u + xi u on the box of `xi` (zero boundary, -inf sites are
/// traps). Delta0 places unit mass at the origin, which must lie in the box.
PamSolution solve_pam(const LatticeField& xi, double t, InitialCondition initial,
                      SemigroupMethod method = SemigroupMethod::Auto);

/// p(t, y, z) = sum_k e^{t lambda_k} e_k(y) e_k(z) over box x box, from the
/// full spectrum. Throws ValidationError beyond kDenseLimit sites.
Eigen::MatrixXd transition_kernel(const LatticeField& V, double t);

/// xi - H(t alpha^{-d}) alpha^d / t.
LatticeField shifted_potential(const LatticeField& xi, const HFunction& H, double t, double alpha, int d);
LatticeField shifted_potential(const LatticeField& xi, const PotentialModel& model, double t,
                               const ScaleFunction& alpha, int d);

struct QuenchedRow {
  double t = 0.0;
  double rate = 0.0;               ///< (1/t) log U(t)
  double prediction_term1 = 0.0;   ///< leading term at beta(t); NaN when the scales are undefined there
  double prediction_term2 = 0.0;   ///< chi_tilde(rho) / alpha(beta(t))^2
  int box_radius = 0;
  std::uint64_t seed = 0;
  bool capped = false;             ///< box radius hit the cap
};

struct QuenchedSetup {
  int d = 1;
  std::vector<double> t_grid;
  std::vector<std::uint64_t> seeds;
  int radius_cap = 0;              ///< 0 selects 2000 (d=1), 60 (d=2), 12 (d=3)
  double chi_tilde = 0.0;          ///< constant of the second prediction term
};

/// Radius min(ceil(t log t), cap), at least 1.
int quenched_radius(double t, int cap);
int default_radius_cap(int d);

/// One row per (seed, t), seeds outermost. The field of a seed is sampled
/// once on the largest box and restricted, so rows of one seed share a
/// realization. Requires essinf > -inf.
std::vector<QuenchedRow> quenched_rate_series(const PotentialModel& model, const ScalePair& scales,
                                              const QuenchedSetup& setup);

}  // namespace pamlab
