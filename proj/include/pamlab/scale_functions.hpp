#pragma once

#include <functional>
#include <vector>

#include "pamlab/potential_models.hpp"
#include "pamlab/regvar_classifier.hpp"

namespace pamlab {

using ScaleFunction = std::function<double(double)>;

struct ScaleSolve {
  double value = 0.0;
  double residual = 0.0;          ///< relative residual of the defining equation
  std::vector<double> roots;      ///< every root located on the scan grid (in the solved variable)
};

/// alpha(t) = (t/s)^{1/d} where s solves kappa(s)/s = (s/t)^{2/d}. The scan
/// covers [1e-6 t, 1e6 t] at four points per decade; when several roots
/// exist the largest s is taken. Throws NumericalError with the scan trace
/// if there is no sign change.
ScaleSolve solve_alpha(const HFunction& kappa, int d, double t);
double alpha_of_t(const HFunction& kappa, int d, double t);

/// beta(t) solving b/alpha(b)^2 = d log t (t > 1), bracketed by geometric
/// expansion around d log t.
ScaleSolve solve_beta(const ScaleFunction& alpha, int d, double t);
double beta_of_t(const ScaleFunction& alpha, int d, double t);

/// H(s)/s with s = p t alpha(pt)^{-d}.
double leading_term(const HFunction& H, const ScaleFunction& alpha, int d, double p, double t);

struct ScalePair {
  ScaleFunction alpha;
  ScaleFunction beta;
  int d = 1;
  HFunction kappa;
  bool alpha_constant = false;  ///< alpha = 1 by convention (kappa* = infinity)
};

/// Scale functions of a classified model. For kappa* = infinity alpha is the
/// constant 1 and beta(t) = d log t.
ScalePair make_scale_pair(const HFunction& kappa, int d, bool kappa_star_infinite);
ScalePair make_scale_pair(const PotentialModel& model, const ClassificationReport& report, int d);

}  // namespace pamlab
