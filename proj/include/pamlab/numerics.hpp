#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pamlab {

/// Pairwise (cascade) summation; error grows like O(log n) rather than O(n).
double pairwise_sum(std::span<const double> values);

/// log(sum(exp(v))) with the maximum factored out; -inf entries are allowed
/// and an all -inf input yields -inf.
double log_sum_exp(std::span<const double> log_values);

/// `n` points geometrically spaced on [lo, hi], endpoints included.
std::vector<double> geometric_grid(double lo, double hi, int n);

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

/// Globally adaptive Gauss-Kronrod (G15/K31) on a finite interval: the panel
/// with the largest error estimate is bisected until the total estimate drops
/// below max(abs_tol, rel_tol*L1). Throws NumericalError if it stays more than
/// a factor 100 above that after 2^14 panels.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double rel_tol = 1e-13, double abs_tol = 0.0);

/// Root of a continuous f on [lo, hi] given a sign change, solved to full
/// double precision (TOMS 748). Throws NumericalError naming the bracket when
/// f(lo) and f(hi) have the same sign.
double find_root(const std::function<double(double)>& f, double lo, double hi);

/// Brackets [x_i, x_{i+1}] of an increasing grid on which f changes sign.
/// Exact zeros on the grid are returned as degenerate brackets.
std::vector<std::pair<double, double>> scan_sign_changes(const std::function<double(double)>& f,
                                                         std::span<const double> grid);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
};

/// Ordinary least squares y = slope*x + intercept.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Ordinary least squares with an arbitrary design matrix given column-wise.
/// Returns the coefficients; `rms_residual` receives the residual RMS.
std::vector<double> least_squares(const std::vector<std::vector<double>>& columns,
                                  std::span<const double> y, double* rms_residual = nullptr);

struct RegularVariationFit {
  double index = 0.0;         ///< coefficient of log t
  double log_log_coeff = 0.0; ///< coefficient of log log t (slowly varying part)
  double rms_residual = 0.0;
};

/// Index of regular variation of a positive function sampled at t > e:
/// least squares of log f against {log t, log log t, 1}. The log log t column
/// absorbs the logarithmic slowly varying factors that bias a plain log-log
/// slope at reachable t.
RegularVariationFit fit_regular_variation(std::span<const double> t, std::span<const double> f);

}  // namespace pamlab
