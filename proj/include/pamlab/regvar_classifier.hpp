#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pamlab/potential_models.hpp"

namespace pamlab {

enum class ClassLabel { SinglePeak, DoubleExponential, AlmostBounded, BoundedAbove };

std::string label_name(ClassLabel label);

/// |gamma - 1| below this counts as gamma = 1.
inline constexpr double kGammaOneTolerance = 0.05;

struct GammaEstimate {
  double gamma = 0.0;
  double log_log_coeff = 0.0;
  double rms_residual = 0.0;
};

/// Index of regular variation of |H| from the upper half of a geometric grid
/// spanning at least four decades (fit against log t, log log t and 1).
GammaEstimate estimate_gamma(const HFunction& H, std::span<const double> t_grid);

/// Shape of the limit (H(ty) - yH(t))/kappa(t) for rho = 1.
double hat_H_shape(double gamma, double y);

/// Auxiliary function: H(t) - int_1^t H(s)/s ds when gamma = 1, |H| otherwise.
/// The gamma = 1 integral is accumulated in log t on a fixed node lattice
/// (10-point Gauss per cell) and cached, so repeated calls are cheap and the
/// value does not depend on the call order.
HFunction make_kappa(const HFunction& H, double gamma);

/// Least-squares rho at a single t from y in {0.5, 2, 4}; `rms` receives the
/// fit residual relative to rho.
double fit_rho_at(const HFunction& H, const HFunction& kappa, double gamma, double t, double* rms = nullptr);

struct KappaRho {
  HFunction kappa;
  double rho = 0.0;
  double rho_rms = 0.0;            ///< worst y-fit residual on the top decade
  std::vector<double> t_used;      ///< top-decade grid points
  std::vector<double> rho_by_t;    ///< rho fitted at each of them
};

/// Builds kappa and estimates rho on the top decade of the grid, extrapolated
/// linearly in 1/log t. Throws NumericalError if kappa <= 0 on the grid.
KappaRho estimate_kappa_rho(const HFunction& H, double gamma, std::span<const double> t_grid);

struct KappaStarEstimate {
  double value = 0.0;        ///< 0, finite positive, or +inf
  double log_log_slope = 0.0;
  double intercept = 0.0;    ///< extrapolated kappa(t)/t at 1/log t = 0
  double rms_residual = 0.0;
  bool decidable = true;
};

/// kappa* = lim kappa(t)/t from the top decade of the grid.
KappaStarEstimate estimate_kappa_star(const HFunction& kappa, std::span<const double> t_grid);

struct ClassificationReport {
  std::string outcome;               ///< "classified", "undecidable" or "degenerate"
  std::optional<ClassLabel> label;
  double gamma = 0.0;                ///< raw estimate
  double gamma_class = 0.0;          ///< snapped to 1 within kGammaOneTolerance
  double rho = 0.0;
  double kappa_star = 0.0;
  std::vector<double> t_grid;
  double gamma_rms = 0.0;
  double rho_rms = 0.0;
  double kappa_log_log_slope = 0.0;
  double kappa_rms = 0.0;
  std::vector<double> rho_by_t;
  std::string note;
};

/// Default grid: 40 geometric points on [1e2, t_max].
ClassificationReport classify(const PotentialModel& model, double t_max = 1e8, int n_grid = 40);

nlohmann::json to_json(const ClassificationReport& report);

}  // namespace pamlab
