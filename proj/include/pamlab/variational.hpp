#pragma once

#include <optional>

#include "pamlab/profile.hpp"

namespace pamlab {

/// chi(rho) = rho d (1 - log(rho/pi)/2).
double chi_closed_form(double rho, int d);
/// chi(rho) + rho log(rho/e).
double chi_tilde_closed_form(double rho, int d);
/// lambda(psi_rho) = rho - rho d + rho (d/2) log(rho/pi).
double lambda_psi_rho(double rho, int d);
/// Small-delta asymptote (d delta / 2) log(pi e^2 / delta) of the lattice problem.
double chi_discrete_asymptote(double delta, int d);
/// The gamma functional evaluated at g_rho, in closed form.
double chi_gamma_gaussian(double rho, double gamma, int d);
/// min over R of (j/R)^2 + rho (|B_R| - 1), j the first Dirichlet zero of the ball.
double chi_gamma_zero_continuum(double rho, int d);

/// g_rho(x) = (rho/pi)^{d/4} exp(-rho |x - c|^2 / 2); only the first d
/// components of c are used, and radial grids need c = 0.
Profile gaussian_g(const Grid& grid, double rho, std::array<double, 3> center = {});
/// psi_rho = rho + rho log g_rho^2 (boundary values kept).
Profile parabola_psi(const Grid& grid, double rho);

/// Grid that resolves g_rho: L = 8/sqrt(rho), h = 0.025/sqrt(rho)
/// (0.05/sqrt(rho) for cartesian d >= 2).
Grid default_grid(double rho, int d, GridKind kind);

struct FlowOptions {
  double tol = 1e-8;
  int max_iter = 100000;
  int recenter_every = 100;
  bool throw_on_stall = true;
};

struct VariationalSolution {
  double value = 0.0;
  Profile minimizer;          ///< unit L^2 norm (g, not g^2)
  int iterations = 0;
  double gradient_norm = 0.0; ///< weighted Euler-Lagrange residual at termination
  double multiplier = 0.0;    ///< Lagrange multiplier of the norm constraint
  bool converged = false;
};

/// min ||grad g||^2 - rho int g^2 log g^2 over unit-norm g, by a
/// semi-implicit normalized gradient flow with step control.
VariationalSolution chi_numeric(double rho, const Grid& grid, const FlowOptions& opts = {},
                                const std::optional<Profile>& init = std::nullopt);

/// rho int g^2 log g^2 with 0 log 0 = 0; the argument is g^2.
double entropy_functional(const Profile& gsq, double rho);
/// (rho/e) int exp(psi/rho), accumulated in log space.
double legendre_L(const Profile& psi, double rho);
/// Principal Dirichlet eigenvalue of Delta + psi. Cartesian grids go through the
/// lattice eigensolver (potential h^2 psi on interior nodes), radial grids
/// through the tridiagonal radial operator.
double spectral_lambda(const Profile& psi);

struct ChiTildeCertificate {
  double value = 0.0;        ///< closed form
  double minus_lambda = 0.0; ///< -lambda(psi_rho - rho log rho) on the grid
  double L = 0.0;            ///< legendre_L of the same potential
};

ChiTildeCertificate chi_tilde(double rho, const Grid& grid);

/// min sum_{x~y} (g(x) - g(y))^2 - delta sum g^2 log g^2 over unit-norm g on
/// the box of the given radius (zero outside). Best of a broad and a point-mass start.
VariationalSolution chi_discrete(double delta, int d, int radius, const FlowOptions& opts = {});

/// min ||grad g||^2 + rho int (g^{2 gamma} - g^2)/(1 - gamma). gamma = 0
/// uses |supp g| for int g^0 and needs a radial grid (support-radius scan).
VariationalSolution chi_gamma(double rho, double gamma, const Grid& grid, const FlowOptions& opts = {},
                              const std::optional<Profile>& init = std::nullopt);
/// The gamma functional with fourth-order gradients (quadrature evaluator).
double gamma_functional(const Profile& g, double rho, double gamma);

struct LogSobolevGap {
  double gap = 0.0;     ///< raw, or 0 when the raw value is a tiny negative
  double raw = 0.0;
  bool clamped = false; ///< raw in [-1e-6, 0)
  bool violated = false;///< raw < -1e-6
};

/// ||grad g||^2 - rho int g^2 log g^2 - chi(rho) for unit-norm g.
LogSobolevGap log_sobolev_gap(const Profile& g, double rho);

struct DualGap {
  double gap = 0.0;       ///< L(psi) - lambda(psi) - chi(rho)
  double L = 0.0;
  double lambda = 0.0;
  double exp_form = 0.0;  ///< int e^{psi - 1} - lambda(psi)
};

DualGap dual_gap(const Profile& psi, double rho);

}  // namespace pamlab
