// Acceptance suite. `acceptance N` runs criterion N, `acceptance` runs all.
// Prints one PASS/FAIL line per criterion; exit status is nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "pamlab/error.hpp"
#include "pamlab/lattice.hpp"
#include "pamlab/numerics.hpp"
#include "pamlab/pam_solver.hpp"
#include "pamlab/potential_models.hpp"
#include "pamlab/regvar_classifier.hpp"
#include "pamlab/rng.hpp"
#include "pamlab/scale_functions.hpp"
#include "pamlab/variational.hpp"
#include "pamlab/walk_mc.hpp"

using namespace pamlab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Check {
  bool ok = true;
  void expect(bool cond, const char* fmt, auto... args) {
    std::printf("    %s ", cond ? "ok  " : "MISS");
    std::printf(fmt, args...);
    std::printf("\n");
    ok = ok && cond;
  }
};

double z_score(const MassEstimate& a, const MassEstimate& b) {
  return (a.estimate - b.estimate) / std::sqrt(a.se * a.se + b.se * b.se);
}

// ------------------------------------------------------------------ 1, 2

bool c1_closed_form_chi() {
  Check c;
  auto t0 = Clock::now();
  const VariationalSolution s1 = chi_numeric(1.0, default_grid(1.0, 1, GridKind::Cartesian));
  const double dt1 = seconds_since(t0);
  c.expect(std::abs(s1.value - chi_closed_form(1.0, 1)) <= 1e-3, "rho=1 d=1: %.8f vs %.8f (tol 1e-3)", s1.value,
           chi_closed_form(1.0, 1));
  c.expect(dt1 < 60.0, "runtime %.2f s < 60 s", dt1);
  t0 = Clock::now();
  const double pi = std::numbers::pi;
  const VariationalSolution s2 = chi_numeric(pi, default_grid(pi, 2, GridKind::Radial));
  const double dt2 = seconds_since(t0);
  c.expect(std::abs(s2.value - 2.0 * pi) <= 1e-2, "rho=pi d=2 radial: %.8f vs 2 pi = %.8f (tol 1e-2)", s2.value, 2.0 * pi);
  c.expect(dt2 < 60.0, "runtime %.2f s < 60 s", dt2);
  return c.ok;
}

bool c2_minimizer_shape() {
  Check c;
  const Grid g1 = default_grid(1.0, 1, GridKind::Cartesian);
  const VariationalSolution s1 = chi_numeric(1.0, g1);
  // recentre by whole nodes before comparing
  const auto bc = barycenter_sq(s1.minimizer);
  const Profile centred = shift_nodes(s1.minimizer, {-static_cast<int>(std::lround(bc[0] / g1.h)), 0, 0});
  const double d1 = sup_distance(centred, gaussian_g(g1, 1.0));
  c.expect(d1 <= 1e-2, "rho=1 d=1 sup distance to g_rho %.3e (tol 1e-2), barycentre %.2e", d1, bc[0]);
  const double pi = std::numbers::pi;
  const Grid g2 = default_grid(pi, 2, GridKind::Radial);
  const VariationalSolution s2 = chi_numeric(pi, g2);
  const double d2 = sup_distance(s2.minimizer, gaussian_g(g2, pi));
  c.expect(d2 <= 1e-2, "rho=pi d=2 radial sup distance to g_rho %.3e (tol 1e-2)", d2);
  return c.ok;
}

// ------------------------------------------------------------------ 3

bool c3_dual_objects() {
  Check c;
  const double pi = std::numbers::pi;
  for (const auto& [rho, d] : std::vector<std::pair<double, int>>{{1.0, 1}, {pi, 1}, {1.0, 2}}) {
    const Grid g = default_grid(rho, d, GridKind::Cartesian);
    const Profile psi = parabola_psi(g, rho);
    const DualGap dg = dual_gap(psi, rho);
    c.expect(std::abs(dg.L - rho) <= 1e-6, "rho=%.4f d=%d: L(psi_rho) = %.12f vs rho (tol 1e-6)", rho, d, dg.L);
    c.expect(std::abs(dg.lambda - lambda_psi_rho(rho, d)) <= 1e-2, "rho=%.4f d=%d: lambda(psi_rho) = %.6f vs %.6f (tol 1e-2)",
             rho, d, dg.lambda, lambda_psi_rho(rho, d));
    c.expect(std::abs(dg.gap) <= 1e-2, "rho=%.4f d=%d: dual gap %.3e (tol 1e-2)", rho, d, dg.gap);
    const ChiTildeCertificate cert = chi_tilde(rho, g);
    c.expect(std::abs(cert.L - 1.0) <= 1e-6, "rho=%.4f d=%d: certificate L = %.12f (tol 1e-6), -lambda %.6f vs %.6f", rho,
             d, cert.L, cert.minus_lambda, cert.value);
  }
  return c.ok;
}

// ------------------------------------------------------------------ 4

bool c4_log_sobolev() {
  Check c;
  const Grid g = Grid::cartesian(1, 8.0, 0.025);
  Rng rng(20240611);
  double worst = std::numeric_limits<double>::infinity();
  int violated = 0;
  for (int k = 0; k < 100; ++k) {
    const double rho = 0.5 + 2.5 * rng.uniform();
    const int bumps = 1 + rng.below(4);
    std::vector<std::array<double, 4>> b(static_cast<std::size_t>(bumps));
    for (auto& x : b) x = {-2.0 + 4.0 * rng.uniform(), 0.3 + 1.2 * rng.uniform(), -0.5 + 1.5 * rng.uniform(), 0.0};
    Profile p = sample(g, [&](const std::array<double, 3>& x) {
      double v = 0.0;
      for (const auto& q : b) v += q[2] * std::exp(-0.5 * (x[0] - q[0]) * (x[0] - q[0]) / (q[1] * q[1]));
      return v;
    });
    if (p.l2_norm_sq() < 1e-12) p.values[p.values.size() / 2] = 1.0;
    p.normalize_l2();
    const LogSobolevGap gap = log_sobolev_gap(p, rho);
    worst = std::min(worst, gap.raw);
    violated += gap.raw < -1e-6;
  }
  c.expect(violated == 0, "100 random profiles: min raw gap %.3e, %d below -1e-6", worst, violated);
  for (int d : {1, 2}) {
    const Grid gd = d == 1 ? g : Grid::cartesian(2, 7.0, 0.05);
    const LogSobolevGap g0 = log_sobolev_gap(gaussian_g(gd, 1.0), 1.0);
    c.expect(std::abs(g0.raw) <= 1e-4, "d=%d gap(g_rho) = %.3e (tol 1e-4)", d, g0.raw);
    const LogSobolevGap gs = log_sobolev_gap(gaussian_g(gd, 1.0, {0.7, -0.4, 0.0}), 1.0);
    c.expect(std::abs(gs.raw) <= 1e-4, "d=%d gap(shifted g_rho) = %.3e (tol 1e-4)", d, gs.raw);
  }
  return c.ok;
}

// ------------------------------------------------------------------ 5

bool c5_discrete() {
  Check c;
  const auto t0 = Clock::now();
  for (double delta : {0.02, 0.1, 1.0, 10.0}) {
    const int radius = static_cast<int>(std::ceil(6.0 / std::sqrt(delta))) + 5;
    const VariationalSolution s = chi_discrete(delta, 1, radius);
    c.expect(s.value <= 2.0, "delta=%g: value %.6f <= 2d = 2", delta, s.value);
    if (delta == 0.02) {
      const double a = chi_discrete_asymptote(delta, 1);
      c.expect(std::abs(s.value - a) <= 0.15 * a, "delta=0.02: value %.6f vs (delta/2) log(pi e^2/delta) = %.6f (15%%)",
               s.value, a);
    }
  }
  const double dt = seconds_since(t0);
  c.expect(dt < 300.0, "runtime %.2f s < 300 s", dt);
  return c.ok;
}

// ------------------------------------------------------------------ 6

bool c6_gamma_limit() {
  Check c;
  const double rho = 1.0;
  const Grid g = default_grid(rho, 1, GridKind::Cartesian);
  const double chi = chi_closed_form(rho, 1);
  double prev_gap = std::numeric_limits<double>::infinity();
  const Profile gr = gaussian_g(g, rho);
  for (double gamma : {0.5, 0.9, 0.99}) {
    const VariationalSolution s = chi_gamma(rho, gamma, g);
    const double gap = std::abs(chi - s.value);
    c.expect(s.value <= chi, "gamma=%g: value %.6f <= chi(rho) = %.6f", gamma, s.value, chi);
    c.expect(gap < prev_gap, "gamma=%g: |chi - value| = %.6f decreasing (previous %.6f)", gamma, gap, prev_gap);
    const double eval = gamma_functional(gr, rho, gamma);
    const double oracle = chi_gamma_gaussian(rho, gamma, 1);
    c.expect(std::abs(eval - oracle) <= 1e-4, "gamma=%g: functional at g_rho %.8f vs closed form %.8f (tol 1e-4)", gamma,
             eval, oracle);
    prev_gap = gap;
  }
  return c.ok;
}

// ------------------------------------------------------------------ 7, 8, 9

bool c7_annealed_equivalence() {
  Check c;
  const auto t0 = Clock::now();
  const PotentialModel m = PotentialModel::double_exponential(1.0);
  for (int R : {1, 2}) {
    for (double t : {0.5, 1.0, 2.0}) {
      const MassEstimate a = annealed_mass_walk(m, 1, t, R, 100000, 11);
      const MassEstimate b = annealed_mass_potential(m, 1, t, R, 1000, 12);
      const double z = z_score(a, b);
      c.expect(std::abs(z) <= 3.0, "R=%d t=%g: walk %.6f +- %.6f, potential %.6f +- %.6f, z = %.2f", R, t, a.estimate, a.se,
               b.estimate, b.se, z);
    }
  }
  const double dt = seconds_since(t0);
  c.expect(dt < 600.0, "runtime %.1f s < 600 s", dt);
  return c.ok;
}

bool c8_single_site() {
  Check c;
  const PotentialModel m = PotentialModel::double_exponential(1.0);
  const HFunction H = cumulant_function(m);
  for (double t : {0.5, 1.0, 2.0}) {
    const MassEstimate a = annealed_mass_walk(m, 1, t, 0, 100000, 13);
    const double exact = std::exp(H(t) - 2.0 * t);
    const double z = (a.estimate - exact) / a.se;
    c.expect(std::abs(z) <= 3.0, "t=%g: %.6f +- %.6f vs e^{H(t)-2dt} = %.6f, z = %.2f", t, a.estimate, a.se, exact, z);
  }
  return c.ok;
}

bool c9_self_intersection() {
  Check c;
  const auto t0 = Clock::now();
  for (int d : {1, 2}) {
    const double t = 1.0;
    const SecondMoment exact = self_intersection_second_moment(t, d);
    const int n = 100000;
    std::vector<double> v(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 256)
    for (int i = 0; i < n; ++i) {
      v[static_cast<std::size_t>(i)] = sum_of_squares(simulate_walk(t, d, derive_seed(77, static_cast<std::uint64_t>(i))));
    }
    const double mean = pairwise_sum(v) / n;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
    const double se = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
    const double z = (mean - exact.value) / se;
    c.expect(std::abs(z) <= 3.0, "d=%d t=1: MC %.6f +- %.6f vs exact %.10f, z = %.2f", d, mean, se, exact.value, z);
  }
  const double dt = seconds_since(t0);
  c.expect(dt < 300.0, "runtime %.1f s < 300 s", dt);
  return c.ok;
}

// ------------------------------------------------------------------ 10, 11

bool c10_classification() {
  Check c;
  const auto t0 = Clock::now();
  const ClassificationReport sp = classify(PotentialModel::catalog("single_peak"));
  c.expect(sp.label && *sp.label == ClassLabel::SinglePeak, "single_peak -> %s",
           sp.label ? label_name(*sp.label).c_str() : sp.outcome.c_str());
  const ClassificationReport de = classify(PotentialModel::catalog("double_exponential"));
  const double rho_de = PotentialModel::catalog("double_exponential").param;
  c.expect(de.label && *de.label == ClassLabel::DoubleExponential && std::abs(de.kappa_star - rho_de) <= 0.05 * rho_de,
           "double_exponential -> %s, kappa* = %.5f vs rho = %g", de.label ? label_name(*de.label).c_str() : de.outcome.c_str(),
           de.kappa_star, rho_de);
  const ClassificationReport ab = classify(PotentialModel::catalog("almost_bounded"));
  c.expect(ab.label && *ab.label == ClassLabel::AlmostBounded && std::abs(ab.rho - 1.0) <= 0.05,
           "almost_bounded -> %s, rho = %.5f", ab.label ? label_name(*ab.label).c_str() : ab.outcome.c_str(), ab.rho);
  const PotentialModel bm = PotentialModel::catalog("bounded_above");
  const ClassificationReport ba = classify(bm);
  c.expect(ba.label && *ba.label == ClassLabel::BoundedAbove && std::abs(ba.gamma - bm.param) <= 0.02,
           "bounded_above -> %s, gamma = %.5f vs %g", ba.label ? label_name(*ba.label).c_str() : ba.outcome.c_str(), ba.gamma,
           bm.param);
  const double dt = seconds_since(t0);
  c.expect(dt < 120.0, "runtime %.1f s < 120 s", dt);
  return c.ok;
}

bool c11_scale_residuals() {
  Check c;
  const std::vector<double> grid = geometric_grid(1e2, 1e8, 13);
  for (const char* name : {"single_peak", "double_exponential", "almost_bounded", "bounded_above", "bounded_inverse_power"}) {
    const PotentialModel m = PotentialModel::catalog(name);
    const ClassificationReport rep = classify(m);
    const bool index_checked = std::string(name) != "bounded_inverse_power";
    for (int d : {1, 2}) {
      const ScalePair sp = make_scale_pair(m, rep, d);
      double ra = 0.0, rb = 0.0;
      int undefined = 0;
      std::vector<double> ts, as;
      for (double t : grid) {
        try {
          const ScaleSolve s = sp.alpha_constant ? ScaleSolve{1.0, 0.0, {}} : solve_alpha(sp.kappa, d, t);
          ra = std::max(ra, s.residual);
          ts.push_back(t);
          as.push_back(s.value);
        } catch (const NumericalError&) {
          ++undefined;
        }
        try {
          const ScaleSolve s = solve_beta(sp.alpha, d, t);
          rb = std::max(rb, s.residual);
        } catch (const NumericalError&) {
          ++undefined;
        }
      }
      c.expect(ra < 1e-10 && rb < 1e-10, "%s d=%d: max residual alpha %.2e, beta %.2e (%d undefined points)", name, d, ra, rb,
               undefined);
      const double g = rep.gamma_class;
      const double pred = (1.0 - g) / (d + 2.0 - d * g);
      const double idx = fit_regular_variation(ts, as).index;
      if (index_checked) {
        c.expect(undefined == 0 && std::abs(idx - pred) <= 0.02, "%s d=%d: alpha index %.4f vs %.4f (tol 0.02)", name, d, idx,
                 pred);
      } else {
        std::printf("    info %s d=%d: alpha index %.4f vs %.4f (pre-asymptotic, not checked)\n", name, d, idx, pred);
      }
    }
  }
  return c.ok;
}

// ------------------------------------------------------------------ 12

bool c12_solver_cross_validation() {
  Check c;
  Rng rng(4242);
  double worst_sup = 0.0, worst_row = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Box box = k < 10 ? Box(1, 4) : Box(2, 2);
    LatticeField V(box), init(box);
    for (std::size_t i = 0; i < box.size(); ++i) {
      V[i] = -2.0 + 4.0 * rng.uniform();
      init[i] = rng.uniform();
    }
    const double t = 0.5 + rng.uniform();
    const LatticeField a = semigroup_apply(V, t, init, SemigroupMethod::Eigen);
    const LatticeField b = semigroup_apply(V, t, init, SemigroupMethod::Ode);
    for (std::size_t i = 0; i < box.size(); ++i) worst_sup = std::max(worst_sup, std::abs(a[i] - b[i]));
    const Eigen::MatrixXd p = transition_kernel(V, t);
    const LatticeField u = semigroup_apply(V, t, LatticeField(box, 1.0), SemigroupMethod::Eigen);
    for (std::size_t i = 0; i < box.size(); ++i) {
      worst_row = std::max(worst_row, std::abs(p.row(static_cast<Eigen::Index>(i)).sum() - u[i]));
    }
  }
  c.expect(worst_sup <= 1e-8, "eigen vs ODE semigroup, 20 potentials: sup-norm %.2e (tol 1e-8)", worst_sup);
  c.expect(worst_row <= 1e-10, "kernel row sums vs flat solution: %.2e (tol 1e-10)", worst_row);
  return c.ok;
}

// ------------------------------------------------------------------ 13

bool c13_intermittency() {
  Check c;
  const PotentialModel m = PotentialModel::double_exponential(1.0);
  const HFunction H = fast_cumulant(m, 8.0);
  const MassEstimate u1 = moment_walk(H, 1, 1.0, 4.0, 12, 100000, 21);
  const MassEstimate u2 = moment_walk(H, 1, 2.0, 4.0, 12, 100000, 22);
  const double diff = 0.5 * u2.log_estimate - u1.log_estimate;
  const double se = std::sqrt(0.25 * u2.log_se * u2.log_se + u1.log_se * u1.log_se);
  c.expect(diff > 3.0 * se, "t=4 d=1: (1/2) log<U^2> - log<U> = %.5f, SE %.5f (ESS %.0f, %.0f)", diff, se, u1.ess, u2.ess);
  return c.ok;
}

struct Criterion {
  int id;
  const char* title;
  std::function<bool()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::setvbuf(stdout, nullptr, _IONBF, 0);
  const std::vector<Criterion> all{
      {1, "closed-form chi", c1_closed_form_chi},
      {2, "minimizer shape", c2_minimizer_shape},
      {3, "dual objects", c3_dual_objects},
      {4, "log-Sobolev suite", c4_log_sobolev},
      {5, "discrete formula", c5_discrete},
      {6, "gamma -> 1 convergence", c6_gamma_limit},
      {7, "annealed oracle equivalence", c7_annealed_equivalence},
      {8, "single-site identity", c8_single_site},
      {9, "self-intersection oracle", c9_self_intersection},
      {10, "classification table", c10_classification},
      {11, "scale-function residuals", c11_scale_residuals},
      {12, "solver cross-validation", c12_solver_cross_validation},
      {13, "intermittency direction", c13_intermittency},
  };
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);
  int failed = 0;
  for (const auto& cr : all) {
    if (only != 0 && cr.id != only) continue;
    std::printf("criterion %d (%s)\n", cr.id, cr.title);
    const auto t0 = Clock::now();
    bool ok = false;
    try {
      ok = cr.run();
    } catch (const std::exception& e) {
      std::printf("    error: %s\n", e.what());
    }
    std::printf("%s criterion %d: %s (%.1f s)\n", ok ? "PASS" : "FAIL", cr.id, cr.title, seconds_since(t0));
    failed += !ok;
  }
  return failed == 0 ? 0 : 1;
}
