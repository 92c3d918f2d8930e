#include "pamlab/pam_solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "pamlab/error.hpp"

namespace pamlab {

std::string initial_name(InitialCondition initial) {
  return initial == InitialCondition::Delta0 ? "delta0" : "flat";
}

LatticeField PamSolution::values() const {
  LatticeField out = v;
  if (log_scale == 0.0) return out;
  const double factor = std::exp(log_scale);
  for (double& x : out.values) {
    x *= factor;
    if (!std::isfinite(x)) throw NumericalError("PAM solution overflows double; use log_value_at");
  }
  return out;
}

double PamSolution::log_value_at(const Site& z) const { return log_scale + std::log(v.at(z)); }

PamSolution solve_pam(const LatticeField& xi, double t, InitialCondition initial, SemigroupMethod method) {
  LatticeField init(xi.box, initial == InitialCondition::Flat ? 1.0 : 0.0);
  if (initial == InitialCondition::Delta0) {
    const Site origin{};
    if (!xi.box.contains(origin)) throw ValidationError("solve_pam: delta0 needs the origin inside the box");
    init.at(origin) = 1.0;
  }
  ScaledField s = semigroup_apply_scaled(xi, t, init, method);
  PamSolution out{std::move(s.field), s.log_scale, 0.0, 0.0, t, initial};
  const double sum = out.v.sum();
  out.log_total_mass = sum > 0.0 ? out.log_scale + std::log(sum) : -std::numeric_limits<double>::infinity();
  out.total_mass = std::exp(out.log_total_mass);
  return out;
}

Eigen::MatrixXd transition_kernel(const LatticeField& V, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("transition_kernel: t must be finite and nonnegative");
  if (V.box.size() > kDenseLimit) throw ValidationError("transition_kernel: box exceeds the dense size limit");
  const auto n = static_cast<Eigen::Index>(V.box.size());
  if (t == 0.0) return Eigen::MatrixXd::Identity(n, n);
  const EigenDecomposition spec = eig(V);
  Eigen::VectorXd w(static_cast<Eigen::Index>(spec.eigenvalues.size()));
  for (std::size_t k = 0; k < spec.eigenvalues.size(); ++k) {
    w[static_cast<Eigen::Index>(k)] = std::exp(t * spec.eigenvalues[k]);
  }
  Eigen::MatrixXd p = spec.vectors * w.asDiagonal() * spec.vectors.transpose();
  return p.cwiseMax(0.0);
}

LatticeField shifted_potential(const LatticeField& xi, const HFunction& H, double t, double alpha, int d) {
  if (!(t > 0.0) || !(alpha > 0.0)) throw ValidationError("shifted_potential: t and alpha must be positive");
  const double s = t * std::pow(alpha, -d);
  const double shift = H(s) / s;
  LatticeField out = xi;
  for (double& v : out.values) v -= shift;
  return out;
}

LatticeField shifted_potential(const LatticeField& xi, const PotentialModel& model, double t,
                               const ScaleFunction& alpha, int d) {
  return shifted_potential(xi, cumulant_function(model), t, alpha(t), d);
}

int default_radius_cap(int d) {
  switch (d) {
    case 1:
      return 2000;
    case 2:
      return 60;
    default:
      return 12;
  }
}

int quenched_radius(double t, int cap) {
  const double r = t > 1.0 ? std::ceil(t * std::log(t)) : 1.0;
  return static_cast<int>(std::clamp(r, 1.0, static_cast<double>(cap)));
}

std::vector<QuenchedRow> quenched_rate_series(const PotentialModel& model, const ScalePair& scales,
                                              const QuenchedSetup& setup) {
  model.validate();
  if (model.kind != ModelKind::Constant && !std::isfinite(model.essinf)) {
    throw ValidationError("quenched asymptotics need a potential bounded below (finite essinf)");
  }
  if (setup.t_grid.empty() || setup.seeds.empty()) throw ValidationError("quenched: empty t grid or seed list");
  for (double t : setup.t_grid) {
    if (!(t > 1.0) || !std::isfinite(t)) throw ValidationError("quenched: every t must exceed 1");
  }
  const int cap = setup.radius_cap > 0 ? setup.radius_cap : default_radius_cap(setup.d);
  const HFunction H = cumulant_function(model);

  // Deterministic prediction columns, shared by all seeds.
  std::vector<double> term1(setup.t_grid.size()), term2(setup.t_grid.size());
  for (std::size_t j = 0; j < setup.t_grid.size(); ++j) {
    try {
      const double b = scales.beta(setup.t_grid[j]);
      const double a = scales.alpha(b);
      term1[j] = leading_term(H, scales.alpha, setup.d, 1.0, b);
      term2[j] = setup.chi_tilde / (a * a);
    } catch (const NumericalError&) {
      term1[j] = term2[j] = std::numeric_limits<double>::quiet_NaN();
    }
  }

  int r_max = 1;
  for (double t : setup.t_grid) r_max = std::max(r_max, quenched_radius(t, cap));
  const Box big(setup.d, r_max);

  std::vector<QuenchedRow> rows(setup.seeds.size() * setup.t_grid.size());
  for (std::size_t si = 0; si < setup.seeds.size(); ++si) {
    const LatticeField field = sample_field(model, big, setup.seeds[si], true);
    const auto cell = [&](std::size_t j) {
      const double t = setup.t_grid[j];
      const int radius = quenched_radius(t, cap);
      const Box box(setup.d, radius);
      LatticeField xi(box);
      for (std::size_t i = 0; i < box.size(); ++i) xi[i] = field.at(box.site(i));
      const PamSolution sol = solve_pam(xi, t, InitialCondition::Delta0);
      QuenchedRow& row = rows[si * setup.t_grid.size() + j];
      row.t = t;
      row.rate = sol.log_total_mass / t;
      row.prediction_term1 = term1[j];
      row.prediction_term2 = term2[j];
      row.box_radius = radius;
      row.seed = setup.seeds[si];
      row.capped = radius == cap && std::ceil(t * std::log(t)) > cap;
    };
    const auto n_t = static_cast<std::int64_t>(setup.t_grid.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t j = 0; j < n_t; ++j) {
      try {
        cell(static_cast<std::size_t>(j));
      } catch (...) {
#pragma omp critical(pamlab_quenched_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  return rows;
}

}  // namespace pamlab
