#include "pamlab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Sparse>
#include <boost/numeric/odeint.hpp>

#include "pamlab/error.hpp"
#include "pamlab/kernels.hpp"
#include "pamlab/numerics.hpp"
#include "pamlab/rng.hpp"

namespace pamlab {

// ---------------------------------------------------------------- Box

Box::Box(int d, int radius, Site center) : d_(d), radius_(radius), center_(center), size_(1) {
  if (d < 1 || d > kMaxDim) throw ValidationError("Box: dimension must be 1, 2 or 3");
  if (radius < 0) throw ValidationError("Box: radius must be nonnegative");
  for (int a = d; a < kMaxDim; ++a) center_[static_cast<std::size_t>(a)] = 0;
  const auto s = static_cast<std::size_t>(side());
  for (int a = d - 1; a >= 0; --a) {
    strides_[static_cast<std::size_t>(a)] = size_;
    size_ *= s;
  }
}

bool Box::contains(const Site& z) const {
  for (int a = 0; a < d_; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    if (std::abs(z[ua] - center_[ua]) > radius_) return false;
  }
  return true;
}

std::size_t Box::index(const Site& z) const {
  std::size_t idx = 0;
  for (int a = 0; a < d_; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const int c = z[ua] - center_[ua] + radius_;
    if (c < 0 || c >= side()) {
      std::ostringstream msg;
      msg << "site outside box (axis " << a << ", coordinate " << z[ua] << ")";
      throw ValidationError(msg.str());
    }
    idx += static_cast<std::size_t>(c) * strides_[ua];
  }
  return idx;
}

Site Box::site(std::size_t index) const {
  Site z{};
  for (int a = 0; a < d_; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const auto c = static_cast<int>(index / strides_[ua]);
    index %= strides_[ua];
    z[ua] = c - radius_ + center_[ua];
  }
  return z;
}

bool Box::contains_with_margin(const Box& inner, int margin) const {
  if (inner.dim() != d_) return false;
  for (int a = 0; a < d_; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    if (inner.center_[ua] - inner.radius_ - margin < center_[ua] - radius_) return false;
    if (inner.center_[ua] + inner.radius_ + margin > center_[ua] + radius_) return false;
  }
  return true;
}

// ---------------------------------------------------------------- LatticeField

LatticeField::LatticeField(Box b, std::vector<double> v) : box(b), values(std::move(v)) {
  if (values.size() != box.size()) throw ValidationError("LatticeField: value count does not match box");
}

double LatticeField::sum() const { return pairwise_sum(values); }

double LatticeField::max_finite() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (std::isfinite(v)) m = std::max(m, v);
  }
  return m;
}

LatticeField laplacian_apply(const LatticeField& f) {
  for (double v : f.values) {
    if (!std::isfinite(v)) throw ValidationError("laplacian_apply: field must be finite");
  }
  LatticeField out(f.box);
  kernels::omp::laplacian_box(f.box, f.values, out.values);
  return out;
}

// ---------------------------------------------------------------- AndersonOperator

AndersonOperator::AndersonOperator(const LatticeField& potential)
    : box_(potential.box), to_active_(potential.box.size(), -1), max_potential_(-std::numeric_limits<double>::infinity()) {
  for (std::size_t i = 0; i < box_.size(); ++i) {
    const double v = potential.values[i];
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw ValidationError("AndersonOperator: potential must be finite or -inf");
    }
    if (v == -std::numeric_limits<double>::infinity()) continue;
    to_active_[i] = static_cast<std::int64_t>(active_.size());
    active_.push_back(i);
    max_potential_ = std::max(max_potential_, v);
  }
  const int d = box_.dim();
  offsets_.reserve(active_.size() + 1);
  offsets_.push_back(0);
  diagonal_.reserve(active_.size());
  for (const std::size_t i : active_) {
    const Site z = box_.site(i);
    for (int a = 0; a < d; ++a) {
      for (int step : {-1, 1}) {
        Site y = z;
        y[static_cast<std::size_t>(a)] += step;
        if (!box_.contains(y)) continue;
        const auto j = to_active_[box_.index(y)];
        if (j >= 0) neighbors_.push_back(static_cast<std::int32_t>(j));
      }
    }
    offsets_.push_back(static_cast<std::int64_t>(neighbors_.size()));
    diagonal_.push_back(potential.values[i] - 2.0 * d);
  }
}

void AndersonOperator::apply(std::span<const double> x, std::span<double> y) const {
  kernels::omp::csr_apply(offsets_, neighbors_, diagonal_, x, y);
}

Eigen::MatrixXd AndersonOperator::dense() const {
  const auto n = static_cast<Eigen::Index>(active_.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    m(i, i) = diagonal_[ui];
    for (auto k = offsets_[ui]; k < offsets_[ui + 1]; ++k) m(i, neighbors_[static_cast<std::size_t>(k)]) = 1.0;
  }
  return m;
}

std::vector<double> AndersonOperator::restrict(const LatticeField& f) const {
  if (!(f.box == box_)) throw ValidationError("field box does not match operator box");
  std::vector<double> out(active_.size());
  for (std::size_t k = 0; k < active_.size(); ++k) out[k] = f.values[active_[k]];
  return out;
}

LatticeField AndersonOperator::extend(std::span<const double> active_values) const {
  LatticeField out(box_);
  for (std::size_t k = 0; k < active_.size(); ++k) out.values[active_[k]] = active_values[k];
  return out;
}

// ---------------------------------------------------------------- eigensolvers

namespace {

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double s = v.sum();
  if (std::abs(s) > 1e-12 * std::sqrt(static_cast<double>(v.size()))) {
    if (s < 0.0) v = -v;
    return;
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

Eigen::VectorXd apply_op(const AndersonOperator& op, const Eigen::VectorXd& x) {
  Eigen::VectorXd y(x.size());
  op.apply(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
           std::span<double>(y.data(), static_cast<std::size_t>(y.size())));
  return y;
}

void orthogonalize(Eigen::VectorXd& w, const std::vector<Eigen::VectorXd>& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& q : basis) w -= q.dot(w) * q;
  }
}

struct Eigenpairs {
  std::vector<double> values;
  std::vector<Eigen::VectorXd> vectors;
};

Eigenpairs lanczos_top(const AndersonOperator& op, int want, double tol) {
  const auto n = static_cast<Eigen::Index>(op.active_size());
  Eigenpairs out;
  constexpr int kMaxRestarts = 400;
  for (int j = 0; j < want; ++j) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
    orthogonalize(v, out.vectors);
    if (v.norm() < 1e-8) {
      for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = bits_to_open_unit(splitmix64(static_cast<std::uint64_t>(i) + 977u * static_cast<std::uint64_t>(j))) - 0.5;
      }
      orthogonalize(v, out.vectors);
    }
    v.normalize();
    bool converged = false;
    double last_residual = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < kMaxRestarts && !converged; ++restart) {
      const Eigen::Index m_max = std::min<Eigen::Index>(n - j, 80);
      std::vector<Eigen::VectorXd> basis{v};
      std::vector<double> alpha, beta;
      for (Eigen::Index i = 0; i < m_max; ++i) {
        Eigen::VectorXd w = apply_op(op, basis.back());
        alpha.push_back(w.dot(basis.back()));
        orthogonalize(w, basis);
        orthogonalize(w, out.vectors);
        if (i + 1 == m_max) break;
        const double b = w.norm();
        if (b < 1e-12) break;
        beta.push_back(b);
        basis.push_back(w / b);
      }
      const auto m = static_cast<Eigen::Index>(alpha.size());
      Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
      for (Eigen::Index i = 0; i < m; ++i) {
        tri(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < m) tri(i, i + 1) = tri(i + 1, i) = beta[static_cast<std::size_t>(i)];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
      const Eigen::VectorXd y = es.eigenvectors().col(m - 1);
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < m; ++i) x += y(i) * basis[static_cast<std::size_t>(i)];
      orthogonalize(x, out.vectors);
      x.normalize();
      const double rq = x.dot(apply_op(op, x));
      last_residual = (apply_op(op, x) - rq * x).norm();
      if (last_residual < tol * std::max(1.0, std::abs(rq))) {
        converged = true;
        out.values.push_back(rq);
        out.vectors.push_back(x);
      }
      v = x;
    }
    if (!converged) {
      std::ostringstream msg;
      msg << "Lanczos did not converge for eigenpair " << j << ": residual " << last_residual;
      throw NumericalError(msg.str());
    }
  }
  return out;
}

Eigenpairs dense_top(const AndersonOperator& op, int want) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense());
  if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
  const auto n = es.eigenvalues().size();
  Eigenpairs out;
  for (int k = 0; k < want; ++k) {
    out.values.push_back(es.eigenvalues()(n - 1 - k));
    out.vectors.emplace_back(es.eigenvectors().col(n - 1 - k));
  }
  return out;
}

}  // namespace

EigenDecomposition eig(const LatticeField& potential, std::optional<int> k, double tol) {
  const AndersonOperator op(potential);
  const auto n = op.active_size();
  if (n == 0) throw ValidationError("eig: every site is a trap");
  const bool full = !k.has_value();
  const int want = full ? static_cast<int>(n) : *k;
  if (want < 1 || static_cast<std::size_t>(want) > n) throw ValidationError("eig: k must lie in [1, active sites]");
  if (full && n > kDenseLimit) throw ValidationError("eig: full spectrum requested on a box above the dense limit");

  Eigenpairs pairs = (full || n <= 512) ? dense_top(op, want) : lanczos_top(op, want, tol);

  EigenDecomposition out{potential.box, {}, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(potential.box.size()), want), {}};
  const auto active = op.active_sites();
  for (int c = 0; c < want; ++c) {
    Eigen::VectorXd& v = pairs.vectors[static_cast<std::size_t>(c)];
    fix_sign(v);
    const double lambda = pairs.values[static_cast<std::size_t>(c)];
    const double residual = (apply_op(op, v) - lambda * v).norm();
    if (residual > tol * std::max(1.0, std::abs(lambda))) {
      std::ostringstream msg;
      msg << "eigenpair " << c << " residual " << residual << " exceeds tolerance " << tol;
      throw NumericalError(msg.str());
    }
    out.eigenvalues.push_back(lambda);
    out.residuals.push_back(residual);
    for (std::size_t a = 0; a < active.size(); ++a) out.vectors(static_cast<Eigen::Index>(active[a]), c) = v(static_cast<Eigen::Index>(a));
  }
  return out;
}

// ---------------------------------------------------------------- semigroup

double ScaledField::log_sum() const { return log_scale + std::log(field.sum()); }

namespace {

void check_semigroup_inputs(const LatticeField& potential, double t, const LatticeField& init) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("semigroup: t must be finite and nonnegative");
  if (!(init.box == potential.box)) throw ValidationError("semigroup: init and potential live on different boxes");
  for (double v : init.values) {
    if (!std::isfinite(v)) throw ValidationError("semigroup: initial datum must be finite");
  }
}

// Round-off can leave tiny negatives where the exact semigroup is positive.
void clamp_if_positive_input(const LatticeField& init, LatticeField& out) {
  if (std::all_of(init.values.begin(), init.values.end(), [](double v) { return v >= 0.0; })) {
    for (double& v : out.values) v = std::max(v, 0.0);
  }
}

ScaledField eigen_path(const EigenDecomposition& spectrum, double t, const LatticeField& init) {
  const double top = spectrum.eigenvalues.front();
  const double shift = (top * t > 700.0) ? top : 0.0;
  const Eigen::Map<const Eigen::VectorXd> f(init.values.data(), static_cast<Eigen::Index>(init.values.size()));
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(f.size());
  for (std::size_t k = 0; k < spectrum.eigenvalues.size(); ++k) {
    const auto col = spectrum.vectors.col(static_cast<Eigen::Index>(k));
    acc += std::exp(t * (spectrum.eigenvalues[k] - shift)) * col.dot(f) * col;
  }
  ScaledField out{LatticeField(init.box, std::vector<double>(acc.data(), acc.data() + acc.size())), shift * t};
  clamp_if_positive_input(init, out.field);
  return out;
}

ScaledField ode_path(const AndersonOperator& op, double t, const LatticeField& init) {
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;
  const double vmax = op.max_potential();
  const double shift = (vmax * t > 700.0) ? vmax : 0.0;
  State y = op.restrict(init);
  double scale = 0.0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return {LatticeField(init.box), 0.0};
  auto rhs = [&op, shift](const State& x, State& dx, double) {
    op.apply(x, dx);
    if (shift != 0.0) {
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] -= shift * x[i];
    }
  };
  double spread = 0.0;
  for (double dgl : op.diagonal()) spread = std::max(spread, std::abs(dgl - shift));
  const double dt0 = std::min(t, 0.1 / (spread + 2.0 * op.box().dim() + 1.0));
  auto stepper = odeint::make_controlled(1e-14 * scale, 1e-11, odeint::runge_kutta_dopri5<State>());
  odeint::integrate_adaptive(stepper, rhs, y, 0.0, t, dt0);
  ScaledField out{op.extend(y), shift * t};
  clamp_if_positive_input(init, out.field);
  return out;
}

}  // namespace

ScaledField semigroup_apply_eigen(const EigenDecomposition& spectrum, double t, const LatticeField& init) {
  if (!(init.box == spectrum.box)) throw ValidationError("semigroup: init and spectrum live on different boxes");
  if (!(t >= 0.0)) throw ValidationError("semigroup: t must be nonnegative");
  if (t == 0.0) return {init, 0.0};
  return eigen_path(spectrum, t, init);
}

ScaledField semigroup_apply_scaled(const LatticeField& potential, double t, const LatticeField& init,
                                   SemigroupMethod method) {
  check_semigroup_inputs(potential, t, init);
  const AndersonOperator op(potential);
  if (t == 0.0) return {init, 0.0};
  if (op.active_size() == 0) return {LatticeField(init.box), 0.0};
  if (method == SemigroupMethod::Auto) {
    method = op.active_size() <= 1024 ? SemigroupMethod::Eigen : SemigroupMethod::Ode;
  }
  if (method == SemigroupMethod::Eigen) {
    if (op.active_size() > kDenseLimit) throw ValidationError("semigroup: eigen path requires a box within the dense limit");
    return eigen_path(eig(potential), t, init);
  }
  return ode_path(op, t, init);
}

LatticeField semigroup_apply(const LatticeField& potential, double t, const LatticeField& init,
                             SemigroupMethod method) {
  ScaledField scaled = semigroup_apply_scaled(potential, t, init, method);
  if (scaled.log_scale == 0.0) return std::move(scaled.field);
  const double factor = std::exp(scaled.log_scale);
  for (double& v : scaled.field.values) {
    v *= factor;
    if (!std::isfinite(v)) throw NumericalError("semigroup: result overflows double; use semigroup_apply_scaled");
  }
  return std::move(scaled.field);
}

// ---------------------------------------------------------------- Green's function

GreenFunction green_function(double lambda, const Box& box, const Box& truncation) {
  if (!(lambda > 0.0)) throw ValidationError("green_function: lambda must be positive");
  if (!truncation.contains_with_margin(box, 1)) {
    throw ValidationError("green_function: truncation must contain the box with margin >= 1");
  }
  const int d = truncation.dim();
  const auto n = static_cast<Eigen::Index>(truncation.size());
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<int> outside_neighbours(truncation.size(), 0);
  for (std::size_t i = 0; i < truncation.size(); ++i) {
    const Site z = truncation.site(i);
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), lambda + 2.0 * d);
    for (int a = 0; a < d; ++a) {
      for (int step : {-1, 1}) {
        Site y = z;
        y[static_cast<std::size_t>(a)] += step;
        if (truncation.contains(y)) {
          triplets.emplace_back(static_cast<int>(i), static_cast<int>(truncation.index(y)), -1.0);
        } else {
          ++outside_neighbours[i];
        }
      }
    }
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
  if (solver.info() != Eigen::Success) throw NumericalError("green_function: factorization failed");

  GreenFunction out{box, truncation, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(box.size()), static_cast<Eigen::Index>(box.size())), 0.0, true};
  std::vector<std::size_t> box_in_trunc(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) box_in_trunc[i] = truncation.index(box.site(i));
  for (std::size_t col = 0; col < box.size(); ++col) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(static_cast<Eigen::Index>(box_in_trunc[col])) = 1.0;
    const Eigen::VectorXd g = solver.solve(rhs);
    double leak = 0.0;
    for (std::size_t i = 0; i < truncation.size(); ++i) {
      if (outside_neighbours[i] > 0) leak += outside_neighbours[i] * g(static_cast<Eigen::Index>(i));
    }
    out.boundary_mass = std::max(out.boundary_mass, leak);
    for (std::size_t row = 0; row < box.size(); ++row) {
      out.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = g(static_cast<Eigen::Index>(box_in_trunc[row]));
    }
  }
  out.margin_ok = out.boundary_mass <= 1e-6;
  return out;
}

}  // namespace pamlab
