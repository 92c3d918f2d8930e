#include "pamlab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "pamlab/error.hpp"

namespace pamlab {

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 16;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double log_sum_exp(std::span<const double> log_values) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : log_values) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  std::vector<double> shifted(log_values.size());
  std::transform(log_values.begin(), log_values.end(), shifted.begin(),
                 [m](double v) { return std::exp(v - m); });
  return m + std::log(pairwise_sum(shifted));
}

std::vector<double> geometric_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) {
    throw ValidationError("geometric_grid: need 0 < lo < hi and n >= 2");
  }
  std::vector<double> grid(static_cast<std::size_t>(n));
  const double step = std::log(hi / lo) / (n - 1);
  for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  grid.back() = hi;
  return grid;
}

namespace {

struct Panel {
  double a, b, value, error, l1;
  bool operator<(const Panel& o) const { return error < o.error; }
};

// One G15/K31 pair on [a, b] from the Boost node tables. The error is
// computed here rather than taken from Boost's adaptive driver, which in
// some releases reports it on the reference interval instead of [a, b].
Panel gk31(const std::function<double(double)>& f, double a, double b) {
  using K31 = boost::math::quadrature::gauss_kronrod<double, 31>;
  using G15 = boost::math::quadrature::gauss<double, 15>;
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const auto& x = K31::abscissa();
  const auto& wk = K31::weights();
  const auto& wg = G15::weights();
  double f0 = f(mid);
  double kron = f0 * wk[0];
  double gauss = f0 * wg[0];
  double l1 = std::abs(kron);
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double fp = f(mid + half * x[i]);
    const double fm = f(mid - half * x[i]);
    kron += (fp + fm) * wk[i];
    l1 += (std::abs(fp) + std::abs(fm)) * wk[i];
    if (i % 2 == 0) gauss += (fp + fm) * wg[i / 2];
  }
  return {a, b, kron * half, std::abs(kron - gauss) * half, l1 * std::abs(half)};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double rel_tol, double abs_tol) {
  if (a == b) return {};
  constexpr int kMaxPanels = 1 << 14;
  std::priority_queue<Panel> queue;
  queue.push(gk31(f, a, b));
  double value = queue.top().value;
  double error = queue.top().error;
  double l1 = queue.top().l1;
  const auto target = [&] {
    return std::max({abs_tol, rel_tol * l1, 50.0 * std::numeric_limits<double>::epsilon() * l1});
  };
  while (error > target() && static_cast<int>(queue.size()) < kMaxPanels && std::isfinite(value)) {
    const Panel worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Panel left = gk31(f, worst.a, mid);
    const Panel right = gk31(f, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    l1 += left.l1 + right.l1 - worst.l1;
    queue.push(left);
    queue.push(right);
  }
  // Re-sum to shed the drift of the running updates.
  std::vector<double> values, errors;
  while (!queue.empty()) {
    values.push_back(queue.top().value);
    errors.push_back(queue.top().error);
    queue.pop();
  }
  value = pairwise_sum(values);
  error = pairwise_sum(errors);
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << "quadrature on [" << a << ", " << b << "] produced a non-finite value";
    throw NumericalError(msg.str());
  }
  if (error > 100.0 * target()) {
    std::ostringstream msg;
    msg << "quadrature on [" << a << ", " << b << "] did not converge: achieved error bound " << error
        << " for value " << value;
    throw NumericalError(msg.str());
  }
  return {value, error};
}

double find_root(const std::function<double(double)>& f, double lo, double hi) {
  const double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (!std::isfinite(flo) || !std::isfinite(fhi) || (flo > 0.0) == (fhi > 0.0)) {
    std::ostringstream msg;
    msg << "no sign change in bracket [" << lo << ", " << hi << "]: f=" << flo << ", " << fhi;
    throw NumericalError(msg.str());
  }
  boost::uintmax_t max_iter = 400;
  const auto tol = boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 2);
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, max_iter);
  return 0.5 * (a + b);
}

std::vector<std::pair<double, double>> scan_sign_changes(const std::function<double(double)>& f,
                                                         std::span<const double> grid) {
  std::vector<std::pair<double, double>> brackets;
  if (grid.empty()) return brackets;
  double prev_x = grid[0];
  double prev_f = f(prev_x);
  if (prev_f == 0.0) brackets.emplace_back(prev_x, prev_x);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double x = grid[i];
    const double fx = f(x);
    if (fx == 0.0) {
      brackets.emplace_back(x, x);
    } else if (std::isfinite(prev_f) && std::isfinite(fx) && prev_f != 0.0 && (prev_f > 0.0) != (fx > 0.0)) {
      brackets.emplace_back(prev_x, x);
    }
    prev_x = x;
    prev_f = fx;
  }
  return brackets;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("fit_line: need >= 2 paired samples");
  double rms = 0.0;
  const auto coeffs = least_squares({std::vector<double>(x.begin(), x.end()), std::vector<double>(x.size(), 1.0)}, y, &rms);
  return {coeffs[0], coeffs[1], rms};
}

std::vector<double> least_squares(const std::vector<std::vector<double>>& columns, std::span<const double> y,
                                  double* rms_residual) {
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto k = static_cast<Eigen::Index>(columns.size());
  if (k == 0 || n < k) throw ValidationError("least_squares: underdetermined system");
  Eigen::MatrixXd design(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    if (static_cast<Eigen::Index>(columns[static_cast<std::size_t>(j)].size()) != n) {
      throw ValidationError("least_squares: column length mismatch");
    }
    for (Eigen::Index i = 0; i < n; ++i) design(i, j) = columns[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  }
  const Eigen::Map<const Eigen::VectorXd> rhs(y.data(), n);
  const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(rhs);
  if (rms_residual != nullptr) {
    *rms_residual = std::sqrt((design * beta - rhs).squaredNorm() / static_cast<double>(n));
  }
  return {beta.data(), beta.data() + k};
}

RegularVariationFit fit_regular_variation(std::span<const double> t, std::span<const double> f) {
  if (t.size() != f.size() || t.size() < 4) throw ValidationError("fit_regular_variation: need >= 4 samples");
  std::vector<double> log_t, log_log_t, ones(t.size(), 1.0), log_f;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > std::exp(1.0)) || !(f[i] > 0.0) || !std::isfinite(f[i])) {
      std::ostringstream msg;
      msg << "fit_regular_variation: need t > e and finite f > 0, got f(" << t[i] << ") = " << f[i];
      throw NumericalError(msg.str());
    }
    log_t.push_back(std::log(t[i]));
    log_log_t.push_back(std::log(std::log(t[i])));
    log_f.push_back(std::log(f[i]));
  }
  RegularVariationFit fit;
  const auto c = least_squares({log_t, log_log_t, ones}, log_f, &fit.rms_residual);
  fit.index = c[0];
  fit.log_log_coeff = c[1];
  return fit;
}

}  // namespace pamlab
