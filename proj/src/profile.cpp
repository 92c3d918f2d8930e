#include "pamlab/profile.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>

#include "pamlab/error.hpp"
#include "pamlab/numerics.hpp"

namespace pamlab {

namespace {

void check_grid_args(int d, double L, double h) {
  if (d < 1 || d > 3) throw ValidationError("grid dimension must be 1, 2 or 3");
  if (!(h > 0.0) || !(L > h) || !std::isfinite(L)) throw ValidationError("grid needs 0 < h < L");
}

int ipow(int base, int e) {
  int r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

}  // namespace

double sphere_area(int d, double r) {
  switch (d) {
    case 1:
      return 2.0;
    case 2:
      return 2.0 * std::numbers::pi * r;
    default:
      return 4.0 * std::numbers::pi * r * r;
  }
}

double ball_volume(int d, double r) {
  switch (d) {
    case 1:
      return 2.0 * r;
    case 2:
      return std::numbers::pi * r * r;
    default:
      return 4.0 / 3.0 * std::numbers::pi * r * r * r;
  }
}

Grid Grid::cartesian(int d, double L, double h) {
  check_grid_args(d, L, h);
  const int half = static_cast<int>(std::lround(L / h));
  if (ipow(2 * half + 1, d) > 4'000'000) throw ValidationError("cartesian grid too large");
  return {GridKind::Cartesian, d, h, 2 * half + 1};
}

Grid Grid::radial(int d, double L, double h) {
  check_grid_args(d, L, h);
  return {GridKind::Radial, d, h, static_cast<int>(std::lround(L / h))};
}

double Grid::extent() const { return kind == GridKind::Cartesian ? (n - 1) / 2 * h : n * h; }

std::size_t Grid::size() const {
  return kind == GridKind::Cartesian ? static_cast<std::size_t>(ipow(n, d)) : static_cast<std::size_t>(n);
}

double Grid::weight(std::size_t i) const {
  if (kind == GridKind::Cartesian) return std::pow(h, d);
  const double a = static_cast<double>(i) * h;
  return ball_volume(d, a + h) - ball_volume(d, a);
}

std::array<int, 3> Grid::multi_index(std::size_t i) const {
  std::array<int, 3> m{};
  for (int a = d - 1; a >= 0; --a) {
    m[static_cast<std::size_t>(a)] = static_cast<int>(i % static_cast<std::size_t>(n));
    i /= static_cast<std::size_t>(n);
  }
  return m;
}

std::size_t Grid::linear_index(const std::array<int, 3>& m) const {
  std::size_t i = 0;
  for (int a = 0; a < d; ++a) i = i * static_cast<std::size_t>(n) + static_cast<std::size_t>(m[static_cast<std::size_t>(a)]);
  return i;
}

std::array<double, 3> Grid::point(std::size_t i) const {
  std::array<double, 3> x{};
  if (kind == GridKind::Radial) {
    x[0] = (static_cast<double>(i) + 0.5) * h;
    return x;
  }
  const auto m = multi_index(i);
  const double L = extent();
  for (int a = 0; a < d; ++a) x[static_cast<std::size_t>(a)] = -L + m[static_cast<std::size_t>(a)] * h;
  return x;
}

double Grid::radius(std::size_t i) const {
  const auto x = point(i);
  return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
}

bool Grid::on_boundary(std::size_t i) const {
  if (kind == GridKind::Radial) return false;
  const auto m = multi_index(i);
  for (int a = 0; a < d; ++a) {
    const int k = m[static_cast<std::size_t>(a)];
    if (k == 0 || k == n - 1) return true;
  }
  return false;
}

double Profile::integral() const {
  std::vector<double> terms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) terms[i] = grid.weight(i) * values[i];
  return pairwise_sum(terms);
}

double Profile::l2_norm_sq() const {
  std::vector<double> terms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) terms[i] = grid.weight(i) * values[i] * values[i];
  return pairwise_sum(terms);
}

void Profile::normalize_l2() {
  const double n2 = l2_norm_sq();
  if (!(n2 > 0.0) || !std::isfinite(n2)) throw NumericalError("cannot normalize a zero or non-finite profile");
  const double s = 1.0 / std::sqrt(n2);
  for (double& v : values) v *= s;
}

void Profile::normalize_l1() {
  const double m = integral();
  if (!(m > 0.0) || !std::isfinite(m)) throw NumericalError("cannot normalize a profile without positive mass");
  for (double& v : values) v /= m;
}

double Profile::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

Profile sample(const Grid& grid, const std::function<double(const std::array<double, 3>&)>& f, bool zero_boundary) {
  Profile p(grid);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    p.values[i] = zero_boundary && grid.on_boundary(i) ? 0.0 : f(grid.point(i));
  }
  return p;
}

double gradient_energy(const Profile& g) {
  const Grid& grid = g.grid;
  const double h = grid.h;
  std::vector<double> terms(g.values.size(), 0.0);
  if (grid.kind == GridKind::Radial) {
    const int n = grid.n;
    const auto at = [&](int k) {
      if (k < 0) k = -k - 1;  // cell -1 mirrors cell 0
      return k < n ? g.values[static_cast<std::size_t>(k)] : 0.0;
    };
    for (int i = 0; i < n; ++i) {
      const double dg = (-at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2)) / (12.0 * h);
      terms[static_cast<std::size_t>(i)] = grid.weight(static_cast<std::size_t>(i)) * dg * dg;
    }
    return pairwise_sum(terms);
  }
  const int n = grid.n;
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const auto m = grid.multi_index(i);
    double sq = 0.0;
    for (int a = 0; a < grid.d; ++a) {
      const auto at = [&](int off) {
        auto mm = m;
        const int k = mm[static_cast<std::size_t>(a)] + off;
        if (k < 0 || k >= n) return 0.0;
        mm[static_cast<std::size_t>(a)] = k;
        return g.values[grid.linear_index(mm)];
      };
      const double dg = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
      sq += dg * dg;
    }
    terms[i] = grid.weight(i) * sq;
  }
  return pairwise_sum(terms);
}

double sup_distance(const Profile& a, const Profile& b) {
  if (!(a.grid == b.grid)) throw ValidationError("profiles live on different grids");
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

double l2_distance(const Profile& a, const Profile& b) {
  if (!(a.grid == b.grid)) throw ValidationError("profiles live on different grids");
  Profile diff(a.grid);
  for (std::size_t i = 0; i < a.values.size(); ++i) diff.values[i] = a.values[i] - b.values[i];
  return std::sqrt(diff.l2_norm_sq());
}

std::array<double, 3> barycenter_sq(const Profile& g) {
  if (g.grid.kind != GridKind::Cartesian) throw ValidationError("barycenter needs a cartesian grid");
  std::array<double, 3> c{};
  double mass = 0.0;
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const double w = g.values[i] * g.values[i];
    const auto x = g.grid.point(i);
    for (int a = 0; a < g.grid.d; ++a) c[static_cast<std::size_t>(a)] += w * x[static_cast<std::size_t>(a)];
    mass += w;
  }
  if (mass > 0.0) {
    for (double& v : c) v /= mass;
  }
  return c;
}

Profile shift_nodes(const Profile& g, const std::array<int, 3>& shift) {
  if (g.grid.kind != GridKind::Cartesian) throw ValidationError("shift needs a cartesian grid");
  Profile out(g.grid);
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    auto m = g.grid.multi_index(i);
    bool inside = true;
    for (int a = 0; a < g.grid.d; ++a) {
      int& k = m[static_cast<std::size_t>(a)];
      k -= shift[static_cast<std::size_t>(a)];
      if (k < 0 || k >= g.grid.n) inside = false;
    }
    if (inside && !g.grid.on_boundary(i)) out.values[i] = g.values[g.grid.linear_index(m)];
  }
  return out;
}

void write_csv(std::ostream& os, const Profile& p, const char* value_name) {
  static const char* axes[] = {"x", "y", "z"};
  if (p.grid.kind == GridKind::Radial) {
    os << "r";
  } else {
    for (int a = 0; a < p.grid.d; ++a) os << (a ? "," : "") << axes[a];
  }
  os << ',' << value_name << '\n';
  os << std::setprecision(17);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const auto x = p.grid.point(i);
    const int cols = p.grid.kind == GridKind::Radial ? 1 : p.grid.d;
    for (int a = 0; a < cols; ++a) os << (a ? "," : "") << x[static_cast<std::size_t>(a)];
    os << ',' << p.values[i] << '\n';
  }
}

}  // namespace pamlab
