#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <ostream>
#include <vector>

namespace pamlab {

enum class GridKind { Cartesian, Radial };

/// Uniform grid for continuum profiles.
///
/// Cartesian: nodes x = -L + i h (i = 0..n-1 per axis, n odd) on [-L, L]^d;
/// the outermost nodes carry the zero boundary value. Quadrature weight h^d.
///
/// Radial: cells with centres r_i = (i + 1/2) h on [0, L] for radially
/// symmetric functions on R^d; the weight of a cell is the exact volume of
/// its spherical shell.
struct Grid {
  GridKind kind = GridKind::Cartesian;
  int d = 1;
  double h = 0.05;
  int n = 0;  ///< nodes per axis (Cartesian) or cells (Radial)

  static Grid cartesian(int d, double L, double h);
  static Grid radial(int d, double L, double h);

  double extent() const;  ///< L
  std::size_t size() const;
  double weight(std::size_t i) const;
  std::array<double, 3> point(std::size_t i) const;
  double radius(std::size_t i) const;
  /// Per-axis node indices of a Cartesian node.
  std::array<int, 3> multi_index(std::size_t i) const;
  std::size_t linear_index(const std::array<int, 3>& m) const;
  bool on_boundary(std::size_t i) const;

  bool operator==(const Grid&) const = default;
};

/// Area of the unit sphere in R^d times r^{d-1}.
double sphere_area(int d, double r);
/// Volume of the ball of radius r in R^d.
double ball_volume(int d, double r);

struct Profile {
  Grid grid;
  std::vector<double> values;

  Profile() = default;
  explicit Profile(Grid g, double fill = 0.0) : grid(g), values(g.size(), fill) {}

  double integral() const;
  double l2_norm_sq() const;
  /// Scales to unit L^2 norm; throws NumericalError for the zero profile.
  void normalize_l2();
  void normalize_l1();
  double max_abs() const;
};

/// f sampled at the nodes. Cartesian boundary nodes are set to zero unless
/// `zero_boundary` is false (potentials such as psi keep their values).
Profile sample(const Grid& grid, const std::function<double(const std::array<double, 3>&)>& f,
               bool zero_boundary = true);

/// int |grad g|^2 with fourth-order central differences (zero outside the
/// grid, even reflection at r = 0 on radial grids).
double gradient_energy(const Profile& g);

/// Largest nodewise |a - b|; grids must match.
double sup_distance(const Profile& a, const Profile& b);
double l2_distance(const Profile& a, const Profile& b);

/// Centre of mass of g^2 (Cartesian only).
std::array<double, 3> barycenter_sq(const Profile& g);

/// Moves the profile by whole nodes (zero fill), Cartesian only.
Profile shift_nodes(const Profile& g, const std::array<int, 3>& shift);

/// CSV with columns x[,y[,z]] (or r), value; 17 significant digits.
void write_csv(std::ostream& os, const Profile& p, const char* value_name = "value");

}  // namespace pamlab
