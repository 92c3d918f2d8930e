#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pamlab {

inline constexpr int kMaxDim = 3;

/// Lattice point of Z^d; components beyond the dimension are zero.
using Site = std::array<int, kMaxDim>;

/// Cube {z : |z - center|_inf <= radius} in Z^d, d <= 3. Sites are indexed
/// lexicographically with the first axis varying slowest.
class Box {
 public:
  Box(int d, int radius, Site center = {});

  int dim() const { return d_; }
  int radius() const { return radius_; }
  int side() const { return 2 * radius_ + 1; }
  const Site& center() const { return center_; }
  std::size_t size() const { return size_; }

  bool contains(const Site& z) const;
  /// Linear index of z; throws ValidationError when z lies outside.
  std::size_t index(const Site& z) const;
  Site site(std::size_t index) const;
  std::size_t center_index() const { return index(center_); }
  std::size_t stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

  /// True when `inner` sits inside this box with at least `margin` layers to spare.
  bool contains_with_margin(const Box& inner, int margin) const;

  bool operator==(const Box&) const = default;

 private:
  int d_;
  int radius_;
  Site center_;
  std::size_t size_;
  std::array<std::size_t, kMaxDim> strides_{};
};

/// Real values on the sites of a box; -inf marks a hard trap.
struct LatticeField {
  Box box;
  std::vector<double> values;

  explicit LatticeField(Box b, double fill = 0.0) : box(b), values(b.size(), fill) {}
  LatticeField(Box b, std::vector<double> v);

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double& at(const Site& z) { return values[box.index(z)]; }
  double at(const Site& z) const { return values[box.index(z)]; }

  double sum() const;
  double max_finite() const;
};

/// Discrete Laplacian with the Dirichlet convention: neighbours outside the
/// box contribute the value 0.
LatticeField laplacian_apply(const LatticeField& f);

/// The Anderson Hamiltonian Delta^d + V on a box with zero boundary
/// condition. Sites where V = -inf are removed from the state space.
class AndersonOperator {
 public:
  explicit AndersonOperator(const LatticeField& potential);

  const Box& box() const { return box_; }
  std::size_t active_size() const { return active_.size(); }
  std::span<const std::size_t> active_sites() const { return active_; }
  /// Active-space index of a box site, or -1 for a trap.
  std::int64_t active_index(std::size_t box_index) const { return to_active_[box_index]; }

  /// y = (Delta + V) x on the active space.
  void apply(std::span<const double> x, std::span<double> y) const;
  double max_potential() const { return max_potential_; }

  Eigen::MatrixXd dense() const;

  std::vector<double> restrict(const LatticeField& f) const;
  LatticeField extend(std::span<const double> active_values) const;

  // CSR adjacency among active sites plus the diagonal V - 2d.
  const std::vector<std::int64_t>& offsets() const { return offsets_; }
  const std::vector<std::int32_t>& neighbors() const { return neighbors_; }
  const std::vector<double>& diagonal() const { return diagonal_; }

 private:
  Box box_;
  std::vector<std::size_t> active_;
  std::vector<std::int64_t> to_active_;
  std::vector<std::int64_t> offsets_;
  std::vector<std::int32_t> neighbors_;
  std::vector<double> diagonal_;
  double max_potential_;
};

/// Spectrum of Delta^d + V, eigenvalues in descending order. Eigenvectors are
/// stored column-wise over all box sites (zero on traps), orthonormal, and
/// sign-fixed so each has a positive coordinate sum.
struct EigenDecomposition {
  Box box;
  std::vector<double> eigenvalues;
  Eigen::MatrixXd vectors;
  std::vector<double> residuals;
};

inline constexpr std::size_t kDenseLimit = 4096;

/// Top-k eigenpairs (all of them when k is empty). The full spectrum uses a
/// dense solve and requires at most kDenseLimit active sites; top-k on larger
/// boxes uses restarted Lanczos with locking started from the normalized
/// all-ones vector. Throws NumericalError when a residual stays above tol.
EigenDecomposition eig(const LatticeField& potential, std::optional<int> k = std::nullopt, double tol = 1e-8);

enum class SemigroupMethod { Eigen, Ode, Auto };

/// e^{t(Delta+V)} init, represented as exp(log_scale) * field so that large
/// max(V)*t does not overflow.
struct ScaledField {
  LatticeField field;
  double log_scale = 0.0;

  double log_sum() const;
};

ScaledField semigroup_apply_scaled(const LatticeField& potential, double t, const LatticeField& init,
                                   SemigroupMethod method = SemigroupMethod::Auto);

/// Unscaled variant; throws NumericalError if the result would overflow.
LatticeField semigroup_apply(const LatticeField& potential, double t, const LatticeField& init,
                             SemigroupMethod method = SemigroupMethod::Auto);

/// Same as semigroup_apply_scaled but reusing a computed full spectrum.
ScaledField semigroup_apply_eigen(const EigenDecomposition& spectrum, double t, const LatticeField& init);

struct GreenFunction {
  Box box;
  Box truncation;
  Eigen::MatrixXd values;     ///< G_lambda(x, y) for x, y in box
  double boundary_mass = 0.0; ///< worst-column probability mass lost through the truncation boundary
  bool margin_ok = true;      ///< boundary_mass <= 1e-6
};

/// Resolvent G_lambda = (lambda - Delta)^{-1} of the free walk, approximated on
/// `truncation` with zero boundary condition and restricted to `box`.
GreenFunction green_function(double lambda, const Box& box, const Box& truncation);

}  // namespace pamlab
