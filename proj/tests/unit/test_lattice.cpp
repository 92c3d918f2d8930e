#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "pamlab/error.hpp"
#include "pamlab/lattice.hpp"
#include "pamlab/numerics.hpp"
#include "pamlab/rng.hpp"

using namespace pamlab;

namespace {
LatticeField random_potential(const Box& box, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  LatticeField V(box);
  for (auto& v : V.values) v = lo + (hi - lo) * rng.uniform();
  return V;
}
}  // namespace

TEST_CASE("box indexing") {
  const Box b(2, 3, {1, -1, 0});
  CHECK(b.size() == 49);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(b.index(b.site(i)) == i);
  CHECK(b.contains({4, 2, 0}));
  CHECK_FALSE(b.contains({5, 0, 0}));
  CHECK_THROWS_AS(b.index({5, 0, 0}), ValidationError);
  CHECK(Box(2, 10).contains_with_margin(Box(2, 3), 7));
  CHECK_FALSE(Box(2, 10).contains_with_margin(Box(2, 3), 8));
}

TEST_CASE("laplacian examples") {
  LatticeField one(Box(1, 0), 1.0);
  CHECK(laplacian_apply(one)[0] == -2.0);
  LatticeField delta(Box(2, 2));
  delta.at({0, 0, 0}) = 1.0;
  const LatticeField L = laplacian_apply(delta);
  CHECK(L.at({0, 0, 0}) == -4.0);
  CHECK(L.at({1, 0, 0}) == 1.0);
  CHECK(L.at({0, -1, 0}) == 1.0);
  CHECK(L.at({1, 1, 0}) == 0.0);
  // interior of a linear function is harmonic
  LatticeField lin(Box(1, 4));
  for (std::size_t i = 0; i < lin.values.size(); ++i) lin[i] = static_cast<double>(i);
  CHECK(laplacian_apply(lin)[3] == 0.0);
}

TEST_CASE("single site and tridiagonal spectra") {
  for (int d = 1; d <= 3; ++d) {
    LatticeField V(Box(d, 0), 0.8);
    CHECK(eig(V).eigenvalues[0] == doctest::Approx(0.8 - 2 * d));
  }
  const int n = 11;
  const auto E = eig(LatticeField(Box(1, 5)));
  REQUIRE(E.eigenvalues.size() == n);
  for (int k = 1; k <= n; ++k)
    CHECK(E.eigenvalues[static_cast<std::size_t>(k - 1)] ==
          doctest::Approx(-2.0 + 2.0 * std::cos(k * std::numbers::pi / (n + 1))).epsilon(1e-12));
  // adding a constant shifts the spectrum
  const auto S = eig(LatticeField(Box(1, 5), 1.5));
  for (int k = 0; k < n; ++k) CHECK(S.eigenvalues[static_cast<std::size_t>(k)] == doctest::Approx(E.eigenvalues[static_cast<std::size_t>(k)] + 1.5));
  // orthonormality and sign convention
  const Eigen::MatrixXd G = E.vectors.transpose() * E.vectors;
  CHECK((G - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
  for (int k = 0; k < n; ++k) CHECK(E.vectors.col(k).sum() > -1e-12);
  CHECK(E.vectors.col(0).sum() > 1.0);
}

TEST_CASE("lanczos top-k agrees with the dense spectrum") {
  const Box box(2, 20);
  const LatticeField V = random_potential(box, 5, -1.0, 1.0);
  const auto full = eig(V);
  const auto top = eig(V, 4, 1e-10);
  for (std::size_t k = 0; k < 4; ++k) CHECK(top.eigenvalues[k] == doctest::Approx(full.eigenvalues[k]).epsilon(1e-9));
  CHECK(std::abs(top.vectors.col(0).dot(full.vectors.col(0))) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("traps are removed from the state space") {
  LatticeField V(Box(1, 2));
  V.at({0, 0, 0}) = -std::numeric_limits<double>::infinity();
  const AndersonOperator H(V);
  CHECK(H.active_size() == 4);
  CHECK(H.active_index(2) == -1);
  const auto E = eig(V);
  CHECK(E.eigenvalues.size() == 4);
  CHECK(E.vectors(2, 0) == 0.0);
  CHECK(E.eigenvalues[0] == doctest::Approx(-1.0));  // two decoupled two-site chains
}

TEST_CASE("semigroup basics") {
  const Box box(2, 3);
  const LatticeField V = random_potential(box, 9, -3.0, 3.0);
  LatticeField init(box);
  init.at({0, 0, 0}) = 1.0;
  // t = 0 is the identity
  CHECK(semigroup_apply(V, 0.0, init).values == init.values);
  // constant potential factorizes
  const LatticeField zero(box), c(box, 0.75);
  const LatticeField a = semigroup_apply(zero, 1.3, init), b = semigroup_apply(c, 1.3, init);
  for (std::size_t i = 0; i < box.size(); ++i) CHECK(b[i] == doctest::Approx(std::exp(0.75 * 1.3) * a[i]).epsilon(1e-10));
  // free mass is nonincreasing with the zero boundary
  double prev = 1.0;
  for (double t : {0.5, 1.0, 2.0, 4.0}) {
    const double m = semigroup_apply(zero, t, init).sum();
    CHECK(m <= prev + 1e-12);
    prev = m;
  }
  // semigroup property and positivity
  const LatticeField once = semigroup_apply(V, 1.0, init);
  const LatticeField twice = semigroup_apply(V, 0.4, semigroup_apply(V, 0.6, init));
  for (std::size_t i = 0; i < box.size(); ++i) {
    CHECK(twice[i] == doctest::Approx(once[i]).epsilon(1e-9));
    CHECK(once[i] > 0.0);
  }
}

TEST_CASE("eigen and ode semigroups agree") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int d = seed % 2 ? 2 : 1;
    const Box box(d, 4);
    const LatticeField V = random_potential(box, 100 + seed, -3.0, 3.0);
    LatticeField init(box, 1.0);
    const double t = 0.5 + 0.1 * static_cast<double>(seed % 10);
    const LatticeField e = semigroup_apply(V, t, init, SemigroupMethod::Eigen);
    const LatticeField o = semigroup_apply(V, t, init, SemigroupMethod::Ode);
    double worst = 0.0;
    for (std::size_t i = 0; i < box.size(); ++i) worst = std::max(worst, std::abs(e[i] - o[i]) / std::abs(e[i]));
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("scaled semigroup avoids overflow") {
  const Box box(1, 2);
  const LatticeField V(box, 500.0);
  LatticeField init(box);
  init[2] = 1.0;
  const ScaledField s = semigroup_apply_scaled(V, 10.0, init);
  CHECK(s.log_sum() > 4900.0);
  CHECK_THROWS_AS(semigroup_apply(V, 10.0, init), NumericalError);
}

TEST_CASE("green function") {
  const Box box(1, 3);
  const double lambda = 0.5;
  const GreenFunction G = green_function(lambda, box, Box(1, 80));
  CHECK(G.margin_ok);
  CHECK((G.values - G.values.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  // 1D oracle: G(x, y) = int_0^inf e^{-lambda t} e^{-2t} I_{|x-y|}(2t) dt
  for (int k : {0, 1, 3}) {
    const double oracle =
        integrate([&](double s) { return std::exp(-lambda * s) * std::cyl_bessel_i(k, 2.0 * s) * std::exp(-2.0 * s); },
                  0.0, 200.0, 1e-12)
            .value;
    CHECK(G.values(3, 3 + k) == doctest::Approx(oracle).epsilon(1e-6));
  }
  // row sums of the full resolvent equal 1/lambda away from the boundary
  const GreenFunction W = green_function(lambda, Box(1, 60), Box(1, 61));
  CHECK(W.values.row(60).sum() == doctest::Approx(1.0 / lambda).epsilon(1e-6));
  // large lambda: diagonal ~ 1/(lambda + 2d)
  const GreenFunction H = green_function(1e3, Box(2, 1), Box(2, 10));
  CHECK(H.values(4, 4) == doctest::Approx(1.0 / (1e3 + 4.0)).epsilon(1e-2));
}
