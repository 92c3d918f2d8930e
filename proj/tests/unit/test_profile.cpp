#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pamlab/error.hpp"
#include "pamlab/profile.hpp"

using namespace pamlab;

TEST_CASE("grid geometry") {
  const Grid c = Grid::cartesian(2, 4.0, 0.1);
  CHECK(c.n % 2 == 1);
  CHECK(c.size() == static_cast<std::size_t>(c.n * c.n));
  CHECK(c.extent() == doctest::Approx(4.0));
  CHECK(c.point(0)[0] == doctest::Approx(-4.0));
  CHECK(c.on_boundary(0));
  CHECK_FALSE(c.on_boundary(c.size() / 2));
  CHECK(c.weight(3) == doctest::Approx(0.01));
  const auto m = c.multi_index(37);
  CHECK(c.linear_index(m) == 37);

  for (int d = 1; d <= 3; ++d) {
    const Grid r = Grid::radial(d, 3.0, 0.01);
    double vol = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) vol += r.weight(i);
    CHECK(vol == doctest::Approx(ball_volume(d, 3.0)).epsilon(1e-12));
    CHECK(r.radius(0) == doctest::Approx(0.005));
  }
  CHECK(ball_volume(2, 1.0) == doctest::Approx(std::numbers::pi));
  CHECK(sphere_area(3, 2.0) == doctest::Approx(16.0 * std::numbers::pi));
}

TEST_CASE("sampling keeps or zeroes the boundary") {
  const Grid g = Grid::cartesian(1, 2.0, 0.5);
  const Profile a = sample(g, [](const auto&) { return 1.0; });
  const Profile b = sample(g, [](const auto&) { return 1.0; }, false);
  CHECK(a.values.front() == 0.0);
  CHECK(b.values.front() == 1.0);
  CHECK(a.values[2] == 1.0);
}

TEST_CASE("Gaussian energies") {
  const double rho = 1.3;
  auto gauss = [rho](int d) {
    return [rho, d](const std::array<double, 3>& x) {
      const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
      return std::pow(rho / std::numbers::pi, d / 4.0) * std::exp(-rho * r2 / 2.0);
    };
  };
  // int |grad g_rho|^2 = rho d / 2
  const Profile g1 = sample(Grid::cartesian(1, 8.0, 0.02), gauss(1));
  CHECK(g1.l2_norm_sq() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(gradient_energy(g1) == doctest::Approx(rho / 2.0).epsilon(1e-6));
  const Profile g2 = sample(Grid::radial(2, 8.0, 0.01), gauss(2));
  CHECK(g2.l2_norm_sq() == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(gradient_energy(g2) == doctest::Approx(rho).epsilon(1e-3));
  const Profile g3 = sample(Grid::radial(3, 8.0, 0.01), gauss(3));
  CHECK(gradient_energy(g3) == doctest::Approx(1.5 * rho).epsilon(1e-3));
}

TEST_CASE("normalization, distances and shifts") {
  const Grid g = Grid::cartesian(1, 3.0, 0.1);
  Profile p = sample(g, [](const auto& x) { return std::exp(-x[0] * x[0]); });
  p.normalize_l2();
  CHECK(p.l2_norm_sq() == doctest::Approx(1.0));
  CHECK(barycenter_sq(p)[0] == doctest::Approx(0.0).epsilon(1e-12));
  const Profile s = shift_nodes(p, {5, 0, 0});
  CHECK(barycenter_sq(s)[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(sup_distance(p, p) == 0.0);
  CHECK(l2_distance(p, s) > 0.0);
  Profile z(g);
  CHECK_THROWS_AS(z.normalize_l2(), NumericalError);
  Profile q = p;
  q.normalize_l1();
  CHECK(q.integral() == doctest::Approx(1.0));
}

TEST_CASE("csv output") {
  Profile p(Grid::cartesian(2, 1.0, 0.5), 0.5);
  std::ostringstream os;
  write_csv(os, p, "g");
  const std::string s = os.str();
  CHECK(s.rfind("x,y,g\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 26);
  std::ostringstream r;
  write_csv(r, Profile(Grid::radial(3, 1.0, 0.5)));
  CHECK(r.str().rfind("r,value\n", 0) == 0);
}
