#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "pamlab/error.hpp"
#include "pamlab/numerics.hpp"

using namespace pamlab;

TEST_CASE("pairwise sum of many small terms") {
  std::vector<double> v(1 << 20, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(0.1 * (1 << 20)).epsilon(1e-14));
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
}

TEST_CASE("log_sum_exp") {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> big{1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  std::vector<double> with_inf{-inf, 0.0};
  CHECK(log_sum_exp(with_inf) == doctest::Approx(0.0));
  std::vector<double> all_inf{-inf, -inf};
  CHECK(log_sum_exp(all_inf) == -inf);
}

TEST_CASE("geometric grid") {
  const auto g = geometric_grid(1e2, 1e8, 13);
  REQUIRE(g.size() == 13);
  CHECK(g.front() == 1e2);
  CHECK(g.back() == 1e8);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] / g[i - 1] == doctest::Approx(std::sqrt(10.0)));
}

TEST_CASE("adaptive quadrature") {
  CHECK(integrate([](double x) { return x * x; }, 0.0, 1.0).value == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(integrate([](double x) { return std::exp(-x); }, 0.0, 50.0).value ==
        doctest::Approx(1.0 - std::exp(-50.0)).epsilon(1e-13));
  // integrable endpoint singularity
  CHECK(integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, 1e-10).value ==
        doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("root finding") {
  CHECK(find_root([](double x) { return std::cos(x); }, 0.0, 2.0) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
  CHECK_THROWS_AS(find_root([](double x) { return x * x + 1.0; }, -1.0, 1.0), NumericalError);
  std::vector<double> grid{0.5, 1.5, 2.5, 3.5, 4.5};
  const auto br = scan_sign_changes([](double x) { return std::sin(x); }, grid);
  REQUIRE(br.size() == 1);
  CHECK(br[0].first == 2.5);
}

TEST_CASE("least squares") {
  std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const LinearFit f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.rms_residual < 1e-12);

  std::vector<double> t = geometric_grid(1e2, 1e8, 30), v;
  for (double s : t) v.push_back(std::pow(s, 0.3) * std::log(s));
  const RegularVariationFit r = fit_regular_variation(t, v);
  CHECK(r.index == doctest::Approx(0.3).epsilon(1e-8));
  CHECK(r.log_log_coeff == doctest::Approx(1.0).epsilon(1e-8));
}
