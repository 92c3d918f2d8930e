#include <doctest.h>

#include <cmath>

#include "pamlab/numerics.hpp"
#include "pamlab/potential_models.hpp"
#include "pamlab/regvar_classifier.hpp"
#include "pamlab/scale_functions.hpp"

using namespace pamlab;

TEST_CASE("alpha for linear kappa is one") {
  const HFunction kappa = [](double s) { return s; };
  for (int d = 1; d <= 3; ++d)
    for (double t : {10.0, 1e3, 1e6}) CHECK(alpha_of_t(kappa, d, t) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("alpha for square-root kappa in d=1") {
  const HFunction kappa = [](double s) { return std::sqrt(s); };
  for (double t : {10.0, 1e3, 1e6}) {
    const ScaleSolve s = solve_alpha(kappa, 1, t);
    CHECK(s.value == doctest::Approx(std::pow(t, 0.2)).epsilon(1e-9));
    CHECK(s.residual < 1e-10);
  }
}

TEST_CASE("alpha for kappa = s/log s is slowly growing") {
  const HFunction kappa = [](double s) { return s / std::log(s); };
  const double a4 = alpha_of_t(kappa, 1, 1e4), a8 = alpha_of_t(kappa, 1, 1e8);
  CHECK(a8 > a4);
  CHECK(std::log(a8 / a4) / std::log(1e4) < 0.1);
}

TEST_CASE("beta") {
  const ScaleFunction one = [](double) { return 1.0; };
  for (int d = 1; d <= 2; ++d)
    for (double t : {3.0, 100.0, 1e6}) CHECK(beta_of_t(one, d, t) == doctest::Approx(d * std::log(t)).epsilon(1e-10));
  const ScaleFunction a = [](double b) { return std::pow(b, 0.2); };
  double prev = 0.0;
  for (double t : {10.0, 1e3, 1e6}) {
    const double b = beta_of_t(a, 1, t);
    CHECK(b == doctest::Approx(std::pow(std::log(t), 5.0 / 3.0)).epsilon(1e-9));
    CHECK(b > prev);
    prev = b;
  }
}

TEST_CASE("leading term") {
  const HFunction H = [](double s) { return std::lgamma(1.0 + s); };
  const ScaleFunction one = [](double) { return 1.0; };
  CHECK(leading_term(H, one, 1, 1.0, 10.0) == doctest::Approx(std::lgamma(11.0) / 10.0).epsilon(1e-14));
  CHECK(leading_term(H, one, 1, 1.0, 10.0) == doctest::Approx(1.5102).epsilon(1e-4));
  CHECK(leading_term([](double) { return 0.0; }, one, 2, 1.0, 10.0) == 0.0);
  // p-scaling: the p-th term at t equals the first at p t
  const ScaleFunction a = [](double s) { return std::pow(s, 0.2); };
  CHECK(leading_term(H, a, 1, 3.0, 50.0) == doctest::Approx(leading_term(H, a, 1, 1.0, 150.0)).epsilon(1e-14));
}

TEST_CASE("scale pairs of classified models") {
  for (const char* name : {"double_exponential", "almost_bounded"}) {
    CAPTURE(name);
    const auto m = PotentialModel::catalog(name);
    const auto rep = classify(m, 1e6, 25);
    for (int d = 1; d <= 2; ++d) {
      const ScalePair sp = make_scale_pair(m, rep, d);
      double prev = 0.0;
      for (double t : {1e2, 1e3, 1e4, 1e5}) {
        const double a = sp.alpha(t);
        CHECK(a >= 1.0 - 1e-9);
        const double ratio = t / std::pow(a, d);
        CHECK(ratio > prev);
        prev = ratio;
        CHECK(solve_alpha(sp.kappa, d, t).residual < 1e-10);
      }
    }
  }
  const auto sp = make_scale_pair(PotentialModel::catalog("single_peak"), classify(PotentialModel::catalog("single_peak"), 1e6, 25), 2);
  CHECK(sp.alpha_constant);
  CHECK(sp.alpha(1e5) == 1.0);
  CHECK(sp.beta(1e3) == doctest::Approx(2.0 * std::log(1e3)));
}
