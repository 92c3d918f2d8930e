#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "pamlab/numerics.hpp"
#include "pamlab/pam_solver.hpp"
#include "pamlab/potential_models.hpp"
#include "pamlab/rng.hpp"
#include "pamlab/walk_mc.hpp"

using namespace pamlab;

namespace {
double confinement_probability(int d, double t, int R) {
  return solve_pam(LatticeField(Box(d, R)), t, InitialCondition::Flat).values().at({0, 0, 0});
}
}  // namespace

TEST_CASE("walk paths") {
  const LocalTimes z = simulate_walk(0.0, 2, 1);
  REQUIRE(z.sites.size() == 1);
  CHECK(z.sites[0] == Site{0, 0, 0});
  CHECK(z.total() == 0.0);

  const int n = 10000;
  double jumps = 0.0, jumps2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const LocalTimes lt = simulate_walk(1.0, 1, derive_seed(5, static_cast<std::uint64_t>(i)));
    jumps += static_cast<double>(lt.jumps);
    jumps2 += static_cast<double>(lt.jumps * lt.jumps);
    CHECK(std::abs(lt.total() - 1.0) <= 1e-12);
  }
  const double m = jumps / n, se = std::sqrt((jumps2 / n - m * m) / n);
  CHECK(std::abs(m - 2.0) < 3.0 * se);

  // support is a connected interval containing the origin in d = 1
  const LocalTimes lt = simulate_walk(20.0, 1, 8);
  std::set<int> xs;
  for (const Site& s : lt.sites) xs.insert(s[0]);
  CHECK(xs.count(0) == 1);
  CHECK(static_cast<int>(xs.size()) == *xs.rbegin() - *xs.begin() + 1);
  const LocalTimes same = simulate_walk(20.0, 1, 8);
  CHECK(same.times == lt.times);
}

TEST_CASE("lq norms") {
  LocalTimes lt;
  lt.d = 1;
  lt.add({0, 0, 0}, 1.0);
  lt.add({1, 0, 0}, 2.0);
  lt.add({0, 0, 0}, 1.0);
  CHECK(lt.at({0, 0, 0}) == 2.0);
  CHECK(lq_norm(lt, 1.0) == doctest::Approx(4.0));
  CHECK(lq_norm(lt, 2.0) == doctest::Approx(std::sqrt(8.0)));
  CHECK(sum_of_squares(lt) == doctest::Approx(8.0));
  CHECK(lt.support_radius() == 1);
}

TEST_CASE("annealed mass with H = 0 is the confinement probability") {
  const HFunction zero = [](double) { return 0.0; };
  for (int d = 1; d <= 2; ++d) {
    const double t = 2.0;
    const int R = 2;
    const MassEstimate e = annealed_mass_walk(zero, d, t, R, 20000, 31);
    const double p = confinement_probability(d, t, R);
    CHECK(e.estimate <= 1.0);
    CHECK(std::abs(e.estimate - p) < 3.5 * e.se);
    // two independent walks both confined
    const MassEstimate two = moment_walk(zero, d, 2.0, t, R, 20000, 32);
    CHECK(std::abs(two.estimate - p * p) < 3.5 * two.se);
  }
  // confinement grows with the box
  CHECK(confinement_probability(1, 3.0, 1) < confinement_probability(1, 3.0, 2));
}

TEST_CASE("constant potential: both estimators agree") {
  const auto m = PotentialModel::constant(0.4);
  const double t = 1.5;
  const MassEstimate w = annealed_mass_walk(m, 1, t, 3, 20000, 7);
  const MassEstimate p = annealed_mass_potential(m, 1, t, 3, 50, 8);
  const double exact = std::exp(0.4 * t) * confinement_probability(1, t, 3);
  CHECK(p.estimate == doctest::Approx(exact).epsilon(1e-9));
  CHECK(p.se < 1e-9);
  CHECK(std::abs(w.estimate - exact) < 3.5 * w.se);
  const MassEstimate t0 = annealed_mass_potential(PotentialModel::double_exponential(1.0), 1, 0.0, 2, 20, 9);
  CHECK(t0.estimate == doctest::Approx(1.0));
  CHECK(t0.se == doctest::Approx(0.0));
}

TEST_CASE("p = 1 moment is the annealed mass") {
  const HFunction H = cumulant_function(PotentialModel::double_exponential(1.0));
  const MassEstimate a = annealed_mass_walk(H, 1, 3.0, 10, 2000, 44);
  const MassEstimate b = moment_walk(H, 1, 1.0, 3.0, 10, 2000, 44);
  CHECK(a.log_estimate == b.log_estimate);
}

TEST_CASE("log-weight summary") {
  const double inf = std::numeric_limits<double>::infinity();
  const MassEstimate e = summarize_log_weights({0.0, 0.0, 0.0, 0.0});
  CHECK(e.estimate == doctest::Approx(1.0));
  CHECK(e.ess == doctest::Approx(4.0));
  CHECK(e.flagged);
  const MassEstimate z = summarize_log_weights({-inf, -inf});
  CHECK(z.log_estimate == -inf);
  CHECK(z.nonzero == 0);
  const MassEstimate big = summarize_log_weights({2000.0, 2000.0 + std::log(3.0)});
  CHECK(big.log_estimate == doctest::Approx(2000.0 + std::log(2.0)));
}

TEST_CASE("second moment of the self-intersection local time") {
  for (int d = 1; d <= 2; ++d) {
    // small t: E sum l^2 ~ t^2
    CHECK(self_intersection_second_moment(1e-3, d).value / 1e-6 == doctest::Approx(1.0).epsilon(1e-2));
  }
  // 1D oracle with the Bessel return probability p_r(0,0) = e^{-2r} I_0(2r)
  const double t = 3.0;
  const double oracle =
      2.0 * integrate([&](double r) { return (t - r) * std::exp(-2.0 * r) * std::cyl_bessel_i(0, 2.0 * r); }, 0.0, t, 1e-12)
                .value;
  CHECK(self_intersection_second_moment(t, 1).value == doctest::Approx(oracle).epsilon(1e-8));
  const SecondMoment s = self_intersection_second_moment(t, 2);
  CHECK(s.escape_mass < 1e-8);
  CHECK_THROWS(self_intersection_second_moment(t, 1, 1));
}

TEST_CASE("rescaled local times") {
  const LocalTimes lt = simulate_walk(15.0, 1, 3);
  for (double alpha : {1.0, 2.5}) {
    const Profile L = rescaled_local_times(lt, alpha);
    CHECK(L.integral() == doctest::Approx(1.0).epsilon(1e-12));
    for (double q : {1.5, 2.0, 3.0}) {
      double sum = 0.0;
      for (std::size_t i = 0; i < L.values.size(); ++i) sum += L.grid.weight(i) * std::pow(L.values[i], q);
      const double lhs = std::pow(alpha, -(1.0 + q) / q) * lq_norm(lt, q);
      const double rhs = lt.t / (alpha * alpha) * std::pow(sum, 1.0 / q);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
  }
  const Profile one = rescaled_local_times(lt, 1.0);
  CHECK(one.max_abs() == doctest::Approx(
                             [&] {
                               double m = 0.0;
                               for (double v : lt.times) m = std::max(m, v);
                               return m / lt.t;
                             }())
                             .epsilon(1e-12));
}
