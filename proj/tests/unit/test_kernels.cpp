#include <doctest.h>

#include <vector>

#include "pamlab/kernels.hpp"
#include "pamlab/lattice.hpp"
#include "pamlab/rng.hpp"

using namespace pamlab;

namespace {
std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = 4.0 * rng.uniform() - 2.0;
  return v;
}
}  // namespace

TEST_CASE("laplacian: serial and omp agree exactly") {
  for (int d = 1; d <= 3; ++d) {
    const Box box(d, d == 3 ? 6 : 15);
    const auto f = random_values(box.size(), 7 + static_cast<std::uint64_t>(d));
    std::vector<double> a(box.size()), b(box.size());
    kernels::serial::laplacian_box(box, f, a);
    kernels::omp::laplacian_box(box, f, b);
    CHECK(a == b);
  }
}

TEST_CASE("csr apply: serial and omp agree exactly") {
  const Box box(2, 12);
  LatticeField V(box, random_values(box.size(), 3));
  V[5] = -std::numeric_limits<double>::infinity();
  const AndersonOperator H(V);
  const auto x = random_values(H.active_size(), 4);
  std::vector<double> a(x.size()), b(x.size()), c(x.size());
  kernels::serial::csr_apply(H.offsets(), H.neighbors(), H.diagonal(), x, a);
  kernels::omp::csr_apply(H.offsets(), H.neighbors(), H.diagonal(), x, b);
  H.apply(x, c);
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("map_indexed is independent of the thread count") {
  auto fn = [](std::size_t i) { return static_cast<double>(i) * 0.5 + 1.0 / (1.0 + static_cast<double>(i)); };
  const auto ref = kernels::serial::map_indexed(5000, fn);
  for (int k : {1, 2, 4}) {
    kernels::set_num_threads(k);
    CHECK(kernels::omp::map_indexed(5000, fn) == ref);
  }
  kernels::set_num_threads(0);
  CHECK(kernels::max_threads() >= 1);
}
