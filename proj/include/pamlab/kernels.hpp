#pragma once

// Data-parallel inner loops. Every kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp with identical
// results; the library calls the OpenMP versions.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pamlab/lattice.hpp"

namespace pamlab::kernels {

/// Sets the OpenMP worker count (k <= 0 restores the runtime default).
void set_num_threads(int k);
int max_threads();

namespace serial {

void laplacian_box(const Box& box, std::span<const double> f, std::span<double> out);

void csr_apply(std::span<const std::int64_t> offsets, std::span<const std::int32_t> neighbors,
               std::span<const double> diagonal, std::span<const double> x, std::span<double> y);

/// out[i] = fn(i) for i in [0, n).
template <class Fn>
std::vector<double> map_indexed(std::size_t n, Fn&& fn) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
  return out;
}

}  // namespace serial

namespace omp {

void laplacian_box(const Box& box, std::span<const double> f, std::span<double> out);

void csr_apply(std::span<const std::int64_t> offsets, std::span<const std::int32_t> neighbors,
               std::span<const double> diagonal, std::span<const double> x, std::span<double> y);

/// Parallel map; each slot is written by exactly one iteration so the result
/// does not depend on the thread count or schedule.
template <class Fn>
std::vector<double> map_indexed(std::size_t n, Fn&& fn) {
  std::vector<double> out(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
  return out;
}

}  // namespace omp

}  // namespace pamlab::kernels
