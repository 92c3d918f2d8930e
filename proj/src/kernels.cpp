#include "pamlab/kernels.hpp"

#include <omp.h>

namespace pamlab::kernels {

void set_num_threads(int k) {
  static const int default_threads = omp_get_max_threads();
  omp_set_num_threads(k > 0 ? k : default_threads);
}

int max_threads() { return omp_get_max_threads(); }

namespace {

// Laplacian at one site; out-of-box neighbours read as zero.
inline double laplacian_at(const Box& box, std::span<const double> f, std::size_t i) {
  const int d = box.dim();
  const int side = box.side();
  const double fi = f[i];
  double acc = -2.0 * d * fi;
  std::size_t rem = i;
  for (int axis = 0; axis < d; ++axis) {
    const std::size_t stride = box.stride(axis);
    const auto coord = static_cast<int>(rem / stride);
    rem %= stride;
    if (coord > 0) acc += f[i - stride];
    if (coord < side - 1) acc += f[i + stride];
  }
  return acc;
}

inline double csr_row(std::span<const std::int64_t> offsets, std::span<const std::int32_t> neighbors,
                      std::span<const double> diagonal, std::span<const double> x, std::size_t i) {
  double acc = diagonal[i] * x[i];
  for (auto k = offsets[i]; k < offsets[i + 1]; ++k) acc += x[static_cast<std::size_t>(neighbors[static_cast<std::size_t>(k)])];
  return acc;
}

}  // namespace

namespace serial {

void laplacian_box(const Box& box, std::span<const double> f, std::span<double> out) {
  for (std::size_t i = 0; i < box.size(); ++i) out[i] = laplacian_at(box, f, i);
}

void csr_apply(std::span<const std::int64_t> offsets, std::span<const std::int32_t> neighbors,
               std::span<const double> diagonal, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < diagonal.size(); ++i) y[i] = csr_row(offsets, neighbors, diagonal, x, i);
}

}  // namespace serial

namespace omp {

void laplacian_box(const Box& box, std::span<const double> f, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(box.size());
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = laplacian_at(box, f, static_cast<std::size_t>(i));
}

void csr_apply(std::span<const std::int64_t> offsets, std::span<const std::int32_t> neighbors,
               std::span<const double> diagonal, std::span<const double> x, std::span<double> y) {
  const auto n = static_cast<std::int64_t>(diagonal.size());
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = csr_row(offsets, neighbors, diagonal, x, static_cast<std::size_t>(i));
  }
}

}  // namespace omp

}  // namespace pamlab::kernels
