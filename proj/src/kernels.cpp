#include "ldoc/kernels.hpp"

#include <cstring>

namespace ldoc::kernels {

namespace {

inline void matmul_row(const double* a_row, const double* b, double* c_row,
                       std::size_t k, std::size_t n) {
  std::memset(c_row, 0, n * sizeof(double));
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a_row[p];
    const double* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

inline void matmul_acc_row(const double* a_row, const double* b, double* c_row,
                           std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a_row[p];
    const double* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

// Four output rows at once: b is streamed once for all four, and the four
// accumulator chains give the vectorizer independent work. Per-element
// operation order matches matmul_row exactly, so results are bit-identical
// to the serial reference.
inline void matmul_acc_rows4(const double* a, const double* b, double* c,
                             std::size_t k, std::size_t n) {
  const double *a0 = a, *a1 = a + k, *a2 = a + 2 * k, *a3 = a + 3 * k;
  double *c0 = c, *c1 = c + n, *c2 = c + 2 * n, *c3 = c + 3 * n;
  for (std::size_t p = 0; p < k; ++p) {
    const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
    const double* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double bv = b_row[j];
      c0[j] += v0 * bv;
      c1[j] += v1 * bv;
      c2[j] += v2 * bv;
      c3[j] += v3 * bv;
    }
  }
}

inline double sq_dist(const double* x, const double* y, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = x[d] - y[d];
    s += diff * diff;
  }
  return s;
}

}  // namespace

void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    matmul_row(a + i * k, b, c + i * n, k, n);
}

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
  // Each 4-row block is owned by exactly one iteration, so the result is
  // bit-identical to matmul_serial.
  const long long blocks = static_cast<long long>(m / 4);
#pragma omp parallel for schedule(static) if (m * n * k > 16384)
  for (long long blk = 0; blk < blocks; ++blk) {
    const std::size_t i = static_cast<std::size_t>(blk) * 4;
    std::memset(c + i * n, 0, 4 * n * sizeof(double));
    matmul_acc_rows4(a + i * k, b, c + i * n, k, n);
  }
  for (std::size_t i = static_cast<std::size_t>(blocks) * 4; i < m; ++i)
    matmul_row(a + i * k, b, c + i * n, k, n);
}

void matmul_acc_serial(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    matmul_acc_row(a + i * k, b, c + i * n, k, n);
}

void matmul_acc(const double* a, const double* b, double* c,
                std::size_t m, std::size_t k, std::size_t n) {
  const long long blocks = static_cast<long long>(m / 4);
#pragma omp parallel for schedule(static) if (m * n * k > 16384)
  for (long long blk = 0; blk < blocks; ++blk) {
    const std::size_t i = static_cast<std::size_t>(blk) * 4;
    matmul_acc_rows4(a + i * k, b, c + i * n, k, n);
  }
  for (std::size_t i = static_cast<std::size_t>(blocks) * 4; i < m; ++i)
    matmul_acc_row(a + i * k, b, c + i * n, k, n);
}

void pairwise_sq_dists_serial(const double* points, double* out,
                              std::size_t n, std::size_t dim) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i * n + i] = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = sq_dist(points + i * dim, points + j * dim, dim);
      out[i * n + j] = s;
      out[j * n + i] = s;
    }
  }
}

void pairwise_sq_dists(const double* points, double* out,
                       std::size_t n, std::size_t dim) {
#pragma omp parallel for schedule(dynamic, 16) if (n > 128)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    out[i * n + i] = 0.0;
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < n; ++j) {
      const double s = sq_dist(points + i * dim, points + j * dim, dim);
      out[i * n + j] = s;
      out[j * n + i] = s;
    }
  }
}

std::vector<double> pairwise_sq_dists(const std::vector<double>& points,
                                      std::size_t n, std::size_t dim) {
  std::vector<double> out(n * n);
  pairwise_sq_dists(points.data(), out.data(), n, dim);
  return out;
}

}  // namespace ldoc::kernels
