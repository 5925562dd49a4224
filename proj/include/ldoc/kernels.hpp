#pragma once

#include <cstddef>
#include <vector>

// Data-parallel inner loops. Each kernel has a serial reference
// implementation (suffix _serial) used by the tests and benchmarks;
// the unsuffixed variant is OpenMP-parallel over independent rows,
// so results are bit-identical to the serial version at any thread count.
namespace ldoc::kernels {

// c (m x n) = a (m x k) * b (k x n), row-major, c overwritten.
void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n);

// c (m x n) += a (m x k) * b (k x n)
void matmul_acc_serial(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n);
void matmul_acc(const double* a, const double* b, double* c,
                std::size_t m, std::size_t k, std::size_t n);

// out[i*n + j] = squared Euclidean distance between points[i] and points[j],
// points row-major n x dim.
void pairwise_sq_dists_serial(const double* points, double* out,
                              std::size_t n, std::size_t dim);
void pairwise_sq_dists(const double* points, double* out,
                       std::size_t n, std::size_t dim);

std::vector<double> pairwise_sq_dists(const std::vector<double>& points,
                                      std::size_t n, std::size_t dim);

}  // namespace ldoc::kernels
