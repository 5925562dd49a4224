#include <doctest.h>

#include <vector>

#include "ldoc/kernels.hpp"
#include "ldoc/rng.hpp"

using namespace ldoc;

TEST_CASE("matmul matches a hand-computed 2x2 product") {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{5, 6, 7, 8};
  std::vector<double> c(4);
  kernels::matmul_serial(a.data(), b.data(), c.data(), 2, 2, 2);
  CHECK(c[0] == doctest::Approx(19));
  CHECK(c[1] == doctest::Approx(22));
  CHECK(c[2] == doctest::Approx(43));
  CHECK(c[3] == doctest::Approx(50));
}

TEST_CASE("parallel kernels are bit-identical to serial") {
  Rng rng(11);
  const std::size_t m = 37, k = 53, n = 41;
  std::vector<double> a(m * k), b(k * n);
  for (double& v : a) v = rng.normal();
  for (double& v : b) v = rng.normal();

  std::vector<double> c1(m * n), c2(m * n);
  kernels::matmul_serial(a.data(), b.data(), c1.data(), m, k, n);
  kernels::matmul(a.data(), b.data(), c2.data(), m, k, n);
  CHECK(c1 == c2);

  std::vector<double> acc1(m * n, 0.5), acc2(m * n, 0.5);
  kernels::matmul_acc_serial(a.data(), b.data(), acc1.data(), m, k, n);
  kernels::matmul_acc(a.data(), b.data(), acc2.data(), m, k, n);
  CHECK(acc1 == acc2);

  const std::size_t pts = 150, dim = 7;
  std::vector<double> p(pts * dim);
  for (double& v : p) v = rng.normal();
  std::vector<double> d1(pts * pts), d2(pts * pts);
  kernels::pairwise_sq_dists_serial(p.data(), d1.data(), pts, dim);
  kernels::pairwise_sq_dists(p.data(), d2.data(), pts, dim);
  CHECK(d1 == d2);
}

TEST_CASE("pairwise squared distances: symmetry and zero diagonal") {
  const std::vector<double> p{0, 0, 3, 4, 1, 1};
  const auto d = kernels::pairwise_sq_dists(p, 3, 2);
  CHECK(d[0] == 0.0);
  CHECK(d[4] == 0.0);
  CHECK(d[8] == 0.0);
  CHECK(d[1] == doctest::Approx(25.0));  // (0,0) vs (3,4)
  CHECK(d[1] == d[3]);
  CHECK(d[2] == doctest::Approx(2.0));  // (0,0) vs (1,1)
}
