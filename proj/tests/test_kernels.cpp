#include <doctest.h>

#include <cmath>
#include <vector>

#include "asymcity/kernels.hpp"
#include "asymcity/rng.hpp"

using namespace asymcity;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

// Restores the process-wide backend when a test switches it.
struct BackendGuard {
  kernels::Backend saved = kernels::active();
  ~BackendGuard() { kernels::select(saved); }
};

}  // namespace

TEST_CASE("scalar kernels match textbook loops") {
  const auto& k = kernels::scalar_table();
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{4, -5, 6};
  CHECK(k.dot(a.data(), b.data(), 3) == 12.0);
  CHECK(k.sum_sq(a.data(), 3) == 14.0);
  CHECK(k.sq_dist(a.data(), b.data(), 3) == 9.0 + 49.0 + 9.0);

  // W = [[1,2,3],[4,5,6]]
  const std::vector<double> w{1, 2, 3, 4, 5, 6};
  std::vector<double> y{10, 20};
  k.gemv(w.data(), 2, 3, a.data(), y.data());
  CHECK(y == std::vector<double>{24, 52});

  std::vector<double> yt{0, 0, 0};
  const std::vector<double> x2{1, -1};
  k.gemv_t(w.data(), 2, 3, x2.data(), yt.data());
  CHECK(yt == std::vector<double>{-3, -3, -3});

  std::vector<double> g(6, 0.0);
  k.ger(g.data(), 2, 3, x2.data(), a.data());
  CHECK(g == std::vector<double>{1, 2, 3, -1, -2, -3});
}

TEST_CASE("adam kernel takes a bias-corrected first step of size learning_rate") {
  std::vector<double> p{1.0, -1.0};
  const std::vector<double> g{0.5, -2.0};
  std::vector<double> m(2, 0.0), v(2, 0.0);
  const kernels::AdamStep step{0.1, 0.9, 0.999, 0.0, 1.0 - 0.9, 1.0 - 0.999};
  kernels::scalar_table().adam(step, p.data(), g.data(), m.data(), v.data(), 2);
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(-0.9).epsilon(1e-12));
}

TEST_CASE("backend selection falls back to scalar when unavailable") {
  BackendGuard guard;
  kernels::select(kernels::Backend::kScalar);
  CHECK(kernels::active() == kernels::Backend::kScalar);
  CHECK(&kernels::table() == &kernels::scalar_table());
  kernels::select(kernels::Backend::kAvx2);
  CHECK(kernels::active() == (kernels::available(kernels::Backend::kAvx2) ? kernels::Backend::kAvx2
                                                                          : kernels::Backend::kScalar));
}

#if defined(ASYMCITY_HAVE_AVX2)
TEST_CASE("avx2 kernels are equivalent to the scalar reference") {
  if (!kernels::available(kernels::Backend::kAvx2)) {
    MESSAGE("AVX2 not supported on this CPU; skipping equivalence check");
    return;
  }
  const auto& ref = kernels::scalar_table();
  const auto& simd = kernels::avx2_table();
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = rng.below(70);
    const std::size_t rows = 1 + rng.below(9);
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    const double scale = static_cast<double>(n) + 1.0;

    // Reductions differ only in summation order.
    CHECK(std::abs(simd.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-13 * scale);
    CHECK(std::abs(simd.sum_sq(a.data(), n) - ref.sum_sq(a.data(), n)) <= 1e-13 * scale);
    CHECK(std::abs(simd.sq_dist(a.data(), b.data(), n) - ref.sq_dist(a.data(), b.data(), n)) <=
          1e-13 * scale);

    // Element-wise kernels are bit-identical.
    auto y1 = random_vec(rng, n);
    auto y2 = y1;
    const double alpha = rng.uniform(-3.0, 3.0);
    ref.axpy(alpha, a.data(), y1.data(), n);
    simd.axpy(alpha, a.data(), y2.data(), n);
    CHECK(y1 == y2);

    const auto w = random_vec(rng, rows * n);
    const auto col = random_vec(rng, rows);
    auto g1 = random_vec(rng, rows * n);
    auto g2 = g1;
    ref.ger(g1.data(), rows, n, col.data(), a.data());
    simd.ger(g2.data(), rows, n, col.data(), a.data());
    CHECK(g1 == g2);

    auto t1 = random_vec(rng, n);
    auto t2 = t1;
    ref.gemv_t(w.data(), rows, n, col.data(), t1.data());
    simd.gemv_t(w.data(), rows, n, col.data(), t2.data());
    CHECK(t1 == t2);

    std::vector<double> r1(rows, 0.5), r2(rows, 0.5);
    ref.gemv(w.data(), rows, n, a.data(), r1.data());
    simd.gemv(w.data(), rows, n, a.data(), r2.data());
    for (std::size_t r = 0; r < rows; ++r) CHECK(std::abs(r1[r] - r2[r]) <= 1e-13 * scale);

    auto p1 = random_vec(rng, n);
    auto p2 = p1;
    auto m1 = random_vec(rng, n);
    auto m2 = m1;
    std::vector<double> v1(n);
    for (double& x : v1) x = rng.uniform(0.0, 1.0);
    auto v2 = v1;
    const kernels::AdamStep step{0.002, 0.9, 0.999, 1e-8, 0.4, 0.01};
    ref.adam(step, p1.data(), b.data(), m1.data(), v1.data(), n);
    simd.adam(step, p2.data(), b.data(), m2.data(), v2.data(), n);
    CHECK(p1 == p2);
    CHECK(m1 == m2);
    CHECK(v1 == v2);
  }
}
#endif
