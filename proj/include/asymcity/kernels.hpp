#pragma once

// Dense double-precision kernels used by the encoder and the optimizer.
//
// Every kernel has a portable scalar reference implementation. On x86-64 an
// AVX2+FMA variant is compiled into a separate translation unit and chosen at
// start-up when the CPU supports it. Element-wise kernels (axpy, ger, adam)
// produce bit-identical results on both backends; reductions (dot, gemv,
// sum_sq, sq_dist) agree to rounding because the lane-wise summation order
// differs.

#include <cstddef>
#include <span>
#include <string_view>

namespace asymcity::kernels {

enum class Backend { kScalar, kAvx2 };

struct AdamStep {
  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_sq)(const double* a, std::size_t n);
  double (*sq_dist)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y += W x, W row-major rows x cols
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y += W^T x
  void (*gemv_t)(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
  // W += a b^T
  void (*ger)(double* w, std::size_t rows, std::size_t cols, const double* a, const double* b);
  void (*adam)(const AdamStep& step, double* param, const double* grad, double* m, double* v,
               std::size_t n);
};

const KernelTable& scalar_table();
#if defined(ASYMCITY_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

bool available(Backend backend);
Backend active();
/// Switch the process-wide backend. Not thread-safe; call before any
/// parallel work (tests use it to compare backends).
void select(Backend backend);
std::string_view name(Backend backend);
const KernelTable& table();

// Span wrappers over the active backend.

double dot(std::span<const double> a, std::span<const double> b);
double sum_sq(std::span<const double> a);
double sq_dist(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
void gemv_t(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);
void ger(std::span<double> w, std::size_t rows, std::size_t cols, std::span<const double> a,
         std::span<const double> b);
void adam(const AdamStep& step, std::span<double> param, std::span<const double> grad,
          std::span<double> m, std::span<double> v);

}  // namespace asymcity::kernels
