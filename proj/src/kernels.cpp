#include "asymcity/kernels.hpp"

#include <cassert>

namespace asymcity::kernels {
namespace {

Backend detect() {
#if defined(ASYMCITY_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Backend::kAvx2;
#endif
  return Backend::kScalar;
}

Backend g_backend = detect();
const KernelTable* g_table = nullptr;

const KernelTable& table_for(Backend backend) {
#if defined(ASYMCITY_HAVE_AVX2)
  if (backend == Backend::kAvx2) return avx2_table();
#endif
  (void)backend;
  return scalar_table();
}

}  // namespace

bool available(Backend backend) {
  if (backend == Backend::kScalar) return true;
  return detect() == Backend::kAvx2;
}

Backend active() { return g_backend; }

void select(Backend backend) {
  if (!available(backend)) backend = Backend::kScalar;
  g_backend = backend;
  g_table = &table_for(backend);
}

std::string_view name(Backend backend) {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

const KernelTable& table() {
  if (g_table == nullptr) g_table = &table_for(g_backend);
  return *g_table;
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return table().dot(a.data(), b.data(), a.size());
}

double sum_sq(std::span<const double> a) { return table().sum_sq(a.data(), a.size()); }

double sq_dist(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return table().sq_dist(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  table().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  assert(w.size() == rows * cols && x.size() == cols && y.size() == rows);
  table().gemv(w.data(), rows, cols, x.data(), y.data());
}

void gemv_t(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
  assert(w.size() == rows * cols && x.size() == rows && y.size() == cols);
  table().gemv_t(w.data(), rows, cols, x.data(), y.data());
}

void ger(std::span<double> w, std::size_t rows, std::size_t cols, std::span<const double> a,
         std::span<const double> b) {
  assert(w.size() == rows * cols && a.size() == rows && b.size() == cols);
  table().ger(w.data(), rows, cols, a.data(), b.data());
}

void adam(const AdamStep& step, std::span<double> param, std::span<const double> grad,
          std::span<double> m, std::span<double> v) {
  assert(param.size() == grad.size() && m.size() == param.size() && v.size() == param.size());
  table().adam(step, param.data(), grad.data(), m.data(), v.data(), param.size());
}

}  // namespace asymcity::kernels
