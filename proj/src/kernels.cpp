#include "latentprobe/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace lp::kern {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

struct Dispatch {
  Impl impl;
  const Kernels* table;
  Dispatch() {
#if defined(__x86_64__) || defined(_M_X64)
    if (cpu_has_avx2()) {
      impl = Impl::Avx2;
      table = &avx2_kernels();
      return;
    }
#endif
    impl = Impl::Scalar;
    table = &scalar_kernels();
  }
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

}  // namespace

bool impl_available(Impl impl) {
  if (impl == Impl::Scalar) return true;
  return cpu_has_avx2();
}

Impl active_impl() { return dispatch().impl; }

void set_impl(Impl impl) {
  if (!impl_available(impl))
    throw std::invalid_argument("kernel implementation not available on this host");
  dispatch().impl = impl;
#if defined(__x86_64__) || defined(_M_X64)
  dispatch().table = impl == Impl::Avx2 ? &avx2_kernels() : &scalar_kernels();
#else
  dispatch().table = &scalar_kernels();
#endif
}

std::string impl_name() {
  return active_impl() == Impl::Avx2 ? "avx2" : "scalar";
}

double dot(const double* a, const double* b, std::size_t n) {
  return dispatch().table->dot(a, b, n);
}

double score_sum(const double* s, const double* r, const double* t,
                 std::size_t n) {
  return dispatch().table->score_sum(s, r, t, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  dispatch().table->axpy(alpha, x, y, n);
}

void adagrad_step(double* w, double* acc, const double* g, double lr,
                  std::size_t n) {
  dispatch().table->adagrad_step(w, acc, g, lr, n);
}

void moments(const double* x, const double* y, std::size_t n, double sums[5]) {
  dispatch().table->moments(x, y, n, sums);
}

void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x,
            double* out) {
  const Kernels* k = dispatch().table;
  for (std::size_t i = 0; i < rows; ++i) out[i] = k->dot(a + i * cols, x, cols);
}

void project_rows(double* a, std::size_t rows, std::size_t cols,
                  const double* w) {
  const Kernels* k = dispatch().table;
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = a + i * cols;
    double c = k->dot(row, w, cols);
    k->axpy(-c, w, row, cols);
  }
}

double pearson(const double* x, const double* y, std::size_t n) {
  double s[5];
  moments(x, y, n, s);
  double nn = static_cast<double>(n);
  double vx = nn * s[2] - s[0] * s[0];
  double vy = nn * s[3] - s[1] * s[1];
  if (vx <= 0.0 || vy <= 0.0) return std::nan("");
  return (nn * s[4] - s[0] * s[1]) / std::sqrt(vx * vy);
}

}  // namespace lp::kern
