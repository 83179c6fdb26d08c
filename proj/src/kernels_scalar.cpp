#include "latentprobe/kernels.hpp"

#include <cmath>

// Reference implementations. Compiled with -ffp-contract=off so the scalar
// semantics are plain IEEE mul/add; the elementwise kernels (axpy, adagrad)
// must match the SIMD variants bitwise, the reductions only to rounding.

namespace lp::kern {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double score_sum_scalar(const double* s, const double* r, const double* t,
                        std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += (s[i] + r[i]) * t[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adagrad_step_scalar(double* w, double* acc, const double* g, double lr,
                         std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    acc[i] += g[i] * g[i];
    w[i] -= lr * g[i] / std::sqrt(acc[i]);
  }
}

void moments_scalar(const double* x, const double* y, std::size_t n,
                    double* sums) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  sums[0] = sx;
  sums[1] = sy;
  sums[2] = sxx;
  sums[3] = syy;
  sums[4] = sxy;
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{dot_scalar, score_sum_scalar, axpy_scalar,
                         adagrad_step_scalar, moments_scalar};
  return k;
}

}  // namespace lp::kern
