#pragma once

#include <cstddef>
#include <string>

namespace lp::kern {

// The arithmetic inner loops every hot path goes through. Each entry has a
// scalar reference implementation and (on x86-64) an AVX2+FMA variant; the
// active table is picked once at startup from cpuid and can be overridden
// with set_impl() for equivalence testing.
struct Kernels {
  // sum_i a[i]*b[i]
  double (*dot)(const double*, const double*, std::size_t);
  // sum_i (s[i]+r[i])*t[i]
  double (*score_sum)(const double*, const double*, const double*, std::size_t);
  // y[i] += alpha*x[i]
  void (*axpy)(double, const double*, double*, std::size_t);
  // acc[i] += g[i]^2; w[i] -= lr*g[i]/sqrt(acc[i])
  void (*adagrad_step)(double*, double*, const double*, double, std::size_t);
  // sums[0..4] = {sum x, sum y, sum x^2, sum y^2, sum x*y}
  void (*moments)(const double*, const double*, std::size_t, double*);
};

enum class Impl { Scalar, Avx2 };

const Kernels& scalar_kernels();
#if defined(__x86_64__) || defined(_M_X64)
const Kernels& avx2_kernels();
#endif

bool impl_available(Impl impl);
Impl active_impl();
void set_impl(Impl impl);  // throws std::invalid_argument if unavailable
std::string impl_name();

// Dispatched entry points.
double dot(const double* a, const double* b, std::size_t n);
double score_sum(const double* s, const double* r, const double* t, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void adagrad_step(double* w, double* acc, const double* g, double lr, std::size_t n);
void moments(const double* x, const double* y, std::size_t n, double sums[5]);

// Composed on top of the dispatched kernels.

// out[i] = row_i(a) . x for row-major a of shape rows x cols.
void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x,
            double* out);

// row_i -= (row_i . w) w for every row; w has length cols.
void project_rows(double* a, std::size_t rows, std::size_t cols, const double* w);

// Pearson correlation; NaN when either input has zero variance.
double pearson(const double* x, const double* y, std::size_t n);

}  // namespace lp::kern
