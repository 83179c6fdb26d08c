#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "latentprobe/kernels.hpp"

using namespace lp;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 15, 16, 31, 33, 100, 257, 1024};

struct ImplGuard {
  kern::Impl saved = kern::active_impl();
  ~ImplGuard() { kern::set_impl(saved); }
};

}  // namespace

TEST_CASE("dispatch reports an available implementation") {
  CHECK(kern::impl_available(kern::Impl::Scalar));
  CHECK((kern::impl_name() == "scalar" || kern::impl_name() == "avx2"));
}

TEST_CASE("scalar and simd reductions agree within rounding") {
  if (!kern::impl_available(kern::Impl::Avx2)) return;
  const auto& scalar = kern::scalar_kernels();
  const auto& simd = kern::avx2_kernels();
  for (std::size_t n : kSizes) {
    auto a = random_vec(n, 11 + n), b = random_vec(n, 23 + n), c = random_vec(n, 37 + n);
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
    CHECK(std::abs(scalar.dot(a.data(), b.data(), n) - simd.dot(a.data(), b.data(), n)) <=
          1e-13 * (mag + 1.0));
    CHECK(std::abs(scalar.score_sum(a.data(), b.data(), c.data(), n) -
                   simd.score_sum(a.data(), b.data(), c.data(), n)) <=
          1e-12 * (mag + std::abs(scalar.score_sum(a.data(), b.data(), c.data(), n)) + 1.0));
    double ms[5], mv[5];
    scalar.moments(a.data(), b.data(), n, ms);
    simd.moments(a.data(), b.data(), n, mv);
    for (int k = 0; k < 5; ++k)
      CHECK(std::abs(ms[k] - mv[k]) <= 1e-11 * (std::abs(ms[k]) + n));
  }
}

TEST_CASE("elementwise kernels match bitwise across implementations") {
  if (!kern::impl_available(kern::Impl::Avx2)) return;
  const auto& scalar = kern::scalar_kernels();
  const auto& simd = kern::avx2_kernels();
  for (std::size_t n : kSizes) {
    auto x = random_vec(n, 101 + n);
    auto y1 = random_vec(n, 211 + n), y2 = y1;
    scalar.axpy(0.37, x.data(), y1.data(), n);
    simd.axpy(0.37, x.data(), y2.data(), n);
    CHECK(y1 == y2);

    auto w1 = random_vec(n, 307 + n), w2 = w1;
    std::vector<double> acc1(n, 1e-10), acc2(n, 1e-10);
    auto g = random_vec(n, 401 + n);
    scalar.adagrad_step(w1.data(), acc1.data(), g.data(), 0.1, n);
    simd.adagrad_step(w2.data(), acc2.data(), g.data(), 0.1, n);
    CHECK(w1 == w2);
    CHECK(acc1 == acc2);
  }
}

TEST_CASE("adagrad step matches the update rule") {
  double w = 2.0, acc = 1e-10, g = 0.5;
  kern::adagrad_step(&w, &acc, &g, 0.1, 1);
  CHECK(acc == doctest::Approx(1e-10 + 0.25));
  CHECK(w == doctest::Approx(2.0 - 0.1 * 0.5 / std::sqrt(1e-10 + 0.25)));
}

TEST_CASE("composed helpers stay consistent under forced implementations") {
  ImplGuard guard;
  std::size_t rows = 17, cols = 33;
  auto a = random_vec(rows * cols, 7);
  auto x = random_vec(cols, 13);
  std::vector<double> out_scalar(rows), out_simd(rows);
  kern::set_impl(kern::Impl::Scalar);
  kern::matvec(a.data(), rows, cols, x.data(), out_scalar.data());
  double p_scalar = kern::pearson(a.data(), a.data() + (rows - 1) * cols, cols);
  auto proj_scalar = a;
  kern::project_rows(proj_scalar.data(), rows, cols, x.data());
  if (kern::impl_available(kern::Impl::Avx2)) {
    kern::set_impl(kern::Impl::Avx2);
    kern::matvec(a.data(), rows, cols, x.data(), out_simd.data());
    for (std::size_t i = 0; i < rows; ++i)
      CHECK(out_scalar[i] == doctest::Approx(out_simd[i]).epsilon(1e-12));
    double p_simd = kern::pearson(a.data(), a.data() + (rows - 1) * cols, cols);
    CHECK(p_scalar == doctest::Approx(p_simd).epsilon(1e-10));
    auto proj_simd = a;
    kern::project_rows(proj_simd.data(), rows, cols, x.data());
    for (std::size_t i = 0; i < proj_scalar.size(); ++i)
      CHECK(proj_scalar[i] == doctest::Approx(proj_simd[i]).epsilon(1e-10));
  }
}

TEST_CASE("project_rows removes the component along a unit direction") {
  std::size_t rows = 9, cols = 16;
  auto a = random_vec(rows * cols, 99);
  auto w = random_vec(cols, 77);
  double norm = std::sqrt(kern::dot(w.data(), w.data(), cols));
  for (double& v : w) v /= norm;
  kern::project_rows(a.data(), rows, cols, w.data());
  for (std::size_t i = 0; i < rows; ++i)
    CHECK(std::abs(kern::dot(a.data() + i * cols, w.data(), cols)) < 1e-12);
}

TEST_CASE("pearson handles exact linear relations and constants") {
  std::vector<double> x = {1, 2, 3, 4, 5};
  std::vector<double> y = {2, 4, 6, 8, 10};
  CHECK(kern::pearson(x.data(), y.data(), 5) == doctest::Approx(1.0));
  std::vector<double> neg = {5, 4, 3, 2, 1};
  CHECK(kern::pearson(x.data(), neg.data(), 5) == doctest::Approx(-1.0));
  std::vector<double> c(5, 3.0);
  CHECK(std::isnan(kern::pearson(x.data(), c.data(), 5)));
}
