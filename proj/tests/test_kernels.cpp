#include <doctest.h>

#include <cstring>
#include <vector>

#include "helpers.hpp"
#include "neuralign/kernels.hpp"

using namespace neuralign;

namespace {

std::vector<double> random_vec(RngState& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.next_gaussian();
  return v;
}

bool bytes_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<kern::Backend> simd_backends() {
  std::vector<kern::Backend> out;
  for (auto b : {kern::Backend::avx2, kern::Backend::neon}) {
    try {
      (void)kern::table_for(b);
      out.push_back(b);
    } catch (const std::invalid_argument&) {
    }
  }
  return out;
}

}  // namespace

// Every SIMD backend must reproduce the scalar reference bit for bit, on
// every length including the vector-width tails.
TEST_CASE("simd kernels match scalar bitwise") {
  const auto& ref = kern::table_for(kern::Backend::scalar);
  const std::vector<std::size_t> sizes{0, 1, 2, 3, 4, 5, 7, 8, 9, 16, 17, 31, 64, 257, 1000};

  for (const auto backend : simd_backends()) {
    CAPTURE(kern::backend_name(backend));
    const auto& t = kern::table_for(backend);
    RngState rng(2024, 7);
    for (const std::size_t n : sizes) {
      const auto a = random_vec(rng, n);
      const auto b = random_vec(rng, n);
      const double s = rng.next_gaussian();

      auto y1 = a, y2 = a;
      ref.axpy(y1.data(), s, b.data(), n);
      t.axpy(y2.data(), s, b.data(), n);
      CHECK(bytes_equal(y1, y2));

      std::vector<double> o1(n), o2(n);
      ref.add(o1.data(), a.data(), b.data(), n);
      t.add(o2.data(), a.data(), b.data(), n);
      CHECK(bytes_equal(o1, o2));

      ref.sub(o1.data(), a.data(), b.data(), n);
      t.sub(o2.data(), a.data(), b.data(), n);
      CHECK(bytes_equal(o1, o2));

      ref.mul(o1.data(), a.data(), b.data(), n);
      t.mul(o2.data(), a.data(), b.data(), n);
      CHECK(bytes_equal(o1, o2));

      y1 = a;
      y2 = a;
      ref.scale(y1.data(), s, n);
      t.scale(y2.data(), s, n);
      CHECK(bytes_equal(y1, y2));

      const auto g = random_vec(rng, n);
      ref.film(o1.data(), a.data(), g.data(), b.data(), n);
      t.film(o2.data(), a.data(), g.data(), b.data(), n);
      CHECK(bytes_equal(o1, o2));
    }
  }
}

TEST_CASE("backend selection") {
  const auto original = kern::active_backend();

  CHECK(kern::set_backend(kern::Backend::scalar));
  CHECK(kern::active_backend() == kern::Backend::scalar);

  const auto best = kern::best_available();
  CHECK(kern::set_backend(best));
  CHECK(kern::active_backend() == best);

#if !defined(__aarch64__)
  CHECK_FALSE(kern::set_backend(kern::Backend::neon));
  CHECK(kern::active_backend() == best);  // failed switch leaves selection alone
#endif

  kern::set_backend(original);
}

TEST_CASE("reductions use a fixed left-to-right order") {
  RngState rng(11, 0);
  const auto a = random_vec(rng, 129);
  const auto b = random_vec(rng, 129);

  double dot_ref = 0.0, sum_ref = 0.0, sq_ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot_ref += a[i] * b[i];
    sum_ref += a[i];
    sq_ref += a[i] * a[i];
  }
  CHECK(kern::dot(a.data(), b.data(), a.size()) == dot_ref);
  CHECK(kern::sum(a.data(), a.size()) == sum_ref);
  CHECK(kern::sumsq(a.data(), a.size()) == sq_ref);
}

// The dispatch layer itself: matmul through different backends must agree
// bitwise, which is what makes checkpoints backend-independent.
TEST_CASE("matmul identical across backends") {
  RngState rng(5, 1);
  const Matrix a = testutil::random_matrix(rng, 17, 23);
  const Matrix b = testutil::random_matrix(rng, 23, 9);

  const auto original = kern::active_backend();
  REQUIRE(kern::set_backend(kern::Backend::scalar));
  const Matrix c_scalar = matmul(a, b);

  for (const auto backend : simd_backends()) {
    REQUIRE(kern::set_backend(backend));
    CHECK(bits_equal(matmul(a, b), c_scalar));
  }
  kern::set_backend(original);
}
