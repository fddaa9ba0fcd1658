#include "neuralign/kernels.hpp"

// AVX2 variants. Four doubles per vector, mul and add kept as separate
// instructions (no vfmadd) so results match the scalar reference exactly.
// This translation unit is compiled with -mavx2 -mno-fma and only ever
// executed after a runtime CPU check.

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace neuralign::kern {

namespace avx2 {

void axpy(double* y, double a, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, vx));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void add(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(double* y, double a, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), va));
  for (; i < n; ++i) y[i] *= a;
}

void film(double* out, const double* z, const double* gamma, const double* beta,
          std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_add_pd(one, _mm256_loadu_pd(gamma + i));
    t = _mm256_mul_pd(t, _mm256_loadu_pd(z + i));
    t = _mm256_add_pd(t, _mm256_loadu_pd(beta + i));
    _mm256_storeu_pd(out + i, t);
  }
  for (; i < n; ++i) out[i] = (1.0 + gamma[i]) * z[i] + beta[i];
}

}  // namespace avx2

const KernelTable& avx2_table() {
  static const KernelTable t{avx2::axpy, avx2::add, avx2::sub,
                             avx2::mul,  avx2::scale, avx2::film};
  return t;
}

}  // namespace neuralign::kern

#endif
