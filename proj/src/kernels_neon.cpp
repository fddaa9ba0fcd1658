#include "neuralign/kernels.hpp"

// NEON variants for aarch64. Two doubles per vector; vmul/vadd kept separate
// (no vfma) to stay bit-identical with the scalar reference.

#if defined(__aarch64__)
#include <arm_neon.h>

namespace neuralign::kern {

namespace neon {

void axpy(double* y, double a, const double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t vy = vld1q_f64(y + i);
    vy = vaddq_f64(vy, vmulq_f64(va, vld1q_f64(x + i)));
    vst1q_f64(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void add(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(double* y, double a, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(vld1q_f64(y + i), va));
  for (; i < n; ++i) y[i] *= a;
}

void film(double* out, const double* z, const double* gamma, const double* beta,
          std::size_t n) {
  const float64x2_t one = vdupq_n_f64(1.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t t = vaddq_f64(one, vld1q_f64(gamma + i));
    t = vmulq_f64(t, vld1q_f64(z + i));
    t = vaddq_f64(t, vld1q_f64(beta + i));
    vst1q_f64(out + i, t);
  }
  for (; i < n; ++i) out[i] = (1.0 + gamma[i]) * z[i] + beta[i];
}

}  // namespace neon

const KernelTable& neon_table() {
  static const KernelTable t{neon::axpy, neon::add, neon::sub,
                             neon::mul,  neon::scale, neon::film};
  return t;
}

}  // namespace neuralign::kern

#endif
