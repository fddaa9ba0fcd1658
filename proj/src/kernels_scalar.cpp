#include "neuralign/kernels.hpp"

// Reference kernels. These define the semantics; the SIMD variants must
// reproduce them bit-for-bit.

namespace neuralign::kern {

namespace scalar {

void axpy(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add(double* out, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(double* out, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(double* out, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(double* y, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

void film(double* out, const double* z, const double* gamma, const double* beta,
          std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (1.0 + gamma[i]) * z[i] + beta[i];
}

}  // namespace scalar

const KernelTable& scalar_table() {
  static const KernelTable t{scalar::axpy, scalar::add, scalar::sub,
                             scalar::mul,  scalar::scale, scalar::film};
  return t;
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double sumsq(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

}  // namespace neuralign::kern
