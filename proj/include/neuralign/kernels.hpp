#pragma once

#include <cstddef>

// Data-parallel inner loops behind every matrix/loss operation.
//
// Each kernel has a scalar reference implementation plus SIMD variants
// (AVX2 on x86-64, NEON on aarch64) selected at runtime. The SIMD variants
// are written so that every output element sees exactly the same sequence
// of floating-point operations as the scalar reference: lanes only run
// *independent* elements in parallel and never use fused multiply-add.
// Together with -ffp-contract=off this makes all backends bit-identical,
// which the equivalence tests assert to 0 ulp.
//
// Reductions (dot, sum, sumsq) are deliberately not dispatched: they keep a
// single fixed left-to-right accumulation order so results do not depend on
// the selected backend.

namespace neuralign::kern {

enum class Backend { scalar, avx2, neon };

const char* backend_name(Backend b);

// Best backend the current CPU supports.
Backend best_available();

// Currently selected backend. Defaults to best_available() unless the
// NEURALIGN_KERNELS environment variable (scalar|avx2|neon) overrides it.
Backend active_backend();

// Returns false (and leaves the selection unchanged) if `b` is unavailable.
bool set_backend(Backend b);

// ---- dispatched element-parallel kernels ----

// y[i] += a * x[i]
void axpy(double* y, double a, const double* x, std::size_t n);
// out[i] = a[i] + b[i]
void add(double* out, const double* a, const double* b, std::size_t n);
// out[i] = a[i] - b[i]
void sub(double* out, const double* a, const double* b, std::size_t n);
// out[i] = a[i] * b[i]
void mul(double* out, const double* a, const double* b, std::size_t n);
// y[i] *= a
void scale(double* y, double a, std::size_t n);
// out[i] = (1 + gamma[i]) * z[i] + beta[i]
void film(double* out, const double* z, const double* gamma, const double* beta,
          std::size_t n);

// ---- fixed-order scalar reductions ----

double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
double sumsq(const double* a, std::size_t n);

// Kernel table a backend fills in; exposed for the equivalence tests.
struct KernelTable {
  void (*axpy)(double*, double, const double*, std::size_t);
  void (*add)(double*, const double*, const double*, std::size_t);
  void (*sub)(double*, const double*, const double*, std::size_t);
  void (*mul)(double*, const double*, const double*, std::size_t);
  void (*scale)(double*, double, std::size_t);
  void (*film)(double*, const double*, const double*, const double*, std::size_t);
};

const KernelTable& table_for(Backend b);  // throws std::invalid_argument if unavailable

}  // namespace neuralign::kern
