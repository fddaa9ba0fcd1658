#include "neuralign/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace neuralign::kern {

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
#if defined(__aarch64__)
const KernelTable& neon_table();
#endif

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "?";
}

static bool available(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Backend::neon:
#if defined(__aarch64__)
      return true;  // NEON is baseline on aarch64
#else
      return false;
#endif
  }
  return false;
}

Backend best_available() {
  if (available(Backend::avx2)) return Backend::avx2;
  if (available(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

const KernelTable& table_for(Backend b) {
  if (!available(b)) throw std::invalid_argument("kernel backend unavailable on this CPU");
  switch (b) {
    case Backend::scalar: return scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::avx2: return avx2_table();
#endif
#if defined(__aarch64__)
    case Backend::neon: return neon_table();
#endif
    default: return scalar_table();
  }
}

namespace {

struct Selection {
  Backend backend;
  const KernelTable* table;
};

Selection initial_selection() {
  Backend b = best_available();
  if (const char* env = std::getenv("NEURALIGN_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0 && available(Backend::scalar)) b = Backend::scalar;
    else if (std::strcmp(env, "avx2") == 0 && available(Backend::avx2)) b = Backend::avx2;
    else if (std::strcmp(env, "neon") == 0 && available(Backend::neon)) b = Backend::neon;
  }
  return {b, &table_for(b)};
}

Selection& selection() {
  static Selection s = initial_selection();
  return s;
}

}  // namespace

Backend active_backend() { return selection().backend; }

bool set_backend(Backend b) {
  if (!available(b)) return false;
  selection() = {b, &table_for(b)};
  return true;
}

void axpy(double* y, double a, const double* x, std::size_t n) {
  selection().table->axpy(y, a, x, n);
}
void add(double* out, const double* a, const double* b, std::size_t n) {
  selection().table->add(out, a, b, n);
}
void sub(double* out, const double* a, const double* b, std::size_t n) {
  selection().table->sub(out, a, b, n);
}
void mul(double* out, const double* a, const double* b, std::size_t n) {
  selection().table->mul(out, a, b, n);
}
void scale(double* y, double a, std::size_t n) { selection().table->scale(y, a, n); }
void film(double* out, const double* z, const double* gamma, const double* beta,
          std::size_t n) {
  selection().table->film(out, z, gamma, beta, n);
}

}  // namespace neuralign::kern
