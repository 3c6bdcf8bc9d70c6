#include <atomic>
#include <cstdlib>
#include <string>

#include "internal.hpp"
#include "softcast/error.hpp"
#include "softcast/kernels.hpp"

namespace softcast::kernels {
namespace {

using detail::KernelTable;

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return &detail::scalar_table();
    case Backend::Avx2:
#if defined(SOFTCAST_HAVE_AVX2)
      return &detail::avx2_table();
#else
      return nullptr;
#endif
    case Backend::Neon:
#if defined(SOFTCAST_HAVE_NEON)
      return &detail::neon_table();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

Backend initial_backend() {
  if (const char* env = std::getenv("SOFTCAST_KERNELS"); env && *env) {
    const Backend requested = parse_backend(env);
    if (backend_supported(requested)) return requested;
  }
  return best_backend();
}

struct State {
  std::atomic<const KernelTable*> table;
  std::atomic<Backend> backend;
  State() {
    const Backend b = initial_backend();
    backend.store(b);
    table.store(table_for(b));
  }
};

State& state() {
  static State s;
  return s;
}

inline const KernelTable& active() { return *state().table.load(std::memory_order_relaxed); }

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::Scalar;
  if (name == "avx2") return Backend::Avx2;
  if (name == "neon") return Backend::Neon;
  throw ConfigError("unknown kernel backend '" + std::string(name) + "'");
}

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(SOFTCAST_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::Neon:
#if defined(SOFTCAST_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend best_backend() {
  if (backend_supported(Backend::Avx2)) return Backend::Avx2;
  if (backend_supported(Backend::Neon)) return Backend::Neon;
  return Backend::Scalar;
}

Backend active_backend() { return state().backend.load(); }

void set_backend(Backend b) {
  if (!backend_supported(b))
    throw ConfigError("kernel backend '" + std::string(backend_name(b)) +
                      "' is not available on this machine");
  state().table.store(table_for(b));
  state().backend.store(b);
}

float dot(const float* a, const float* b, std::size_t n) { return active().f32.dot(a, b, n); }
double dot(const double* a, const double* b, std::size_t n) { return active().f64.dot(a, b, n); }

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  active().f32.axpy(alpha, x, y, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().f64.axpy(alpha, x, y, n);
}

void gemv(const float* w, const float* x, const float* bias, float* y, std::size_t rows,
          std::size_t cols) {
  active().f32.gemv(w, x, bias, y, rows, cols);
}
void gemv(const double* w, const double* x, const double* bias, double* y, std::size_t rows,
          std::size_t cols) {
  active().f64.gemv(w, x, bias, y, rows, cols);
}

void gemv_t_acc(const float* w, const float* dy, float* dx, std::size_t rows, std::size_t cols) {
  active().f32.gemv_t_acc(w, dy, dx, rows, cols);
}
void gemv_t_acc(const double* w, const double* dy, double* dx, std::size_t rows,
                std::size_t cols) {
  active().f64.gemv_t_acc(w, dy, dx, rows, cols);
}

void ger_acc(const float* dy, const float* x, float* dw, std::size_t rows, std::size_t cols) {
  active().f32.ger_acc(dy, x, dw, rows, cols);
}
void ger_acc(const double* dy, const double* x, double* dw, std::size_t rows, std::size_t cols) {
  active().f64.ger_acc(dy, x, dw, rows, cols);
}

}  // namespace softcast::kernels
