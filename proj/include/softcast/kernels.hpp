#pragma once

// Dense inner-loop kernels used by the model, decoder and metrics.
//
// Every kernel has a scalar reference implementation plus optional SIMD
// variants (AVX2+FMA on x86-64, NEON on AArch64). The variant is chosen once
// at startup from the running CPU; SOFTCAST_KERNELS=scalar|avx2|neon in the
// environment overrides the choice. SIMD variants reassociate sums, so they
// agree with the scalar reference to rounding, not bitwise.

#include <cstddef>
#include <string_view>

namespace softcast::kernels {

enum class Backend { Scalar, Avx2, Neon };

std::string_view backend_name(Backend b);
bool backend_supported(Backend b);
Backend best_backend();
Backend active_backend();
/// Throws ConfigError when the backend is not compiled in or not supported by the CPU.
void set_backend(Backend b);
Backend parse_backend(std::string_view name);

/// Restores the previous backend on scope exit.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(active_backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

float dot(const float* a, const float* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);

// y = W x (+ bias). W is rows x cols, row-major. bias may be null.
void gemv(const float* w, const float* x, const float* bias, float* y, std::size_t rows,
          std::size_t cols);
void gemv(const double* w, const double* x, const double* bias, double* y, std::size_t rows,
          std::size_t cols);

// dx += W^T dy
void gemv_t_acc(const float* w, const float* dy, float* dx, std::size_t rows, std::size_t cols);
void gemv_t_acc(const double* w, const double* dy, double* dx, std::size_t rows,
                std::size_t cols);

// dW += dy x^T
void ger_acc(const float* dy, const float* x, float* dw, std::size_t rows, std::size_t cols);
void ger_acc(const double* dy, const double* x, double* dw, std::size_t rows, std::size_t cols);

}  // namespace softcast::kernels
