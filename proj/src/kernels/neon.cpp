// NEON kernels for AArch64 (Advanced SIMD is mandatory there, so no runtime
// feature probe is needed beyond the architecture check at build time).

#include <arm_neon.h>

#include "internal.hpp"

namespace softcast::kernels::detail {
namespace {

float dot_f32(const float* a, const float* b, std::size_t n) {
  float32x4_t acc0 = vdupq_n_f32(0.0f);
  float32x4_t acc1 = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
  float acc = vaddvq_f32(vaddq_f32(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  for (; i + 2 <= n; i += 2) acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <class S, S (*Dot)(const S*, const S*, std::size_t)>
void gemv_rows(const S* w, const S* x, const S* bias, S* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = (bias ? bias[r] : S(0)) + Dot(w + r * cols, x, cols);
}

template <class S, void (*Axpy)(S, const S*, S*, std::size_t)>
void gemv_t_rows(const S* w, const S* dy, S* dx, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    if (dy[r] != S(0)) Axpy(dy[r], w + r * cols, dx, cols);
}

template <class S, void (*Axpy)(S, const S*, S*, std::size_t)>
void ger_rows(const S* dy, const S* x, S* dw, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    if (dy[r] != S(0)) Axpy(dy[r], x, dw + r * cols, cols);
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{
      {&dot_f32, &axpy_f32, &gemv_rows<float, dot_f32>, &gemv_t_rows<float, axpy_f32>,
       &ger_rows<float, axpy_f32>},
      {&dot_f64, &axpy_f64, &gemv_rows<double, dot_f64>, &gemv_t_rows<double, axpy_f64>,
       &ger_rows<double, axpy_f64>},
  };
  return table;
}

}  // namespace softcast::kernels::detail
