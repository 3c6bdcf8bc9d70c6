// Reference kernels. Plain loops in index order; these define the expected
// result for the SIMD variants.

#include "internal.hpp"

namespace softcast::kernels::detail {
namespace {

template <class S>
S dot_scalar(const S* a, const S* b, std::size_t n) {
  S acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class S>
void axpy_scalar(S alpha, const S* x, S* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class S>
void gemv_scalar(const S* w, const S* x, const S* bias, S* y, std::size_t rows,
                 std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    S acc = bias ? bias[r] : S(0);
    const S* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

template <class S>
void gemv_t_acc_scalar(const S* w, const S* dy, S* dx, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const S g = dy[r];
    if (g == S(0)) continue;
    const S* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dx[c] += g * row[c];
  }
}

template <class S>
void ger_acc_scalar(const S* dy, const S* x, S* dw, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const S g = dy[r];
    if (g == S(0)) continue;
    S* row = dw + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += g * x[c];
  }
}

template <class S>
constexpr TypedKernels<S> typed() {
  return {&dot_scalar<S>, &axpy_scalar<S>, &gemv_scalar<S>, &gemv_t_acc_scalar<S>,
          &ger_acc_scalar<S>};
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{typed<float>(), typed<double>()};
  return table;
}

}  // namespace softcast::kernels::detail
