#pragma once

#include <cstddef>

namespace softcast::kernels::detail {

template <class S>
struct TypedKernels {
  S (*dot)(const S*, const S*, std::size_t);
  void (*axpy)(S, const S*, S*, std::size_t);
  void (*gemv)(const S*, const S*, const S*, S*, std::size_t, std::size_t);
  void (*gemv_t_acc)(const S*, const S*, S*, std::size_t, std::size_t);
  void (*ger_acc)(const S*, const S*, S*, std::size_t, std::size_t);
};

struct KernelTable {
  TypedKernels<float> f32;
  TypedKernels<double> f64;
};

const KernelTable& scalar_table();
#if defined(SOFTCAST_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(SOFTCAST_HAVE_NEON)
const KernelTable& neon_table();
#endif

}  // namespace softcast::kernels::detail
