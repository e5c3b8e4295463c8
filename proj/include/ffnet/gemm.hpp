#pragma once

#include <cstdint>

namespace ffnet {

// worker cap for the convolution kernels; 0 means "use the OpenMP default".
// set_max_threads(1) is the deterministic single-thread mode, although results
// are thread-count independent anyway (see gemm_nn).
int max_threads();
void set_max_threads(int n);

namespace detail {

// C[M x N] = A[M x K] * B[K x N] (or += when accumulate), all row-major.
// Loop order is i-k-j: every output element accumulates its K terms in
// ascending k with a single rounding per add, which (a) matches a scalar
// nested-loop convolution bit for bit and (b) makes the result independent
// of how rows are split across threads.
template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k,
             std::int64_t n, bool accumulate);

// dst[j][i] = src[i][j], src is rows x cols
template <class T>
void transpose(const T* src, T* dst, std::int64_t rows, std::int64_t cols);

}  // namespace detail
}  // namespace ffnet
