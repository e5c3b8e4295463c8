#include "ffnet/gemm.hpp"

#include <atomic>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ffnet {

namespace {
std::atomic<int> g_max_threads{0};

int resolve_threads() {
    const int cap = g_max_threads.load(std::memory_order_relaxed);
#ifdef _OPENMP
    const int avail = omp_get_max_threads();
    if (cap <= 0) return avail;
    return cap < avail ? cap : avail;
#else
    (void)cap;
    return 1;
#endif
}
}  // namespace

int max_threads() { return resolve_threads(); }

void set_max_threads(int n) { g_max_threads.store(n, std::memory_order_relaxed); }

namespace detail {

template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k,
             std::int64_t n, bool accumulate) {
    const int nthreads = resolve_threads();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1 && m > 1)
#endif
    for (std::int64_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        if (!accumulate) std::memset(crow, 0, sizeof(T) * static_cast<std::size_t>(n));
        const T* arow = a + i * k;
        for (std::int64_t kk = 0; kk < k; ++kk) {
            const T aik = arow[kk];
            const T* brow = b + kk * n;
            // contiguous inner loop, one rounded add per element per k step
            for (std::int64_t j = 0; j < n; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
}

template <class T>
void transpose(const T* src, T* dst, std::int64_t rows, std::int64_t cols) {
    constexpr std::int64_t kBlock = 32;
    for (std::int64_t i0 = 0; i0 < rows; i0 += kBlock) {
        const std::int64_t i1 = i0 + kBlock < rows ? i0 + kBlock : rows;
        for (std::int64_t j0 = 0; j0 < cols; j0 += kBlock) {
            const std::int64_t j1 = j0 + kBlock < cols ? j0 + kBlock : cols;
            for (std::int64_t i = i0; i < i1; ++i) {
                for (std::int64_t j = j0; j < j1; ++j) {
                    dst[j * rows + i] = src[i * cols + j];
                }
            }
        }
    }
}

template void gemm_nn<float>(const float*, const float*, float*, std::int64_t,
                             std::int64_t, std::int64_t, bool);
template void gemm_nn<double>(const double*, const double*, double*, std::int64_t,
                              std::int64_t, std::int64_t, bool);
template void transpose<float>(const float*, float*, std::int64_t, std::int64_t);
template void transpose<double>(const double*, double*, std::int64_t, std::int64_t);

}  // namespace detail
}  // namespace ffnet
