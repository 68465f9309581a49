#include "mufasa/kernels.hpp"

#if defined(MUFASA_HAVE_AVX2)
#include <immintrin.h>

namespace mufasa::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_avx2(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
    std::size_t r = 0;
    // Four rows at a time share the loads of x.
    for (; r + 4 <= rows; r += 4) {
        const double* m0 = m + r * cols;
        const double* m1 = m0 + cols;
        const double* m2 = m1 + cols;
        const double* m3 = m2 + cols;
        __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
        __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            const __m256d xv = _mm256_loadu_pd(x + c);
            a0 = _mm256_fmadd_pd(_mm256_loadu_pd(m0 + c), xv, a0);
            a1 = _mm256_fmadd_pd(_mm256_loadu_pd(m1 + c), xv, a1);
            a2 = _mm256_fmadd_pd(_mm256_loadu_pd(m2 + c), xv, a2);
            a3 = _mm256_fmadd_pd(_mm256_loadu_pd(m3 + c), xv, a3);
        }
        double s0 = hsum(a0), s1 = hsum(a1), s2 = hsum(a2), s3 = hsum(a3);
        for (; c < cols; ++c) {
            s0 += m0[c] * x[c];
            s1 += m1[c] * x[c];
            s2 += m2[c] * x[c];
            s3 += m3[c] * x[c];
        }
        y[r] = s0;
        y[r + 1] = s1;
        y[r + 2] = s2;
        y[r + 3] = s3;
    }
    for (; r < rows; ++r) y[r] = dot_avx2(m + r * cols, x, cols);
}

void gemv_t_avx2(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (x[r] != 0.0) axpy_avx2(x[r], m + r * cols, y, cols);
    }
}

void ger_avx2(double* m, std::size_t rows, std::size_t cols, double alpha, const double* u,
              const double* v) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double s = alpha * u[r];
        if (s != 0.0) axpy_avx2(s, v, m + r * cols, cols);
    }
}

}  // namespace

const KernelTable* avx2_table() {
    static const KernelTable table{"avx2", dot_avx2, axpy_avx2, gemv_avx2, gemv_t_avx2, ger_avx2};
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &table : nullptr;
}

}  // namespace mufasa::kernels

#else

namespace mufasa::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace mufasa::kernels

#endif
