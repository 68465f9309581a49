#pragma once
// Dense double-precision inner loops. Every kernel has a scalar reference
// implementation and, on x86-64, an AVX2+FMA variant. The active table is
// picked once at startup from the CPU feature flags; set MUFASA_SIMD=scalar
// in the environment to force the reference path.

#include <cstddef>
#include <string_view>

namespace mufasa::kernels {

struct KernelTable {
    std::string_view name;

    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // y = M x, M row-major rows x cols
    void (*gemv)(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y);
    // y = M^T x, M row-major rows x cols, y has cols entries
    void (*gemv_t)(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y);
    // M += alpha * u v^T
    void (*ger)(double* m, std::size_t rows, std::size_t cols, double alpha, const double* u,
                const double* v);
};

const KernelTable& scalar_table();
/// nullptr when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

/// The dispatch table in use.
const KernelTable& active();

/// Override the dispatch choice (tests and benchmarks). Passing nullptr restores
/// the automatic choice.
void force(const KernelTable* table);

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
    active().axpy(alpha, x, y, n);
}
inline void gemv(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
    active().gemv(m, rows, cols, x, y);
}
inline void gemv_t(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
    active().gemv_t(m, rows, cols, x, y);
}
inline void ger(double* m, std::size_t rows, std::size_t cols, double alpha, const double* u,
                const double* v) {
    active().ger(m, rows, cols, alpha, u, v);
}

}  // namespace mufasa::kernels
