#include "mufasa/kernels.hpp"

namespace mufasa::kernels {
namespace {

double dot_ref(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_ref(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_ref(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot_ref(m + r * cols, x, cols);
}

void gemv_t_ref(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (x[r] != 0.0) axpy_ref(x[r], m + r * cols, y, cols);
    }
}

void ger_ref(double* m, std::size_t rows, std::size_t cols, double alpha, const double* u,
             const double* v) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double s = alpha * u[r];
        if (s != 0.0) axpy_ref(s, v, m + r * cols, cols);
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{"scalar", dot_ref, axpy_ref, gemv_ref, gemv_t_ref, ger_ref};
    return table;
}

}  // namespace mufasa::kernels
