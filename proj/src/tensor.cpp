#include "mufasa/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "mufasa/error.hpp"
#include "mufasa/kernels.hpp"

namespace mufasa {
namespace {

std::atomic<std::uint64_t> g_clamps{0};

std::string dims(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw ContractViolation("matrix data has " + std::to_string(data_.size()) +
                                " entries, expected " + dims(rows, cols));
    }
}

Matrix Matrix::identity(std::size_t n, double scale) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
}

Vector matvec(const Matrix& m, std::span<const double> v) {
    if (m.cols() != v.size()) {
        throw ContractViolation("matvec: matrix " + dims(m.rows(), m.cols()) + " times vector of " +
                                std::to_string(v.size()));
    }
    Vector out(m.rows());
    kernels::gemv(m.data(), m.rows(), m.cols(), v.data(), out.data());
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ContractViolation("matmul: " + dims(a.rows(), a.cols()) + " times " +
                                dims(b.rows(), b.cols()));
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* dst = out.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double s = a(i, k);
            if (s != 0.0) kernels::axpy(s, b.row(k).data(), dst, b.cols());
        }
    }
    return out;
}

double sherman_morrison_update_inplace(Matrix& a_inv, std::span<const double> u, double c,
                                       Vector& scratch) {
    const std::size_t n = a_inv.rows();
    if (!a_inv.square() || u.size() != n) {
        throw ContractViolation("sherman_morrison_update: inverse " + dims(a_inv.rows(), a_inv.cols()) +
                                " with vector of " + std::to_string(u.size()));
    }
    if (!(c > 0.0)) throw ContractViolation("sherman_morrison_update: weight must be positive");
    scratch.resize(n);
    kernels::gemv(a_inv.data(), n, n, u.data(), scratch.data());
    const double quad = kernels::dot(u.data(), scratch.data(), n);
    const double denom = 1.0 + c * quad;
    if (!(denom > kSingularThreshold) || !std::isfinite(denom)) {
        throw NearSingularUpdate("sherman_morrison_update: denominator " + std::to_string(denom));
    }
    kernels::ger(a_inv.data(), n, n, -c / denom, scratch.data(), scratch.data());
    return quad;
}

Matrix sherman_morrison_update(const Matrix& a_inv, std::span<const double> u, double c) {
    Matrix out = a_inv;
    Vector scratch;
    sherman_morrison_update_inplace(out, u, c, scratch);
    return out;
}

Matrix cholesky(const Matrix& m) {
    if (!m.square()) throw NotSpd("cholesky: matrix is " + dims(m.rows(), m.cols()));
    const std::size_t n = m.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const double* lj = l.row(j).data();
        double d = m(j, j) - kernels::dot(lj, lj, j);
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw NotSpd("cholesky: non-positive pivot " + std::to_string(d) + " at " +
                         std::to_string(j));
        }
        d = std::sqrt(d);
        l(j, j) = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            l(i, j) = (m(i, j) - kernels::dot(l.row(i).data(), lj, j)) / d;
        }
    }
    return l;
}

Matrix direct_inverse(const Matrix& m) {
    const Matrix l = cholesky(m);
    const std::size_t n = l.rows();
    // Rows of linv_t hold the columns of L^-1, so A^-1 = L^-T L^-1 is a sum of
    // outer products of those rows.
    Matrix linv(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        linv(j, j) = 1.0 / l(j, j);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = 0.0;
            for (std::size_t k = j; k < i; ++k) s += l(i, k) * linv(k, j);
            linv(i, j) = -s / l(i, i);
        }
    }
    Matrix inv(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        kernels::ger(inv.data(), n, n, 1.0, linv.row(k).data(), linv.row(k).data());
    }
    return inv;
}

double log_det(const Matrix& m) {
    const Matrix l = cholesky(m);
    double s = 0.0;
    for (std::size_t i = 0; i < l.rows(); ++i) s += 2.0 * std::log(l(i, i));
    return s;
}

double quad_norm(const Matrix& a_inv, std::span<const double> g) {
    if (!a_inv.square() || a_inv.rows() != g.size()) {
        throw ContractViolation("quad_norm: inverse " + dims(a_inv.rows(), a_inv.cols()) +
                                " with vector of " + std::to_string(g.size()));
    }
    Vector tmp(g.size());
    kernels::gemv(a_inv.data(), g.size(), g.size(), g.data(), tmp.data());
    const double q = kernels::dot(g.data(), tmp.data(), g.size());
    if (q < 0.0) {
        g_clamps.fetch_add(1, std::memory_order_relaxed);
        return 0.0;
    }
    return std::sqrt(q);
}

std::uint64_t quad_norm_clamp_count() noexcept { return g_clamps.load(std::memory_order_relaxed); }

double norm2(std::span<const double> v) { return std::sqrt(kernels::dot(v.data(), v.data(), v.size())); }

bool all_finite(std::span<const double> v) noexcept {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ContractViolation("max_abs_diff: shape mismatch");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
    return d;
}

}  // namespace mufasa
