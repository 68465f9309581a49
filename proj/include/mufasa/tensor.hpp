#pragma once
// Dense real linear algebra used throughout the library. Values are plain
// 64-bit floats; the heavy loops go through mufasa::kernels.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mufasa {

using Vector = std::vector<double>;

/// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n, double scale = 1.0);
    static Matrix diagonal(std::span<const double> diag);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Minimum accepted value of 1 + c u^T A^-1 u in a rank-one inverse update.
inline constexpr double kSingularThreshold = 1e-12;

Vector matvec(const Matrix& m, std::span<const double> v);
Matrix matmul(const Matrix& a, const Matrix& b);

/// Returns (A + c u u^T)^-1 given A^-1.
Matrix sherman_morrison_update(const Matrix& a_inv, std::span<const double> u, double c);

/// In-place form of sherman_morrison_update. `scratch` is resized as needed.
/// Returns u^T A^-1 u evaluated with the pre-update inverse.
double sherman_morrison_update_inplace(Matrix& a_inv, std::span<const double> u, double c,
                                       Vector& scratch);

/// Lower-triangular Cholesky factor. Throws NotSpd.
Matrix cholesky(const Matrix& m);
/// Inverse of an SPD matrix through its Cholesky factor. Throws NotSpd.
Matrix direct_inverse(const Matrix& m);
/// log det of an SPD matrix. Throws NotSpd.
double log_det(const Matrix& m);

/// sqrt(g^T A^-1 g). A negative quadratic form caused by rounding is clamped
/// to zero and counted in quad_norm_clamp_count().
double quad_norm(const Matrix& a_inv, std::span<const double> g);
std::uint64_t quad_norm_clamp_count() noexcept;

double norm2(std::span<const double> v);
bool all_finite(std::span<const double> v) noexcept;
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace mufasa
