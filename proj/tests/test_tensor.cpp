#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "mufasa/error.hpp"
#include "mufasa/kernels.hpp"
#include "mufasa/rng.hpp"
#include "mufasa/tensor.hpp"

using namespace mufasa;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.flat()) v = rng.normal();
    return m;
}

Vector random_vector(Rng& rng, std::size_t n, double sd = 1.0) {
    Vector v(n);
    for (double& x : v) x = rng.normal(0.0, sd);
    return v;
}

Matrix random_spd(Rng& rng, std::size_t n) {
    const Matrix b = random_matrix(rng, n, n);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += b(k, i) * b(k, j);
            a(i, j) = s + (i == j ? 1.0 : 0.0);
        }
    }
    return a;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    }
    return e;
}

}  // namespace

TEST_CASE("matvec examples") {
    CHECK(matvec(Matrix::identity(2), Vector{3, 4}) == Vector{3, 4});
    CHECK(matvec(Matrix(2, 2, {1, 2, 3, 4}), Vector{1, 1}) == Vector{3, 7});
    CHECK(matvec(Matrix(3, 2), Vector{5, 6}) == Vector{0, 0, 0});
    CHECK_THROWS_AS(matvec(Matrix(2, 3), Vector{1, 2}), ContractViolation);
}

TEST_CASE("matmul agrees with Eigen") {
    Rng rng(1);
    const Matrix a = random_matrix(rng, 5, 7), b = random_matrix(rng, 7, 3);
    const Matrix c = matmul(a, b);
    const Eigen::MatrixXd e = to_eigen(a) * to_eigen(b);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 3; ++j) CHECK(c(i, j) == doctest::Approx(e(i, j)).epsilon(1e-12));
    }
}

TEST_CASE("sherman-morrison examples") {
    const Matrix one = sherman_morrison_update(Matrix::identity(2), Vector{1, 0}, 1.0);
    CHECK(one == Matrix::diagonal(Vector{0.5, 1.0}));
    CHECK(sherman_morrison_update(Matrix::identity(2), Vector{0, 0}, 1.0) == Matrix::identity(2));
}

TEST_CASE("sherman-morrison rejects a near-singular update") {
    // 1 + c u^T A^-1 u = 0 on a (broken) negative inverse.
    CHECK_THROWS_AS(sherman_morrison_update(Matrix::identity(2, -1.0), Vector{1, 0}, 1.0), NearSingularUpdate);
    CHECK_THROWS_AS(sherman_morrison_update(Matrix::identity(2), Vector{1, 0}, -1.0), ContractViolation);
}

TEST_CASE("100 rank-one updates at dim 16 match the direct inverse") {
    Rng rng(7);
    const std::size_t n = 16;
    Matrix a = Matrix::identity(n);
    Matrix a_inv = Matrix::identity(n);
    Vector scratch;
    for (int k = 0; k < 100; ++k) {
        const Vector u = random_vector(rng, n, 0.5);
        const double c = 0.5;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) a(i, j) += c * u[i] * u[j];
        }
        sherman_morrison_update_inplace(a_inv, u, c, scratch);
    }
    CHECK(max_abs_diff(a_inv, direct_inverse(a)) <= 1e-8);
}

TEST_CASE("in-place update returns the pre-update quadratic form") {
    Matrix a_inv = Matrix::identity(3, 0.5);
    Vector scratch;
    const double q = sherman_morrison_update_inplace(a_inv, Vector{1, 2, 2}, 1.0, scratch);
    CHECK(q == doctest::Approx(4.5));
}

TEST_CASE("direct inverse examples") {
    CHECK(max_abs_diff(direct_inverse(Matrix::diagonal(Vector{2, 4})), Matrix::diagonal(Vector{0.5, 0.25})) <= 1e-15);
    CHECK(max_abs_diff(direct_inverse(Matrix::identity(5)), Matrix::identity(5)) == 0.0);
    Rng rng(3);
    const Matrix a = random_spd(rng, 8);
    CHECK(max_abs_diff(matmul(a, direct_inverse(a)), Matrix::identity(8)) <= 1e-10);
    CHECK_THROWS_AS(direct_inverse(Matrix(2, 2, {1, 2, 2, 1})), NotSpd);
}

TEST_CASE("quad_norm examples") {
    CHECK(quad_norm(Matrix::identity(1, 0.25), Vector{2}) == doctest::Approx(1.0));
    Rng rng(4);
    CHECK(quad_norm(direct_inverse(random_spd(rng, 4)), Vector(4, 0.0)) == 0.0);
    const Vector g = random_vector(rng, 6);
    CHECK(quad_norm(Matrix::identity(6, 1.0 / 3.0), g) == doctest::Approx(norm2(g) / std::sqrt(3.0)));
}

TEST_CASE("quad_norm clamps a negative form and counts it") {
    const std::uint64_t before = quad_norm_clamp_count();
    CHECK(quad_norm(Matrix::identity(2, -1.0), Vector{1, 1}) == 0.0);
    CHECK(quad_norm_clamp_count() == before + 1);
}

TEST_CASE("log_det examples and eigenvalue oracle") {
    CHECK(log_det(Matrix::identity(4)) == 0.0);
    CHECK(log_det(Matrix::diagonal(Vector{2, 2})) == doctest::Approx(2.0 * std::log(2.0)));
    Rng rng(5);
    const Matrix a = random_spd(rng, 6);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(a));
    double oracle = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) oracle += std::log(es.eigenvalues()(i));
    CHECK(std::abs(log_det(a) - oracle) <= 1e-9);
    CHECK_THROWS_AS(log_det(Matrix::diagonal(Vector{1, -1})), NotSpd);
}

TEST_CASE("SPD invariant: A^-1 stays symmetric under updates") {
    Rng rng(9);
    Matrix a_inv = Matrix::identity(10);
    Vector scratch;
    for (int k = 0; k < 50; ++k) sherman_morrison_update_inplace(a_inv, random_vector(rng, 10), 1.0, scratch);
    double asym = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t j = 0; j < 10; ++j) asym = std::max(asym, std::abs(a_inv(i, j) - a_inv(j, i)));
    }
    CHECK(asym <= 1e-12);
    CHECK_NOTHROW(cholesky(a_inv));
}

TEST_CASE("SIMD kernels agree with the scalar reference") {
    const kernels::KernelTable* fast = kernels::avx2_table();
    if (!fast) {
        MESSAGE("AVX2 not available on this machine; equivalence test skipped");
        return;
    }
    const kernels::KernelTable& ref = kernels::scalar_table();
    Rng rng(11);
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 100u}) {
        const Vector a = random_vector(rng, n), b = random_vector(rng, n);
        CHECK(fast->dot(a.data(), b.data(), n) == doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-13));

        Vector y1 = b, y2 = b;
        fast->axpy(0.37, a.data(), y1.data(), n);
        ref.axpy(0.37, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));

        for (std::size_t rows : {1u, 3u, 4u, 6u, 13u}) {
            const Matrix m = random_matrix(rng, rows, n);
            Vector o1(rows), o2(rows);
            fast->gemv(m.data(), rows, n, a.data(), o1.data());
            ref.gemv(m.data(), rows, n, a.data(), o2.data());
            for (std::size_t i = 0; i < rows; ++i) CHECK(std::abs(o1[i] - o2[i]) <= 1e-12);

            const Vector x = random_vector(rng, rows);
            Vector t1(n), t2(n);
            fast->gemv_t(m.data(), rows, n, x.data(), t1.data());
            ref.gemv_t(m.data(), rows, n, x.data(), t2.data());
            for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(t1[i] - t2[i]) <= 1e-12);

            Matrix g1 = m, g2 = m;
            fast->ger(g1.data(), rows, n, -0.8, x.data(), a.data());
            ref.ger(g2.data(), rows, n, -0.8, x.data(), a.data());
            CHECK(max_abs_diff(g1, g2) <= 1e-14);
        }
    }
}

TEST_CASE("kernel dispatch can be forced to the scalar path") {
    const kernels::KernelTable* before = &kernels::active();
    kernels::force(&kernels::scalar_table());
    CHECK(&kernels::active() == &kernels::scalar_table());
    kernels::force(before);
    CHECK(&kernels::active() == before);
}
