#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pgiep/matrix.hpp"
#include "pgiep/rng.hpp"

using namespace pgiep;

namespace {

Matrix reconstruct(const SvdResult& f) {
    Matrix us = f.u;
    for (int i = 0; i < us.rows(); ++i)
        for (int j = 0; j < us.cols(); ++j) us(i, j) *= f.sigma[j];
    return matmul_bt(us, f.v);
}

}  // namespace

TEST_CASE("hadamard basics") {
    const Matrix id2 = Matrix::identity(2);
    const Matrix x = {{5, 7}, {3, 9}};
    const Matrix masked = hadamard(id2, x);
    CHECK(masked(0, 0) == 5.0);
    CHECK(masked(0, 1) == 0.0);
    CHECK(masked(1, 0) == 0.0);
    CHECK(masked(1, 1) == 9.0);

    CHECK(fro_norm(hadamard(Matrix::zeros(3, 3), Matrix::ones(3, 3))) == 0.0);

    const Matrix a = {{1, 2}, {3, 4}};
    const Matrix b = {{2, 0}, {0, 2}};
    const Matrix h = hadamard(a, b);
    CHECK(h(0, 0) == 2.0);
    CHECK(h(0, 1) == 0.0);
    CHECK(h(1, 0) == 0.0);
    CHECK(h(1, 1) == 8.0);

    CHECK_THROWS_AS(hadamard(Matrix::zeros(2, 3), Matrix::zeros(3, 2)), DimensionError);
}

TEST_CASE("hadamard norm inequality on random pairs") {
    Rng rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform() * 5);
        const Matrix y = rng.normal_matrix(n, n);
        const Matrix w = rng.normal_matrix(n, n);
        CHECK(fro_norm(hadamard(y, w)) <= fro_norm(y) * fro_norm(w) + 1e-12);
    }
}

TEST_CASE("fro_norm") {
    CHECK(fro_norm(Matrix::identity(7)) == doctest::Approx(std::sqrt(7.0)).epsilon(1e-15));
    CHECK(fro_norm(Matrix::zeros(4, 4)) == 0.0);
    const Matrix row = {{3, 4}};
    CHECK(fro_norm(row) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("qr: identity and orthogonal inputs") {
    const auto f = qr_decompose(Matrix::identity(4));
    CHECK(fro_norm(f.q - Matrix::identity(4)) <= 1e-14);
    CHECK(fro_norm(f.r - Matrix::identity(4)) <= 1e-14);
    CHECK_FALSE(f.rank_deficient);

    Rng rng(7);
    const Matrix u = rng.orthogonal(5);
    const auto g = qr_decompose(u);
    CHECK(fro_norm(g.q - u) <= 1e-12);
    CHECK(fro_norm(g.r - Matrix::identity(5)) <= 1e-12);
}

TEST_CASE("qr: reconstruction, orthogonality, nonnegative diagonal") {
    const Matrix a = {{3, -1}, {4, 2}};
    const auto f = qr_decompose(a);
    CHECK(orthogonality_defect(f.q) <= 1e-10);
    CHECK(fro_norm(f.q * f.r - a) / fro_norm(a) <= 1e-10);
    CHECK(f.r(0, 0) >= 0.0);
    CHECK(f.r(1, 1) >= 0.0);
    CHECK(f.r(1, 0) == 0.0);

    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 7;
        const Matrix m = rng.normal_matrix(n, n);
        const auto g = qr_decompose(m);
        CHECK(orthogonality_defect(g.q) <= 1e-10);
        CHECK(fro_norm(g.q * g.r - m) / fro_norm(m) <= 1e-10);
        for (int i = 0; i < n; ++i) CHECK(g.r(i, i) >= 0.0);
    }
}

TEST_CASE("qr: rank-deficient input flagged") {
    Matrix a(3, 3);
    a(0, 0) = 1.0;
    a(1, 1) = 1.0;  // third column identically zero
    const auto f = qr_decompose(a);
    CHECK(f.rank_deficient);
    CHECK(orthogonality_defect(f.q) <= 1e-10);
    CHECK(fro_norm(f.q * f.r - a) <= 1e-12);
}

TEST_CASE("svd: diagonal and zero inputs") {
    const auto f = svd(Matrix::diag({3, 1}));
    CHECK(fro_norm(f.u - Matrix::identity(2)) <= 1e-12);
    CHECK(fro_norm(f.v - Matrix::identity(2)) <= 1e-12);
    CHECK(f.sigma[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(f.sigma[1] == doctest::Approx(1.0).epsilon(1e-14));

    const auto z = svd(Matrix::zeros(3, 3));
    for (double s : z.sigma) CHECK(s == 0.0);
    CHECK(orthogonality_defect(z.u) <= 1e-12);
    CHECK(orthogonality_defect(z.v) <= 1e-12);
}

TEST_CASE("svd: random reconstruction and conventions") {
    Rng rng(424242);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 6;
        const Matrix a = rng.normal_matrix(n, n);
        const auto f = svd(a);
        CHECK(orthogonality_defect(f.u) <= 1e-10);
        CHECK(orthogonality_defect(f.v) <= 1e-10);
        CHECK(fro_norm(reconstruct(f) - a) / fro_norm(a) <= 1e-9);
        for (size_t i = 0; i + 1 < f.sigma.size(); ++i) CHECK(f.sigma[i] >= f.sigma[i + 1]);
        for (double s : f.sigma) CHECK(s >= 0.0);
        for (int j = 0; j < n; ++j) {
            int arg = 0;
            for (int i = 1; i < n; ++i)
                if (std::abs(f.u(i, j)) > std::abs(f.u(arg, j))) arg = i;
            CHECK(f.u(arg, j) >= 0.0);
        }
    }
}

TEST_CASE("svd: deterministic across repeated calls") {
    Rng rng(5);
    const Matrix a = rng.normal_matrix(4, 4);
    const auto f1 = svd(a);
    const auto f2 = svd(a);
    CHECK(fro_norm(f1.u - f2.u) == 0.0);
    CHECK(fro_norm(f1.v - f2.v) == 0.0);
}

TEST_CASE("permutation_swap") {
    const Matrix t = permutation_swap(2, 1, 2);
    CHECK(t(0, 0) == 0.0);
    CHECK(t(0, 1) == 1.0);
    CHECK(t(1, 0) == 1.0);
    CHECK(t(1, 1) == 0.0);

    CHECK(fro_norm(permutation_swap(3, 1, 1) - Matrix::identity(3)) == 0.0);

    const Matrix x = {{1, 2}, {3, 4}};
    const Matrix swapped = x * permutation_swap(2, 1, 2);
    CHECK(swapped(0, 0) == 2.0);
    CHECK(swapped(0, 1) == 1.0);
    CHECK(swapped(1, 0) == 4.0);
    CHECK(swapped(1, 1) == 3.0);

    CHECK_THROWS_AS(permutation_swap(3, 0, 2), DimensionError);
    CHECK_THROWS_AS(permutation_swap(3, 1, 4), DimensionError);

    // orthogonal and involutive
    for (int n = 2; n <= 6; ++n) {
        const Matrix p = permutation_swap(n, 1, n);
        CHECK(orthogonality_defect(p) == 0.0);
        CHECK(fro_norm(p * p - Matrix::identity(n)) == 0.0);
    }
}

TEST_CASE("solve_upper_right_transposed") {
    Rng rng(17);
    const int n = 5;
    Matrix r(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) r(i, j) = rng.uniform(0.5, 2.0);
    const Matrix k = rng.normal_matrix(n, n);
    const Matrix m = solve_upper_right_transposed(k, r);
    CHECK(fro_norm(matmul_bt(m, r) - k) <= 1e-10 * fro_norm(k));
}
