#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "pgiep/errors.hpp"

namespace pgiep {

using Vector = std::vector<double>;

// Dense real matrix, row-major storage, double precision.
// Values are immutable by convention once an operation returns them;
// all free functions below are pure.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {
        assert(rows >= 0 && cols >= 0);
    }
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(int n);
    static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }
    static Matrix ones(int rows, int cols);
    static Matrix diag(const Vector& d);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }
    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(int i, int j) {
        assert(i >= 0 && i < rows_ && j >= 0 && j < cols_);
        return data_[static_cast<size_t>(i) * cols_ + j];
    }
    double operator()(int i, int j) const {
        assert(i >= 0 && i < rows_ && j >= 0 && j < cols_);
        return data_[static_cast<size_t>(i) * cols_ + j];
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

Matrix transpose(const Matrix& a);

// a * b^T and a^T * b without forming the transpose.
Matrix matmul_bt(const Matrix& a, const Matrix& b);
Matrix matmul_at(const Matrix& a, const Matrix& b);

// Entrywise product. Shapes must match.
Matrix hadamard(const Matrix& a, const Matrix& b);

// sqrt of the sum of squared entries.
double fro_norm(const Matrix& a);

// Frobenius inner product <a, b>.
double fro_dot(const Matrix& a, const Matrix& b);

double max_abs(const Matrix& a);
bool all_finite(const Matrix& a);

// || a^T a - I ||_F, the deviation of a from orthogonality.
double orthogonality_defect(const Matrix& a);

struct QrResult {
    Matrix q;
    Matrix r;
    bool rank_deficient = false;
};

// Householder QR of a square matrix with the diagonal of R made
// nonnegative, which pins the factorization uniquely for full-rank
// input. A column pivot whose magnitude falls below 1e-14 keeps its
// reflector sign at +1 and sets rank_deficient.
QrResult qr_decompose(const Matrix& a);

struct SvdResult {
    Matrix u;
    Vector sigma;  // nonincreasing, nonnegative
    Matrix v;
    bool rank_deficient = false;
};

// One-sided Jacobi SVD of a square matrix. Columns of U are signed so
// that each column's entry of largest magnitude is nonnegative, making
// the factors deterministic across runs. Throws ConvergenceError if the
// sweep budget is exhausted.
SvdResult svd(const Matrix& a);

// Identity with rows k and k2 (1-based) exchanged. Right-multiplying
// X by the result swaps columns k and k2 of X.
Matrix permutation_swap(int n, int k, int k2);

// M = k_mat * r^{-T} for upper-triangular r, by forward substitution.
// Divisors are clamped at 1e-14 in magnitude.
Matrix solve_upper_right_transposed(const Matrix& k_mat, const Matrix& r);

}  // namespace pgiep
