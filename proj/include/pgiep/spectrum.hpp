#pragma once

#include "pgiep/matrix.hpp"

namespace pgiep {

// Generalized spectrum of a pencil (A, B) restricted to real eigenvalues.
struct Spectrum {
    Vector finite;           // ascending
    int infinite_count = 0;  // degree drop of det(A - lambda B)
    // max over finite lambda of sigma_min(A - lambda B) / (||A||_F + |lambda| ||B||_F)
    double residual = 0.0;
};

// Computes the real generalized eigenvalues of (a, b), including the
// count of infinite ones, from the characteristic polynomial
// det(A - lambda B): the determinant is sampled at n+1 scaled Chebyshev
// nodes (LU with partial pivoting), leading coefficients below
// 1e-10 * max|coeff| are trimmed to find the true degree, the roots are
// located by Aberth-Ehrlich iteration and then polished with Newton
// steps on the exact determinant. Pencils with genuinely complex
// eigenvalues raise ScopeError. Desk-scale contract: n <= 64.
Spectrum generalized_eigs(const Matrix& a, const Matrix& b);

// Max absolute difference between the sorted target and computed finite
// eigenvalues. If the infinite-eigenvalue counts disagree, returns
// +infinity and sets *infinite_mismatch when provided.
double spectrum_error(const Vector& target_finite, int target_infinite_count, const Spectrum& computed,
                      bool* infinite_mismatch = nullptr);

struct SingularityReport {
    double det = 0.0;
    double cond = 0.0;
    bool is_singular = false;
};

// det via LU, cond = sigma_max / sigma_min via SVD; singular when
// sigma_min / sigma_max < 1e-12.
SingularityReport singularity_report(const Matrix& b);

}  // namespace pgiep
