#pragma once

#include <utility>
#include <vector>

#include "pgiep/matrix.hpp"
#include "pgiep/tape.hpp"

namespace pgiep {

// Affine matrix families A(c) = A0 + sum_i c_i A_i and likewise B(c),
// together with the prescribed spectrum. When the prescribed spectrum
// contains an infinite eigenvalue (B(c) singular at the solution) it
// must occur exactly once and last; only the finite values are stored
// and singular_mode is set.
struct AffinePencil {
    int n = 0;
    std::vector<Matrix> a_mats;  // A0..An
    std::vector<Matrix> b_mats;  // B0..Bn
    Vector target_finite;        // ascending; n values, or n-1 in singular mode
    bool singular_mode = false;

    static AffinePencil create(std::vector<Matrix> a, std::vector<Matrix> b, Vector target_finite_sorted,
                               bool has_infinite);

    // Diagonal of the target matrix Lambda, length n. In singular mode
    // the last slot is unused and kept at 0.
    Vector lambda_diag() const;
};

enum class MaskKind {
    StrictLower,            // ones strictly below the diagonal
    StrictLowerPlusCorner,  // additionally selects the (n,n) entry
};

Matrix mask(int n, MaskKind kind);

struct Gammas {
    double g1 = 0.5;
    double g2 = 0.5;
    double g3 = 0.5;
};

struct LossBreakdown {
    double total = 0.0;
    double loss1 = 0.0;  // diagonal spectral-matching term
    double loss2 = 0.0;  // triangularity terms
};

// (A(c), B(c)).
std::pair<Matrix, Matrix> assemble(const AffinePencil& p, const Vector& c);

// g1 ||Lambda o (Q^T B(c) Z) - I o (Q^T A(c) Z)||_F^2
//   + g2 ||P o (Q^T A(c) Z)||_F^2 + g3 ||P o (Q^T B(c) Z)||_F^2.
// q and z must be orthogonal to 1e-8; requires a nonsingular-mode pencil.
LossBreakdown objective(const AffinePencil& p, const Vector& c, const Matrix& q, const Matrix& z,
                        const Gammas& gammas);

// Variant for pencils with one infinite target eigenvalue: the spectral
// term drops the last row and column, and the B-side mask additionally
// drives the (n,n) entry of Q^T B(c) Z to zero.
LossBreakdown objective_singular(const AffinePencil& p, const Vector& c, const Matrix& q, const Matrix& z,
                                 const Gammas& gammas);

// Gradient with respect to Q of the unweighted objective (all three
// gamma weights at 1/2), as the sum of its four closed-form terms.
Matrix grad_q_analytic(const AffinePencil& p, const Vector& c, const Matrix& q, const Matrix& z,
                       const Vector& lambdas);

// Gradient with respect to c of the unweighted objective; component k
// is a sum of three Frobenius inner products against the residuals.
Vector grad_c_analytic(const AffinePencil& p, const Vector& c, const Matrix& q, const Matrix& z,
                       const Vector& lambdas);

struct LipschitzBounds {
    double l_c = 0.0;
    double l_q = 0.0;
    double l_z = 0.0;
};

// Gradient-Lipschitz constants of the unweighted objective over the
// ball ||c||_2 <= ball_radius. M0 bounds the Frobenius norms of every
// A_i, B_i, Lambda, and (via Cauchy-Schwarz over the ball) A(c), B(c).
LipschitzBounds lipschitz_bounds(const AffinePencil& p, const Vector& lambdas, double ball_radius);

// Differentiable encoding of the objective on a tape. c_row is a 1 x n
// node; q and z are n x n nodes assumed orthogonal.
struct ObjectiveGraph {
    ad::NodeId total = -1;
    ad::NodeId loss1 = -1;
    ad::NodeId loss2 = -1;
    ad::NodeId a_assembled = -1;
    ad::NodeId b_assembled = -1;
};

ObjectiveGraph build_objective_graph(ad::Tape& tape, const AffinePencil& p, ad::NodeId c_row, ad::NodeId q,
                                     ad::NodeId z, const Gammas& gammas);

LossBreakdown read_losses(const ad::Tape& tape, const ObjectiveGraph& g);

}  // namespace pgiep
