#include "pgiep/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pgiep {

namespace {

constexpr double kOrthTol = 1e-8;

void require_orthogonal(const Matrix& m, const char* name) {
    const double defect = orthogonality_defect(m);
    if (!(defect <= kOrthTol)) {
        throw ContractError(std::string(name) + " is not orthogonal: defect " + std::to_string(defect));
    }
}

void require_c_len(const AffinePencil& p, const Vector& c) {
    if (static_cast<int>(c.size()) != p.n) {
        throw DimensionError("parameter vector has length " + std::to_string(c.size()) + ", expected " +
                             std::to_string(p.n));
    }
}

// Q^T A(c) Z and Q^T B(c) Z.
std::pair<Matrix, Matrix> transformed_pencil(const AffinePencil& p, const Vector& c, const Matrix& q,
                                             const Matrix& z) {
    auto [a, b] = assemble(p, c);
    return {matmul_at(q, a) * z, matmul_at(q, b) * z};
}

double masked_fro_sq(const Matrix& m, const Matrix& x) {
    double s = 0.0;
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) {
            const double e = m(i, j) * x(i, j);
            s += e * e;
        }
    return s;
}

}  // namespace

AffinePencil AffinePencil::create(std::vector<Matrix> a, std::vector<Matrix> b, Vector target_finite_sorted,
                                  bool has_infinite) {
    AffinePencil p;
    if (a.empty() || a.size() != b.size()) throw DimensionError("pencil: need n+1 matrices on each side");
    const int n = a[0].rows();
    if (static_cast<int>(a.size()) != n + 1) throw DimensionError("pencil: expected n+1 = " + std::to_string(n + 1) +
                                                                  " matrices, got " + std::to_string(a.size()));
    for (const auto& m : a)
        if (m.rows() != n || m.cols() != n) throw DimensionError("pencil: A matrices must all be n x n");
    for (const auto& m : b)
        if (m.rows() != n || m.cols() != n) throw DimensionError("pencil: B matrices must all be n x n");
    const size_t want = has_infinite ? static_cast<size_t>(n - 1) : static_cast<size_t>(n);
    if (target_finite_sorted.size() != want) {
        throw DimensionError("pencil: expected " + std::to_string(want) + " finite target eigenvalues, got " +
                             std::to_string(target_finite_sorted.size()));
    }
    if (!std::is_sorted(target_finite_sorted.begin(), target_finite_sorted.end())) {
        throw ContractError("pencil: finite target eigenvalues must be ascending");
    }
    for (double v : target_finite_sorted)
        if (!std::isfinite(v)) throw ContractError("pencil: non-finite value in the finite target list");
    p.n = n;
    p.a_mats = std::move(a);
    p.b_mats = std::move(b);
    p.target_finite = std::move(target_finite_sorted);
    p.singular_mode = has_infinite;
    return p;
}

Vector AffinePencil::lambda_diag() const {
    Vector d(n, 0.0);
    for (size_t i = 0; i < target_finite.size(); ++i) d[i] = target_finite[i];
    return d;
}

Matrix mask(int n, MaskKind kind) {
    if (n < 1) throw DimensionError("mask: n must be positive");
    Matrix p(n, n);
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j) p(i, j) = 1.0;
    if (kind == MaskKind::StrictLowerPlusCorner) p(n - 1, n - 1) = 1.0;
    return p;
}

std::pair<Matrix, Matrix> assemble(const AffinePencil& p, const Vector& c) {
    require_c_len(p, c);
    Matrix a = p.a_mats[0];
    Matrix b = p.b_mats[0];
    for (int i = 0; i < p.n; ++i) {
        const double ci = c[i];
        auto ad = a.data();
        auto bd = b.data();
        auto as = p.a_mats[i + 1].data();
        auto bs = p.b_mats[i + 1].data();
        for (size_t k = 0; k < ad.size(); ++k) {
            ad[k] += ci * as[k];
            bd[k] += ci * bs[k];
        }
    }
    return {std::move(a), std::move(b)};
}

LossBreakdown objective(const AffinePencil& p, const Vector& c, const Matrix& q, const Matrix& z,
                        const Gammas& gammas) {
    if (p.singular_mode) throw ContractError("objective: pencil has an infinite target eigenvalue");
    require_c_len(p, c);
    require_orthogonal(q, "Q");
    require_orthogonal(z, "Z");
    auto [s, t] = transformed_pencil(p, c, q, z);
    const Vector lam = p.lambda_diag();

    double diag_sq = 0.0;
    for (int i = 0; i < p.n; ++i) {
        const double r = lam[i] * t(i, i) - s(i, i);
        diag_sq += r * r;
    }
    const Matrix pm = mask(p.n, MaskKind::StrictLower);
    LossBreakdown out;
    out.loss1 = gammas.g1 * diag_sq;
    out.loss2 = gammas.g2 * masked_fro_sq(pm, s) + gammas.g3 * masked_fro_sq(pm, t);
    out.total = out.loss1 + out.loss2;
    return out;
}

LossBreakdown objective_singular(const AffinePencil& p, const Vector& c, const Matrix& q, const Matrix& z,
                                 const Gammas& gammas) {
    if (!p.singular_mode) throw ContractError("objective_singular: pencil has no infinite target eigenvalue");
    require_c_len(p, c);
    require_orthogonal(q, "Q");
    require_orthogonal(z, "Z");
    auto [s, t] = transformed_pencil(p, c, q, z);
    const Vector lam = p.lambda_diag();

    double diag_sq = 0.0;
    for (int i = 0; i + 1 < p.n; ++i) {
        const double r = lam[i] * t(i, i) - s(i, i);
        diag_sq += r * r;
    }
    const Matrix pm = mask(p.n, MaskKind::StrictLower);
    const Matrix pm_hat = mask(p.n, MaskKind::StrictLowerPlusCorner);
    LossBreakdown out;
    out.loss1 = gammas.g1 * diag_sq;
    out.loss2 = gammas.g2 * masked_fro_sq(pm, s) + gammas.g3 * masked_fro_sq(pm_hat, t);
    out.total = out.loss1 + out.loss2;
    return out;
}

Matrix grad_q_analytic(const AffinePencil& p, const Vector& c, const Matrix& q, const Matrix& z,
                       const Vector& lambdas) {
    require_c_len(p, c);
    auto [a, b] = assemble(p, c);
    const int n = p.n;
    const Matrix az = a * z;
    const Matrix bz = b * z;
    const Matrix azt_q = matmul_at(az, q);  // (A(c)Z)^T Q
    const Matrix bzt_q = matmul_at(bz, q);

    // Diagonal residual I o ((AZ)^T Q) - Lambda o ((BZ)^T Q).
    Matrix g1(n, n);
    for (int i = 0; i < n; ++i) g1(i, i) = azt_q(i, i) - lambdas[i] * bzt_q(i, i);
    Matrix g1_lam(n, n);
    for (int i = 0; i < n; ++i) g1_lam(i, i) = g1(i, i) * lambdas[i];

    // Strict upper masks P^T o ((AZ)^T Q), P^T o ((BZ)^T Q).
    Matrix up_a(n, n), up_b(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            up_a(i, j) = azt_q(i, j);
            up_b(i, j) = bzt_q(i, j);
        }

    Matrix grad = az * g1;
    grad -= bz * g1_lam;
    grad += az * up_a;
    grad += bz * up_b;
    return grad;
}

Vector grad_c_analytic(const AffinePencil& p, const Vector& c, const Matrix& q, const Matrix& z,
                       const Vector& lambdas) {
    require_c_len(p, c);
    const int n = p.n;
    auto [s, t] = transformed_pencil(p, c, q, z);

    // Residuals of the current iterate.
    Matrix m1(n, n), m2(n, n), m3(n, n);
    for (int i = 0; i < n; ++i) m1(i, i) = s(i, i) - lambdas[i] * t(i, i);
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j) {
            m2(i, j) = s(i, j);
            m3(i, j) = t(i, j);
        }

    Vector grad(n, 0.0);
    for (int k = 0; k < n; ++k) {
        const Matrix sk = matmul_at(q, p.a_mats[k + 1]) * z;
        const Matrix tk = matmul_at(q, p.b_mats[k + 1]) * z;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += m1(i, i) * (sk(i, i) - lambdas[i] * tk(i, i));
        for (int i = 1; i < n; ++i)
            for (int j = 0; j < i; ++j) acc += m2(i, j) * sk(i, j) + m3(i, j) * tk(i, j);
        grad[k] = acc;
    }
    return grad;
}

LipschitzBounds lipschitz_bounds(const AffinePencil& p, const Vector& lambdas, double ball_radius) {
    const int n = p.n;
    double m0 = fro_norm(Matrix::diag(lambdas));
    double a_var_sq = 0.0, b_var_sq = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double na = fro_norm(p.a_mats[i]);
        const double nb = fro_norm(p.b_mats[i]);
        m0 = std::max({m0, na, nb});
        if (i >= 1) {
            a_var_sq += na * na;
            b_var_sq += nb * nb;
        }
    }
    // sup over the ball of ||A(c)||_F by Cauchy-Schwarz, same for B.
    m0 = std::max(m0, fro_norm(p.a_mats[0]) + ball_radius * std::sqrt(a_var_sq));
    m0 = std::max(m0, fro_norm(p.b_mats[0]) + ball_radius * std::sqrt(b_var_sq));

    double lam_inf = 0.0;
    for (double v : lambdas) lam_inf = std::max(lam_inf, std::abs(v));

    const double root = std::sqrt(static_cast<double>(n - 1));
    LipschitzBounds out;
    out.l_q = m0 * m0 * (1.0 + 2.0 * lam_inf + lam_inf * lam_inf + 2.0 * root);
    out.l_z = out.l_q;
    const double diag_factor = m0 + m0 * lam_inf;
    out.l_c = n * (diag_factor * diag_factor + 2.0 * m0 * m0 * root);
    return out;
}

ObjectiveGraph build_objective_graph(ad::Tape& tape, const AffinePencil& p, ad::NodeId c_row, ad::NodeId q,
                                     ad::NodeId z, const Gammas& gammas) {
    const int n = p.n;
    if (tape.value(c_row).rows() != 1 || tape.value(c_row).cols() != n) {
        throw DimensionError("build_objective_graph: c must be a 1 x n node");
    }

    // A(c) = A0 + sum_i c_i A_i (same for B), with c_i read off the row.
    ObjectiveGraph g;
    g.a_assembled = tape.constant(p.a_mats[0], "A0");
    g.b_assembled = tape.constant(p.b_mats[0], "B0");
    for (int i = 0; i < n; ++i) {
        Matrix e(n, 1);
        e(i, 0) = 1.0;
        const ad::NodeId ci = tape.matmul(c_row, tape.constant(e));
        g.a_assembled = tape.add(g.a_assembled, tape.scalar_mul(ci, tape.constant(p.a_mats[i + 1])));
        g.b_assembled = tape.add(g.b_assembled, tape.scalar_mul(ci, tape.constant(p.b_mats[i + 1])));
    }

    const ad::NodeId qt = tape.transpose(q);
    const ad::NodeId qtaz = tape.matmul(tape.matmul(qt, g.a_assembled), z);
    const ad::NodeId qtbz = tape.matmul(tape.matmul(qt, g.b_assembled), z);

    const ad::NodeId lam = tape.constant(Matrix::diag(p.lambda_diag()), "Lambda");
    const ad::NodeId eye = tape.constant(Matrix::identity(n));
    ad::NodeId m1 = tape.add(tape.hadamard(lam, qtbz), tape.scalar_mul(-1.0, tape.hadamard(eye, qtaz)));
    if (p.singular_mode) m1 = tape.delete_last_row_col(m1);

    const ad::NodeId pa = tape.constant(mask(n, MaskKind::StrictLower), "P");
    const ad::NodeId pb = p.singular_mode ? tape.constant(mask(n, MaskKind::StrictLowerPlusCorner), "P_hat") : pa;

    g.loss1 = tape.scalar_mul(gammas.g1, tape.fro_sq(m1));
    g.loss2 = tape.weighted_sum({{gammas.g2, tape.fro_sq(tape.hadamard(pa, qtaz))},
                                 {gammas.g3, tape.fro_sq(tape.hadamard(pb, qtbz))}});
    g.total = tape.add(g.loss1, g.loss2);
    return g;
}

LossBreakdown read_losses(const ad::Tape& tape, const ObjectiveGraph& g) {
    LossBreakdown out;
    out.loss1 = tape.value(g.loss1)(0, 0);
    out.loss2 = tape.value(g.loss2)(0, 0);
    out.total = tape.value(g.total)(0, 0);
    return out;
}

}  // namespace pgiep
