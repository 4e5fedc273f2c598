#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pgiep/model.hpp"
#include "pgiep/problems.hpp"
#include "pgiep/rng.hpp"
#include "test_support.hpp"

using namespace pgiep;

namespace {

// Pencil whose exact solution at c = 0 is the prescribed upper
// triangular pair: A0 = Q S Z^T, B0 = Q T Z^T, higher terms random.
struct ExactCase {
    AffinePencil pencil;
    Matrix q, z;
};

ExactCase make_exact_case(int n, bool singular, std::uint64_t seed) {
    Rng rng(seed);
    Matrix s(n, n), t(n, n);
    Vector finite;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            s(i, j) = rng.normal();
            t(i, j) = rng.normal();
        }
        t(i, i) = rng.uniform(0.4, 1.5);
        s(i, i) = rng.uniform(-2.0, 2.0);
    }
    if (singular) t(n - 1, n - 1) = 0.0;
    const int finite_count = singular ? n - 1 : n;
    for (int i = 0; i < finite_count; ++i) finite.push_back(s(i, i) / t(i, i));
    std::sort(finite.begin(), finite.end());
    // reorder the diagonal ratios ascending so the targets line up
    // (regenerate s so that s_ii = lambda_i t_ii in sorted order)
    for (int i = 0; i < finite_count; ++i) s(i, i) = finite[i] * t(i, i);

    ExactCase ec;
    ec.q = rng.orthogonal(n);
    ec.z = rng.orthogonal(n);
    std::vector<Matrix> a_mats{ec.q * matmul_bt(s, ec.z)};
    std::vector<Matrix> b_mats{ec.q * matmul_bt(t, ec.z)};
    for (int i = 0; i < n; ++i) {
        a_mats.push_back(rng.normal_matrix(n, n));
        b_mats.push_back(rng.normal_matrix(n, n));
    }
    ec.pencil = AffinePencil::create(std::move(a_mats), std::move(b_mats), std::move(finite), singular);
    return ec;
}

ad::NodeId build_free_q_graph(ad::Tape& tape, const AffinePencil& p, const Vector& c, const Matrix& q,
                              const Matrix& z, ad::NodeId* q_out, ad::NodeId* c_out) {
    Matrix c_row(1, p.n);
    for (int i = 0; i < p.n; ++i) c_row(0, i) = c[i];
    const ad::NodeId cn = tape.parameter(c_row, "c");
    const ad::NodeId qn = tape.parameter(q, "Q");
    const ad::NodeId zn = tape.parameter(z, "Z");
    const ObjectiveGraph g = build_objective_graph(tape, p, cn, qn, zn, Gammas{});
    if (q_out) *q_out = qn;
    if (c_out) *c_out = cn;
    return g.total;
}

}  // namespace

TEST_CASE("assemble: zero parameters return the base pair") {
    const ProblemSpec spec = builtin_problem("ex41");
    auto [a, b] = assemble(spec.pencil, {0.0, 0.0});
    CHECK(fro_norm(a - spec.pencil.a_mats[0]) == 0.0);
    CHECK(fro_norm(b - spec.pencil.b_mats[0]) == 0.0);
    CHECK_THROWS_AS(assemble(spec.pencil, {1.0}), DimensionError);
}

TEST_CASE("assemble: reference entry of the ex41 pencil") {
    const ProblemSpec spec = builtin_problem("ex41");
    auto [a, b] = assemble(spec.pencil, {-0.453003, 0.361171});
    CHECK(a(0, 0) == doctest::Approx(0.596968).epsilon(1e-6));
}

TEST_CASE("assemble: banded family at the reference parameters") {
    const ProblemSpec spec = builtin_problem("ex44", 3);
    auto [a, b] = assemble(spec.pencil, {2.0, 1.0, 1.0});
    const Matrix expect = {{2, 1, 1}, {1, 2, 1}, {1, 1, 2}};
    CHECK(fro_norm(a - expect) == 0.0);
    CHECK(fro_norm(b - Matrix::diag({2, 1, 1})) == 0.0);
}

TEST_CASE("mask patterns") {
    const Matrix p2 = mask(2, MaskKind::StrictLower);
    CHECK(p2(0, 0) == 0.0);
    CHECK(p2(0, 1) == 0.0);
    CHECK(p2(1, 0) == 1.0);
    CHECK(p2(1, 1) == 0.0);

    CHECK(fro_norm(mask(1, MaskKind::StrictLower)) == 0.0);

    const Matrix p3 = mask(3, MaskKind::StrictLowerPlusCorner);
    CHECK(p3(2, 2) == 1.0);
    CHECK(p3(2, 0) == 1.0);
    CHECK(p3(0, 2) == 0.0);

    for (int n = 1; n <= 6; ++n) {
        const Matrix p = mask(n, MaskKind::StrictLower);
        CHECK(fro_norm(p + transpose(p) + Matrix::identity(n) - Matrix::ones(n, n)) == 0.0);
    }
}

TEST_CASE("objective: scalar case by hand") {
    // n = 1: A(c) = 2, B(c) = 1, lambda = 3 gives loss1 = 0.5 (3 - 2)^2.
    auto p = AffinePencil::create({Matrix{{2.0}}, Matrix{{0.0}}}, {Matrix{{1.0}}, Matrix{{0.0}}}, {3.0}, false);
    const LossBreakdown lb = objective(p, {0.0}, Matrix{{1.0}}, Matrix{{1.0}}, Gammas{});
    CHECK(lb.loss1 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(lb.loss2 == 0.0);
    CHECK(lb.total == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("objective: exact triangular construction has zero loss") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const ExactCase ec = make_exact_case(4, false, seed);
        const Vector c(4, 0.0);
        const LossBreakdown lb = objective(ec.pencil, c, ec.q, ec.z, Gammas{});
        CHECK(lb.total >= 0.0);
        CHECK(lb.total <= 1e-20);
        CHECK(lb.total == doctest::Approx(lb.loss1 + lb.loss2).epsilon(1e-14));
    }
}

TEST_CASE("objective_singular: exact construction with t_nn = 0") {
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        const ExactCase ec = make_exact_case(4, true, seed);
        const Vector c(4, 0.0);
        const LossBreakdown lb = objective_singular(ec.pencil, c, ec.q, ec.z, Gammas{});
        CHECK(lb.total <= 1e-20);
    }
}

TEST_CASE("objective: rejects non-orthogonal factors and wrong modes") {
    const ProblemSpec spec = builtin_problem("ex41");
    Matrix skew = Matrix::identity(2);
    skew(0, 1) = 1e-3;
    CHECK_THROWS_AS(objective(spec.pencil, {0.0, 0.0}, skew, Matrix::identity(2), Gammas{}), ContractError);
    CHECK_THROWS_AS(objective_singular(spec.pencil, {0.0, 0.0}, Matrix::identity(2), Matrix::identity(2), Gammas{}),
                    ContractError);
    const ProblemSpec sing = builtin_problem("ex45");
    CHECK_THROWS_AS(objective(sing.pencil, {0, 0, 0}, Matrix::identity(3), Matrix::identity(3), Gammas{}),
                    ContractError);
}

TEST_CASE("objective at the ex41 reference solution via constructed factors") {
    const ProblemSpec spec = builtin_problem("ex41");
    const Vector c = {-0.453003, 0.361171};
    auto [a, b] = assemble(spec.pencil, c);
    const auto f = testsupport::schur_factors_from_eigs(a, b, spec.pencil.target_finite, false);
    CHECK(orthogonality_defect(f.q) <= 1e-12);
    CHECK(orthogonality_defect(f.z) <= 1e-12);
    const LossBreakdown lb = objective(spec.pencil, c, f.q, f.z, Gammas{});
    CHECK(lb.total <= 1e-10);
}

TEST_CASE("objective_singular at the ex45 reference solution") {
    const ProblemSpec spec = builtin_problem("ex45");
    const Vector c = {1.0, 1.0, 1.0};
    auto [a, b] = assemble(spec.pencil, c);
    const auto f = testsupport::schur_factors_from_eigs(a, b, spec.pencil.target_finite, true);
    const LossBreakdown lb = objective_singular(spec.pencil, c, f.q, f.z, Gammas{});
    CHECK(lb.total <= 1e-10);
}

TEST_CASE("objective_singular: 2x2 case matches the scalar expansion") {
    // lambda = (1, inf); expand every term by hand.
    Rng rng(77);
    auto p = AffinePencil::create({rng.normal_matrix(2, 2), rng.normal_matrix(2, 2), rng.normal_matrix(2, 2)},
                                  {rng.normal_matrix(2, 2), rng.normal_matrix(2, 2), rng.normal_matrix(2, 2)}, {1.0},
                                  true);
    const Vector c = {0.3, -0.8};
    const Matrix q = rng.orthogonal(2);
    const Matrix z = rng.orthogonal(2);
    auto [a, b] = assemble(p, c);
    const Matrix s = matmul_at(q, a) * z;
    const Matrix t = matmul_at(q, b) * z;
    const double g = 0.5;
    const double expect_loss1 = g * (1.0 * t(0, 0) - s(0, 0)) * (1.0 * t(0, 0) - s(0, 0));
    const double expect_loss2 = g * s(1, 0) * s(1, 0) + g * (t(1, 0) * t(1, 0) + t(1, 1) * t(1, 1));
    const LossBreakdown lb = objective_singular(p, c, q, z, Gammas{});
    CHECK(lb.loss1 == doctest::Approx(expect_loss1).epsilon(1e-12));
    CHECK(lb.loss2 == doctest::Approx(expect_loss2).epsilon(1e-12));
}

TEST_CASE("loss decomposition and nonnegativity on random inputs") {
    Rng rng(3131);
    const ProblemSpec spec = builtin_problem("ex42");
    for (int trial = 0; trial < 20; ++trial) {
        Vector c(5);
        for (double& x : c) x = rng.normal();
        const Matrix q = rng.orthogonal(5);
        const Matrix z = rng.orthogonal(5);
        const LossBreakdown lb = objective(spec.pencil, c, q, z, Gammas{});
        CHECK(lb.total >= 0.0);
        CHECK(std::abs(lb.total - (lb.loss1 + lb.loss2)) <= 1e-14 * std::max(1.0, lb.total));
    }
}

TEST_CASE("grad_q_analytic vanishes at an exact solution") {
    const ExactCase ec = make_exact_case(3, false, 5150);
    const Vector c(3, 0.0);
    const Matrix g = grad_q_analytic(ec.pencil, c, ec.q, ec.z, ec.pencil.lambda_diag());
    CHECK(fro_norm(g) <= 1e-12);
    const Vector gc = grad_c_analytic(ec.pencil, c, ec.q, ec.z, ec.pencil.lambda_diag());
    for (double v : gc) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("analytic gradients match reverse-mode AD") {
    Rng rng(909);
    for (int n : {2, 3, 5}) {
        for (int trial = 0; trial < 3; ++trial) {
            std::vector<Matrix> a, b;
            for (int i = 0; i <= n; ++i) {
                a.push_back(rng.normal_matrix(n, n));
                b.push_back(rng.normal_matrix(n, n));
            }
            Vector lam(n);
            for (double& v : lam) v = rng.uniform(-2.0, 2.0);
            std::sort(lam.begin(), lam.end());
            auto p = AffinePencil::create(std::move(a), std::move(b), lam, false);
            Vector c(n);
            for (double& v : c) v = rng.normal();
            const Matrix q = rng.orthogonal(n);
            const Matrix z = rng.orthogonal(n);

            ad::Tape tape;
            ad::NodeId qn = -1, cn = -1;
            const ad::NodeId total = build_free_q_graph(tape, p, c, q, z, &qn, &cn);
            tape.forward_eval(total);
            tape.backward(total);

            const Matrix gq = grad_q_analytic(p, c, q, z, p.lambda_diag());
            CHECK(fro_norm(tape.adjoint(qn) - gq) <= 1e-8);

            const Vector gc = grad_c_analytic(p, c, q, z, p.lambda_diag());
            const Matrix& gc_ad = tape.adjoint(cn);
            double diff = 0.0;
            for (int i = 0; i < n; ++i) diff = std::max(diff, std::abs(gc_ad(0, i) - gc[i]));
            CHECK(diff <= 1e-8);
        }
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(404);
    const int n = 3;
    std::vector<Matrix> a, b;
    for (int i = 0; i <= n; ++i) {
        a.push_back(rng.normal_matrix(n, n));
        b.push_back(rng.normal_matrix(n, n));
    }
    Vector lam = {-1.0, 0.2, 1.5};
    auto p = AffinePencil::create(std::move(a), std::move(b), lam, false);
    Vector c = {0.4, -0.2, 0.9};
    const Matrix q = rng.orthogonal(n);
    const Matrix z = rng.orthogonal(n);

    ad::Tape tape;
    ad::NodeId qn = -1, cn = -1;
    const ad::NodeId total = build_free_q_graph(tape, p, c, q, z, &qn, &cn);

    const double h = 1e-6;
    const Matrix gq = grad_q_analytic(p, c, q, z, lam);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Matrix qp = q, qm = q;
            qp(i, j) += h;
            qm(i, j) -= h;
            tape.set_value(qn, qp);
            const double fp = tape.forward_eval(total);
            tape.set_value(qn, qm);
            const double fm = tape.forward_eval(total);
            const double fd = (fp - fm) / (2.0 * h);
            CHECK(std::abs(fd - gq(i, j)) / std::max({1.0, std::abs(fd), std::abs(gq(i, j))}) <= 1e-5);
        }
    tape.set_value(qn, q);

    const Vector gc = grad_c_analytic(p, c, q, z, lam);
    for (int k = 0; k < n; ++k) {
        Matrix cp(1, n), cm(1, n);
        for (int i = 0; i < n; ++i) cp(0, i) = cm(0, i) = c[i];
        cp(0, k) += h;
        cm(0, k) -= h;
        tape.set_value(cn, cp);
        const double fp = tape.forward_eval(total);
        tape.set_value(cn, cm);
        const double fm = tape.forward_eval(total);
        const double fd = (fp - fm) / (2.0 * h);
        CHECK(std::abs(fd - gc[k]) / std::max({1.0, std::abs(fd), std::abs(gc[k])}) <= 1e-5);
    }
}

TEST_CASE("lipschitz bound formulas") {
    // All norms capped at M0 = 1 with max |lambda| = 1 gives l_q = 6.
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    Matrix a0 = inv_sqrt2 * Matrix::identity(2);
    auto p = AffinePencil::create({a0, Matrix(2, 2), Matrix(2, 2)}, {a0, Matrix(2, 2), Matrix(2, 2)}, {0.0, 1.0},
                                  false);
    const auto lb = lipschitz_bounds(p, {0.0, 1.0}, 0.0);
    CHECK(lb.l_q == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(lb.l_z == lb.l_q);

    // Lambda = 0 collapses to M0^2 (1 + 2 sqrt(n-1)).
    const auto lb0 = lipschitz_bounds(p, {0.0, 0.0}, 0.0);
    CHECK(lb0.l_q == doctest::Approx(1.0 + 2.0).epsilon(1e-12));

    const ProblemSpec ex41 = builtin_problem("ex41");
    const auto lb41 = lipschitz_bounds(ex41.pencil, ex41.pencil.lambda_diag(), 2.0);
    CHECK(lb41.l_q > 0.0);
    CHECK(std::isfinite(lb41.l_q));
    CHECK(lb41.l_c > 0.0);
}

TEST_CASE("empirical gradient-Lipschitz spot check") {
    const ProblemSpec spec = builtin_problem("ex41");
    const Vector lam = spec.pencil.lambda_diag();
    const double radius = 2.0 * std::sqrt(0.453003 * 0.453003 + 0.361171 * 0.361171);
    const auto lb = lipschitz_bounds(spec.pencil, lam, radius);
    Rng rng(616);
    Vector c = {0.1, -0.2};
    const Matrix z = rng.orthogonal(2);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix q1 = rng.orthogonal(2);
        const Matrix q2 = rng.orthogonal(2);
        const double lhs = fro_norm(grad_q_analytic(spec.pencil, c, q1, z, lam) -
                                    grad_q_analytic(spec.pencil, c, q2, z, lam));
        CHECK(lhs <= lb.l_q * fro_norm(q1 - q2) + 1e-12);
    }
}

TEST_CASE("pencil validation") {
    std::vector<Matrix> a(3, Matrix(2, 2)), b(3, Matrix(2, 2));
    CHECK_THROWS_AS(AffinePencil::create({Matrix(2, 2)}, {Matrix(2, 2)}, {1.0}, false), DimensionError);
    CHECK_THROWS_AS(AffinePencil::create(a, b, {3.0, 1.0}, false), ContractError);  // unsorted
    CHECK_THROWS_AS(AffinePencil::create(a, b, {1.0}, false), DimensionError);      // wrong count
    CHECK_THROWS_AS(AffinePencil::create(a, b, {1.0, 2.0}, true), DimensionError);  // n finite + inf
    std::vector<Matrix> ragged = a;
    ragged[1] = Matrix(3, 3);
    CHECK_THROWS_AS(AffinePencil::create(ragged, b, {1.0, 2.0}, false), DimensionError);

    const AffinePencil p = AffinePencil::create(a, b, {1.0}, true);
    CHECK(p.singular_mode);
    const Vector lam = p.lambda_diag();
    CHECK(lam.size() == 2);
    CHECK(lam[0] == 1.0);
    CHECK(lam[1] == 0.0);  // unused slot
}

TEST_CASE("objective graph evaluates to zero at an exact solution") {
    const ExactCase ec = make_exact_case(4, false, 31337);
    ad::Tape tape;
    const ad::NodeId cn = tape.parameter(Matrix(1, 4), "c");
    const ad::NodeId qn = tape.constant(ec.q);
    const ad::NodeId zn = tape.constant(ec.z);
    const ObjectiveGraph g = build_objective_graph(tape, ec.pencil, cn, qn, zn, Gammas{});
    CHECK(tape.forward_eval(g.total) <= 1e-20);
}
