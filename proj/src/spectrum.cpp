#include "pgiep/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

namespace pgiep {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Determinant as mant * 2^exp2 so that huge sample magnitudes never
// overflow. Returns mant = 0 for a numerically singular factorization.
struct ScaledDet {
    double mant = 0.0;
    long exp2 = 0;
};

ScaledDet det_lu(Matrix m) {
    const int n = m.rows();
    double mant = 1.0;
    long e2 = 0;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(m(k, k));
        for (int i = k + 1; i < n; ++i) {
            if (std::abs(m(i, k)) > best) {
                best = std::abs(m(i, k));
                piv = i;
            }
        }
        if (best == 0.0) return {0.0, 0};
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
            mant = -mant;
        }
        const double pivot = m(k, k);
        int pe = 0;
        mant *= std::frexp(pivot, &pe);
        e2 += pe;
        int me = 0;
        mant = std::frexp(mant, &me);
        e2 += me;
        for (int i = k + 1; i < n; ++i) {
            const double f = m(i, k) / pivot;
            if (f == 0.0) continue;
            for (int j = k + 1; j < n; ++j) m(i, j) -= f * m(k, j);
        }
    }
    return {mant, e2};
}

// In-place LU with partial pivoting for repeated solves.
struct LuFactors {
    Matrix lu;
    std::vector<int> perm;
    bool singular = false;
};

LuFactors lu_factor(Matrix m) {
    const int n = m.rows();
    LuFactors f;
    f.perm.resize(n);
    for (int i = 0; i < n; ++i) f.perm[i] = i;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(m(k, k));
        for (int i = k + 1; i < n; ++i)
            if (std::abs(m(i, k)) > best) {
                best = std::abs(m(i, k));
                piv = i;
            }
        if (best == 0.0) {
            f.singular = true;
            continue;
        }
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
            std::swap(f.perm[k], f.perm[piv]);
        }
        for (int i = k + 1; i < n; ++i) {
            m(i, k) /= m(k, k);
            const double f2 = m(i, k);
            if (f2 == 0.0) continue;
            for (int j = k + 1; j < n; ++j) m(i, j) -= f2 * m(k, j);
        }
    }
    f.lu = std::move(m);
    return f;
}

// trace((A - lambda B)^{-1} B) via one factorization and n solves.
double inverse_trace(const LuFactors& f, const Matrix& b) {
    const int n = f.lu.rows();
    double tr = 0.0;
    Vector x(n);
    for (int col = 0; col < n; ++col) {
        for (int i = 0; i < n; ++i) x[i] = b(f.perm[i], col);
        for (int i = 1; i < n; ++i)
            for (int j = 0; j < i; ++j) x[i] -= f.lu(i, j) * x[j];
        for (int i = n - 1; i >= 0; --i) {
            for (int j = i + 1; j < n; ++j) x[i] -= f.lu(i, j) * x[j];
            x[i] /= f.lu(i, i);
        }
        tr += x[col];
    }
    return tr;
}

// Value and derivative of a real-coefficient Chebyshev series at a
// complex point, via Clenshaw recurrences.
struct ChebEval {
    std::complex<double> value;
    std::complex<double> deriv;
};

ChebEval cheb_eval(const Vector& coeff, std::complex<double> z) {
    const int d = static_cast<int>(coeff.size()) - 1;
    std::complex<double> b1 = 0.0, b2 = 0.0, db1 = 0.0, db2 = 0.0;
    for (int k = d; k >= 1; --k) {
        const std::complex<double> b0 = coeff[k] + 2.0 * z * b1 - b2;
        const std::complex<double> db0 = 2.0 * b1 + 2.0 * z * db1 - db2;
        b2 = b1;
        b1 = b0;
        db2 = db1;
        db1 = db0;
    }
    ChebEval e;
    e.value = coeff[0] + z * b1 - b2;
    e.deriv = b1 + z * db1 - db2;
    return e;
}

std::vector<std::complex<double>> aberth_roots(const Vector& coeff) {
    const int d = static_cast<int>(coeff.size()) - 1;
    double coeff_sum = 0.0;
    for (double c : coeff) coeff_sum += std::abs(c);
    const double f_floor = 1e-13 * coeff_sum;

    std::vector<std::complex<double>> z(d);
    for (int i = 0; i < d; ++i) {
        const double re = std::cos(kPi * (i + 0.5) / d);
        z[i] = std::complex<double>(re, 0.05 + 0.01 * i / std::max(1, d));
    }

    const int max_iters = 200;
    for (int it = 0; it < max_iters; ++it) {
        bool done = true;
        for (int i = 0; i < d; ++i) {
            const ChebEval e = cheb_eval(coeff, z[i]);
            if (std::abs(e.value) <= f_floor) continue;
            std::complex<double> fp = e.deriv;
            if (fp == 0.0) fp = std::complex<double>(1e-300, 0.0);
            const std::complex<double> newton = e.value / fp;
            std::complex<double> repel = 0.0;
            for (int j = 0; j < d; ++j) {
                if (j == i) continue;
                const std::complex<double> diff = z[i] - z[j];
                if (std::abs(diff) > 1e-300) repel += 1.0 / diff;
            }
            const std::complex<double> denom = 1.0 - newton * repel;
            const std::complex<double> step =
                std::abs(denom) > 1e-300 ? newton / denom : newton;
            z[i] -= step;
            if (std::abs(step) > 1e-12 * (1.0 + std::abs(z[i]))) done = false;
        }
        if (done) return z;
    }
    throw ConvergenceError("generalized_eigs: Aberth iteration stalled", max_iters);
}

double sigma_extremes(const Matrix& m, double* sigma_max) {
    const SvdResult s = svd(m);
    if (sigma_max) *sigma_max = s.sigma.empty() ? 0.0 : s.sigma.front();
    return s.sigma.empty() ? 0.0 : s.sigma.back();
}

// Newton refinement of a real root of det(A - lambda B) using
// f'/f = -trace((A - lambda B)^{-1} B). Converges quadratically for
// simple roots and linearly (ratio 1 - 1/m) for m-fold ones, so the
// iteration budget is sized for high multiplicities.
double polish_root(double lambda0, const Matrix& a, const Matrix& b) {
    double lambda = lambda0;
    const double leash = 1.0 * (1.0 + std::abs(lambda0));
    for (int it = 0; it < 250; ++it) {
        Matrix m = a;
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) m(i, j) -= lambda * b(i, j);
        const LuFactors f = lu_factor(std::move(m));
        if (f.singular) break;  // already at a numerically exact root
        const double tr = inverse_trace(f, b);
        if (!std::isfinite(tr) || tr == 0.0) break;
        const double step = 1.0 / tr;
        if (!std::isfinite(step)) break;
        const double next = lambda + step;
        if (std::abs(next - lambda0) > leash) break;
        lambda = next;
        if (std::abs(step) <= 1e-15 * (1.0 + std::abs(lambda))) break;
    }
    return lambda;
}

}  // namespace

Spectrum generalized_eigs(const Matrix& a, const Matrix& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
        throw DimensionError("generalized_eigs: A and B must be square and of equal size");
    }
    const int n = a.rows();
    if (n > 64) throw ContractError("generalized_eigs: desk-scale contract is n <= 64");

    const double a_norm = fro_norm(a);
    const double b_norm = fro_norm(b);
    double sig_max_b = 0.0;
    const double sig_min_b = sigma_extremes(b, &sig_max_b);

    // Sample scale straddling the finite spectrum. The lower cutoff
    // keeps the scale bounded when B is (near) singular; without it the
    // nodes race off to 1/sigma_min and the interpolation loses the
    // roots near the origin.
    const double sig_eff = std::max(sig_min_b, 1e-3 * sig_max_b);
    double rho = (a_norm + 1.0) / (sig_eff + 1e-16);

    // det(A - rho*u*B) at Chebyshev nodes u_j, normalized by the
    // largest sample so the interpolation works on O(1) numbers.
    // Gauss-Chebyshev quadrature on n+1 nodes is exact for the
    // coefficients of a polynomial of degree <= n.
    auto fit_at = [&](double scale) {
        std::vector<ScaledDet> raw(n + 1);
        long max_e = std::numeric_limits<long>::min();
        bool any_nonzero = false;
        for (int j = 0; j <= n; ++j) {
            const double u = std::cos(kPi * (j + 0.5) / (n + 1));
            Matrix m = a;
            const double x = scale * u;
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) m(r, c) -= x * b(r, c);
            raw[j] = det_lu(std::move(m));
            if (raw[j].mant != 0.0) {
                any_nonzero = true;
                max_e = std::max(max_e, raw[j].exp2);
            }
        }
        if (!any_nonzero)
            throw ScopeError("generalized_eigs: det(A - lambda B) vanishes identically (singular pencil)");
        Vector vals(n + 1);
        for (int j = 0; j <= n; ++j) {
            const long shift = raw[j].exp2 - max_e;
            vals[j] = shift < -1060 ? 0.0 : std::ldexp(raw[j].mant, static_cast<int>(shift));
        }
        Vector coeff(n + 1, 0.0);
        for (int k = 0; k <= n; ++k) {
            double s = 0.0;
            for (int j = 0; j <= n; ++j) s += vals[j] * std::cos(k * kPi * (j + 0.5) / (n + 1));
            coeff[k] = s * (k == 0 ? 1.0 : 2.0) / (n + 1);
        }
        return coeff;
    };

    auto trim_degree = [n](const Vector& cf) {
        double max_coeff = 0.0;
        for (double c : cf) max_coeff = std::max(max_coeff, std::abs(c));
        for (int k = n; k >= 1; --k)
            if (std::abs(cf[k]) > 1e-10 * max_coeff) return k;
        return 0;
    };

    // The degree decision and the root accuracy both depend on the
    // sample scale: far too large a scale parks the true roots in an
    // unresolvable cluster at u ~ 0 and lets determinant noise mimic a
    // leading coefficient. Refit at the scale of the roots actually
    // found (ignoring outliers beyond 4x the current scale, which are
    // either near-infinite or noise) until the scale settles; degree
    // and roots from the final fit are the authoritative ones.
    int degree = 0;
    std::vector<std::complex<double>> roots;
    for (int pass = 0; pass < 4; ++pass) {
        Vector coeff = fit_at(rho);
        degree = trim_degree(coeff);
        if (degree == 0) break;
        coeff.resize(degree + 1);
        roots = aberth_roots(coeff);
        double bulk = 0.0;
        for (const auto& z : roots) {
            const double mag = rho * std::abs(z);
            if (mag <= 4.0 * rho) bulk = std::max(bulk, mag);
        }
        if (bulk == 0.0) break;
        const double rho_next = std::max(2.0 * bulk, 1e-12);
        if (rho_next >= 0.4 * rho && rho_next <= 2.5 * rho) break;
        rho = rho_next;
    }

    Spectrum out;
    out.infinite_count = n - degree;
    if (degree == 0) return out;

    // A multiple eigenvalue shows up as a root cluster whose members
    // carry imaginary parts of order eps^(1/multiplicity), so the
    // imaginary part alone cannot separate "real multiple" from
    // "genuinely complex". Every root is therefore polished from its
    // real part on the exact determinant and accepted only when the
    // residual sigma_min(A - lambda B) certifies an eigenvalue there;
    // roots that fail both the imaginary-part test and the residual
    // check are genuinely complex.
    auto relative_residual = [&](double lam) {
        Matrix m = a;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) m(r, c) -= lam * b(r, c);
        return sigma_extremes(m, nullptr) / (a_norm + std::abs(lam) * b_norm);
    };

    int complex_count = 0;
    for (const auto& z : roots) {
        const double lam0 = rho * z.real();
        const double im = rho * std::abs(z.imag());
        const double lam = polish_root(lam0, a, b);
        const double res = relative_residual(lam);
        const bool small_im = im <= 1e-6 * (1.0 + std::abs(lam0));
        if (small_im || res <= 1e-6) {
            out.finite.push_back(lam);
            out.residual = std::max(out.residual, res);
        } else {
            ++complex_count;
        }
    }
    if (complex_count > 0) {
        throw ScopeError("generalized_eigs: pencil has " + std::to_string(complex_count) +
                         " complex eigenvalues (real-spectrum scope)");
    }

    std::sort(out.finite.begin(), out.finite.end());

    // Cluster members of a multiple eigenvalue can polish onto a nearby
    // simple eigenvalue, leaving duplicates and short-counting the
    // multiple one. When duplicates appear, re-derive each distinct
    // root's algebraic multiplicity from the trace: near a root,
    // trace((A - (lambda + h) B)^{-1} B) ~ -m/h.
    const int accepted = static_cast<int>(out.finite.size());
    Vector reps;
    std::vector<int> group_sizes;
    for (double lam : out.finite) {
        if (!reps.empty() && std::abs(lam - reps.back()) <= 1e-7 * (1.0 + std::abs(reps.back()))) {
            ++group_sizes.back();
        } else {
            reps.push_back(lam);
            group_sizes.push_back(1);
        }
    }
    if (static_cast<int>(reps.size()) < accepted) {
        std::vector<int> mult;
        long total = 0;
        bool consistent = true;
        for (double lam : reps) {
            const double h = 1e-6 * (1.0 + std::abs(lam));
            Matrix m = a;
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) m(r, c) -= (lam + h) * b(r, c);
            const LuFactors f = lu_factor(std::move(m));
            if (f.singular) {
                consistent = false;
                break;
            }
            const double probe = -h * inverse_trace(f, b);
            const int mi = static_cast<int>(std::lround(probe));
            if (!std::isfinite(probe) || mi < 1 || std::abs(probe - mi) > 0.2) {
                consistent = false;  // defective or too-close roots: keep the polished list
                break;
            }
            mult.push_back(mi);
            total += mi;
        }
        if (consistent && total == accepted) {
            out.finite.clear();
            for (size_t g = 0; g < reps.size(); ++g)
                for (int i = 0; i < mult[g]; ++i) out.finite.push_back(reps[g]);
        }
    }
    return out;
}

double spectrum_error(const Vector& target_finite, int target_infinite_count, const Spectrum& computed,
                      bool* infinite_mismatch) {
    if (infinite_mismatch) *infinite_mismatch = false;
    if (computed.infinite_count != target_infinite_count) {
        if (infinite_mismatch) *infinite_mismatch = true;
        return std::numeric_limits<double>::infinity();
    }
    if (target_finite.size() != computed.finite.size()) {
        throw DimensionError("spectrum_error: finite parts differ in length (" +
                             std::to_string(target_finite.size()) + " vs " +
                             std::to_string(computed.finite.size()) + ")");
    }
    Vector t = target_finite;
    Vector c = computed.finite;
    std::sort(t.begin(), t.end());
    std::sort(c.begin(), c.end());
    double err = 0.0;
    for (size_t i = 0; i < t.size(); ++i) err = std::max(err, std::abs(t[i] - c[i]));
    return err;
}

SingularityReport singularity_report(const Matrix& b) {
    if (b.rows() != b.cols()) throw DimensionError("singularity_report: matrix must be square");
    SingularityReport rep;
    const ScaledDet d = det_lu(b);
    rep.det = std::ldexp(d.mant, static_cast<int>(std::clamp(d.exp2, -2000L, 2000L)));
    const SvdResult s = svd(b);
    const double smax = s.sigma.empty() ? 0.0 : s.sigma.front();
    const double smin = s.sigma.empty() ? 0.0 : s.sigma.back();
    rep.cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    rep.is_singular = smax == 0.0 || smin / smax < 1e-12;
    return rep;
}

}  // namespace pgiep
