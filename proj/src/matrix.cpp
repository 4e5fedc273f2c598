#include "pgiep/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pgiep {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()) + ")");
    }
}

}  // namespace

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    data_.reserve(static_cast<size_t>(rows_) * cols_);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != cols_) throw DimensionError("Matrix init: ragged rows");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::ones(int rows, int cols) {
    Matrix m(rows, cols);
    std::fill(m.data_.begin(), m.data_.end(), 1.0);
    return m;
}

Matrix Matrix::diag(const Vector& d) {
    const int n = static_cast<int>(d.size());
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = d[i];
    return m;
}

Matrix& Matrix::operator+=(const Matrix& o) {
    require_same_shape(*this, o, "add");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    require_same_shape(*this, o, "sub");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    Matrix r = a;
    r += b;
    return r;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    Matrix r = a;
    r -= b;
    return r;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()) + ")");
    }
    Matrix c(a.rows(), b.cols());
    const int m = a.rows(), k = a.cols(), n = b.cols();
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
            const double ail = a(i, l);
            if (ail == 0.0) continue;
            for (int j = 0; j < n; ++j) c(i, j) += ail * b(l, j);
        }
    }
    return c;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix r = a;
    r *= s;
    return r;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw DimensionError("matmul_bt: inner dimensions differ");
    Matrix c(a.rows(), b.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (int l = 0; l < a.cols(); ++l) s += a(i, l) * b(j, l);
            c(i, j) = s;
        }
    return c;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw DimensionError("matmul_at: inner dimensions differ");
    Matrix c(a.cols(), b.cols());
    for (int l = 0; l < a.rows(); ++l)
        for (int i = 0; i < a.cols(); ++i) {
            const double ali = a(l, i);
            if (ali == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += ali * b(l, j);
        }
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c(a.rows(), a.cols());
    auto ad = a.data(), bd = b.data();
    auto cd = c.data();
    for (size_t i = 0; i < cd.size(); ++i) cd[i] = ad[i] * bd[i];
    return c;
}

double fro_norm(const Matrix& a) {
    double s = 0.0;
    for (double x : a.data()) s += x * x;
    return std::sqrt(s);
}

double fro_dot(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "fro_dot");
    double s = 0.0;
    auto ad = a.data(), bd = b.data();
    for (size_t i = 0; i < ad.size(); ++i) s += ad[i] * bd[i];
    return s;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double x : a.data()) m = std::max(m, std::abs(x));
    return m;
}

bool all_finite(const Matrix& a) {
    for (double x : a.data())
        if (!std::isfinite(x)) return false;
    return true;
}

double orthogonality_defect(const Matrix& a) {
    Matrix g = matmul_at(a, a);
    for (int i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
    return fro_norm(g);
}

QrResult qr_decompose(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("qr_decompose: matrix must be square");
    const int n = a.rows();
    QrResult res;
    res.r = a;
    res.q = Matrix::identity(n);
    Matrix& r = res.r;
    Matrix& q = res.q;
    Vector v(n);

    for (int k = 0; k < n - 1; ++k) {
        double norm = 0.0;
        for (int i = k; i < n; ++i) norm += r(i, k) * r(i, k);
        norm = std::sqrt(norm);
        if (norm < 1e-14) {
            res.rank_deficient = true;
            continue;  // reflector degenerates to the identity, sign +1
        }
        // Reflect onto -sign(pivot) * norm * e_k to avoid cancellation.
        double alpha = r(k, k) >= 0.0 ? -norm : norm;
        double vnorm_sq = 0.0;
        for (int i = k; i < n; ++i) {
            v[i] = r(i, k);
            if (i == k) v[i] -= alpha;
            vnorm_sq += v[i] * v[i];
        }
        if (vnorm_sq < 1e-30) continue;
        const double beta = 2.0 / vnorm_sq;
        // R <- (I - beta v v^T) R on rows k..n-1
        for (int j = k; j < n; ++j) {
            double dot = 0.0;
            for (int i = k; i < n; ++i) dot += v[i] * r(i, j);
            dot *= beta;
            for (int i = k; i < n; ++i) r(i, j) -= dot * v[i];
        }
        // Q <- Q (I - beta v v^T), accumulating the product of reflectors
        for (int i = 0; i < n; ++i) {
            double dot = 0.0;
            for (int l = k; l < n; ++l) dot += q(i, l) * v[l];
            dot *= beta;
            for (int l = k; l < n; ++l) q(i, l) -= dot * v[l];
        }
    }
    if (n >= 1 && std::abs(r(n - 1, n - 1)) < 1e-14) res.rank_deficient = true;

    // Zero the subdiagonal explicitly and make diag(R) nonnegative.
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j) r(i, j) = 0.0;
    for (int i = 0; i < n; ++i) {
        if (r(i, i) < 0.0) {
            for (int j = i; j < n; ++j) r(i, j) = -r(i, j);
            for (int l = 0; l < n; ++l) q(l, i) = -q(l, i);
        }
    }
    return res;
}

SvdResult svd(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("svd: matrix must be square");
    const int n = a.rows();
    SvdResult res;
    Matrix g = a;  // columns rotate toward mutual orthogonality
    Matrix v = Matrix::identity(n);

    const int max_sweeps = 64;
    const double tol = 1e-14;
    // Columns whose norm is at rounding level relative to ||A||_F are
    // numerically zero; rotating against them never converges.
    const double norm_scale = fro_norm(a);
    const double col_floor_sq = std::pow(1e-15 * (norm_scale > 0.0 ? norm_scale : 1.0), 2);
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (int i = 0; i < n; ++i) {
                    app += g(i, p) * g(i, p);
                    aqq += g(i, q) * g(i, q);
                    apq += g(i, p) * g(i, q);
                }
                if (app <= col_floor_sq || aqq <= col_floor_sq) continue;
                if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < n; ++i) {
                    const double gp = g(i, p), gq = g(i, q);
                    g(i, p) = c * gp - s * gq;
                    g(i, q) = s * gp + c * gq;
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }
    if (sweep == max_sweeps) throw ConvergenceError("svd: Jacobi sweeps did not converge", max_sweeps);

    Vector sigma(n);
    double sig_max = 0.0;
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += g(i, j) * g(i, j);
        sigma[j] = std::sqrt(s);
        sig_max = std::max(sig_max, sigma[j]);
    }

    // Sort singular values nonincreasing, carrying columns along.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return sigma[i] > sigma[j]; });

    Matrix u(n, n), vs(n, n);
    Vector sig_sorted(n);
    const double null_tol = (sig_max > 0.0 ? sig_max : 1.0) * 1e-13 * n;
    int effective_rank = 0;
    for (int j = 0; j < n; ++j) {
        const int src = order[j];
        sig_sorted[j] = sigma[src];
        for (int i = 0; i < n; ++i) vs(i, j) = v(i, src);
        if (sigma[src] > null_tol) {
            for (int i = 0; i < n; ++i) u(i, j) = g(i, src) / sigma[src];
            ++effective_rank;
        }
    }
    res.rank_deficient = effective_rank < n;

    // Complete U to an orthonormal basis where columns collapsed.
    for (int j = effective_rank; j < n; ++j) {
        for (int cand = 0; cand < n; ++cand) {
            Vector w(n, 0.0);
            w[cand] = 1.0;
            for (int l = 0; l < j; ++l) {
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += u(i, l) * w[i];
                for (int i = 0; i < n; ++i) w[i] -= dot * u(i, l);
            }
            double wn = 0.0;
            for (double x : w) wn += x * x;
            wn = std::sqrt(wn);
            if (wn > 0.5) {
                for (int i = 0; i < n; ++i) u(i, j) = w[i] / wn;
                break;
            }
        }
    }

    // Sign convention: largest-magnitude entry of each left singular
    // vector nonnegative; V flips in tandem to preserve the product.
    for (int j = 0; j < n; ++j) {
        int arg = 0;
        double best = std::abs(u(0, j));
        for (int i = 1; i < n; ++i) {
            if (std::abs(u(i, j)) > best) {
                best = std::abs(u(i, j));
                arg = i;
            }
        }
        if (u(arg, j) < 0.0) {
            for (int i = 0; i < n; ++i) {
                u(i, j) = -u(i, j);
                vs(i, j) = -vs(i, j);
            }
        }
    }

    res.u = std::move(u);
    res.v = std::move(vs);
    res.sigma = std::move(sig_sorted);
    return res;
}

Matrix permutation_swap(int n, int k, int k2) {
    if (k < 1 || k > n || k2 < 1 || k2 > n) {
        throw DimensionError("permutation_swap: indices out of range for n=" + std::to_string(n));
    }
    Matrix t = Matrix::identity(n);
    if (k != k2) {
        t(k - 1, k - 1) = 0.0;
        t(k2 - 1, k2 - 1) = 0.0;
        t(k - 1, k2 - 1) = 1.0;
        t(k2 - 1, k - 1) = 1.0;
    }
    return t;
}

Matrix solve_upper_right_transposed(const Matrix& k_mat, const Matrix& r) {
    const int n = r.rows();
    if (r.cols() != n || k_mat.cols() != n) throw DimensionError("solve_upper_right_transposed: shape mismatch");
    Matrix m(k_mat.rows(), n);
    // M R^T = K with R^T lower triangular: row i of K couples M(i,j)
    // to M(i,l) for l > j, so substitute from the last column back.
    for (int i = 0; i < k_mat.rows(); ++i) {
        for (int j = n - 1; j >= 0; --j) {
            double s = k_mat(i, j);
            for (int l = j + 1; l < n; ++l) s -= m(i, l) * r(j, l);
            double d = r(j, j);
            if (std::abs(d) < 1e-14) d = d >= 0.0 ? 1e-14 : -1e-14;
            m(i, j) = s / d;
        }
    }
    return m;
}

}  // namespace pgiep
