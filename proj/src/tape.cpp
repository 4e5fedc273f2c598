#include "pgiep/tape.hpp"

#include <cmath>

namespace pgiep::ad {

const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::Constant: return "constant";
        case OpKind::Parameter: return "parameter";
        case OpKind::Add: return "add";
        case OpKind::MatMul: return "matmul";
        case OpKind::ScalarMul: return "scalar-mul";
        case OpKind::Hadamard: return "hadamard";
        case OpKind::Transpose: return "transpose";
        case OpKind::Relu: return "relu";
        case OpKind::QrQFactor: return "qr-q-factor";
        case OpKind::SvdUvtFactor: return "svd-uvt-factor";
        case OpKind::SubmatrixDeleteLast: return "submatrix-delete-last";
        case OpKind::FroSq: return "fro-sq";
        case OpKind::WeightedSum: return "weighted-sum";
    }
    return "?";
}

std::string Tape::describe(NodeId id) const {
    const Node& n = nodes_[id];
    std::string s = std::string(op_kind_name(n.kind)) + " node #" + std::to_string(id);
    if (!n.label.empty()) s += " (" + n.label + ")";
    return s;
}

void Tape::fail(NodeId id, const std::string& what) const {
    throw DimensionError(describe(id) + ": " + what);
}

NodeId Tape::push(Node n) {
    const NodeId id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(std::move(n));
    eval_node(id);
    return id;
}

NodeId Tape::constant(Matrix value, std::string label) {
    Node n;
    n.kind = OpKind::Constant;
    n.value = std::move(value);
    n.label = std::move(label);
    return push(std::move(n));
}

NodeId Tape::parameter(Matrix value, std::string label) {
    Node n;
    n.kind = OpKind::Parameter;
    n.value = std::move(value);
    n.label = std::move(label);
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    Node n;
    n.kind = OpKind::Add;
    n.inputs = {a, b};
    return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    Node n;
    n.kind = OpKind::MatMul;
    n.inputs = {a, b};
    return push(std::move(n));
}

NodeId Tape::scalar_mul(double alpha, NodeId x) {
    Node n;
    n.kind = OpKind::ScalarMul;
    n.inputs = {x};
    n.alpha = alpha;
    return push(std::move(n));
}

NodeId Tape::scalar_mul(NodeId s, NodeId x) {
    Node n;
    n.kind = OpKind::ScalarMul;
    n.inputs = {s, x};
    return push(std::move(n));
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
    Node n;
    n.kind = OpKind::Hadamard;
    n.inputs = {a, b};
    return push(std::move(n));
}

NodeId Tape::transpose(NodeId x) {
    Node n;
    n.kind = OpKind::Transpose;
    n.inputs = {x};
    return push(std::move(n));
}

NodeId Tape::relu(NodeId x) {
    Node n;
    n.kind = OpKind::Relu;
    n.inputs = {x};
    return push(std::move(n));
}

NodeId Tape::qr_q(NodeId x) {
    Node n;
    n.kind = OpKind::QrQFactor;
    n.inputs = {x};
    return push(std::move(n));
}

NodeId Tape::svd_uvt(NodeId x) {
    Node n;
    n.kind = OpKind::SvdUvtFactor;
    n.inputs = {x};
    return push(std::move(n));
}

NodeId Tape::delete_last_row_col(NodeId x) {
    Node n;
    n.kind = OpKind::SubmatrixDeleteLast;
    n.inputs = {x};
    return push(std::move(n));
}

NodeId Tape::fro_sq(NodeId x) {
    Node n;
    n.kind = OpKind::FroSq;
    n.inputs = {x};
    return push(std::move(n));
}

NodeId Tape::weighted_sum(const std::vector<std::pair<double, NodeId>>& terms) {
    Node n;
    n.kind = OpKind::WeightedSum;
    for (const auto& [w, id] : terms) {
        n.weights.push_back(w);
        n.inputs.push_back(id);
    }
    return push(std::move(n));
}

double Tape::scalar(NodeId id) const {
    const Matrix& v = nodes_[id].value;
    if (v.rows() != 1 || v.cols() != 1) fail(id, "expected a 1x1 value");
    return v(0, 0);
}

void Tape::set_value(NodeId id, Matrix v) {
    Node& n = nodes_[id];
    if (n.kind != OpKind::Constant && n.kind != OpKind::Parameter) fail(id, "set_value on a non-leaf node");
    if (!n.value.same_shape(v)) fail(id, "set_value changes the shape");
    n.value = std::move(v);
}

void Tape::eval_node(NodeId id) {
    Node& n = nodes_[id];
    auto in = [&](int i) -> const Matrix& { return nodes_[n.inputs[i]].value; };
    switch (n.kind) {
        case OpKind::Constant:
        case OpKind::Parameter:
            break;
        case OpKind::Add: {
            const Matrix& a = in(0);
            const Matrix& b = in(1);
            if (a.same_shape(b)) {
                n.value = a + b;
            } else if (b.cols() == 1 && b.rows() == a.rows()) {
                Matrix v = a;
                for (int i = 0; i < a.rows(); ++i)
                    for (int j = 0; j < a.cols(); ++j) v(i, j) += b(i, 0);
                n.value = std::move(v);
            } else {
                fail(id, "incompatible shapes for add/bias broadcast");
            }
            break;
        }
        case OpKind::MatMul: {
            if (in(0).cols() != in(1).rows()) fail(id, "inner dimensions differ");
            n.value = in(0) * in(1);
            break;
        }
        case OpKind::ScalarMul: {
            if (n.inputs.size() == 2) {
                const Matrix& s = in(0);
                if (s.rows() != 1 || s.cols() != 1) fail(id, "scalar operand must be 1x1");
                n.value = s(0, 0) * in(1);
            } else {
                n.value = n.alpha * in(0);
            }
            break;
        }
        case OpKind::Hadamard: {
            if (!in(0).same_shape(in(1))) fail(id, "shape mismatch");
            n.value = pgiep::hadamard(in(0), in(1));
            break;
        }
        case OpKind::Transpose:
            n.value = pgiep::transpose(in(0));
            break;
        case OpKind::Relu: {
            Matrix v = in(0);
            for (double& x : v.data()) x = x > 0.0 ? x : 0.0;
            n.value = std::move(v);
            break;
        }
        case OpKind::QrQFactor: {
            if (in(0).rows() != in(0).cols()) fail(id, "input must be square");
            QrResult f = qr_decompose(in(0));
            if (f.rank_deficient) rank_deficient_seen_ = true;
            n.q = f.q;
            n.r = std::move(f.r);
            n.value = std::move(f.q);
            break;
        }
        case OpKind::SvdUvtFactor: {
            if (in(0).rows() != in(0).cols()) fail(id, "input must be square");
            SvdResult f = svd(in(0));
            const double smax = f.sigma.empty() ? 0.0 : f.sigma.front();
            const double smin = f.sigma.empty() ? 0.0 : f.sigma.back();
            if (smin <= 1e-12 * std::max(1.0, smax)) rank_deficient_seen_ = true;
            n.value = matmul_bt(f.u, f.v);
            n.u = std::move(f.u);
            n.v = std::move(f.v);
            n.sigma = std::move(f.sigma);
            break;
        }
        case OpKind::SubmatrixDeleteLast: {
            const Matrix& x = in(0);
            if (x.rows() < 2 || x.cols() < 2) fail(id, "input too small to shrink");
            Matrix v(x.rows() - 1, x.cols() - 1);
            for (int i = 0; i + 1 < x.rows(); ++i)
                for (int j = 0; j + 1 < x.cols(); ++j) v(i, j) = x(i, j);
            n.value = std::move(v);
            break;
        }
        case OpKind::FroSq: {
            Matrix v(1, 1);
            const Matrix& x = in(0);
            double s = 0.0;
            for (double e : x.data()) s += e * e;
            v(0, 0) = s;
            n.value = std::move(v);
            break;
        }
        case OpKind::WeightedSum: {
            Matrix v(in(0).rows(), in(0).cols());
            for (size_t t = 0; t < n.inputs.size(); ++t) {
                const Matrix& x = in(static_cast<int>(t));
                if (!x.same_shape(v)) fail(id, "terms differ in shape");
                auto vd = v.data();
                auto xd = x.data();
                for (size_t i = 0; i < vd.size(); ++i) vd[i] += n.weights[t] * xd[i];
            }
            n.value = std::move(v);
            break;
        }
    }
}

double Tape::forward_eval(NodeId root) {
    for (NodeId id = 0; id <= root; ++id) eval_node(id);
    return scalar(root);
}

void Tape::accum(NodeId id, const Matrix& contribution) {
    Node& n = nodes_[id];
    if (n.adjoint.empty()) {
        n.adjoint = contribution;
    } else {
        n.adjoint += contribution;
    }
}

void Tape::backward(NodeId root) {
    if (nodes_[root].value.rows() != 1 || nodes_[root].value.cols() != 1) fail(root, "backward root must be 1x1");
    for (NodeId id = 0; id <= root; ++id) {
        Node& n = nodes_[id];
        n.adjoint = Matrix(n.value.rows(), n.value.cols());
    }
    nodes_[root].adjoint(0, 0) = 1.0;
    for (NodeId id = root; id >= 0; --id) backward_node(id);
}

void Tape::backward_node(NodeId id) {
    Node& n = nodes_[id];
    const Matrix& g = n.adjoint;
    auto in = [&](int i) -> const Matrix& { return nodes_[n.inputs[i]].value; };
    switch (n.kind) {
        case OpKind::Constant:
        case OpKind::Parameter:
            break;
        case OpKind::Add: {
            accum(n.inputs[0], g);
            const Matrix& b = in(1);
            if (b.same_shape(g)) {
                accum(n.inputs[1], g);
            } else {
                Matrix gb(b.rows(), 1);
                for (int i = 0; i < g.rows(); ++i) {
                    double s = 0.0;
                    for (int j = 0; j < g.cols(); ++j) s += g(i, j);
                    gb(i, 0) = s;
                }
                accum(n.inputs[1], gb);
            }
            break;
        }
        case OpKind::MatMul:
            accum(n.inputs[0], matmul_bt(g, in(1)));
            accum(n.inputs[1], matmul_at(in(0), g));
            break;
        case OpKind::ScalarMul: {
            if (n.inputs.size() == 2) {
                const double s = in(0)(0, 0);
                accum(n.inputs[1], s * g);
                Matrix gs(1, 1);
                gs(0, 0) = fro_dot(g, in(1));
                accum(n.inputs[0], gs);
            } else {
                accum(n.inputs[0], n.alpha * g);
            }
            break;
        }
        case OpKind::Hadamard:
            accum(n.inputs[0], pgiep::hadamard(g, in(1)));
            accum(n.inputs[1], pgiep::hadamard(g, in(0)));
            break;
        case OpKind::Transpose:
            accum(n.inputs[0], pgiep::transpose(g));
            break;
        case OpKind::Relu: {
            Matrix gx = g;
            const Matrix& x = in(0);
            auto gd = gx.data();
            auto xd = x.data();
            for (size_t i = 0; i < gd.size(); ++i)
                if (xd[i] <= 0.0) gd[i] = 0.0;
            accum(n.inputs[0], gx);
            break;
        }
        case OpKind::QrQFactor: {
            // X = Q R, only Q used downstream:
            //   Xbar = Q tril_(Q^T Qbar - Qbar^T Q) R^{-T}
            // with tril_ the strictly lower triangle.
            Matrix s = matmul_at(n.q, g);  // Q^T Qbar
            const int dim = s.rows();
            Matrix k(dim, dim);
            for (int i = 1; i < dim; ++i)
                for (int j = 0; j < i; ++j) k(i, j) = s(i, j) - s(j, i);
            accum(n.inputs[0], n.q * solve_upper_right_transposed(k, n.r));
            break;
        }
        case OpKind::SvdUvtFactor: {
            // W = U V^T. With H = U^T Wbar V,
            //   Xbar = U [(H - H^T)_{ij} / (sigma_i + sigma_j)] V^T,
            // denominators clamped at 1e-12.
            const int dim = static_cast<int>(n.sigma.size());
            Matrix h = matmul_at(n.u, g) * n.v;  // U^T Wbar V
            Matrix p(dim, dim);
            for (int i = 0; i < dim; ++i) {
                for (int j = 0; j < dim; ++j) {
                    if (i == j) continue;
                    double denom = n.sigma[i] + n.sigma[j];
                    if (denom < 1e-12) denom = 1e-12;
                    p(i, j) = (h(i, j) - h(j, i)) / denom;
                }
            }
            for (int i = 0; i < dim; ++i)
                for (int j = i + 1; j < dim; ++j)
                    if (std::abs(n.sigma[i] - n.sigma[j]) < 1e-12) ++degenerate_svd_count_;
            accum(n.inputs[0], n.u * matmul_bt(p, n.v));
            break;
        }
        case OpKind::SubmatrixDeleteLast: {
            const Matrix& x = in(0);
            Matrix gx(x.rows(), x.cols());
            for (int i = 0; i < g.rows(); ++i)
                for (int j = 0; j < g.cols(); ++j) gx(i, j) = g(i, j);
            accum(n.inputs[0], gx);
            break;
        }
        case OpKind::FroSq:
            accum(n.inputs[0], (2.0 * g(0, 0)) * in(0));
            break;
        case OpKind::WeightedSum:
            for (size_t t = 0; t < n.inputs.size(); ++t) accum(n.inputs[t], n.weights[t] * g);
            break;
    }
}

}  // namespace pgiep::ad
