#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pgiep/matrix.hpp"

namespace pgiep::ad {

using NodeId = int;

enum class OpKind {
    Constant,
    Parameter,
    Add,
    MatMul,
    ScalarMul,
    Hadamard,
    Transpose,
    Relu,
    QrQFactor,
    SvdUvtFactor,
    SubmatrixDeleteLast,
    FroSq,
    WeightedSum,
};

const char* op_kind_name(OpKind k);

// Reverse-mode tape over matrix-valued expressions. Nodes are appended
// in topological order and evaluated eagerly at creation; backward()
// walks the list in reverse. A tape instance is single-writer: one
// training run owns one tape.
class Tape {
public:
    NodeId constant(Matrix value, std::string label = {});
    NodeId parameter(Matrix value, std::string label = {});

    // Same-shape addition, or bias broadcast when b is a column vector
    // added to every column of a.
    NodeId add(NodeId a, NodeId b);
    NodeId matmul(NodeId a, NodeId b);
    NodeId scalar_mul(double alpha, NodeId x);
    // s must be 1x1; the scalar participates in differentiation.
    NodeId scalar_mul(NodeId s, NodeId x);
    NodeId hadamard(NodeId a, NodeId b);
    NodeId transpose(NodeId x);
    // Entrywise max(0, x); the derivative at exactly 0 is taken as 0.
    NodeId relu(NodeId x);
    // Orthogonal factor of the Householder QR of a square input.
    NodeId qr_q(NodeId x);
    // Polar orthogonal factor U V^T from the SVD of a square input.
    NodeId svd_uvt(NodeId x);
    // Removes the last row and column.
    NodeId delete_last_row_col(NodeId x);
    // Squared Frobenius norm, emitted as a 1x1 node.
    NodeId fro_sq(NodeId x);
    // sum_k w_k * x_k with fixed coefficients; all terms share a shape.
    NodeId weighted_sum(const std::vector<std::pair<double, NodeId>>& terms);

    // Re-evaluates nodes 0..root in order and returns the root scalar.
    double forward_eval(NodeId root);
    // Seeds the root (1x1) with 1 and accumulates adjoints for every
    // node in the subrange. forward values must be current.
    void backward(NodeId root);

    const Matrix& value(NodeId id) const { return nodes_[id].value; }
    const Matrix& adjoint(NodeId id) const { return nodes_[id].adjoint; }
    double scalar(NodeId id) const;

    // Replaces the value of a Constant or Parameter leaf.
    void set_value(NodeId id, Matrix v);

    int size() const { return static_cast<int>(nodes_.size()); }

    // True if any QR/SVD node saw an effectively rank-deficient input
    // during the latest evaluation.
    bool rank_deficient_seen() const { return rank_deficient_seen_; }
    // Number of singular-value pairs closer than 1e-12 met in backward.
    long degenerate_svd_count() const { return degenerate_svd_count_; }
    void reset_diagnostics() {
        rank_deficient_seen_ = false;
        degenerate_svd_count_ = 0;
    }

private:
    struct Node {
        OpKind kind;
        std::vector<NodeId> inputs;
        Matrix value;
        Matrix adjoint;
        double alpha = 1.0;           // ScalarMul fixed coefficient
        std::vector<double> weights;  // WeightedSum coefficients
        std::string label;
        // factorization caches for the backward rules
        Matrix q, r;
        Matrix u, v;
        Vector sigma;
    };

    NodeId push(Node n);
    void eval_node(NodeId id);
    void backward_node(NodeId id);
    void accum(NodeId id, const Matrix& contribution);
    [[noreturn]] void fail(NodeId id, const std::string& what) const;
    std::string describe(NodeId id) const;

    std::vector<Node> nodes_;
    bool rank_deficient_seen_ = false;
    long degenerate_svd_count_ = 0;
};

}  // namespace pgiep::ad
