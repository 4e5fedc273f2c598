#include "pgiep/solver.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pgiep/rng.hpp"
#include "pgiep/spectrum.hpp"

namespace pgiep {

namespace {

void validate_config(int n, const SolverConfig& cfg) {
    if (n < 2) throw ContractError("solver: problem dimension must be at least 2");
    for (int h : cfg.hidden_sizes)
        if (h < 1) throw ContractError("solver: hidden sizes must be positive");
    if (!(cfg.flip_k >= 1 && cfg.flip_k < cfg.flip_k2 && cfg.flip_k2 <= n)) {
        throw ContractError("solver: flip indices must satisfy 1 <= k < k2 <= n");
    }
    if (!(cfg.learning_rate > 0.0)) throw ContractError("solver: learning rate must be positive");
    if (cfg.max_epochs < 1) throw ContractError("solver: max_epochs must be positive");
    if (cfg.eval_every < 1) throw ContractError("solver: eval_every must be positive");
}

// Selector constants that split the (2n+1) x n output into the two
// feature blocks and the c row.
Matrix row_selector(int n, int first, int count) {
    Matrix s(count, 2 * n + 1);
    for (int i = 0; i < count; ++i) s(i, first + i) = 1.0;
    return s;
}

struct NetworkGraph {
    ad::NodeId fx_q = -1;
    ad::NodeId fx_z = -1;
    ad::NodeId c_row = -1;
    std::vector<ad::NodeId> params;  // weights and biases, layer by layer
};

NetworkGraph build_network_graph(ad::Tape& tape, const NetworkState& state, const Matrix* fx_perturbation) {
    NetworkGraph g;
    const int n = state.input.rows();
    ad::NodeId h = tape.constant(state.input, "X");
    const size_t layers = state.weights.size();
    for (size_t l = 0; l < layers; ++l) {
        const ad::NodeId w = tape.parameter(state.weights[l], "w" + std::to_string(l));
        const ad::NodeId b = tape.parameter(state.biases[l], "b" + std::to_string(l));
        g.params.push_back(w);
        g.params.push_back(b);
        ad::NodeId affine = tape.add(tape.matmul(w, h), b);
        h = l + 1 < layers ? tape.relu(affine) : affine;
    }
    g.fx_q = tape.matmul(tape.constant(row_selector(n, 0, n)), h);
    g.fx_z = tape.matmul(tape.constant(row_selector(n, n, n)), h);
    if (fx_perturbation) {
        g.fx_q = tape.add(g.fx_q, tape.constant(*fx_perturbation, "fx-perturbation"));
        g.fx_z = tape.add(g.fx_z, tape.constant(*fx_perturbation, "fx-perturbation"));
    }
    g.c_row = tape.matmul(tape.constant(row_selector(n, 2 * n, 1)), h);
    return g;
}

std::pair<ad::NodeId, ad::NodeId> build_stiefel_nodes(ad::Tape& tape, ad::NodeId fx_q, ad::NodeId fx_z, int n,
                                                      Strategy strategy, int k, int k2) {
    switch (strategy) {
        case Strategy::SvdQr:
            return {tape.svd_uvt(fx_q), tape.qr_q(fx_z)};
        case Strategy::SvdFlip: {
            const ad::NodeId flipped = tape.matmul(fx_z, tape.constant(permutation_swap(n, k, k2), "T"));
            return {tape.svd_uvt(fx_q), tape.svd_uvt(flipped)};
        }
        case Strategy::QrFlip: {
            const ad::NodeId flipped = tape.matmul(fx_z, tape.constant(permutation_swap(n, k, k2), "T"));
            return {tape.qr_q(fx_q), tape.qr_q(flipped)};
        }
    }
    throw ContractError("solver: unknown strategy");
}

Vector row_as_vector(const Matrix& row) {
    Vector v(row.cols());
    for (int j = 0; j < row.cols(); ++j) v[j] = row(0, j);
    return v;
}

}  // namespace

NetworkState init_network(int n, const SolverConfig& cfg) {
    validate_config(n, cfg);
    Rng rng(cfg.seed);
    NetworkState state;
    state.input = rng.orthogonal(n);

    std::vector<int> dims;
    dims.push_back(n);
    for (int h : cfg.hidden_sizes) dims.push_back(h);
    dims.push_back(2 * n + 1);
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double bound = std::sqrt(1.0 / fan_in);
        state.weights.push_back(rng.uniform_matrix(fan_out, fan_in, -bound, bound));
        state.biases.push_back(Matrix(fan_out, 1));
    }
    return state;
}

ForwardOutput forward(const NetworkState& state) {
    ad::Tape tape;
    const NetworkGraph g = build_network_graph(tape, state, nullptr);
    return {tape.value(g.fx_q), tape.value(g.fx_z), row_as_vector(tape.value(g.c_row))};
}

std::pair<Matrix, Matrix> stiefel_layer(const Matrix& fx_q, const Matrix& fx_z, Strategy strategy, int k, int k2) {
    if (fx_q.rows() != fx_q.cols() || !fx_q.same_shape(fx_z)) {
        throw DimensionError("stiefel_layer: feature blocks must be square and equally sized");
    }
    ad::Tape tape;
    const ad::NodeId qn = tape.constant(fx_q, "fXq");
    const ad::NodeId zn = tape.constant(fx_z, "fXz");
    auto [q, z] = build_stiefel_nodes(tape, qn, zn, fx_q.rows(), strategy, k, k2);
    return {tape.value(q), tape.value(z)};
}

std::pair<Matrix, Matrix> stiefel_layer(const Matrix& fx, Strategy strategy, int k, int k2) {
    return stiefel_layer(fx, fx, strategy, k, k2);
}

void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
               long t, const AdamParams& hp) {
    if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size()) {
        throw DimensionError("adam_step: span sizes differ");
    }
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        params[i] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
    }
}

TrainResult train(const AffinePencil& pencil, const SolverConfig& cfg) {
    const int n = pencil.n;
    validate_config(n, cfg);
    NetworkState state = init_network(n, cfg);
    Rng restart_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<Vector> adam_m, adam_v;
    for (size_t l = 0; l < state.weights.size(); ++l) {
        adam_m.emplace_back(state.weights[l].data().size(), 0.0);
        adam_v.emplace_back(state.weights[l].data().size(), 0.0);
        adam_m.emplace_back(state.biases[l].data().size(), 0.0);
        adam_v.emplace_back(state.biases[l].data().size(), 0.0);
    }
    const AdamParams hp{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};

    TrainResult res;
    res.best_loss = std::numeric_limits<double>::infinity();
    res.loss_history.reserve(static_cast<size_t>(cfg.max_epochs));

    const int max_restart_attempts = 5;

    for (long epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        ad::Tape tape;
        NetworkGraph net;
        ObjectiveGraph obj;
        ad::NodeId q_node = -1, z_node = -1;
        Matrix perturbation;
        for (int attempt = 0;; ++attempt) {
            tape = ad::Tape();
            net = build_network_graph(tape, state, attempt > 0 ? &perturbation : nullptr);
            auto qz = build_stiefel_nodes(tape, net.fx_q, net.fx_z, n, cfg.strategy, cfg.flip_k, cfg.flip_k2);
            q_node = qz.first;
            z_node = qz.second;
            if (!tape.rank_deficient_seen() || attempt >= max_restart_attempts) break;
            // Retry the epoch with a tiny seeded perturbation of f(X)
            // so the factorizations move off the rank-deficient set.
            ++res.restarts;
            perturbation = 1e-8 * restart_rng.normal_matrix(n, n);
        }
        obj = build_objective_graph(tape, pencil, net.c_row, q_node, z_node, cfg.gammas);

        const LossBreakdown losses = read_losses(tape, obj);
        if (!std::isfinite(losses.total)) {
            res.epochs_run = epoch - 1;
            throw TrainDivergence(epoch - 1, std::move(res));
        }
        res.loss_history.push_back(losses);
        res.epochs_run = epoch;

        const double defect =
            std::max(orthogonality_defect(tape.value(q_node)), orthogonality_defect(tape.value(z_node)));
        res.max_orth_defect = std::max(res.max_orth_defect, defect);

        if (losses.total < res.best_loss) {
            res.best_loss = losses.total;
            res.best_epoch = epoch;
            res.c = row_as_vector(tape.value(net.c_row));
            res.q = tape.value(q_node);
            res.z = tape.value(z_node);
        }
        res.c_last = row_as_vector(tape.value(net.c_row));

        const bool hit_tolerance = losses.total < cfg.loss_tolerance;
        if (epoch == 1 || epoch % cfg.eval_every == 0 || hit_tolerance || epoch == cfg.max_epochs) {
            const Vector c_now = row_as_vector(tape.value(net.c_row));
            res.c_trajectory.emplace_back(epoch, c_now);
            double err = std::numeric_limits<double>::infinity();
            try {
                auto [ac, bc] = assemble(pencil, c_now);
                const Spectrum sp = generalized_eigs(ac, bc);
                err = spectrum_error(pencil.target_finite, pencil.singular_mode ? 1 : 0, sp);
            } catch (const Error&) {
                // mid-training pencils may leave the supported class;
                // record the sentinel and keep going
            }
            res.error_history.emplace_back(epoch, err);
        }

        if (hit_tolerance) {
            res.stop_reason = StopReason::Tolerance;
            return res;
        }

        tape.backward(obj.total);
        res.degenerate_svd += tape.degenerate_svd_count();
        for (size_t l = 0; l < state.weights.size(); ++l) {
            adam_step(state.weights[l].data(), tape.adjoint(net.params[2 * l]).data(), adam_m[2 * l], adam_v[2 * l],
                      epoch, hp);
            adam_step(state.biases[l].data(), tape.adjoint(net.params[2 * l + 1]).data(), adam_m[2 * l + 1],
                      adam_v[2 * l + 1], epoch, hp);
        }
    }
    res.stop_reason = StopReason::MaxEpochs;
    return res;
}

}  // namespace pgiep
