#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pgiep/model.hpp"
#include "pgiep/tape.hpp"

namespace pgiep {

// How the Stiefel layer turns f(X) into the orthogonal pair (Q, Z).
// FLIP denotes right-multiplication by the transposition T(k, k2),
// which swaps two columns so the two factors come out distinct.
enum class Strategy {
    SvdQr = 1,    // Q from the polar factor, Z from the QR factor
    SvdFlip = 2,  // both polar, Z from the column-swapped input
    QrFlip = 3,   // both QR, Z from the column-swapped input
};

struct SolverConfig {
    std::vector<int> hidden_sizes{40, 40};
    Strategy strategy = Strategy::QrFlip;
    int flip_k = 1;   // 1-based column indices for the FLIP swap
    int flip_k2 = 2;
    Gammas gammas{};
    double learning_rate = 1e-3;
    long max_epochs = 10000;
    double loss_tolerance = 1e-12;
    long eval_every = 100;  // cadence of the oracle error metric
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

// MLP parameters plus the fixed orthogonal input matrix. The layer
// chain maps the n x n input through the hidden widths to a
// (2n+1) x n output: rows [0, n) are the features factored into Q,
// rows [n, 2n) the features factored into Z, and the last row is c.
// Two separate feature blocks are required: both Stiefel branches
// reading one shared block would rigidly couple Q and Z (the polar
// factor satisfies polar(M T) = polar(M) T exactly), which cuts the
// reachable part of the search manifold down to a set that generic
// problems' solutions avoid.
struct NetworkState {
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;  // column vectors, broadcast over columns
    Matrix input;
};

enum class StopReason { Tolerance, MaxEpochs };

struct TrainResult {
    Vector c;     // from the lowest-loss epoch
    Matrix q, z;  // matching orthogonal factors
    Vector c_last;
    std::vector<LossBreakdown> loss_history;                // one entry per epoch
    std::vector<std::pair<long, double>> error_history;     // (epoch, Linf spectrum error)
    std::vector<std::pair<long, Vector>> c_trajectory;      // (epoch, c snapshot)
    StopReason stop_reason = StopReason::MaxEpochs;
    long epochs_run = 0;
    long best_epoch = 0;
    double best_loss = 0.0;
    double max_orth_defect = 0.0;  // worst ||Q^T Q - I||_F across all epochs
    long restarts = 0;             // rank-deficiency retries
    long degenerate_svd = 0;
};

// Training produced a non-finite loss. Carries whatever history was
// accumulated so callers can still flush telemetry.
struct TrainDivergence : Error {
    TrainDivergence(long last_finite, TrainResult partial_result)
        : Error("training diverged after epoch " + std::to_string(last_finite)),
          last_finite_epoch(last_finite),
          partial(std::move(partial_result)) {}
    long last_finite_epoch;
    TrainResult partial;
};

// Weights uniform in +-sqrt(1/fan_in), biases zero, X the orthogonal
// factor of a seeded standard-normal matrix. Requires n >= 2.
NetworkState init_network(int n, const SolverConfig& cfg);

struct ForwardOutput {
    Matrix fx_q;  // feature block factored into Q
    Matrix fx_z;  // feature block factored into Z
    Vector c;
};

// One value-level pass through the network.
ForwardOutput forward(const NetworkState& state);

// Value-level Stiefel layer for the given strategy; the FLIP column
// swap T(k, k2) acts on the Z-branch input.
std::pair<Matrix, Matrix> stiefel_layer(const Matrix& fx_q, const Matrix& fx_z, Strategy strategy, int k, int k2);

// Both branches fed from one matrix.
std::pair<Matrix, Matrix> stiefel_layer(const Matrix& fx, Strategy strategy, int k, int k2);

struct AdamParams {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard bias-corrected first/second moment update at step t >= 1.
void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
               long t, const AdamParams& hp);

TrainResult train(const AffinePencil& pencil, const SolverConfig& cfg);

}  // namespace pgiep
