#pragma once

#include <cstdint>
#include <string>

#include "pgiep/model.hpp"
#include "pgiep/solver.hpp"

namespace pgiep {

// Per-problem training settings used by the reproduction harness.
struct RunDefaults {
    std::vector<int> hidden_sizes{40, 40};
    double learning_rate = 1e-3;
    long max_epochs = 10000;
};

struct ProblemSpec {
    std::string name;
    AffinePencil pencil;
    RunDefaults defaults;
};

// Built-in registry: ex41..ex45. ex44 is the banded family and needs
// the dimension n; its target spectrum is computed at construction from
// the reference parameter vector (2, 1, ..., 1) via the spectral oracle.
ProblemSpec builtin_problem(const std::string& id, int n = 0);

// Loads { name, n, A, B, spectrum } from a JSON file; "inf" is accepted
// once, in the last spectrum slot.
ProblemSpec load_problem(const std::string& path);

// Order-sensitive FNV-1a over the bit patterns of every matrix entry
// and target eigenvalue; guards the registry against transcription
// drift.
std::uint64_t problem_checksum(const ProblemSpec& spec);

}  // namespace pgiep
