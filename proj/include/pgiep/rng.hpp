#pragma once

#include <cstdint>
#include <random>

#include "pgiep/matrix.hpp"

namespace pgiep {

// Seeded generator with hand-rolled transforms so that identical seeds
// give bit-identical streams independent of the standard library's
// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller.
    double normal();

    Matrix normal_matrix(int rows, int cols);
    Matrix uniform_matrix(int rows, int cols, double lo, double hi);

    // Haar-ish orthogonal sample: Q factor of a standard-normal matrix.
    Matrix orthogonal(int n);

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace pgiep
