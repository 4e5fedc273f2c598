#include "pgiep/problems.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "pgiep/spectrum.hpp"

namespace pgiep {

namespace {

ProblemSpec ex41() {
    std::vector<Matrix> a = {
        {{1.25, 1.0}, {1.0, 1.25}},
        {{1.9, 0.7}, {0.7, 1.7}},
        {{0.575, -0.1}, {-0.775, 4.0}},
    };
    std::vector<Matrix> b = {
        {{-0.25, 0.0}, {0.0, 0.75}},
        {{0.3, 0.3}, {0.3, 0.6}},
        {{-0.475, 0.0}, {-0.225, 0.0}},
    };
    ProblemSpec s;
    s.name = "ex41";
    s.pencil = AffinePencil::create(std::move(a), std::move(b), {-1.0, 3.0}, false);
    s.defaults = {{40, 40}, 1e-3, 10000};
    return s;
}

ProblemSpec ex42() {
    std::vector<Matrix> a = {
        Matrix::diag({9, 11, 10, 8, 14}),
        Matrix::identity(5),
        {{0, 2, 0, 0, 0}, {2, 0, 1, 0, 0}, {0, 1, 0, 1, 0}, {0, 0, 1, 0, 1}, {0, 0, 0, 1, 0}},
        {{0, 0, 3, 0, 0}, {0, 0, 0, 2, 0}, {3, 0, 0, 0, -1}, {0, 2, 0, 0, 1}, {0, 0, -1, 0, 0}},
        {{0, 0, 0, 1, 0}, {0, 0, 0, 0, 1}, {0, 0, 0, 0, 0}, {1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}},
        {{0, 0, 0, 0, 1}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {1, 0, 0, 0, 0}},
    };
    std::vector<Matrix> b = {
        Matrix::diag({11, 13, 15, 11, 10}),
        Matrix::identity(5),
        {{0, 1, 0, 0, 0}, {1, 0, 1, 0, 0}, {0, 1, 0, -1, 0}, {0, 0, -1, 0, -1}, {0, 0, 0, -1, 0}},
        {{0, 0, -1, 0, 0}, {0, 0, 0, -1, 0}, {-1, 0, 0, 0, 1}, {0, -1, 0, 0, 0}, {0, 0, 1, 0, 0}},
        {{0, 0, 0, 2, 0}, {0, 0, 0, 0, 1}, {0, 0, 0, 0, 0}, {2, 0, 0, 0, 0}, {0, 1, 0, 0, 0}},
        {{0, 0, 0, 0, 1}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {1, 0, 0, 0, 0}},
    };
    ProblemSpec s;
    s.name = "ex42";
    s.pencil = AffinePencil::create(std::move(a), std::move(b), {0.4327, 0.6636, 0.9438, 1.1092, 1.4923}, false);
    s.defaults = {{40, 40}, 1e-3, 200000};
    return s;
}

ProblemSpec ex43() {
    std::vector<Matrix> a = {
        {{30, 8.4, -0.4, 0, 0},
         {5.64, 33.56, 7.28, -0.16, 0},
         {-0.09, 7.61, 13.75, 2.72, -0.048},
         {0, -0.12, 3.85, 4.89, 0.624},
         {0, 0, -0.03, 0.9625, 2.154}},
        {{15, 5, 0, 0, 0}, {2.64, 0.88, 0, 0, 0}, {0.09, 0.03, 0, 0, 0}, {0, 0, 0, 0, 0}, {-0.015, -0.005, 0, 0, 0}},
        {{0, 0, 0, 0, 0}, {0, 16, 4, 0, 0}, {0, 3.64, 0.91, 0, 0}, {0, 0.04, 0.01, 0, 0}, {0, 0, 0, 0, 0}},
        {{0, 0, 0.1, 0.025, 0},
         {0, 0, 0.02, 0.005, 0},
         {0, 0, 6, 1.5, 0},
         {0, 0, 1.88, 0.47, 0},
         {0, 0, 0.01, 0.0025, 0}},
        {{0, 0, 0, -0.1, -0.02},
         {0, 0, 0, 0.02, 0.004},
         {0, 0, 0, 0.01, 0.002},
         {0, 0, 0, 2, 0.4},
         {0, 0, 0, 0.47, 0.094}},
        {{0, 0, 0, 0, 0.15}, {0, 0, 0, 0, -0.05}, {0, 0, 0, 0, 0.01}, {0, 0, 0, 0, 0.01}, {0, 0, 0, 0, 1}},
    };
    std::vector<Matrix> b = {
        {{13.007181, 3.997188, 0, 0, 0},
         {2.498594, 15.007181, 3.997636, 0, 0},
         {0, 3.997636, 5.007181, 1.799363, 0},
         {0, 0, 2.498938, 0.507181, 0.600012},
         {0, 0, 0, 0.900024, -0.892819}},
        Matrix::identity(5),
        {{0, 1, 0, 0, 0}, {0.5, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}},
        {{0, 0, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 1, 0, 0, 0}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}},
        {{0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {0, 0, 0, 0.3, 0}, {0, 0, 0.5, 0, 0}, {0, 0, 0, 0, 0}},
        {{0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0.1}, {0, 0, 0, 0.2, 0}},
    };
    ProblemSpec s;
    s.name = "ex43";
    s.pencil = AffinePencil::create(std::move(a), std::move(b), {0.5, 0.5, 2.0, 3.0, 4.0}, false);
    s.defaults = {{60, 60}, 1e-2, 200000};
    return s;
}

ProblemSpec ex44(int n) {
    if (n < 2) throw ContractError("ex44 requires a dimension n >= 2");
    std::vector<Matrix> a(n + 1, Matrix(n, n));
    std::vector<Matrix> b(n + 1, Matrix(n, n));
    for (int k = 1; k <= n; ++k) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (std::abs(i - j) == k - 1) a[k](i, j) = 1.0;
        b[k](k - 1, k - 1) = 1.0;
    }

    Vector c_star(n, 1.0);
    c_star[0] = 2.0;
    Matrix a_star(n, n), b_star(n, n);
    for (int k = 1; k <= n; ++k) {
        a_star += c_star[k - 1] * a[k];
        b_star += c_star[k - 1] * b[k];
    }
    const Spectrum target = generalized_eigs(a_star, b_star);
    if (target.infinite_count != 0) throw ContractError("ex44: reference pencil unexpectedly singular");

    ProblemSpec s;
    s.name = "ex44_n" + std::to_string(n);
    s.pencil = AffinePencil::create(std::move(a), std::move(b), target.finite, false);
    if (n <= 10) {
        s.defaults = {{40, 40}, 1e-3, 200000};
    } else if (n <= 20) {
        s.defaults = {{60, 60}, 1e-3, 500000};
    } else if (n <= 30) {
        s.defaults = {{100, 100}, 1e-3, 1000000};
    } else {
        s.defaults = {{140, 140}, 1e-3, 1000000};
    }
    return s;
}

ProblemSpec ex45() {
    std::vector<Matrix> a = {
        Matrix(3, 3),
        {{1, 0, 0}, {0, 0, 0}, {0, 0, 0}},
        {{0, 1, 0}, {1, 0, 0}, {0, 0, 0}},
        {{0, 0, 0}, {0, 0, 0}, {0, 0, 1}},
    };
    std::vector<Matrix> b = {
        Matrix::identity(3),
        {{0, 1, 0}, {1, 0, 0}, {0, 0, 0}},
        {{0, 0, 0}, {0, 1, 1}, {0, 1, 0}},
        {{0, 0, 1}, {0, 0, 0}, {1, 0, 0}},
    };
    ProblemSpec s;
    s.name = "ex45";
    s.pencil = AffinePencil::create(std::move(a), std::move(b), {-1.0, 0.5}, true);
    s.defaults = {{40, 40}, 1e-3, 10000};
    return s;
}

}  // namespace

ProblemSpec builtin_problem(const std::string& id, int n) {
    if (id == "ex41") return ex41();
    if (id == "ex42") return ex42();
    if (id == "ex43") return ex43();
    if (id == "ex44") return ex44(n > 0 ? n : 10);
    if (id == "ex45") return ex45();
    throw ContractError("unknown builtin problem id: " + id);
}

ProblemSpec load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open problem file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ContractError("problem file " + path + " is not valid JSON: " + e.what());
    }

    const int n = j.at("n").get<int>();
    auto read_side = [&](const char* key) {
        std::vector<Matrix> mats;
        for (const auto& mj : j.at(key)) {
            Matrix m(n, n);
            if (static_cast<int>(mj.size()) != n) throw ContractError(std::string(key) + ": expected n rows");
            for (int i = 0; i < n; ++i) {
                if (static_cast<int>(mj[i].size()) != n) throw ContractError(std::string(key) + ": expected n columns");
                for (int c = 0; c < n; ++c) m(i, c) = mj[i][c].get<double>();
            }
            mats.push_back(std::move(m));
        }
        return mats;
    };

    Vector finite;
    bool has_infinite = false;
    const auto& spec = j.at("spectrum");
    for (size_t i = 0; i < spec.size(); ++i) {
        if (spec[i].is_string()) {
            if (spec[i].get<std::string>() != "inf") throw ContractError("spectrum: only \"inf\" is accepted as text");
            if (i + 1 != spec.size()) throw ContractError("spectrum: \"inf\" must be the last entry");
            has_infinite = true;
        } else {
            finite.push_back(spec[i].get<double>());
        }
    }

    ProblemSpec s;
    s.name = j.value("name", std::string("custom"));
    s.pencil = AffinePencil::create(read_side("A"), read_side("B"), std::move(finite), has_infinite);
    return s;
}

std::uint64_t problem_checksum(const ProblemSpec& spec) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix_byte = [&h](unsigned char b) {
        h ^= b;
        h *= 1099511628211ULL;
    };
    auto mix_double = [&](double d) {
        unsigned char raw[sizeof(double)];
        std::memcpy(raw, &d, sizeof(double));
        for (unsigned char b : raw) mix_byte(b);
    };
    mix_byte(static_cast<unsigned char>(spec.pencil.n));
    for (const auto& m : spec.pencil.a_mats)
        for (double d : m.data()) mix_double(d);
    for (const auto& m : spec.pencil.b_mats)
        for (double d : m.data()) mix_double(d);
    mix_byte(spec.pencil.singular_mode ? 0xFF : 0x00);
    return h;
}

}  // namespace pgiep
