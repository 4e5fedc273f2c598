#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pgiep/problems.hpp"
#include "pgiep/solver.hpp"

namespace pgiep {

// Everything needed to rerun and to compare a finished run.
struct RunRecord {
    std::string problem;
    int strategy = 3;
    std::uint64_t seed = 0;
    SolverConfig config;
    Vector c_best;
    Vector c_last;
    double final_error = 0.0;  // Linf spectrum error at c_best
    double best_loss = 0.0;
    long best_epoch = 0;
    long epochs_run = 0;
    std::string stop_reason;
    double wall_time_s = 0.0;
    int infinite_count = 0;
    long restarts = 0;
    double max_orth_defect = 0.0;
    long degenerate_svd = 0;
};

nlohmann::ordered_json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

// Trains cfg on the problem and, when out_dir is nonempty, writes
// loss.csv, error.csv, c_trajectory.csv and result.json there. On
// divergence the partial CSVs are flushed before the error propagates.
RunRecord run_problem(const ProblemSpec& spec, const SolverConfig& cfg, const std::string& out_dir);

// Oracle evaluation of a candidate c: Linf error against the problem's
// target spectrum (infinity on mismatch) and the infinite-eigenvalue
// count actually found.
struct OracleCheck {
    double linf_error = 0.0;
    int infinite_count = 0;
};
OracleCheck oracle_check(const AffinePencil& pencil, const Vector& c);

void write_loss_csv(const std::string& path, const std::vector<LossBreakdown>& history);
void write_error_csv(const std::string& path, const std::vector<std::pair<long, double>>& history);
void write_c_trajectory_csv(const std::string& path, const std::vector<std::pair<long, Vector>>& history);

struct TableOptions {
    int n = 10;                // ex44 dimension (table 4)
    double budget_scale = 1.0; // multiplies the per-table epoch budgets
    std::vector<std::uint64_t> seeds{42, 16, 7};
    std::string out_dir;       // optional: per-run artifact directories
};

struct TableRow {
    std::string label;
    std::string paper;     // reference value from the source tables
    std::string obtained;
    bool pass = false;
};

struct TableReport {
    int table = 0;
    std::vector<TableRow> rows;
    bool all_pass = false;
    std::string text;  // rendered report
    nlohmann::ordered_json json;
};

// Reruns the strategy grid behind one of the published tables (1..5)
// and compares against the table's acceptance tolerance.
TableReport reproduce_table(int table_id, const TableOptions& opts);

}  // namespace pgiep
