#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lionflow/config.hpp"
#include "lionflow/expansion.hpp"
#include "lionflow/stats.hpp"

namespace lionflow {

struct LadderPoint {
    int m = 1;          // time steps
    int n = 1;          // particles
    int level = 0;      // mollifier level (0 = none)
};

// One statistics row: R replications at a fixed ladder point. Per-replication
// residuals and term values are retained for CSV output and ablation checks.
struct StatRow {
    int m = 0;
    int n = 0;
    int level = 0;
    int replications = 0;     // requested
    int effective = 0;        // finite replications
    int nan_count = 0;
    bool failed = false;      // more than 10% non-finite
    double mean = 0.0;        // residual mean
    double rms = 0.0;         // residual RMS (primary convergence statistic)
    double se = 0.0;          // standard error of the residual mean
    std::vector<std::string> term_names;
    std::vector<double> term_means;
    std::vector<double> lhs_values;               // per replication
    std::vector<double> residuals;                // per replication
    std::vector<std::vector<double>> term_values;  // per replication
};

// Runs R independent replications at one ladder point, each on fresh streams
// derived from the master seed and the replication index; deterministic and
// independent of the worker count (results aggregate in replication order).
StatRow run_replications(const ExperimentConfig& cfg, const LadderPoint& point, int threads = 1);

// Single-replication evaluation (building block and test surface).
ExpansionReport run_single_replication(const ExperimentConfig& cfg, const LadderPoint& point,
                                       std::uint64_t rep);

struct ConvergenceTable {
    std::vector<StatRow> rows;
    std::vector<size_t> m_ladder_rows;  // indices into rows
    std::vector<size_t> n_ladder_rows;
    std::optional<SlopeFit> slope_m;
    std::optional<SlopeFit> slope_n;
    std::vector<std::string> warnings;
};

// Full ladder study: the M-ladder at the largest configured N, then the
// N-ladder at the largest configured M, with log-log slope fits on each.
ConvergenceTable convergence_study(const ExperimentConfig& cfg, int threads = 1);

struct CheckOutcome {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Applies the config's tolerance block to a computed table; checks anchored
// to a single point use the (max M, max N) corner row.
std::vector<CheckOutcome> apply_tolerances(const ExperimentConfig& cfg,
                                           const ConvergenceTable& table);

// Mollified-projection refinement study over a level ladder.
struct MollificationRow {
    int level = 0;
    int quadrature = 0;
    double error = 0.0;        // |u^{N,n} - u^N|
    double lip_bound = 0.0;    // Lip * support / n
    double max_w2sq = 0.0;     // worst per-draw W2^2 perturbation
    double w2_bound = 0.0;     // (support / n)^2
};

struct MollificationTable {
    std::vector<MollificationRow> rows;
};

MollificationTable mollification_study(const MeasureFunctional& functional, int dim, int cloud_n,
                                       const std::vector<int>& levels, int quadrature,
                                       const SeedPolicy& policy);

// Shortest-round-trip decimal formatting (byte-stable CSV output).
std::string format_double(double v);

std::string terms_csv(const std::vector<StatRow>& rows);
std::string convergence_csv(const ConvergenceTable& table);

}  // namespace lionflow
