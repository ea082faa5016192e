#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ato/config.hpp"

namespace ato::bench {

struct ReplicationRecord {
    std::string cell;
    pipeline::Variant variant = pipeline::Variant::Unified;
    std::size_t replication = 0;
    bool ok = false;
    std::string error;
    double theta_hat = 0.0;
    double std_error = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool covered = false;
    double ess = 0.0;
    bool second_order = false;
};

struct CellSummary {
    std::string cell;
    pipeline::Variant variant = pipeline::Variant::Unified;
    std::size_t succeeded = 0;
    std::size_t failed = 0;
    double bias = 0.0;
    double mc_se = 0.0;  // sd of theta_hat / sqrt(succeeded)
    double rmse = 0.0;
    double coverage = 0.0;
    double median_abs_error = 0.0;
    double mean_ess = 0.0;
    double second_order_rate = 0.0;
};

struct BenchmarkReport {
    double theta_true = 0.0;
    std::vector<ReplicationRecord> records;
    std::vector<CellSummary> cells;
};

// Replication r uses seeds derived from the root seed, and every
// (variant, contamination) cell sees the same base dataset for a given r.
BenchmarkReport run_benchmark(const config::RunConfig& config);

std::vector<CellSummary> summarize(const std::vector<ReplicationRecord>& records, double theta_true);

std::string replications_csv(const BenchmarkReport& report);
std::string cells_csv(const BenchmarkReport& report);
std::string summary_json(const BenchmarkReport& report, const config::RunConfig& config);
std::string table_markdown(const BenchmarkReport& report, const config::RunConfig& config);

// Writes replications.csv, cells.csv, summary.json and table.md into out_dir.
void write_outputs(const BenchmarkReport& report, const config::RunConfig& config, const std::string& out_dir);

}  // namespace ato::bench
