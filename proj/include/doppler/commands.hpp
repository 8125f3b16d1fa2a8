#pragma once

// The `doppler` subcommands. Each cmd_* function computes everything first
// and only then writes its files, so a failing run leaves no partial output.
//
// Exit codes: 0 success, 1 validation failure, 2 configuration error,
// 3 degenerate steady state, 4 defective matrix, 5 numeric failure.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "doppler/config.hpp"
#include "doppler/errors.hpp"

namespace doppler {

int exit_code(ErrorKind kind);

struct AverageOutput {
    DensityMatrix rho0;
    std::optional<DensityMatrix> exact;
    std::optional<DensityMatrix> sampled;
    nlohmann::json diagnostics;
};

AverageOutput run_average(const RunConfig& cfg);
/// Writes rho_avg.json, rho0.json and diagnostics.json (plus
/// rho_avg_sampled.json when both methods run) into cfg.out_dir.
int cmd_average(const RunConfig& cfg, std::ostream& log);

SweepResult run_sweep(const RunConfig& cfg);
/// Writes sweep.csv into cfg.out_dir.
int cmd_sweep(const RunConfig& cfg, std::ostream& log);

struct ScalingPoint {
    std::size_t grid_size = 0;
    double sampled_us = 0.0;  // median wall time of the sampled sweep
    double exact_us = 0.0;    // median wall time of the exact sweep, same run
};

struct BenchReport {
    std::size_t time_points = 0;
    std::size_t liouville_dim = 0;  // N^2
    std::size_t grid_size = 0;
    std::size_t repetitions = 0;
    std::size_t threads = 1;
    std::vector<double> exact_samples_us;
    std::vector<double> sampled_samples_us;
    double exact_us = 0.0;    // median
    double sampled_us = 0.0;  // median
    std::size_t exact_solve_count = 0;    // eigendecompositions
    std::size_t sampled_solve_count = 0;  // null-space solves
    double speedup = 0.0;                 // sampled_us / exact_us
    double max_deviation = 0.0;           // elementwise, averaged states
    double max_absorption_deviation = 0.0;
    std::vector<ScalingPoint> scaling;
    double scaling_r2 = 0.0;           // linear fit of sampled time against grid size
    double exact_time_spread = 0.0;    // max / min exact time over the scaling sizes
};

/// Warm-up run discarded, then the median of cfg.bench.repetitions timed runs
/// of each method over the same sweep, on a monotonic clock.
BenchReport run_bench(const RunConfig& cfg);
nlohmann::json bench_to_json(const BenchReport& report);
BenchReport bench_from_json(const nlohmann::json& doc);
std::string format_bench_table(const BenchReport& report);
/// Writes bench.json into cfg.out_dir and prints the table.
int cmd_bench(const RunConfig& cfg, std::ostream& log);

struct PropertyResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

/// Property suite on the configured system at cfg.time_us. Library errors
/// are reported as failures of the affected properties, by error name.
std::vector<PropertyResult> run_validation(const RunConfig& cfg);
/// Prints one line per property and writes validate.json; exit 1 if any fails.
int cmd_validate(const RunConfig& cfg, std::ostream& log);

/// Full command line: `doppler <average|sweep|bench|validate> --config <path>
/// [--method M] [--grid G] [--out DIR] [--seed S]`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace doppler
