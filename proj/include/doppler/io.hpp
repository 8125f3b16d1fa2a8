#pragma once

// File formats written by the command-line tool, with matching readers.
//
// Density matrices are JSON objects {"dim": N, "rho": [[[re, im], ...], ...]}
// (row-major). Sweeps are CSV with the header
//     t_us,absorption_exact,absorption_sampled,exact_solve_us,sampled_solve_us
// and 17 significant digits; columns of a method that was not run are empty.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "doppler/atomsys.hpp"
#include "doppler/scenario.hpp"

namespace doppler {

nlohmann::json complex_to_json(Complex z);
Complex complex_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const CMatrix& m);
/// Throws ConfigError if the document is not a square [re, im] matrix.
CMatrix matrix_from_json(const nlohmann::json& j);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

void write_density(const std::filesystem::path& path, const DensityMatrix& rho);
CMatrix read_density(const std::filesystem::path& path);

inline constexpr const char* kSweepHeader = "t_us,absorption_exact,absorption_sampled,exact_solve_us,sampled_solve_us";

struct SweepRow {
    double t_us = 0.0;
    std::optional<double> absorption_exact;
    std::optional<double> absorption_sampled;
    std::optional<double> exact_solve_us;
    std::optional<double> sampled_solve_us;
};

std::vector<SweepRow> sweep_rows(const SweepResult& result);
std::string format_sweep_csv(const std::vector<SweepRow>& rows);
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result);
/// Throws ConfigError on a missing or wrong header, wrong column counts or unparsable numbers.
std::vector<SweepRow> parse_sweep_csv(const std::string& text);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

/// printf %.17g, which round-trips every double.
std::string format_double(double x);

}  // namespace doppler
