#pragma once

// Run configuration read from a JSON file. Frequencies are given as plain
// frequencies (MHz) and wavenumbers as inverse wavelengths (1/um); the loader
// applies the 2 pi. Unknown keys are rejected.
//
//   {
//     "ladder": {"gamma_mhz": 6, "gamma_rydberg_mhz": 0.06, "omega_c_mhz": 1,
//                "omega_p_mhz": 1, "mod_freq_mhz": 1, "k1_per_um": 1.28,
//                "k2_per_um": -0.80128, "delta1_mhz": 0, "delta2_mhz": 0,
//                "v_th_um_per_us": 169.5},
//     "time_us": 0.0,
//     "solver": {"method": "both", "grid": "uniform:2001:5",
//                "zero_mode_threshold": 1e-10, "small_lambda_cutoff": 1e-4},
//     "sweep": {"start_us": 0, "stop_us": 1, "count": 64, "endpoint": false},
//     "bench": {"repetitions": 5, "scaling_sizes": [11, 501, 1001, 1501, 2001]},
//     "output": {"dir": "out"}
//   }
//
// Instead of "ladder", an "atom" section describes an arbitrary static level
// scheme (see parse_config).

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "doppler/atomsys.hpp"
#include "doppler/oracle.hpp"
#include "doppler/scenario.hpp"
#include "doppler/spectral.hpp"

namespace doppler {

struct GridSpec {
    GridKind kind = GridKind::Uniform;
    std::size_t n_points = 2001;
    double span = 5.0;
};

/// "uniform:<n>:<span>", "uniform:<n>" (span 5) or "gh:<n>".
GridSpec parse_grid_spec(const std::string& text);
std::string to_string(const GridSpec& spec);

Method parse_method(const std::string& text);
const char* to_string(Method method);

struct BenchSpec {
    std::size_t repetitions = 5;
    std::vector<std::size_t> scaling_sizes = {11, 501, 1001, 1501, 2001};
};

struct RunConfig {
    std::optional<LadderScenario> ladder;
    std::optional<AtomicSystem> atom;
    double atom_v_th = 0.0;
    std::pair<std::size_t, std::size_t> probe = {0, 1};

    double time_us = 0.0;
    Method method = Method::Exact;
    GridSpec grid;
    SpectralOptions spectral;
    /// Empty unless the config has a "sweep" section.
    std::vector<double> sweep_times;
    BenchSpec bench;
    std::filesystem::path out_dir = "out";

    double v_th() const;
    /// The level scheme at time t (static for "atom" configs).
    AtomicSystem system_at(double t) const;
    VelocityGrid velocity_grid() const;
    /// Configured sweep times, or 64 points over one modulation period.
    std::vector<double> sweep_or_default() const;
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace doppler
