#pragma once

// Three-level ladder EIT scenario of a thermal 87Rb vapor with a
// time-modulated upper coupling, evaluated quasi-statically: each time point
// is an independent steady-state problem with the instantaneous amplitude.

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "doppler/atomsys.hpp"
#include "doppler/oracle.hpp"
#include "doppler/spectral.hpp"

namespace doppler {

struct LadderScenario {
    double gamma = 0.0;          // decay 1 -> 0, rad/us
    double gamma_rydberg = 0.0;  // decay 2 -> 1, rad/us
    double omega_c = 0.0;        // coupling 0-1 Rabi amplitude, rad/us
    double omega_p = 0.0;        // coupling 1-2 modulation amplitude, rad/us
    double mod_freq = 0.0;       // f, cycles/us
    double k1 = 0.0;             // rad/um
    double k2 = 0.0;             // rad/um
    double delta1 = 0.0;         // rad/us
    double delta2 = 0.0;         // rad/us
    double v_th = 0.0;           // um/us

    /// Gamma = 2 pi 6 MHz, Omega_c = Omega_p = 2 pi 1 MHz, f = 1 MHz,
    /// k1 = 2 pi 1.28 /um, k2 = -2 pi / 1.248 /um, v_th = 169.5 um/us,
    /// zero detunings, Rydberg decay Gamma / 100.
    static LadderScenario rb87_modulated_ladder();

    void validate() const;
};

/// Chain 0 -(Omega_c, delta1, k1)- 1 -(Omega_p cos(2 pi f t), delta2, k2)- 2
/// with decays 1 -> 0 at gamma and 2 -> 1 at gamma_rydberg.
AtomicSystem ladder_system(const LadderScenario& s, double t);

/// Absorption proxy -Im rho(upper, lower), positive for an absorbing medium.
double absorption(const DensityMatrix& rho, std::pair<std::size_t, std::size_t> levels = {0, 1});

enum class Method { Exact, Sampled, Both };

struct SweepOptions {
    Method method = Method::Exact;
    VelocityGrid grid;  // required for Sampled / Both
    SpectralOptions spectral;
    std::size_t threads = 1;
    std::pair<std::size_t, std::size_t> probe = {0, 1};
};

struct SweepResult {
    std::vector<double> times;
    std::vector<double> absorption_exact;
    std::optional<std::vector<double>> absorption_sampled;
    std::vector<double> exact_us;
    std::vector<double> sampled_us;
    std::vector<DensityMatrix> states_exact;
    std::vector<DensityMatrix> states_sampled;
};

/// Times must be non-empty and strictly increasing. Errors carry the failing time point.
SweepResult time_sweep(const LadderScenario& s, const std::vector<double>& times, const SweepOptions& options);

/// `count` points t_j = start + j (stop - start) / count (stop excluded) or
/// with the endpoint included.
std::vector<double> time_grid(double start, double stop, std::size_t count, bool endpoint);

}  // namespace doppler
