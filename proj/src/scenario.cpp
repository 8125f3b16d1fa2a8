#include "doppler/scenario.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "doppler/errors.hpp"

namespace doppler {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double elapsed_us(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

LadderScenario LadderScenario::rb87_modulated_ladder() {
    LadderScenario s;
    s.gamma = kTwoPi * 6.0;
    s.gamma_rydberg = s.gamma / 100.0;
    s.omega_c = kTwoPi * 1.0;
    s.omega_p = kTwoPi * 1.0;
    s.mod_freq = 1.0;
    s.k1 = kTwoPi * 1.28;
    s.k2 = -kTwoPi / 1.248;
    s.v_th = 169.5;
    return s;
}

void LadderScenario::validate() const {
    const double values[] = {gamma, gamma_rydberg, omega_c, omega_p, mod_freq, k1, k2, delta1, delta2, v_th};
    for (double v : values) {
        if (!std::isfinite(v)) throw ConfigError("ladder scenario has a non-finite parameter");
    }
    if (gamma < 0.0 || gamma_rydberg < 0.0) throw ConfigError("decay rates must be >= 0");
    if (mod_freq < 0.0) throw ConfigError("modulation frequency must be >= 0");
    if (!(v_th > 0.0)) throw ConfigError("thermal velocity must be > 0");
}

AtomicSystem ladder_system(const LadderScenario& s, double t) {
    s.validate();
    AtomicSystem sys;
    sys.n_levels = 3;
    sys.couplings.push_back({0, 1, s.omega_c, s.delta1, s.k1});
    sys.couplings.push_back({1, 2, s.omega_p * std::cos(kTwoPi * s.mod_freq * t), s.delta2, s.k2});
    sys.decays.push_back({1, 0, s.gamma});
    sys.decays.push_back({2, 1, s.gamma_rydberg});
    return sys;
}

double absorption(const DensityMatrix& rho, std::pair<std::size_t, std::size_t> levels) {
    const auto [lower, upper] = levels;
    if (lower >= rho.dim() || upper >= rho.dim() || lower == upper) {
        throw ConfigError("absorption: invalid level pair (" + std::to_string(lower) + ", " +
                          std::to_string(upper) + ")");
    }
    return -rho(upper, lower).imag();
}

std::vector<double> time_grid(double start, double stop, std::size_t count, bool endpoint) {
    if (count == 0) throw ConfigError("time grid needs at least one point");
    std::vector<double> times(count);
    if (count == 1) {
        times[0] = start;
        return times;
    }
    const double steps = static_cast<double>(endpoint ? count - 1 : count);
    for (std::size_t j = 0; j < count; ++j) {
        times[j] = start + (stop - start) * static_cast<double>(j) / steps;
    }
    return times;
}

SweepResult time_sweep(const LadderScenario& s, const std::vector<double>& times, const SweepOptions& options) {
    s.validate();
    if (times.empty()) throw ConfigError("sweep needs at least one time point");
    for (std::size_t j = 1; j < times.size(); ++j) {
        if (!(times[j] > times[j - 1])) throw ConfigError("sweep times must be strictly increasing");
    }
    const bool run_exact = options.method != Method::Sampled;
    const bool run_sampled = options.method != Method::Exact;
    if (run_sampled && options.grid.points.empty()) {
        throw ConfigError("sampled sweep needs a velocity grid");
    }

    SweepResult out;
    out.times = times;
    if (run_sampled) out.absorption_sampled.emplace();
    SampleOptions sample_options;
    sample_options.threads = options.threads;
    sample_options.spectral = options.spectral;

    for (double t : times) {
        try {
            const LiouvillianPair pair = build_liouvillian_pair(ladder_system(s, t));
            if (run_exact) {
                const auto start = std::chrono::steady_clock::now();
                const SpectralModel model = build_spectral_model(pair, s.v_th, options.spectral);
                DensityMatrix rho = doppler_average(model);
                out.exact_us.push_back(elapsed_us(start));
                out.absorption_exact.push_back(absorption(rho, options.probe));
                out.states_exact.push_back(std::move(rho));
            }
            if (run_sampled) {
                SampleResult r = sample_average(pair, options.grid, sample_options);
                out.sampled_us.push_back(r.stats.wall_time_us);
                out.absorption_sampled->push_back(absorption(r.rho, options.probe));
                out.states_sampled.push_back(std::move(r.rho));
            }
        } catch (Error& e) {
            std::ostringstream ctx;
            ctx.precision(17);
            ctx << "t = " << t << " us";
            e.add_context(ctx.str());
            throw;
        }
    }
    return out;
}

}  // namespace doppler
