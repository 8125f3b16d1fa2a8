#include "doppler/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <sstream>

#include "doppler/errors.hpp"

namespace doppler {

namespace {

using nlohmann::json;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& item : obj.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return item.key() == k; });
        if (!known) fail(path, "unknown key '" + item.key() + "'");
    }
}

double number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "expected a finite number");
    return x;
}

double number(const json& obj, const char* key, const std::string& path, std::optional<double> fallback) {
    if (!obj.contains(key)) {
        if (!fallback) fail(path, std::string("missing required key '") + key + "'");
        return *fallback;
    }
    return number(obj.at(key), path + "." + key);
}

std::size_t count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 0) fail(path, "expected a non-negative integer");
    return static_cast<std::size_t>(v.get<long long>());
}

std::size_t count(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key)) fail(path, std::string("missing required key '") + key + "'");
    return count(obj.at(key), path + "." + key);
}

const json& array(const json& obj, const char* key, const std::string& path) {
    static const json empty = json::array();
    if (!obj.contains(key)) return empty;
    const json& v = obj.at(key);
    if (!v.is_array()) fail(path + "." + key, "expected an array");
    return v;
}

LadderScenario parse_ladder(const json& j) {
    const std::string p = "ladder";
    check_keys(j, p, {"gamma_mhz", "gamma_rydberg_mhz", "omega_c_mhz", "omega_p_mhz", "mod_freq_mhz", "k1_per_um",
                      "k2_per_um", "delta1_mhz", "delta2_mhz", "v_th_um_per_us"});
    LadderScenario s;
    s.gamma = kTwoPi * number(j, "gamma_mhz", p, std::nullopt);
    s.gamma_rydberg = j.contains("gamma_rydberg_mhz") ? kTwoPi * number(j, "gamma_rydberg_mhz", p, std::nullopt)
                                                      : s.gamma / 100.0;
    s.omega_c = kTwoPi * number(j, "omega_c_mhz", p, std::nullopt);
    s.omega_p = kTwoPi * number(j, "omega_p_mhz", p, std::nullopt);
    s.mod_freq = number(j, "mod_freq_mhz", p, std::nullopt);
    s.k1 = kTwoPi * number(j, "k1_per_um", p, std::nullopt);
    s.k2 = kTwoPi * number(j, "k2_per_um", p, std::nullopt);
    s.delta1 = kTwoPi * number(j, "delta1_mhz", p, 0.0);
    s.delta2 = kTwoPi * number(j, "delta2_mhz", p, 0.0);
    s.v_th = number(j, "v_th_um_per_us", p, std::nullopt);
    s.validate();
    return s;
}

void parse_atom(const json& j, RunConfig& cfg) {
    const std::string p = "atom";
    check_keys(j, p, {"n_levels", "couplings", "decays", "dephasings", "probe", "v_th_um_per_us"});
    AtomicSystem sys;
    sys.n_levels = count(j, "n_levels", p);
    const json& couplings = array(j, "couplings", p);
    for (std::size_t i = 0; i < couplings.size(); ++i) {
        const std::string q = p + ".couplings[" + std::to_string(i) + "]";
        const json& c = couplings[i];
        check_keys(c, q, {"lower", "upper", "rabi_mhz", "detuning_mhz", "k_per_um"});
        sys.couplings.push_back({count(c, "lower", q), count(c, "upper", q), kTwoPi * number(c, "rabi_mhz", q, std::nullopt),
                                 kTwoPi * number(c, "detuning_mhz", q, 0.0), kTwoPi * number(c, "k_per_um", q, 0.0)});
    }
    const json& decays = array(j, "decays", p);
    for (std::size_t i = 0; i < decays.size(); ++i) {
        const std::string q = p + ".decays[" + std::to_string(i) + "]";
        const json& d = decays[i];
        check_keys(d, q, {"from", "to", "rate_mhz"});
        sys.decays.push_back({count(d, "from", q), count(d, "to", q), kTwoPi * number(d, "rate_mhz", q, std::nullopt)});
    }
    const json& dephasings = array(j, "dephasings", p);
    for (std::size_t i = 0; i < dephasings.size(); ++i) {
        const std::string q = p + ".dephasings[" + std::to_string(i) + "]";
        const json& d = dephasings[i];
        check_keys(d, q, {"level", "rate_mhz"});
        sys.dephasings.push_back({count(d, "level", q), kTwoPi * number(d, "rate_mhz", q, std::nullopt)});
    }
    if (j.contains("probe")) {
        const json& probe = j.at("probe");
        if (!probe.is_array() || probe.size() != 2) fail(p + ".probe", "expected [lower, upper]");
        cfg.probe = {count(probe[0], p + ".probe[0]"), count(probe[1], p + ".probe[1]")};
    }
    if (cfg.probe.first >= sys.n_levels || cfg.probe.second >= sys.n_levels || cfg.probe.first == cfg.probe.second) {
        fail(p + ".probe", "invalid level pair");
    }
    cfg.atom_v_th = number(j, "v_th_um_per_us", p, std::nullopt);
    if (!(cfg.atom_v_th > 0.0)) fail(p + ".v_th_um_per_us", "thermal velocity must be > 0");
    sys.validate();
    cfg.atom = std::move(sys);
}

void parse_solver(const json& j, RunConfig& cfg) {
    const std::string p = "solver";
    check_keys(j, p, {"method", "grid", "zero_mode_threshold", "small_lambda_cutoff"});
    if (j.contains("method")) {
        if (!j.at("method").is_string()) fail(p + ".method", "expected a string");
        cfg.method = parse_method(j.at("method").get<std::string>());
    }
    if (j.contains("grid")) {
        if (!j.at("grid").is_string()) fail(p + ".grid", "expected a string");
        cfg.grid = parse_grid_spec(j.at("grid").get<std::string>());
    }
    cfg.spectral.zero_mode_threshold = number(j, "zero_mode_threshold", p, cfg.spectral.zero_mode_threshold);
    cfg.spectral.small_lambda_cutoff = number(j, "small_lambda_cutoff", p, cfg.spectral.small_lambda_cutoff);
    if (!(cfg.spectral.zero_mode_threshold > 0.0 && cfg.spectral.zero_mode_threshold < 1.0)) {
        fail(p + ".zero_mode_threshold", "must lie in (0, 1)");
    }
    if (!(cfg.spectral.small_lambda_cutoff >= 0.0 && cfg.spectral.small_lambda_cutoff <= 1e-2)) {
        fail(p + ".small_lambda_cutoff", "must lie in [0, 1e-2]");
    }
}

void parse_sweep(const json& j, RunConfig& cfg) {
    const std::string p = "sweep";
    check_keys(j, p, {"times_us", "start_us", "stop_us", "count", "endpoint"});
    const bool list = j.contains("times_us");
    const bool range = j.contains("start_us") || j.contains("stop_us") || j.contains("count") || j.contains("endpoint");
    if (list == range) fail(p, "give either times_us or start_us/stop_us/count");
    if (list) {
        const json& times = array(j, "times_us", p);
        for (std::size_t i = 0; i < times.size(); ++i) {
            cfg.sweep_times.push_back(number(times[i], p + ".times_us[" + std::to_string(i) + "]"));
        }
    } else {
        bool endpoint = false;
        if (j.contains("endpoint")) {
            if (!j.at("endpoint").is_boolean()) fail(p + ".endpoint", "expected a boolean");
            endpoint = j.at("endpoint").get<bool>();
        }
        const double start = number(j, "start_us", p, std::nullopt);
        const double stop = number(j, "stop_us", p, std::nullopt);
        const std::size_t n = count(j, "count", p);
        if (n > 1 && !(stop > start)) fail(p, "stop_us must exceed start_us");
        cfg.sweep_times = time_grid(start, stop, n, endpoint);
    }
    if (cfg.sweep_times.empty()) fail(p, "sweep needs at least one time point");
    for (std::size_t i = 1; i < cfg.sweep_times.size(); ++i) {
        if (!(cfg.sweep_times[i] > cfg.sweep_times[i - 1])) fail(p, "times must be strictly increasing");
    }
}

void parse_bench(const json& j, RunConfig& cfg) {
    const std::string p = "bench";
    check_keys(j, p, {"repetitions", "scaling_sizes"});
    if (j.contains("repetitions")) cfg.bench.repetitions = count(j, "repetitions", p);
    if (cfg.bench.repetitions < 3) fail(p + ".repetitions", "at least 3 repetitions are required");
    if (j.contains("scaling_sizes")) {
        const json& sizes = array(j, "scaling_sizes", p);
        cfg.bench.scaling_sizes.clear();
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            cfg.bench.scaling_sizes.push_back(count(sizes[i], p + ".scaling_sizes[" + std::to_string(i) + "]"));
        }
    }
    if (cfg.bench.scaling_sizes.size() < 2) fail(p + ".scaling_sizes", "need at least two sizes");
}

}  // namespace

GridSpec parse_grid_spec(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream in(text);
    for (std::string part; std::getline(in, part, ':');) parts.push_back(part);

    auto to_count = [&](const std::string& s) {
        std::size_t used = 0;
        long long n = -1;
        try {
            n = std::stoll(s, &used);
        } catch (const std::exception&) {
        }
        if (used != s.size() || n < 1) throw ConfigError("grid '" + text + "': bad point count");
        return static_cast<std::size_t>(n);
    };

    GridSpec spec;
    if (parts.size() >= 2 && parts.size() <= 3 && parts[0] == "uniform") {
        spec.kind = GridKind::Uniform;
        spec.n_points = to_count(parts[1]);
        if (parts.size() == 3) {
            std::size_t used = 0;
            try {
                spec.span = std::stod(parts[2], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != parts[2].size() || !(spec.span > 0.0) || !std::isfinite(spec.span)) {
                throw ConfigError("grid '" + text + "': bad span");
            }
        }
        if (spec.n_points < 3) throw ConfigError("grid '" + text + "': uniform grids need at least 3 points");
    } else if (parts.size() == 2 && parts[0] == "gh") {
        spec.kind = GridKind::GaussHermite;
        spec.n_points = to_count(parts[1]);
    } else {
        throw ConfigError("grid '" + text + "': expected uniform:<n>:<span> or gh:<n>");
    }
    return spec;
}

std::string to_string(const GridSpec& spec) {
    std::ostringstream out;
    if (spec.kind == GridKind::Uniform) {
        out << "uniform:" << spec.n_points << ":" << spec.span;
    } else {
        out << "gh:" << spec.n_points;
    }
    return out.str();
}

Method parse_method(const std::string& text) {
    if (text == "exact") return Method::Exact;
    if (text == "sampled") return Method::Sampled;
    if (text == "both") return Method::Both;
    throw ConfigError("method '" + text + "': expected exact, sampled or both");
}

const char* to_string(Method method) {
    switch (method) {
        case Method::Exact: return "exact";
        case Method::Sampled: return "sampled";
        case Method::Both: return "both";
    }
    return "?";
}

double RunConfig::v_th() const { return ladder ? ladder->v_th : atom_v_th; }

AtomicSystem RunConfig::system_at(double t) const {
    if (ladder) return ladder_system(*ladder, t);
    return *atom;
}

VelocityGrid RunConfig::velocity_grid() const { return make_grid(grid.kind, grid.n_points, v_th(), grid.span); }

std::vector<double> RunConfig::sweep_or_default() const {
    if (!sweep_times.empty()) return sweep_times;
    if (!ladder) throw ConfigError("sweep: a time sweep needs a ladder scenario");
    if (!(ladder->mod_freq > 0.0)) throw ConfigError("sweep: no sweep given and the modulation frequency is 0");
    return time_grid(0.0, 1.0 / ladder->mod_freq, 64, false);
}

RunConfig parse_config(const json& doc) {
    check_keys(doc, "config", {"ladder", "atom", "time_us", "solver", "sweep", "bench", "output"});
    if (doc.contains("ladder") == doc.contains("atom")) {
        throw ConfigError("config: exactly one of 'ladder' and 'atom' is required");
    }
    RunConfig cfg;
    if (doc.contains("ladder")) {
        cfg.ladder = parse_ladder(doc.at("ladder"));
    } else {
        parse_atom(doc.at("atom"), cfg);
    }
    cfg.time_us = number(doc, "time_us", "config", 0.0);
    if (doc.contains("solver")) parse_solver(doc.at("solver"), cfg);
    if (doc.contains("sweep")) {
        parse_sweep(doc.at("sweep"), cfg);
        if (!cfg.ladder) throw ConfigError("sweep: a time sweep needs a ladder scenario");
    }
    if (doc.contains("bench")) parse_bench(doc.at("bench"), cfg);
    if (doc.contains("output")) {
        const json& out = doc.at("output");
        check_keys(out, "output", {"dir"});
        if (out.contains("dir")) {
            if (!out.at("dir").is_string() || out.at("dir").get<std::string>().empty()) {
                fail("output.dir", "expected a non-empty string");
            }
            cfg.out_dir = out.at("dir").get<std::string>();
        }
    }
    // Grid validity depends on v_th; check it now rather than mid-run.
    (void)cfg.velocity_grid();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

}  // namespace doppler
