#include "doppler/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "doppler/io.hpp"
#include "doppler/oracle.hpp"
#include "doppler/parallel.hpp"
#include "doppler/spectral.hpp"

namespace doppler {

namespace {

using nlohmann::json;

constexpr double kNullResidualTol = 1e-10;
constexpr double kPseudoInverseTol = 1e-8;
constexpr double kBiorthogonalityTol = 1e-8;
constexpr double kPropagatorTol = 1e-8;
constexpr double kModeSumTol = 1e-7;
constexpr double kWeightTol = 1e-8;
constexpr double kHermiticityTol = 1e-8;
constexpr double kTraceTol = 1e-6;
constexpr double kAgreementTol = 1e-4;
constexpr std::size_t kQuadratureNodes = 200;

double elapsed_us(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - since).count();
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    if (n == 0) return 0.0;
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy * sxy / (sxx * syy);
}

json state_diagnostics(const DensityMatrix& rho, std::pair<std::size_t, std::size_t> probe) {
    json d;
    d["hermiticity_defect"] = rho.hermiticity_defect();
    d["trace_deviation"] = std::abs(rho.raw_trace() - 1.0);
    d["absorption"] = absorption(rho, probe);
    return d;
}

SampleOptions sample_options(const RunConfig& cfg) {
    SampleOptions o;
    o.threads = thread_count();
    o.spectral = cfg.spectral;
    return o;
}

SweepOptions sweep_options(const RunConfig& cfg, Method method, const VelocityGrid& grid) {
    SweepOptions o;
    o.method = method;
    if (method != Method::Exact) o.grid = grid;
    o.spectral = cfg.spectral;
    o.threads = thread_count();
    o.probe = cfg.probe;
    return o;
}

const LadderScenario& require_ladder(const RunConfig& cfg, const char* command) {
    if (!cfg.ladder) throw ConfigError(std::string(command) + ": needs a ladder scenario");
    return *cfg.ladder;
}

void prepare_out_dir(const RunConfig& cfg) { std::filesystem::create_directories(cfg.out_dir); }

}  // namespace

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config:
        case ErrorKind::Frame: return 2;
        case ErrorKind::Degeneracy:
        case ErrorKind::NonNormalizable: return 3;
        case ErrorKind::DefectiveMatrix: return 4;
        case ErrorKind::Dimension:
        case ErrorKind::SingularPropagator:
        case ErrorKind::PoleOnAxis:
        case ErrorKind::NumericFailure: return 5;
    }
    return 5;
}

AverageOutput run_average(const RunConfig& cfg) {
    const LiouvillianPair pair = build_liouvillian_pair(cfg.system_at(cfg.time_us));
    json diag;
    diag["time_us"] = cfg.time_us;
    diag["method"] = to_string(cfg.method);
    diag["liouville_dim"] = pair.g0.rows();
    diag["v_th_um_per_us"] = cfg.v_th();

    std::optional<DensityMatrix> rho0;
    std::optional<DensityMatrix> exact;
    std::optional<DensityMatrix> sampled;
    if (cfg.method != Method::Sampled) {
        const SpectralModel model = build_spectral_model(pair, cfg.v_th(), cfg.spectral);
        exact = doppler_average(model);
        rho0 = model.rho0;
        json e = state_diagnostics(*exact, cfg.probe);
        e["generator_residual"] = model.generator_residual;
        json spectrum = json::array();
        for (const SpectralMode& mode : model.modes) {
            spectrum.push_back({{"lambda", complex_to_json(mode.lam)},
                                {"weight", complex_to_json(doppler_weight(mode.lam, cfg.spectral.small_lambda_cutoff))}});
        }
        e["spectrum"] = std::move(spectrum);
        diag["exact"] = std::move(e);
    }
    if (cfg.method != Method::Exact) {
        const SampleResult r = sample_average(pair, cfg.velocity_grid(), sample_options(cfg));
        json s = state_diagnostics(r.rho, cfg.probe);
        s["grid"] = to_string(cfg.grid);
        s["solve_count"] = r.stats.solve_count;
        s["max_residual"] = r.stats.max_residual;
        diag["sampled"] = std::move(s);
        sampled = r.rho;
        if (!rho0) rho0 = direct_null_state(pair.g0, cfg.spectral);
    }
    if (exact && sampled) {
        diag["max_deviation"] = max_abs_diff(exact->matrix(), sampled->matrix());
        diag["absorption_deviation"] = std::abs(absorption(*exact, cfg.probe) - absorption(*sampled, cfg.probe));
    }
    return {*rho0, exact, sampled, std::move(diag)};
}

int cmd_average(const RunConfig& cfg, std::ostream& log) {
    const AverageOutput out = run_average(cfg);
    prepare_out_dir(cfg);
    const DensityMatrix& main = out.exact ? *out.exact : *out.sampled;
    write_density(cfg.out_dir / "rho_avg.json", main);
    if (out.exact && out.sampled) write_density(cfg.out_dir / "rho_avg_sampled.json", *out.sampled);
    write_density(cfg.out_dir / "rho0.json", out.rho0);
    write_json(cfg.out_dir / "diagnostics.json", out.diagnostics);

    log << "absorption (" << to_string(cfg.method == Method::Sampled ? Method::Sampled : Method::Exact)
        << "): " << format_double(absorption(main, cfg.probe)) << '\n';
    if (out.exact && out.sampled) {
        log << "absorption (sampled): " << format_double(absorption(*out.sampled, cfg.probe)) << '\n';
        log << "max deviation between methods: " << format_double(out.diagnostics["max_deviation"].get<double>())
            << '\n';
    }
    log << "wrote " << (cfg.out_dir / "rho_avg.json").string() << '\n';
    return 0;
}

SweepResult run_sweep(const RunConfig& cfg) {
    const LadderScenario& s = require_ladder(cfg, "sweep");
    const std::vector<double> times = cfg.sweep_or_default();
    const VelocityGrid grid = cfg.method == Method::Exact ? VelocityGrid{} : cfg.velocity_grid();
    return time_sweep(s, times, sweep_options(cfg, cfg.method, grid));
}

int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
    const SweepResult r = run_sweep(cfg);
    prepare_out_dir(cfg);
    write_sweep_csv(cfg.out_dir / "sweep.csv", r);
    log << r.times.size() << " time points";
    if (!r.absorption_exact.empty() && r.absorption_sampled) {
        double dev = 0.0;
        for (std::size_t j = 0; j < r.times.size(); ++j) {
            dev = std::max(dev, std::abs(r.absorption_exact[j] - (*r.absorption_sampled)[j]));
        }
        log << ", max |exact - sampled| = " << format_double(dev);
    }
    log << "\nwrote " << (cfg.out_dir / "sweep.csv").string() << '\n';
    return 0;
}

BenchReport run_bench(const RunConfig& cfg) {
    const LadderScenario& s = require_ladder(cfg, "bench");
    if (cfg.bench.repetitions < 3) throw ConfigError("bench: at least 3 repetitions are required");
    const std::vector<double> times = cfg.sweep_or_default();
    const VelocityGrid grid = cfg.velocity_grid();

    auto timed = [&](Method method, const VelocityGrid& g, SweepResult* keep) {
        const auto start = std::chrono::steady_clock::now();
        SweepResult r = time_sweep(s, times, sweep_options(cfg, method, g));
        const double us = elapsed_us(start);
        if (keep) *keep = std::move(r);
        return us;
    };

    BenchReport report;
    report.time_points = times.size();
    report.grid_size = grid.points.size();
    report.repetitions = cfg.bench.repetitions;
    report.threads = thread_count();
    report.liouville_dim = static_cast<std::size_t>(build_liouvillian_pair(ladder_system(s, times.front())).g0.rows());

    // The warm-up runs double as the agreement check.
    SweepResult exact;
    SweepResult sampled;
    timed(Method::Exact, grid, &exact);
    timed(Method::Sampled, grid, &sampled);
    for (std::size_t j = 0; j < times.size(); ++j) {
        report.max_deviation = std::max(report.max_deviation,
                                        max_abs_diff(exact.states_exact[j].matrix(), sampled.states_sampled[j].matrix()));
        report.max_absorption_deviation = std::max(
            report.max_absorption_deviation, std::abs(exact.absorption_exact[j] - (*sampled.absorption_sampled)[j]));
    }

    for (std::size_t rep = 0; rep < cfg.bench.repetitions; ++rep) {
        report.exact_samples_us.push_back(timed(Method::Exact, grid, nullptr));
        report.sampled_samples_us.push_back(timed(Method::Sampled, grid, nullptr));
    }
    report.exact_us = median(report.exact_samples_us);
    report.sampled_us = median(report.sampled_samples_us);
    report.exact_solve_count = 2 * times.size();
    report.sampled_solve_count = grid.points.size() * times.size();
    report.speedup = report.sampled_us / report.exact_us;

    // Sizes are interleaved within each repetition so that slow stretches of
    // a shared machine hit every size alike.
    std::vector<VelocityGrid> grids;
    for (std::size_t n : cfg.bench.scaling_sizes) {
        grids.push_back(make_grid(cfg.grid.kind, n, s.v_th, cfg.grid.span));
        timed(Method::Sampled, grids.back(), nullptr);
    }
    std::vector<std::vector<double>> ex(grids.size()), sa(grids.size());
    for (std::size_t rep = 0; rep < cfg.bench.repetitions; ++rep) {
        for (std::size_t i = 0; i < grids.size(); ++i) {
            ex[i].push_back(timed(Method::Exact, grids[i], nullptr));
            sa[i].push_back(timed(Method::Sampled, grids[i], nullptr));
        }
    }
    std::vector<double> sizes;
    std::vector<double> sampled_medians;
    double exact_min = std::numeric_limits<double>::infinity();
    double exact_max = 0.0;
    for (std::size_t i = 0; i < grids.size(); ++i) {
        ScalingPoint p{grids[i].points.size(), median(sa[i]), median(ex[i])};
        report.scaling.push_back(p);
        sizes.push_back(static_cast<double>(p.grid_size));
        sampled_medians.push_back(p.sampled_us);
        exact_min = std::min(exact_min, p.exact_us);
        exact_max = std::max(exact_max, p.exact_us);
    }
    report.scaling_r2 = r_squared(sizes, sampled_medians);
    report.exact_time_spread = exact_max / exact_min;
    return report;
}

json bench_to_json(const BenchReport& r) {
    json scaling = json::array();
    for (const ScalingPoint& p : r.scaling) {
        scaling.push_back({{"grid_size", p.grid_size}, {"sampled_us", p.sampled_us}, {"exact_us", p.exact_us}});
    }
    return {
        {"time_points", r.time_points},
        {"liouville_dim", r.liouville_dim},
        {"grid_size", r.grid_size},
        {"repetitions", r.repetitions},
        {"threads", r.threads},
        {"exact_samples_us", r.exact_samples_us},
        {"sampled_samples_us", r.sampled_samples_us},
        {"exact_us", r.exact_us},
        {"sampled_us", r.sampled_us},
        {"exact_solve_count", r.exact_solve_count},
        {"sampled_solve_count", r.sampled_solve_count},
        {"speedup", r.speedup},
        {"max_deviation", r.max_deviation},
        {"max_absorption_deviation", r.max_absorption_deviation},
        {"scaling", std::move(scaling)},
        {"scaling_r2", r.scaling_r2},
        {"exact_time_spread", r.exact_time_spread},
    };
}

BenchReport bench_from_json(const json& doc) {
    BenchReport r;
    try {
        r.time_points = doc.at("time_points").get<std::size_t>();
        r.liouville_dim = doc.at("liouville_dim").get<std::size_t>();
        r.grid_size = doc.at("grid_size").get<std::size_t>();
        r.repetitions = doc.at("repetitions").get<std::size_t>();
        r.threads = doc.at("threads").get<std::size_t>();
        r.exact_samples_us = doc.at("exact_samples_us").get<std::vector<double>>();
        r.sampled_samples_us = doc.at("sampled_samples_us").get<std::vector<double>>();
        r.exact_us = doc.at("exact_us").get<double>();
        r.sampled_us = doc.at("sampled_us").get<double>();
        r.exact_solve_count = doc.at("exact_solve_count").get<std::size_t>();
        r.sampled_solve_count = doc.at("sampled_solve_count").get<std::size_t>();
        r.speedup = doc.at("speedup").get<double>();
        r.max_deviation = doc.at("max_deviation").get<double>();
        r.max_absorption_deviation = doc.at("max_absorption_deviation").get<double>();
        for (const json& p : doc.at("scaling")) {
            r.scaling.push_back({p.at("grid_size").get<std::size_t>(), p.at("sampled_us").get<double>(),
                                 p.at("exact_us").get<double>()});
        }
        r.scaling_r2 = doc.at("scaling_r2").get<double>();
        r.exact_time_spread = doc.at("exact_time_spread").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bench report: ") + e.what());
    }
    return r;
}

std::string format_bench_table(const BenchReport& r) {
    std::ostringstream out;
    out << std::setprecision(4);
    out << "sweep: " << r.time_points << " time points, N^2 = " << r.liouville_dim << ", grid " << r.grid_size
        << " velocities, " << r.repetitions << " repetitions (median), " << r.threads << " thread(s)\n";
    out << std::left << std::setw(10) << "method" << std::right << std::setw(14) << "time_us" << std::setw(12)
        << "solves" << '\n';
    out << std::left << std::setw(10) << "exact" << std::right << std::setw(14) << r.exact_us << std::setw(12)
        << r.exact_solve_count << '\n';
    out << std::left << std::setw(10) << "sampled" << std::right << std::setw(14) << r.sampled_us << std::setw(12)
        << r.sampled_solve_count << '\n';
    out << "speedup: " << r.speedup << "x   max deviation: " << r.max_deviation
        << "   max absorption deviation: " << r.max_absorption_deviation << '\n';
    out << "scaling (grid size, sampled_us, exact_us):\n";
    for (const ScalingPoint& p : r.scaling) {
        out << "  " << std::setw(8) << p.grid_size << std::setw(14) << p.sampled_us << std::setw(14) << p.exact_us
            << '\n';
    }
    out << "sampled-time linear fit r^2: " << r.scaling_r2 << "   exact-time spread (max/min): " << r.exact_time_spread
        << '\n';
    return out.str();
}

int cmd_bench(const RunConfig& cfg, std::ostream& log) {
    const BenchReport report = run_bench(cfg);
    prepare_out_dir(cfg);
    write_json(cfg.out_dir / "bench.json", bench_to_json(report));
    log << format_bench_table(report);
    return 0;
}

std::vector<PropertyResult> run_validation(const RunConfig& cfg) {
    std::vector<PropertyResult> results;
    auto check = [&](const std::string& name, double tol, const std::function<double(std::string&)>& measure) {
        PropertyResult r;
        r.name = name;
        r.tolerance = tol;
        try {
            r.measured = measure(r.detail);
            r.passed = r.measured <= tol;
        } catch (const Error& e) {
            r.measured = std::numeric_limits<double>::quiet_NaN();
            r.detail = std::string(to_string(e.kind())) + ": " + e.what();
        }
        results.push_back(std::move(r));
    };

    const LiouvillianPair pair = build_liouvillian_pair(cfg.system_at(cfg.time_us));
    const double v_th = cfg.v_th();

    std::optional<SpectralModel> model;
    std::exception_ptr model_error;
    auto get_model = [&]() -> const SpectralModel& {
        if (!model && !model_error) {
            try {
                model = build_spectral_model(pair, v_th, cfg.spectral);
            } catch (...) {
                model_error = std::current_exception();
            }
        }
        if (model_error) std::rethrow_exception(model_error);
        return *model;
    };

    check("unique_steady_state", 0.0, [&](std::string&) {
        (void)null_state(pair.g0, cfg.spectral);
        return 0.0;
    });
    check("null_residual", kNullResidualTol, [&](std::string&) {
        const DensityMatrix rho0 = null_state(pair.g0, cfg.spectral);
        return (pair.g0 * rho0.vectorized()).norm() / pair.g0.norm();
    });
    check("pseudo_inverse_identity", kPseudoInverseTol, [&](std::string&) {
        const SpectralModel& m = get_model();
        const auto d = static_cast<Eigen::Index>(pair.dim);
        const CMatrix expected = CMatrix::Identity(d, d) - m.null_projector;
        return max_abs_diff(m.g0_pinv * pair.g0, expected);
    });
    check("biorthonormality", kBiorthogonalityTol, [&](std::string&) {
        const SpectralModel& m = get_model();
        double worst = 0.0;
        for (std::size_t i = 0; i < m.modes.size(); ++i) {
            for (std::size_t j = 0; j < m.modes.size(); ++j) {
                const Complex lr = (m.modes[i].left.transpose() * m.modes[j].right)(0);
                worst = std::max(worst, std::abs(lr - (i == j ? 1.0 : 0.0)));
            }
        }
        return worst;
    });

    std::vector<double> velocities;
    for (int j = 0; j <= 20; ++j) velocities.push_back(v_th * (-5.0 + 0.5 * j));
    check("propagator_residual", kPropagatorTol, [&](std::string&) {
        const SpectralModel& m = get_model();
        double worst = 0.0;
        for (double v : velocities) {
            const CMatrix g = pair.g0 + v * pair.gv;
            const CVector rho = propagate(m, pair.gv, v).vectorized();
            worst = std::max(worst, (g * rho).norm() / (g.norm() * rho.norm()));
        }
        return worst;
    });
    check("propagator_vs_direct", kPropagatorTol, [&](std::string&) {
        const SpectralModel& m = get_model();
        double worst = 0.0;
        for (double v : velocities) {
            const DensityMatrix direct = direct_null_state(pair.g0 + v * pair.gv, cfg.spectral);
            worst = std::max(worst, max_abs_diff(propagate(m, pair.gv, v).matrix(), direct.matrix()));
        }
        return worst;
    });
    check("mode_sum_vs_inverse", kModeSumTol, [&](std::string&) {
        const SpectralModel& m = get_model();
        double worst = 0.0;
        for (int j = 1; j <= 10; ++j) {
            const double v = 5.0 * v_th * std::sin(1.7 * j);
            worst = std::max(worst, max_abs_diff(propagate_modes(m, v).matrix(), propagate(m, pair.gv, v).matrix()));
        }
        return worst;
    });
    check("weight_vs_quadrature", kWeightTol, [&](std::string&) {
        const SpectralModel& m = get_model();
        const GaussHermiteRule rule = gauss_hermite_rule(kQuadratureNodes);
        double worst = 0.0;
        for (const SpectralMode& mode : m.modes) {
            if (mode.lam == Complex(0.0)) continue;
            const Complex g = doppler_weight(mode.lam, cfg.spectral.small_lambda_cutoff);
            const Complex q = quadrature_weight(mode.lam, rule);
            worst = std::max(worst, std::abs(g - q) / std::abs(q));
        }
        return worst;
    });

    std::optional<DensityMatrix> average;
    auto get_average = [&]() -> const DensityMatrix& {
        if (!average) average = doppler_average(get_model());
        return *average;
    };
    check("average_hermitian", kHermiticityTol, [&](std::string&) { return get_average().hermiticity_defect(); });
    check("average_trace", kTraceTol, [&](std::string&) { return std::abs(get_average().raw_trace() - 1.0); });
    check("exact_vs_sampled", kAgreementTol, [&](std::string& detail) {
        const DensityMatrix& exact = get_average();
        const SampleResult r = sample_average(pair, cfg.velocity_grid(), sample_options(cfg));
        detail = "absorption; elementwise max " + format_double(max_abs_diff(exact.matrix(), r.rho.matrix())) +
                 " on grid " + to_string(cfg.grid);
        return std::abs(absorption(exact, cfg.probe) - absorption(r.rho, cfg.probe));
    });
    return results;
}

int cmd_validate(const RunConfig& cfg, std::ostream& log) {
    const std::vector<PropertyResult> results = run_validation(cfg);
    bool all = true;
    json props = json::array();
    for (const PropertyResult& r : results) {
        all = all && r.passed;
        log << (r.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(26) << r.name;
        if (std::isnan(r.measured)) {
            log << r.detail;
        } else {
            std::ostringstream line;
            line << std::setprecision(3) << "measured " << std::setw(10) << r.measured << "  tol " << r.tolerance;
            log << line.str();
            if (!r.detail.empty()) log << "  (" << r.detail << ")";
        }
        log << '\n';
        props.push_back({{"name", r.name},
                         {"passed", r.passed},
                         {"measured", r.measured},
                         {"tolerance", r.tolerance},
                         {"detail", r.detail}});
    }
    prepare_out_dir(cfg);
    write_json(cfg.out_dir / "validate.json", {{"passed", all}, {"properties", std::move(props)}});
    log << (all ? "all properties pass" : "property failures") << '\n';
    return all ? 0 : 1;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Doppler-averaged steady states of driven multilevel atoms"};
    app.require_subcommand(1);
    std::string config_path;
    std::string method;
    std::string grid;
    std::string out_dir;
    long long seed = 0;

    const std::vector<std::pair<const char*, const char*>> commands = {
        {"average", "Doppler-averaged steady state at one time point"},
        {"sweep", "absorption versus time (quasi-static)"},
        {"bench", "time the exact method against velocity sampling"},
        {"validate", "run the property suite on the configured system"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--method", method, "exact, sampled or both");
        sub->add_option("--grid", grid, "oracle grid: uniform:<n>:<span> or gh:<n>");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "reserved; nothing is random");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        RunConfig cfg = load_config(config_path);
        if (!method.empty()) cfg.method = parse_method(method);
        if (!grid.empty()) cfg.grid = parse_grid_spec(grid);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        (void)cfg.velocity_grid();

        if (command == "average") return cmd_average(cfg, out);
        if (command == "sweep") return cmd_sweep(cfg, out);
        if (command == "bench") return cmd_bench(cfg, out);
        return cmd_validate(cfg, out);
    } catch (const Error& e) {
        err << "doppler " << command << ": " << to_string(e.kind()) << " error: " << e.what() << '\n';
        if (e.kind() == ErrorKind::DefectiveMatrix) err << "hint: rerun with --method sampled\n";
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "doppler " << command << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "doppler " << command << ": " << e.what() << '\n';
        return 5;
    }
}

}  // namespace doppler
