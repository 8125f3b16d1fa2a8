#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "doppler/commands.hpp"
#include "doppler/config.hpp"
#include "doppler/io.hpp"

using namespace doppler;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

json fig1_config() {
    return json::parse(R"({
      "ladder": {
        "gamma_mhz": 6.0, "gamma_rydberg_mhz": 0.06, "omega_c_mhz": 1.0, "omega_p_mhz": 1.0,
        "mod_freq_mhz": 1.0, "k1_per_um": 1.28, "k2_per_um": -0.80128205128205128,
        "delta1_mhz": 0.0, "delta2_mhz": 0.0, "v_th_um_per_us": 169.5
      },
      "solver": {"method": "both", "grid": "uniform:401:5"}
    })");
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("doppler_test_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir.parent_path());
    return dir;
}

fs::path write_config(const fs::path& dir, const json& doc) {
    fs::create_directories(dir);
    const fs::path path = dir / "config.json";
    std::ofstream(path) << doc.dump(2);
    return path;
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "doppler");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("ladder config applies 2 pi to frequencies and wavenumbers") {
    json doc = fig1_config();
    doc["ladder"].erase("gamma_rydberg_mhz");
    const RunConfig cfg = parse_config(doc);
    REQUIRE(cfg.ladder.has_value());
    CHECK(cfg.ladder->gamma == doctest::Approx(kTwoPi * 6.0).epsilon(1e-15));
    CHECK(cfg.ladder->gamma_rydberg == doctest::Approx(kTwoPi * 6.0 / 100.0).epsilon(1e-15));
    CHECK(cfg.ladder->k1 == doctest::Approx(kTwoPi * 1.28).epsilon(1e-15));
    CHECK(cfg.ladder->k2 == doctest::Approx(-kTwoPi / 1.248).epsilon(1e-15));
    CHECK(cfg.ladder->mod_freq == 1.0);
    CHECK(cfg.ladder->v_th == 169.5);
    CHECK(cfg.method == Method::Both);
    CHECK(cfg.grid.n_points == 401);
    CHECK(cfg.sweep_times.empty());
    CHECK(cfg.sweep_or_default().size() == 64);
}

TEST_CASE("config schema rejects bad input") {
    auto rejects = [](const json& doc) { CHECK_THROWS_AS(parse_config(doc), ConfigError); };
    json doc = fig1_config();
    doc["extra"] = 1;
    rejects(doc);
    doc = fig1_config();
    doc["ladder"]["gama_mhz"] = 6.0;
    rejects(doc);
    doc = fig1_config();
    doc["ladder"]["v_th_um_per_us"] = 0.0;
    rejects(doc);
    doc = fig1_config();
    doc["ladder"]["gamma_mhz"] = "6";
    rejects(doc);
    doc = fig1_config();
    doc["ladder"].erase("omega_c_mhz");
    rejects(doc);
    doc = fig1_config();
    doc["atom"] = json::object();
    rejects(doc);
    doc = fig1_config();
    doc["solver"]["method"] = "fast";
    rejects(doc);
    doc = fig1_config();
    doc["sweep"] = {{"times_us", {0.0, 0.5, 0.5}}};
    rejects(doc);
    doc = fig1_config();
    doc["sweep"] = {{"times_us", {0.0}}, {"count", 3}};
    rejects(doc);
    doc = fig1_config();
    doc["bench"] = {{"repetitions", 2}};
    rejects(doc);
}

TEST_CASE("grid specs") {
    const GridSpec a = parse_grid_spec("uniform:2001:5");
    CHECK(a.kind == GridKind::Uniform);
    CHECK(a.n_points == 2001);
    CHECK(a.span == 5.0);
    CHECK(parse_grid_spec("uniform:11").span == 5.0);
    const GridSpec b = parse_grid_spec("gh:40");
    CHECK(b.kind == GridKind::GaussHermite);
    CHECK(b.n_points == 40);
    CHECK(to_string(parse_grid_spec("uniform:251:6")) == "uniform:251:6");
    for (const char* bad : {"", "uniform", "uniform:2", "uniform:x:5", "uniform:11:0", "gh:0", "gh:5:1", "lobatto:5",
                            "uniform:11:5x"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse_grid_spec(bad), ConfigError);
    }
}

TEST_CASE("atom config describes a static system") {
    const json doc = json::parse(R"({
      "atom": {
        "n_levels": 2, "v_th_um_per_us": 10.0, "probe": [0, 1],
        "couplings": [{"lower": 0, "upper": 1, "rabi_mhz": 1.0, "detuning_mhz": 0.5, "k_per_um": 0.1}],
        "decays": [{"from": 1, "to": 0, "rate_mhz": 3.0}],
        "dephasings": [{"level": 1, "rate_mhz": 0.2}]
      }
    })");
    const RunConfig cfg = parse_config(doc);
    REQUIRE(cfg.atom.has_value());
    CHECK(cfg.v_th() == 10.0);
    const AtomicSystem sys = cfg.system_at(123.0);
    CHECK(sys.couplings[0].rabi == doctest::Approx(kTwoPi));
    CHECK(sys.decays[0].rate == doctest::Approx(kTwoPi * 3.0));
    CHECK(sys.dephasings[0].rate == doctest::Approx(kTwoPi * 0.2));
    CHECK_THROWS_AS(cfg.sweep_or_default(), ConfigError);

    json bad = doc;
    bad["atom"]["probe"] = {1, 1};
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = doc;
    bad["atom"]["couplings"][0]["upper"] = 5;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("malformed config exits 2 and writes nothing") {
    const fs::path dir = scratch("malformed");
    json doc = fig1_config();
    doc["ladder"]["bogus_key"] = 1.0;
    const fs::path config = write_config(dir, doc);
    const fs::path out = dir / "out";
    for (const char* cmd : {"average", "sweep", "bench", "validate"}) {
        const Run r = run({cmd, "--config", config.string(), "--out", out.string()});
        CHECK(r.code == 2);
        CHECK(r.err.find("bogus_key") != std::string::npos);
        CHECK_FALSE(fs::exists(out));
    }
    CHECK(run({"average", "--config", (dir / "missing.json").string()}).code == 2);
    CHECK(run({"average", "--config", config.string(), "--grid", "uniform:2"}).code == 2);

    doc = fig1_config();
    doc["ladder"]["v_th_um_per_us"] = 0.0;
    const Run zero = run({"validate", "--config", write_config(dir / "vth", doc).string(), "--out", out.string()});
    CHECK(zero.code == 2);
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("average writes normalized states that read back exactly") {
    const fs::path dir = scratch("average");
    const fs::path config = write_config(dir, fig1_config());
    const Run r = run({"average", "--config", config.string(), "--out", (dir / "out").string()});
    REQUIRE(r.code == 0);
    for (const char* f : {"rho_avg.json", "rho_avg_sampled.json", "rho0.json", "diagnostics.json"}) {
        CHECK(fs::exists(dir / "out" / f));
    }
    const CMatrix rho = read_density(dir / "out" / "rho_avg.json");
    CHECK(std::abs(rho.trace() - 1.0) <= 1e-10);
    CHECK(max_abs_diff(rho, rho.adjoint()) <= 1e-12);

    RunConfig cfg = load_config(config);
    const AverageOutput direct = run_average(cfg);
    CHECK(max_abs_diff(rho, direct.exact->matrix()) == 0.0);

    const json diag = read_json(dir / "out" / "diagnostics.json");
    CHECK(diag.at("exact").at("spectrum").size() == 9);
    CHECK(diag.at("exact").at("hermiticity_defect").get<double>() <= 1e-8);
    CHECK(diag.at("exact").at("trace_deviation").get<double>() <= 1e-6);
    CHECK(diag.at("sampled").at("solve_count").get<int>() == 401);
    CHECK(diag.contains("max_deviation"));
}

TEST_CASE("outputs are bit-identical across runs") {
    const fs::path dir = scratch("determinism");
    json doc = fig1_config();
    doc["sweep"] = {{"start_us", 0.0}, {"stop_us", 1.0}, {"count", 5}};
    const fs::path config = write_config(dir, doc);
    for (const char* sub : {"a", "b"}) {
        REQUIRE(run({"average", "--config", config.string(), "--out", (dir / sub).string()}).code == 0);
        REQUIRE(run({"sweep", "--config", config.string(), "--out", (dir / sub).string()}).code == 0);
    }
    for (const char* f : {"rho_avg.json", "rho_avg_sampled.json", "rho0.json", "diagnostics.json"}) {
        CAPTURE(f);
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    // Timing columns differ from run to run by nature; everything else is fixed.
    const auto a = read_sweep_csv(dir / "a" / "sweep.csv");
    const auto b = read_sweep_csv(dir / "b" / "sweep.csv");
    REQUIRE(a.size() == 5);
    REQUIRE(b.size() == 5);
    for (std::size_t j = 0; j < a.size(); ++j) {
        CHECK(a[j].t_us == b[j].t_us);
        CHECK(a[j].absorption_exact == b[j].absorption_exact);
        CHECK(a[j].absorption_sampled == b[j].absorption_sampled);
    }
}

TEST_CASE("zero wavenumbers leave the rest-frame state unchanged") {
    const fs::path dir = scratch("no_doppler");
    json doc = fig1_config();
    doc["ladder"]["k1_per_um"] = 0.0;
    doc["ladder"]["k2_per_um"] = 0.0;
    doc["solver"]["method"] = "exact";
    REQUIRE(run({"average", "--config", write_config(dir, doc).string(), "--out", (dir / "out").string()}).code == 0);
    CHECK(max_abs_diff(read_density(dir / "out" / "rho_avg.json"), read_density(dir / "out" / "rho0.json")) <= 1e-12);
    CHECK_FALSE(fs::exists(dir / "out" / "rho_avg_sampled.json"));
}

TEST_CASE("sweep CSV schema") {
    const fs::path dir = scratch("sweep");
    json doc = fig1_config();
    doc["solver"]["method"] = "exact";
    doc["sweep"] = {{"times_us", {0.0, 0.1, 0.25, 0.6}}};
    const fs::path config = write_config(dir, doc);
    REQUIRE(run({"sweep", "--config", config.string(), "--out", (dir / "exact").string()}).code == 0);
    const std::string text = slurp(dir / "exact" / "sweep.csv");
    CHECK(text.rfind(std::string(kSweepHeader) + "\n", 0) == 0);
    const auto rows = parse_sweep_csv(text);
    REQUIRE(rows.size() == 4);
    for (const SweepRow& r : rows) {
        CHECK(r.absorption_exact.has_value());
        CHECK_FALSE(r.absorption_sampled.has_value());
        CHECK_FALSE(r.sampled_solve_us.has_value());
        CHECK(*r.exact_solve_us > 0.0);
    }
    CHECK(rows[2].t_us == 0.25);
    // Columns of the method that was not run are empty.
    CHECK(text.find(",,") != std::string::npos);
    CHECK(format_sweep_csv(rows) == text);

    doc["sweep"] = {{"times_us", {0.3}}};
    doc["solver"]["method"] = "both";
    REQUIRE(run({"sweep", "--config", write_config(dir / "one", doc).string(), "--out", (dir / "one").string()})
                .code == 0);
    const auto one = read_sweep_csv(dir / "one" / "sweep.csv");
    REQUIRE(one.size() == 1);
    CHECK(std::abs(*one[0].absorption_exact - *one[0].absorption_sampled) <= 1e-3);

    REQUIRE(run({"sweep", "--config", config.string(), "--method", "sampled", "--out", (dir / "s").string()}).code ==
            0);
    for (const SweepRow& r : read_sweep_csv(dir / "s" / "sweep.csv")) {
        CHECK_FALSE(r.absorption_exact.has_value());
        CHECK(r.absorption_sampled.has_value());
    }
}

TEST_CASE("sweep CSV reader rejects malformed files") {
    const std::string header = std::string(kSweepHeader) + "\n";
    CHECK_THROWS_AS(parse_sweep_csv(""), ConfigError);
    CHECK_THROWS_AS(parse_sweep_csv("t,a,b,c,d\n"), ConfigError);
    CHECK_THROWS_AS(parse_sweep_csv(header + "0,1,2,3\n"), ConfigError);
    CHECK_THROWS_AS(parse_sweep_csv(header + "0,x,,1,\n"), ConfigError);
    CHECK_THROWS_AS(parse_sweep_csv(header + ",1,,1,\n"), ConfigError);
    CHECK_THROWS_AS(parse_sweep_csv(header + "0,1,,,\n"), ConfigError);
    CHECK(parse_sweep_csv(header).empty());
}

TEST_CASE("format_double round-trips") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0026576796135940636}) {
        CHECK(std::stod(format_double(x)) == x);
    }
}

TEST_CASE("density JSON reader validates its input") {
    CHECK_THROWS_AS(matrix_from_json(json::parse("[[[1,0],[0,0]]]")), ConfigError);
    CHECK_THROWS_AS(matrix_from_json(json::parse("[[[1,0,3]]]")), ConfigError);
    CHECK_THROWS_AS(complex_from_json(json::parse("[\"1\", 0]")), ConfigError);
    const CMatrix m = matrix_from_json(json::parse("[[[0.5,0],[0.1,-0.2]],[[0.1,0.2],[0.5,0]]]"));
    CHECK(m(0, 1) == Complex(0.1, -0.2));
    CHECK(max_abs_diff(matrix_from_json(matrix_to_json(m)), m) == 0.0);
}

TEST_CASE("degenerate configuration is reported by name") {
    const fs::path dir = scratch("degenerate");
    json doc = fig1_config();
    doc["ladder"]["gamma_rydberg_mhz"] = 0.0;
    doc["ladder"]["omega_p_mhz"] = 0.0;
    const fs::path config = write_config(dir, doc);

    const Run v = run({"validate", "--config", config.string(), "--out", (dir / "v").string()});
    CHECK(v.code == 1);
    CHECK(v.out.find("FAIL  unique_steady_state") != std::string::npos);
    CHECK(v.out.find("degeneracy") != std::string::npos);
    const json report = read_json(dir / "v" / "validate.json");
    CHECK_FALSE(report.at("passed").get<bool>());

    for (const char* method : {"exact", "sampled", "both"}) {
        const Run a = run({"average", "--config", config.string(), "--method", method, "--out", (dir / "a").string()});
        CAPTURE(method);
        CHECK(a.code == 3);
        CHECK(a.err.find("degeneracy") != std::string::npos);
        CHECK_FALSE(fs::exists(dir / "a"));
    }
}

TEST_CASE("defective generator exits 4 and points at the sampled method") {
    const fs::path dir = scratch("defective");
    json doc = fig1_config();
    doc["ladder"]["gamma_rydberg_mhz"] = 0.0;
    const fs::path config = write_config(dir, doc);
    const Run r = run({"average", "--config", config.string(), "--method", "exact", "--out", (dir / "a").string()});
    CHECK(r.code == 4);
    CHECK(r.err.find("--method sampled") != std::string::npos);
    CHECK(run({"average", "--config", config.string(), "--method", "sampled", "--out", (dir / "a").string()}).code ==
          0);
}

TEST_CASE("validate passes on the ladder configuration") {
    const fs::path dir = scratch("validate");
    json doc = fig1_config();
    doc["solver"]["grid"] = "uniform:2001:5";
    const Run r = run({"validate", "--config", write_config(dir, doc).string(), "--out", (dir / "v").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    const json report = read_json(dir / "v" / "validate.json");
    CHECK(report.at("passed").get<bool>());
    CHECK(report.at("properties").size() == 11);
}

TEST_CASE("bench report is consistent and round-trips") {
    json doc = fig1_config();
    doc["solver"]["grid"] = "uniform:101:5";
    doc["sweep"] = {{"start_us", 0.0}, {"stop_us", 1.0}, {"count", 4}};
    doc["bench"] = {{"repetitions", 3}, {"scaling_sizes", {11, 51, 101}}};
    const RunConfig cfg = parse_config(doc);
    const BenchReport r = run_bench(cfg);
    CHECK(r.time_points == 4);
    CHECK(r.liouville_dim == 9);
    CHECK(r.grid_size == 101);
    CHECK(r.exact_samples_us.size() == 3);
    CHECK(r.sampled_solve_count == 404);
    CHECK(r.exact_solve_count == 8);
    CHECK(r.exact_us > 0.0);
    CHECK(r.sampled_us > 0.0);
    CHECK(r.speedup == r.sampled_us / r.exact_us);
    CHECK(r.scaling.size() == 3);
    CHECK(r.max_absorption_deviation < 1e-2);

    const BenchReport back = bench_from_json(json::parse(bench_to_json(r).dump()));
    CHECK(bench_to_json(back) == bench_to_json(r));
    CHECK(format_bench_table(r).find("speedup") != std::string::npos);
    CHECK_THROWS_AS(bench_from_json(json::object()), ConfigError);
}

TEST_CASE("exit codes by error kind") {
    CHECK(exit_code(ErrorKind::Config) == 2);
    CHECK(exit_code(ErrorKind::Frame) == 2);
    CHECK(exit_code(ErrorKind::Degeneracy) == 3);
    CHECK(exit_code(ErrorKind::DefectiveMatrix) == 4);
    CHECK(exit_code(ErrorKind::NumericFailure) == 5);
    CHECK(exit_code(ErrorKind::PoleOnAxis) == 5);
    CHECK(exit_code(ErrorKind::SingularPropagator) == 5);
}

TEST_CASE("installed binary reports exit codes") {
    const fs::path dir = scratch("binary");
    json doc = fig1_config();
    doc["ladder"]["nope"] = 0;
    const fs::path bad = write_config(dir / "bad", doc);
    auto status = [](const std::string& cmd) {
        const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    const std::string bin = DOPPLER_CLI_PATH;
    CHECK(status(bin + " --help") == 0);
    CHECK(status(bin) == 2);
    CHECK(status(bin + " frobnicate --config x") == 2);
    CHECK(status(bin + " average --config " + bad.string()) == 2);
    doc = fig1_config();
    doc["solver"]["method"] = "exact";
    const fs::path good = write_config(dir / "good", doc);
    CHECK(status(bin + " average --config " + good.string() + " --out " + (dir / "out").string()) == 0);
    CHECK(fs::exists(dir / "out" / "rho_avg.json"));
}
