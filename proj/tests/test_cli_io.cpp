#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sqglab/cli.hpp"
#include "sqglab/config.hpp"
#include "sqglab/io.hpp"
#include "sqglab/norms.hpp"

using namespace sqglab;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("sqglab_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

// Runs the sqglab binary; returns its exit status and captures stdout.
int run_cli(const std::string& args, std::string* out = nullptr) {
    const char* bin = std::getenv("SQGLAB_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "SQGLAB_BIN must point at the sqglab executable");
    const fs::path cap = fs::temp_directory_path() / "sqglab_cli_stdout.txt";
    const std::string cmd = std::string("\"") + bin + "\" " + args + " > \"" + cap.string() + "\" 2>/dev/null";
    const int st = std::system(cmd.c_str());
    if (out) *out = read_file(cap);
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

const char* kProductDoc = R"(seed = 7

[construction]
datum = "product_mode"
n = 32
q = 3

[solver]
t_end = 0.2

[output]
diagnostics_every = 2
betas = [1, 1.5]
)";

}  // namespace

TEST_CASE("config round trip is exact") {
    for (const auto& preset : {"small", "medium"}) {
        const RunConfig c = config_from_preset(preset);
        const std::string text = serialize_config(c);
        const RunConfig d = parse_config(text);
        CHECK(c == d);
        CHECK(serialize_config(d) == text);
    }
    RunConfig c = parse_config(kProductDoc);
    c.solver.dt = 0.1 / 3.0;  // needs all 17 digits
    c.construction.L = 2.0 * std::acos(-1.0);
    CHECK(parse_config(serialize_config(c)) == c);
    CHECK(parse_config(serialize_config(c)).solver.dt == c.solver.dt);
}

TEST_CASE("presets fill the construction block") {
    const RunConfig s = config_from_preset("small");
    CHECK(s.construction.s == 1.75);
    CHECK(s.construction.P == 4);
    CHECK(s.construction.lambda == 32.0);
    CHECK(s.construction.n == 512);
    CHECK(s.construction.B == 1.5);
    CHECK(s.construction.eta == 0.01);
    CHECK(s.construction.gamma == 0.01);
    CHECK(s.construction.epsilon == 0.1);
    const RunConfig m = config_from_preset("medium");
    CHECK(m.construction.s == 1.6);
    CHECK(m.construction.P == 6);
    CHECK(m.construction.lambda == 8.0);
    CHECK(m.construction.n == 2048);
    CHECK(m.construction.gamma == 0.05);
    CHECK(m.construction.epsilon == 0.5);
    // explicit values override the preset
    const RunConfig o = parse_config("[construction]\npreset = \"medium\"\nn = 1024\n");
    CHECK(o.construction.n == 1024);
    CHECK(o.construction.s == 1.6);
}

TEST_CASE("parsed values") {
    const RunConfig c = parse_config(kProductDoc);
    CHECK(c.seed == 7);
    CHECK(c.construction.datum == DatumKind::ProductMode);
    CHECK(c.construction.n == 32);
    CHECK(c.construction.q == 3);
    CHECK(c.solver.t_end == 0.2);
    CHECK(c.output.diagnostics_every == 2);
    REQUIRE(c.output.betas.size() == 2);
    CHECK(c.output.betas[1] == 1.5);
}

TEST_CASE("config errors name the line and field") {
    CHECK_THROWS_AS(parse_config(""), ConfigError);
    CHECK_THROWS_AS(parse_config("   \n# only a comment\n"), ConfigError);
    try {
        parse_config("[construction]\nn = 64\nwavelength = 3\n");
        FAIL("unknown key accepted");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("wavelength") != std::string::npos);
    }
    try {
        parse_config("[construction]\nn = 64\nn = 128\n");
        FAIL("duplicate key accepted");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_config("[nonsense]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[solver]\nt_end = \"soon\"\n"), ConfigError);
    // s = 1.75 needs 3 + 2 gamma - 2 s < 0, i.e. gamma < 0.25
    try {
        parse_config("[construction]\npreset = \"small\"\ngamma = 0.3\n");
        FAIL("gamma inequality not enforced");
    } catch (const ConfigError& e) {
        CHECK(e.field().find("gamma") != std::string::npos);
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("3+2") != std::string::npos);
    }
    CHECK_NOTHROW(parse_config("[construction]\npreset = \"small\"\ngamma = 0.2\n"));
    CHECK_THROWS_AS(load_config("/nonexistent/sqglab.toml"), std::exception);
}

TEST_CASE("snapshot round trip is bit exact") {
    const Grid g(48, 3.0);
    ScalarField f = ScalarField::sample(g, [](double x, double y) { return std::sin(x) * std::exp(y) / 3.0; });
    f.at(5, 7) = -0.0;
    f.at(1, 2) = 1e-310;  // subnormal
    const fs::path d = scratch_dir("snap");
    write_snapshot(f, d / "f.bin", 0.25, "probe");
    SnapshotMeta m;
    const ScalarField h = read_snapshot(d / "f.bin", &m);
    CHECK(m.n == 48);
    CHECK(m.domain_length == 3.0);
    CHECK(m.time == 0.25);
    CHECK(m.name == "probe");
    REQUIRE(h.size() == f.size());
    CHECK(std::memcmp(h.values().data(), f.values().data(), f.size() * sizeof(double)) == 0);
    CHECK(fs::file_size(d / "f.bin") == 48u * 48u * 8u);

    const SpectralField F = to_spectral(f);
    write_spectral_snapshot(F, d / "F.bin", 0.5);
    const SpectralField H = read_spectral_snapshot(d / "F.bin");
    CHECK(std::memcmp(H.coeffs().data(), F.coeffs().data(), F.coeffs().size() * sizeof(cplx)) == 0);
    CHECK_THROWS_AS(read_snapshot(d / "F.bin"), SnapshotError);
}

TEST_CASE("snapshot header and size errors") {
    const Grid g(16);
    const ScalarField f(g, 1.0);
    const fs::path d = scratch_dir("snaperr");
    write_snapshot(f, d / "f.bin");

    CHECK_THROWS_AS(read_snapshot(d / "f.bin", nullptr, 32), SnapshotDimensionError);

    auto meta = read_json(sidecar_path(d / "f.bin"));
    meta["version"] = kSnapshotVersion + 1;
    write_json(sidecar_path(d / "f.bin"), meta);
    CHECK_THROWS_AS(read_snapshot(d / "f.bin"), SnapshotVersionError);
    meta.erase("version");
    write_json(sidecar_path(d / "f.bin"), meta);
    CHECK_THROWS_AS(read_snapshot(d / "f.bin"), SnapshotVersionError);
    fs::remove(sidecar_path(d / "f.bin"));
    CHECK_THROWS_AS(read_snapshot(d / "f.bin"), SnapshotVersionError);

    write_snapshot(f, d / "f.bin");
    fs::resize_file(d / "f.bin", 16 * 16 * 8 - 8);
    CHECK_THROWS_AS(read_snapshot(d / "f.bin"), SnapshotTruncatedError);
    fs::resize_file(d / "f.bin", 16 * 16 * 8 + 8);
    CHECK_THROWS_AS(read_snapshot(d / "f.bin"), SnapshotDimensionError);

    meta = read_json(sidecar_path(d / "f.bin"));
    meta["n"] = 15;
    write_json(sidecar_path(d / "f.bin"), meta);
    CHECK_THROWS_AS(read_snapshot(d / "f.bin"), SnapshotDimensionError);
}

TEST_CASE("in-process run writes diagnostics and metadata") {
    const fs::path d = scratch_dir("run_inproc");
    RunConfig c = parse_config(kProductDoc);
    std::ostringstream log;
    const RunSummary s = run_simulation(c, d, log);
    CHECK_FALSE(s.halted);
    CHECK(s.t == doctest::Approx(0.2));
    const std::string csv = read_file(d / "diagnostics.csv");
    std::istringstream in(csv);
    std::string line, header;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header.empty()) header = line;
        else ++rows;
    }
    std::string expect;
    for (const auto& col : diagnostics_columns(c.output.betas)) expect += (expect.empty() ? "" : ",") + col;
    CHECK(header == expect);
    CHECK(header.find("H1.5") != std::string::npos);
    CHECK(rows == s.rows);
    CHECK(rows >= 2);
    const auto meta = read_json(d / "metadata.json");
    CHECK(meta["run"]["steps"] == s.steps);
    CHECK(fs::exists(d / "snapshots" / "theta_000000.bin"));
}

TEST_CASE("command line: usage and errors") {
    CHECK(run_cli("") == 1);
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("exp no_such_experiment") == 1);
    CHECK(run_cli("norm --input /nonexistent.bin") == 1);
    const fs::path d = scratch_dir("badcfg");
    std::ofstream(d / "bad.toml") << "[construction]\nmystery = 1\n";
    CHECK(run_cli("run --config " + (d / "bad.toml").string()) == 1);
    std::ofstream(d / "empty.toml") << "";
    CHECK(run_cli("gen --config " + (d / "empty.toml").string()) == 1);
}

TEST_CASE("command line: gen, run and norm") {
    const fs::path d = scratch_dir("cli");
    std::ofstream(d / "cfg.toml") << kProductDoc;
    REQUIRE(run_cli("gen --config " + (d / "cfg.toml").string() + " --out " + (d / "gen").string()) == 0);
    const ScalarField th = read_snapshot(d / "gen" / "theta0.bin");
    CHECK(th.grid().n == 32);
    CHECK(parse_config(read_file(d / "gen" / "config.toml")) == parse_config(kProductDoc));
    CHECK(read_json(d / "gen" / "metadata.json")["datum"] == "product_mode");

    std::string out;
    REQUIRE(run_cli("norm --input " + (d / "gen" / "theta0.bin").string() + " --kind L2", &out) == 0);
    const auto j = nlohmann::json::parse(out);
    CHECK(j["value"].get<double>() == doctest::Approx(lp_norm(th, 2.0)).epsilon(1e-14));
    CHECK(j.contains("method"));
    REQUIRE(run_cli("norm --input " + (d / "gen" / "theta0.bin").string() + " --kind Hs_hom --beta 1", &out) == 0);
    CHECK(nlohmann::json::parse(out)["value"].get<double>() ==
          doctest::Approx(sobolev_norm(th, 1.0, true)).epsilon(1e-14));
    CHECK(run_cli("norm --input " + (d / "gen" / "theta0.bin").string() + " --kind Lp --p 0.5") == 1);

    REQUIRE(run_cli("run --config " + (d / "cfg.toml").string() + " --out " + (d / "run").string()) == 0);
    CHECK(fs::exists(d / "run" / "diagnostics.csv"));
    CHECK(fs::exists(d / "run" / "metadata.json"));
}

TEST_CASE("command line: report exit codes follow verdicts") {
    const fs::path d = scratch_dir("report");
    ExperimentReport a;
    a.name = "alpha";
    a.verdict = Verdict::Pass;
    write_report(a, d);
    CHECK(run_cli("report " + d.string()) == 0);
    ExperimentReport b;
    b.name = "beta";
    b.verdict = Verdict::Inconclusive;
    write_report(b, d);
    CHECK(run_cli("report " + d.string()) == 3);
    ExperimentReport c;
    c.name = "gamma";
    c.verdict = Verdict::Fail;
    write_report(c, d);
    std::string out;
    CHECK(run_cli("report " + d.string(), &out) == 2);
    CHECK(out.find("gamma: fail") != std::string::npos);
    CHECK(run_cli("report " + (d / "missing").string()) == 1);
}
