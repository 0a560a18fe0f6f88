#include "sqglab/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

#include "sqglab/construction.hpp"
#include "sqglab/experiments.hpp"
#include "sqglab/io.hpp"
#include "sqglab/norms.hpp"
#include "sqglab/solver.hpp"

namespace sqglab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string shortest(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string step_tag(int step) {
    std::ostringstream s;
    s << std::setw(6) << std::setfill('0') << step;
    return s.str();
}

// Guess for the hyperbolic point tracked in the diagnostics, if the datum has one.
std::optional<std::pair<Vec2, double>> saddle_guess(const RunConfig& c) {
    const ConstructionBlock& b = c.construction;
    const Grid g = c.grid();
    switch (b.datum) {
        case DatumKind::Background:
        case DatumKind::Perturbed: {
            const BackgroundParams bp = make_background_params(b.s, b.K, b.P, b.lambda, g);
            return std::make_pair(piece_center(bp, 0), bp.center() / 4);
        }
        case DatumKind::ProductMode: return std::make_pair(Vec2{}, 0.25 * g.L / b.q);
        default: return std::nullopt;
    }
}

RunConfig config_from_options(const std::string& config_path, const std::string& preset) {
    if (!config_path.empty()) return load_config(config_path);
    return config_from_preset(preset.empty() ? "small" : preset);
}

int worst_exit(const std::vector<ExperimentReport>& reports) {
    int code = 0;
    for (const auto& r : reports) {
        const int c = verdict_exit_code(r.verdict);
        if (c == 2) return 2;
        if (c == 3) code = 3;
    }
    return code;
}

void print_report_line(std::ostream& out, const ExperimentReport& r) {
    out << r.name << ": " << verdict_name(r.verdict) << " (" << std::fixed << std::setprecision(1) << r.runtime
        << " s)\n";
    out.unsetf(std::ios::floatfield);
    for (const auto& c : r.checks) out << "  [" << (c.passed ? "ok" : "FAILED") << "] " << c.name << ": " << c.detail << "\n";
    for (const auto& n : r.notes) out << "  note: " << n << "\n";
}

int cmd_gen(const std::string& config_path, const std::string& preset, const std::string& out_dir) {
    const RunConfig c = config_from_options(config_path, preset);
    const fs::path dir = out_dir.empty() ? fs::path(c.output.dir) : fs::path(out_dir);
    fs::create_directories(dir);
    const ScalarField th = build_datum(c);
    write_snapshot(th, dir / "theta0.bin", 0.0, "theta");
    json meta = resolved_metadata(c);
    meta["config"] = serialize_config(c);
    meta["seed"] = c.seed;
    meta["theta0_sup"] = th.max_abs();
    write_json(dir / "metadata.json", meta);
    std::ofstream(dir / "config.toml") << serialize_config(c);
    std::cout << "wrote " << (dir / "theta0.bin").string() << " (n = " << c.construction.n << ", "
              << datum_name(c.construction.datum) << ")\n";
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& preset, const std::string& out_dir) {
    RunConfig c = config_from_options(config_path, preset);
    if (!out_dir.empty()) c.output.dir = out_dir;
    const RunSummary s = run_simulation(c, c.output.dir, std::cout);
    if (s.halted) {
        std::cerr << "run halted: " << s.halt_reason << "\n";
        return 1;
    }
    return 0;
}

int cmd_norm(const std::string& input, const std::string& kind, double beta, double p, int k, double alpha,
             std::optional<double> rmin, std::optional<double> rmax) {
    NormRequest req;
    req.kind = parse_norm_kind(kind);
    req.beta = beta;
    req.p = p;
    req.k = k;
    req.alpha = alpha;
    if (rmin || rmax) req.annulus = std::make_pair(rmin.value_or(0.0), rmax.value_or(std::numeric_limits<double>::infinity()));
    req.validate();
    const ScalarField f = read_snapshot(input);
    const NormValue v = evaluate_norm(f, req);
    json j{{"kind", norm_kind_name(req.kind)}, {"value", v.value}, {"method", v.method}};
    if (v.error_bar) j["error_bar"] = *v.error_bar;
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_exp(const std::string& name, const std::string& preset, const std::string& out_dir, int threads) {
    const Preset p = make_preset(preset);
    std::vector<std::string> names;
    if (name == "all") {
        names = experiment_names();
    } else {
        bool known = false;
        for (const auto& n : experiment_names()) known |= n == name;
        if (!known) throw std::invalid_argument("unknown experiment '" + name + "'");
        names = {name};
    }
    std::vector<std::function<ExperimentReport()>> jobs;
    for (const auto& n : names) jobs.emplace_back([n, p] { return run_experiment(n, p); });
    const auto reports = run_sweep(jobs, threads);
    for (const auto& r : reports) {
        write_report(r, out_dir);
        print_report_line(std::cout, r);
    }
    return worst_exit(reports);
}

int cmd_report(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    int code = 0, count = 0;
    for (const auto& f : files) {
        json j;
        try {
            j = read_json(f);
        } catch (const std::exception&) {
            continue;
        }
        if (!j.is_object() || !j.contains("verdict") || !j.contains("name")) continue;
        ++count;
        const Verdict v = parse_verdict(j["verdict"].get<std::string>());
        std::cout << j["name"].get<std::string>() << ": " << verdict_name(v);
        if (j.contains("runtime")) std::cout << " (" << std::fixed << std::setprecision(1) << j["runtime"].get<double>() << " s)";
        std::cout.unsetf(std::ios::floatfield);
        std::cout << "\n";
        if (j.contains("checks"))
            for (const auto& c : j["checks"])
                std::cout << "  [" << (c.value("passed", false) ? "ok" : "FAILED") << "] " << c.value("name", "")
                          << ": " << c.value("detail", "") << "\n";
        const int ec = verdict_exit_code(v);
        if (ec == 2) code = 2;
        else if (ec == 3 && code == 0) code = 3;
    }
    if (count == 0) throw std::runtime_error("no experiment reports in " + dir);
    return code;
}

}  // namespace

std::vector<std::string> diagnostics_columns(const std::vector<double>& betas) {
    std::vector<std::string> cols{"t", "L2", "Linf", "Hm12"};
    for (double b : betas) cols.push_back("H" + shortest(b));
    for (const char* c : {"saddle_d", "saddle_offdiag", "supp_rmin", "supp_rmax", "cfl"}) cols.emplace_back(c);
    return cols;
}

RunSummary run_simulation(const RunConfig& c, const fs::path& dir, std::ostream& log) {
    validate_config(c);
    fs::create_directories(dir / "snapshots");
    const Grid g = c.grid();
    const ScalarField th0 = build_datum(c);
    const SpectralField T0 = to_spectral(th0);
    const SolverConfig cfg = c.solver_config();
    const double dt = [&] {
        const double d0 = choose_dt(T0, cfg);
        return cfg.t_end / std::max(1, static_cast<int>(std::ceil(cfg.t_end / d0 - 1e-9)));
    }();

    const auto guess = saddle_guess(c);
    std::optional<SaddleTracker> tracker;
    if (guess) tracker.emplace(guess->first, guess->second);

    const auto cols = diagnostics_columns(c.output.betas);
    std::ofstream csv(dir / "diagnostics.csv");
    if (!csv) throw std::runtime_error("cannot write " + (dir / "diagnostics.csv").string());
    csv << "# sqglab run diagnostics; norms on the periodic box of side " << shortest(g.L) << ", n = " << g.n << "\n";
    csv << "# Hm12 and H<beta> are homogeneous Fourier Sobolev norms; saddle_* NaN when no saddle is tracked\n";
    for (std::size_t k = 0; k < cols.size(); ++k) csv << (k ? "," : "") << cols[k];
    csv << "\n";
    csv << std::setprecision(17);

    RunSummary s;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto snapshot = [&](double t, const SpectralField& T, int step) {
        const std::string tag = step_tag(step);
        write_snapshot(to_physical(T), dir / "snapshots" / ("theta_" + tag + ".bin"), t, "theta");
        if (c.output.spectral_snapshots)
            write_spectral_snapshot(T, dir / "snapshots" / ("theta_hat_" + tag + ".bin"), t, "theta_hat");
    };
    auto diagnose = [&](double t, const SpectralField& T) {
        const ScalarField th = to_physical(T);
        std::vector<double> row{t, sobolev_norm(T, 0.0, false), th.max_abs(), sobolev_norm(T, -0.5, true)};
        for (double b : c.output.betas) row.push_back(sobolev_norm(T, b, true));
        double d = nan, off = nan;
        if (tracker && tracker->update(t, T)) {
            const Mat2& G = tracker->gradients().back();
            d = 0.5 * (std::abs(G.a11) + std::abs(G.a22));
            off = std::max(std::abs(G.a12), std::abs(G.a21)) / d;
        }
        row.push_back(d);
        row.push_back(off);
        const auto [rmin, rmax] = support_radii(th, kSupportTol);
        row.push_back(rmin);
        row.push_back(rmax);
        row.push_back(max_velocity(T) * dt / g.dx());
        for (std::size_t k = 0; k < row.size(); ++k) csv << (k ? "," : "") << row[k];
        csv << "\n";
        ++s.rows;
    };

    int last_diag = -1, last_snap = -1;
    const Observer obs = [&](double t, const SpectralField& T, int step) {
        const int de = std::max(1, c.output.diagnostics_every);
        if (step % de == 0) {
            diagnose(t, T);
            last_diag = step;
        }
        if (step == 0 || (c.output.snapshot_every > 0 && step % c.output.snapshot_every == 0)) {
            snapshot(t, T, step);
            last_snap = step;
        }
        return true;
    };
    SolverConfig rcfg = cfg;
    rcfg.dt = dt;
    RunResult r = run(T0, rcfg, obs);
    if (last_diag != r.steps) diagnose(r.t, r.final_state);
    if (last_snap != r.steps) snapshot(r.t, r.final_state, r.steps);

    s.halted = r.halted;
    s.halt_reason = r.halt_reason;
    s.t = r.t;
    s.dt = r.dt;
    s.steps = r.steps;
    s.final_state = std::move(r.final_state);

    json meta = resolved_metadata(c);
    meta["config"] = serialize_config(c);
    meta["seed"] = c.seed;
    meta["run"] = json{{"dt", s.dt},
                       {"steps", s.steps},
                       {"t_final", s.t},
                       {"halted", s.halted},
                       {"halt_reason", s.halt_reason},
                       {"filtered", r.filtered},
                       {"max_cfl", r.max_cfl},
                       {"diagnostic_rows", s.rows}};
    write_json(dir / "metadata.json", meta);
    log << "run: " << s.steps << " steps of dt = " << shortest(s.dt) << " to t = " << shortest(s.t)
        << (s.halted ? " (halted)" : "") << "; output in " << dir.string() << "\n";
    return s;
}

int main_cli(int argc, const char* const* argv) {
    CLI::App app{"Cutoff product-mode SQG data, norms, solver and experiments", "sqglab"};
    app.set_help_all_flag("--help-all", "Expand all help");

    std::string config_path, preset, out_dir;

    auto* gen = app.add_subcommand("gen", "Build the configured initial datum and write theta0.bin with metadata");
    gen->add_option("--config", config_path, "Configuration file");
    gen->add_option("--preset", preset, "Named parameter set (small, medium)");
    gen->add_option("--out", out_dir, "Output directory (default: output.dir)");

    auto* runc = app.add_subcommand("run", "Evolve the configured datum and write diagnostics and snapshots");
    runc->add_option("--config", config_path, "Configuration file");
    runc->add_option("--preset", preset, "Named parameter set (small, medium)");
    runc->add_option("--out", out_dir, "Output directory (default: output.dir)");

    std::string input, kind = "L2";
    double beta = 0.0, p = 2.0, alpha = 0.0;
    int k = 0;
    std::optional<double> rmin, rmax;
    auto* norm = app.add_subcommand("norm", "Evaluate a norm of a snapshot and print JSON");
    norm->add_option("--input", input, "Snapshot file")->required();
    norm->add_option("--kind", kind, "L2, Lp, Linf, Hs_inhom, Hs_hom, SS_hom, Ck, Ck_alpha");
    norm->add_option("--beta", beta, "Sobolev index");
    norm->add_option("--p", p, "Lp exponent");
    norm->add_option("--k", k, "Derivative order");
    norm->add_option("--alpha", alpha, "Hoelder exponent");
    norm->add_option("--rmin", rmin, "Inner annulus radius");
    norm->add_option("--rmax", rmax, "Outer annulus radius");

    std::string exp_name, exp_preset = "small", exp_out = "results";
    int threads = 0;
    auto* exp = app.add_subcommand("exp", "Run an experiment (or all) and write its report");
    exp->add_option("name", exp_name, "Experiment name or 'all'")->required();
    exp->add_option("--preset", exp_preset, "Named parameter set (small, medium)");
    exp->add_option("--out", exp_out, "Report directory");
    exp->add_option("--threads", threads, "Worker threads (default SQGLAB_THREADS or 1)");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Summarise the experiment reports in a directory");
    report->add_option("dir", report_dir, "Report directory")->required();

    if (argc <= 1) {
        std::cerr << app.help();
        return 1;
    }
    try {
        app.require_subcommand(1);
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*gen || *runc) {
            if (!config_path.empty() && !preset.empty()) throw std::invalid_argument("--config and --preset are exclusive");
            if (config_path.empty() && preset.empty()) throw std::invalid_argument("one of --config or --preset is required");
            return *gen ? cmd_gen(config_path, preset, out_dir) : cmd_run(config_path, preset, out_dir);
        }
        if (*norm) return cmd_norm(input, kind, beta, p, k, alpha, rmin, rmax);
        if (*exp) return cmd_exp(exp_name, exp_preset, exp_out, threads);
        if (*report) return cmd_report(report_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace sqglab
