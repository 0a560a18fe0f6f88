// Acceptance run: one [PASS]/[FAIL] line per criterion, nonzero exit if any fails.
// SQGLAB_ACCEPT_OUT (default: acceptance_out) receives the experiment reports.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>

#include "sqglab/cli.hpp"
#include "sqglab/config.hpp"
#include "sqglab/experiments.hpp"
#include "sqglab/io.hpp"
#include "sqglab/norms.hpp"
#include "sqglab/solver.hpp"

using namespace sqglab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << x;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path out_dir() {
    const char* e = std::getenv("SQGLAB_ACCEPT_OUT");
    return (e && *e) ? fs::path(e) : fs::path("acceptance_out");
}

std::string failed_checks(const ExperimentReport& r) {
    std::string s;
    for (const auto& c : r.checks)
        if (!c.passed) s += (s.empty() ? "" : "; ") + c.name + ": " + c.detail;
    return s;
}

double sup_diff(const ScalarField& a, const ScalarField& b) {
    double e = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) e = std::max(e, std::abs(a[k] - b[k]));
    return e;
}

// 1. Riesz velocity of sin(q x1) sin(q x2).
Outcome riesz_identity() {
    const auto t0 = std::chrono::steady_clock::now();
    const Grid g(128);
    double worst = 0.0;
    for (int q : {4, 8, 16}) {
        const ScalarField th = ScalarField::sample(g, [q](double x, double y) { return std::sin(q * x) * std::sin(q * y); });
        const VectorField v = riesz_velocity(th);
        const double c = kRieszSign / std::sqrt(2.0);
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) {
                const double x = g.coord(i), y = g.coord(j);
                worst = std::max(worst, std::abs(v.x.at(i, j) + c * std::sin(q * x) * std::cos(q * y)));
                worst = std::max(worst, std::abs(v.y.at(i, j) - c * std::cos(q * x) * std::sin(q * y)));
            }
    }
    const double rt = seconds_since(t0);
    return {worst < 1e-10 && rt < 1.0, "max error " + fmt(worst) + " over q = 4, 8, 16 (n = 128), " + fmt(rt, 2) + " s"};
}

// 2. Product-mode stationarity.
Outcome stationarity() {
    StationarityOptions o;
    o.cutoff_run = false;
    const ExperimentReport r = exp_stationarity(o);
    write_report(r, out_dir());
    const bool ok = r.verdict == Verdict::Pass && r.runtime < 30.0;
    return {ok, "L2 drift " + fmt(r.scalar("l2_rel_drift")) + ", sup drift " + fmt(r.scalar("sup_drift")) +
                    ", " + fmt(r.runtime, 3) + " s" + (ok ? "" : "; " + failed_checks(r))};
}

// 3. Conservation on a random band-limited datum.
Outcome conservation() {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig c = parse_config("seed = 20240611\n[construction]\ndatum = \"random\"\nn = 128\nband = 8\n[solver]\nt_end = 1\n");
    const ScalarField th0 = build_datum(c);
    const SpectralField T0 = to_spectral(th0);
    const double l2_0 = sobolev_norm(T0, 0.0, false), hm_0 = sobolev_norm(T0, -0.5, true), mean_0 = th0.mean();
    const double mean_scale = std::max(std::abs(mean_0), l2_0 / th0.grid().L);
    double dl2 = 0.0, dhm = 0.0, dmean = 0.0, vmis = 0.0;
    const RunResult rr = run(T0, c.solver_config(), [&](double, const SpectralField& T, int) {
        const ScalarField th = to_physical(T);
        dl2 = std::max(dl2, std::abs(sobolev_norm(T, 0.0, false) / l2_0 - 1.0));
        dhm = std::max(dhm, std::abs(sobolev_norm(T, -0.5, true) / hm_0 - 1.0));
        dmean = std::max(dmean, std::abs(th.mean() - mean_0) / mean_scale);
        const VectorField v = riesz_velocity(T);
        const double vn = std::sqrt(std::pow(lp_norm(v.x, 2.0), 2) + std::pow(lp_norm(v.y, 2.0), 2));
        ScalarField fluct = th;
        const double m = th.mean();
        for (auto& x : fluct.values()) x -= m;
        vmis = std::max(vmis, std::abs(vn - lp_norm(fluct, 2.0)) / lp_norm(fluct, 2.0));
        return true;
    });
    const double rt = seconds_since(t0);
    const bool ok = !rr.halted && dl2 < 1e-5 && dhm < 1e-5 && dmean < 1e-5 && vmis < 1e-10 && rt < 60.0;
    return {ok, "relative drift L2 " + fmt(dl2) + ", H^-1/2 " + fmt(dhm) + ", mean " + fmt(dmean) +
                    "; | ||v|| - ||theta - mean|| | / ||theta - mean|| <= " + fmt(vmis) + " over " +
                    std::to_string(rr.steps + 1) + " snapshots, " + fmt(rt, 3) + " s" +
                    (rr.halted ? "; halted: " + rr.halt_reason : "")};
}

// 4. Transport by the prescribed saddle against the exact pushforward.
Outcome affine_transport() {
    const Grid g(256);
    const double w = 0.25, sigma = 1.0;
    auto f0 = [w](double x, double y) { return std::exp(-(x * x + y * y) / (w * w)); };
    const PrescribedResult r = run_prescribed(g, f0, AffineMotion::saddle(sigma), 1.0);
    const double g0 = gradient(ScalarField::sample(g, f0)).x.max_abs();
    const double g1 = gradient(r.numeric).x.max_abs();
    const double growth = g1 / g0, rel = std::abs(growth / std::exp(sigma) - 1.0);
    return {r.sup_error < 1e-5 && rel < 0.05,
            "sup error " + fmt(r.sup_error) + " (n = 256, t = 1); gradient growth " + fmt(growth, 6) + " vs e = " +
                fmt(std::exp(1.0), 6) + " (rel " + fmt(rel) + ")"};
}

// 5. Decay at the origin for P-fold symmetric data, and the 1-fold counterexample.
Outcome decay() {
    const ExperimentReport r = exp_decay(DecayOptions{});
    write_report(r, out_dir());
    std::string d;
    for (const auto& [name, f] : r.fits) d += name + " slope " + fmt(f.exponent) + " (r2 " + fmt(f.r2, 5) + "); ";
    d += "sharpness |v(0)|/||f||_inf " + fmt(r.scalar("sharp_v0") / r.scalar("sharp_f_sup"));
    return {r.verdict == Verdict::Pass, d + (r.verdict == Verdict::Pass ? "" : "; " + failed_checks(r))};
}

// 6. Cancellation scaling in N.
Outcome cancellation() {
    const Preset p = make_preset("small");
    CancellationOptions o;
    o.s = p.s;
    o.K = p.K;
    const ExperimentReport r = exp_cancellation(o);
    write_report(r, out_dir());
    const bool ok = r.verdict == Verdict::Pass && r.runtime < 300.0;
    std::string d;
    for (const auto& [name, f] : r.fits) d += name + " exponent " + fmt(f.exponent) + "; ";
    return {ok, d + "uncut window " + fmt(r.scalar("uncut_worst")) + ", " + fmt(r.runtime, 3) + " s" +
                    (ok ? "" : "; " + failed_checks(r))};
}

// Medium-preset inflation run shared by criteria 7 and 8.
const ExperimentReport& inflation_report() {
    static const ExperimentReport r = [] {
        InflationOptions o;
        o.preset = make_preset("medium");
        ExperimentReport rep = exp_saddle_and_inflation(o);
        write_report(rep, out_dir());
        return rep;
    }();
    return r;
}

// 7. Saddle strength: exact for the uncut mode, within 25% with the cutoff, diagonal throughout.
Outcome saddle_strength() {
    const ExperimentReport& r = inflation_report();
    const bool uncut = r.has_check("sigma_uncut") && r.check("sigma_uncut").passed;
    const bool cut = r.has_check("sigma_cutoff") && r.check("sigma_cutoff").passed;
    const double off = r.scalars.count("offdiag_ratio_max") ? r.scalar("offdiag_ratio_max") : 1.0;
    return {uncut && cut && off <= 0.05,
            "uncut rel err " + fmt(r.scalar("sigma_uncut_rel_err")) + " (< 1e-6), cutoff rel err " +
                fmt(r.scalar("sigma_cutoff_rel_err")) + " (< 0.25), max offdiag/diag " + fmt(off) +
                " (<= 0.05) over t <= " + fmt(r.scalar("window"))};
}

// 8. Norm inflation rates over three e-folding times with the oracle pairing.
Outcome norm_inflation() {
    const ExperimentReport& r = inflation_report();
    const bool ok = r.verdict == Verdict::Pass && r.runtime < 600.0;
    std::string d = "verdict " + verdict_name(r.verdict) + ", window " + fmt(r.scalar("efold_times")) + " e-folds";
    for (const char* b : {"1", "2"}) {
        const std::string k = std::string("psi_H") + b + "_rate_ratio";
        if (r.scalars.count(k)) d += ", H" + std::string(b) + " rate/(beta sigma) " + fmt(r.scalar(k));
    }
    for (const char* b : {"1", "2"}) {
        const std::string kn = std::string("oracle_H") + b + "_rate", ke = std::string("oracle_H") + b + "_exact_rate";
        if (r.scalars.count(kn))
            d += ", oracle H" + std::string(b) + " " + fmt(r.scalar(kn)) + " vs " + fmt(r.scalar(ke));
    }
    d += ", " + fmt(r.runtime, 4) + " s";
    if (!ok) d += "; " + failed_checks(r);
    for (const auto& n : r.notes) d += "; " + n;
    return {ok, d};
}

// 9. Double-integral seminorm against the Fourier norm; decomposition constant under refinement.
Outcome slobodeckij() {
    auto gaussian = [](const Grid& g, double w, double x0 = 0.0, double y0 = 0.0, double aniso = 1.0) {
        return ScalarField::sample(g, [=](double x, double y) {
            const double dx = (x - x0) * aniso, dy = (y - y0) / aniso;
            return std::exp(-(dx * dx + dy * dy) / (w * w));
        });
    };
    const Grid g(128);
    const std::vector<ScalarField> profiles = {
        gaussian(g, 0.35), gaussian(g, 0.5), gaussian(g, 0.4, 0.3, -0.2), gaussian(g, 0.3, 0.0, 0.0, 1.6),
        ScalarField::sample(g, [](double x, double y) {
            const double r2 = (x * x + y * y) / 0.36;
            return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0;
        })};
    const SsCalibration cal = ss_calibrate(0.5, g);
    double worst = 0.0;
    for (const auto& f : profiles) {
        const double calibrated = ss_norm(f, 0.5) / cal.measured_ratio;
        worst = std::max(worst, std::abs(calibrated / sobolev_norm(f, 0.5, true) - 1.0));
    }
    auto ratio_at = [](int n) {
        const Grid gr(n);
        auto ring = [&](double R, double phase) {
            return ScalarField::sample(gr, [=](double x, double y) {
                const double r = std::hypot(x, y);
                const double u = (r - 1.5 * R) / (0.45 * R);
                return u * u < 1.0 ? std::exp(-1.0 / (1.0 - u * u)) * std::cos(3 * std::atan2(y, x) + phase) : 0.0;
            });
        };
        const double R1 = gr.L / 8;
        return sum_decomposition_gap({ring(R1, 0.0), ring(R1 / 4, 0.3)}, {R1, R1 / 4}, 0.5, 0.5).ratio();
    };
    const double c1 = ratio_at(64), c2 = ratio_at(128);
    const double drift = std::abs(c2 / c1 - 1.0);
    return {worst < 0.03 && drift <= 0.5 && c1 > 0 && c2 > 0,
            "max |calibrated ss / Fourier - 1| " + fmt(worst) + " over 5 profiles (n = 128); gap/bound C = " + fmt(c1) +
                " (n = 64), " + fmt(c2) + " (n = 128), change " + fmt(drift)};
}

// 10. Weak coupling of two nested rings.
Outcome gluing() {
    GluingOptions o;
    o.preset = make_preset("medium");
    o.J = 2;
    o.ratio = 256.0;
    const ExperimentReport r = exp_gluing(o);
    write_report(r, out_dir());
    std::string d = "verdict " + verdict_name(r.verdict) + ", J resolvable " + fmt(r.scalar("J_resolvable")) + " of 2";
    if (r.has_check("coupling_J2")) d += ", " + r.check("coupling_J2").detail;
    if (r.has_check("approach_bound")) d += ", " + r.check("approach_bound").detail;
    for (const auto& n : r.notes) d += "; " + n;
    const bool ok = r.verdict == Verdict::Pass && r.has_check("coupling_J2") && r.check("coupling_J2").passed &&
                    r.check("approach_bound").passed;
    return {ok, d};
}

std::vector<std::vector<double>> read_csv_rows(const fs::path& p) {
    std::ifstream f(p);
    std::string line;
    std::vector<std::vector<double>> rows;
    bool header = true;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        rows.push_back(row);
    }
    return rows;
}

// 11. Fourth-order self-convergence and bitwise-stable reruns.
Outcome determinism() {
    const char* doc = "seed = 99\n[construction]\ndatum = \"random\"\nn = 64\nband = 4\n[solver]\nt_end = 0.5\n";
    RunConfig c = parse_config(doc);
    const SpectralField T0 = to_spectral(build_datum(c));
    std::vector<ScalarField> sols;
    for (double dt : {0.02, 0.01, 0.005}) {
        SolverConfig cfg = c.solver_config();
        cfg.dt = dt;
        sols.push_back(to_physical(run(T0, cfg).final_state));
    }
    const double e1 = sup_diff(sols[0], sols[1]), e2 = sup_diff(sols[1], sols[2]);
    const double ratio = e1 / e2;

    const fs::path d = out_dir() / "determinism";
    fs::remove_all(d);
    c.output.diagnostics_every = 1;
    std::ostringstream log;
    run_simulation(c, d / "a", log);
    run_simulation(c, d / "b", log);
    const auto A = read_csv_rows(d / "a" / "diagnostics.csv"), B = read_csv_rows(d / "b" / "diagnostics.csv");
    double worst = A.size() == B.size() && !A.empty() ? 0.0 : std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < std::min(A.size(), B.size()); ++i) {
        if (A[i].size() != B[i].size()) worst = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < std::min(A[i].size(), B[i].size()); ++j) {
            if (std::isnan(A[i][j]) && std::isnan(B[i][j])) continue;
            worst = std::max(worst, std::abs(A[i][j] - B[i][j]) / std::max(1.0, std::abs(A[i][j])));
        }
    }
    return {ratio >= 12.0 && ratio <= 20.0 && worst <= 1e-12,
            "dt-halving error ratio " + fmt(ratio) + " (errors " + fmt(e1) + ", " + fmt(e2) +
                "); rerun max relative CSV difference " + fmt(worst) + " over " + std::to_string(A.size()) + " rows"};
}

}  // namespace

int main() {
    fs::create_directories(out_dir());
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"riesz_product_identity", riesz_identity},
        {"stationary_mode", stationarity},
        {"conservation", conservation},
        {"affine_transport_oracle", affine_transport},
        {"decay_lemma", decay},
        {"cancellation_scaling", cancellation},
        {"saddle_strength", saddle_strength},
        {"norm_inflation", norm_inflation},
        {"slobodeckij_cross_validation", slobodeckij},
        {"gluing_weak_coupling", gluing},
        {"determinism_and_convergence", determinism},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << k + 1 << " " << criteria[k].first << ": " << o.detail
                  << std::endl;
    }
    std::cout << criteria.size() - failures << "/" << criteria.size() << " criteria passed" << std::endl;
    return failures ? 1 : 0;
}
