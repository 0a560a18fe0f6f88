#include "sqglab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sqglab/norms.hpp"

namespace sqglab {

using nlohmann::json;

// ---- report plumbing -----------------------------------------------------

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::Inconclusive: return "inconclusive";
        case Verdict::Informational: return "informational";
    }
    return "?";
}

Verdict parse_verdict(const std::string& s) {
    for (Verdict v : {Verdict::Pass, Verdict::Fail, Verdict::Inconclusive, Verdict::Informational})
        if (verdict_name(v) == s) return v;
    throw std::invalid_argument("unknown verdict '" + s + "'");
}

int verdict_exit_code(Verdict v) {
    switch (v) {
        case Verdict::Pass:
        case Verdict::Informational: return 0;
        case Verdict::Fail: return 2;
        case Verdict::Inconclusive: return 3;
    }
    return 1;
}

void Series::add(std::vector<double> row) {
    if (row.size() != columns.size())
        throw std::invalid_argument("series '" + name + "': row has " + std::to_string(row.size()) + " values, expected " +
                                    std::to_string(columns.size()));
    rows.push_back(std::move(row));
}

std::vector<double> Series::column(const std::string& col) const {
    const auto it = std::find(columns.begin(), columns.end(), col);
    if (it == columns.end()) throw std::out_of_range("series '" + name + "' has no column '" + col + "'");
    const std::size_t k = it - columns.begin();
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[k]);
    return out;
}

const Series& ExperimentReport::get_series(const std::string& s) const {
    for (const auto& x : series)
        if (x.name == s) return x;
    throw std::out_of_range(name + ": no series '" + s + "'");
}

double ExperimentReport::scalar(const std::string& key) const {
    const auto it = scalars.find(key);
    if (it == scalars.end()) throw std::out_of_range(name + ": no scalar '" + key + "'");
    return it->second;
}

const Check& ExperimentReport::check(const std::string& key) const {
    for (const auto& c : checks)
        if (c.name == key) return c;
    throw std::out_of_range(name + ": no check '" + key + "'");
}

bool ExperimentReport::has_check(const std::string& key) const {
    return std::any_of(checks.begin(), checks.end(), [&](const Check& c) { return c.name == key; });
}

namespace {

// JSON has no inf/nan; keep them readable instead of null.
json num(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

}  // namespace

json fit_to_json(const FitResult& f) {
    return json{{"kind", f.kind},
                {"exponent", num(f.exponent)},
                {"intercept", num(f.intercept)},
                {"r2", num(f.r2)},
                {"window", {num(f.window.first), num(f.window.second)}},
                {"samples", f.samples},
                {"inconclusive", f.inconclusive},
                {"note", f.note}};
}

json ExperimentReport::to_json() const {
    json j;
    j["name"] = name;
    j["verdict"] = verdict_name(verdict);
    j["runtime_s"] = runtime;
    j["params"] = params;
    json sc = json::object();
    for (const auto& [k, v] : scalars) sc[k] = num(v);
    j["scalars"] = sc;
    json fs = json::object();
    for (const auto& [k, f] : fits) fs[k] = fit_to_json(f);
    j["fits"] = fs;
    json cs = json::array();
    for (const auto& c : checks) cs.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    j["checks"] = cs;
    j["notes"] = notes;
    json ss = json::array();
    for (const auto& s : series) ss.push_back({{"name", s.name}, {"columns", s.columns}, {"rows", s.rows.size()}});
    j["series"] = ss;
    return j;
}

void write_report(const ExperimentReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / (r.name + ".json"));
        if (!f) throw std::runtime_error("cannot write " + (dir / (r.name + ".json")).string());
        f << r.to_json().dump(2) << "\n";
    }
    for (const auto& s : r.series) {
        const std::string stem = r.name + "_" + s.name;
        std::ofstream csv(dir / (stem + ".csv"));
        std::ofstream dat(dir / (stem + ".dat"));
        if (!csv || !dat) throw std::runtime_error("cannot write series files in " + dir.string());
        csv << "# experiment: " << r.name << "\n# series: " << s.name
            << "\n# times in simulation units; norms in the L2 normalisation of the torus\n";
        dat << "# " << r.name << " " << s.name << "\n#";
        for (std::size_t k = 0; k < s.columns.size(); ++k) {
            csv << (k ? "," : "") << s.columns[k];
            dat << " " << s.columns[k];
        }
        csv << "\n";
        dat << "\n";
        csv << std::setprecision(17);
        dat << std::setprecision(17);
        for (const auto& row : s.rows) {
            for (std::size_t k = 0; k < row.size(); ++k) {
                csv << (k ? "," : "") << row[k];
                dat << (k ? " " : "") << row[k];
            }
            csv << "\n";
            dat << "\n";
        }
    }
}

// ---- presets ---------------------------------------------------------------

json Preset::to_json() const {
    return json{{"preset", name}, {"s", s},       {"K", K},         {"P", P},
                {"lambda", lambda}, {"n", n},     {"L", L},         {"B", B},
                {"eta", eta},     {"gamma", gamma}, {"epsilon", epsilon}, {"lambda_tilde", lambda_t},
                {"N_tilde", N_t}, {"t_end", t_end}, {"cutoff", cutoff}};
}

Preset make_preset(const std::string& name) {
    Preset p;
    p.name = name;
    if (name == "small") {
        p.s = 1.75;
        p.K = 1.0;
        p.P = 4;
        p.lambda = 32.0;
        p.n = 512;
        p.B = 1.5;
        p.eta = 0.01;
        p.gamma = 0.01;
        p.epsilon = 0.1;
        p.lambda_t = 64.0;
        p.N_t = 2.0;
        p.t_end = 1.0;
        p.inflation_resolvable = false;
    } else if (name == "medium") {
        p.s = 1.6;
        p.K = 1.0;
        p.P = 6;
        p.lambda = 8.0;
        p.n = 2048;
        p.B = 1.5;
        p.eta = 0.02;
        p.gamma = 0.05;
        p.epsilon = 0.5;
        p.lambda_t = 30.0;
        p.N_t = 5.0;
        p.t_end = 4.2;
        p.inflation_resolvable = true;
    } else {
        throw std::invalid_argument("unknown preset '" + name + "' (expected small or medium)");
    }
    return p;
}

std::vector<std::string> preset_names() { return {"small", "medium"}; }

// ---- shared helpers --------------------------------------------------------

namespace {

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(double x, int prec = 4) {
    std::ostringstream o;
    o << std::setprecision(prec) << x;
    return o.str();
}

double l2_norm(const SpectralField& F) { return sobolev_norm(F, 0.0, false); }

double sup_diff(const ScalarField& a, const ScalarField& b) {
    double e = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) e = std::max(e, std::abs(a[k] - b[k]));
    return e;
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] < v[k - 1])) return false;
    return true;
}

void add_check(ExperimentReport& r, std::string name, bool ok, std::string detail) {
    r.checks.push_back({std::move(name), ok, std::move(detail)});
}

bool all_passed(const ExperimentReport& r) {
    return std::all_of(r.checks.begin(), r.checks.end(), [](const Check& c) { return c.passed; });
}

BackgroundParams preset_background(const Preset& p, const Grid& g) {
    return make_background_params(p.s, p.K, p.P, p.lambda, g);
}

void record_background(ExperimentReport& r, const BackgroundParams& bp) {
    r.scalars["N"] = bp.N;
    r.scalars["lambda"] = bp.lambda;
    r.scalars["k_lattice"] = bp.k_lattice;
    r.scalars["amplitude"] = bp.amplitude();
    r.scalars["sigma_predicted"] = std::log(bp.N) / std::sqrt(2.0);
}

// A * sin(k(x1 - z1)) sin(k(x2 - z2)): the uncut background piece translated
// to z. Exactly periodic because k is a lattice wavenumber.
ScalarField translated_product_mode(const Grid& g, double A, double k, const Vec2& z) {
    return ScalarField::sample(g, [=](double x, double y) { return A * std::sin(k * (x - z.x)) * std::sin(k * (y - z.y)); });
}


// Weak-coupling runs resolve their window with at least this many steps even
// when the CFL bound alone would allow fewer.
constexpr int kMinSteps = 20;

double diag_strength(const Mat2& G) { return 0.5 * (std::abs(G.a11) + std::abs(G.a22)); }
double offdiag_strength(const Mat2& G) { return std::max(std::abs(G.a12), std::abs(G.a21)); }

}  // namespace

std::pair<double, double> support_radii(const ScalarField& f, double tol) {
    const Grid& g = f.grid();
    const double thr = tol * f.max_abs();
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            if (std::abs(f.at(i, j)) <= thr) continue;
            const double r = std::hypot(g.coord(i), g.coord(j));
            rmin = std::min(rmin, r);
            rmax = std::max(rmax, r);
        }
    if (rmax == 0.0 && !std::isfinite(rmin)) rmin = 0.0;
    return {rmin, rmax};
}

double spectral_tail_fraction(const SpectralField& F) {
    const Grid& g = F.grid();
    const int lo = g.n / 4, hi = g.n / 3;
    double tail = 0.0, total = 0.0;
    for (int i = 0; i < g.n; ++i) {
        const int k1 = std::abs(g.wavenumber(i));
        for (int j = 0; j < g.nc(); ++j) {
            const double w = (j == 0 || j == g.n / 2) ? 1.0 : 2.0;
            const double e = w * std::norm(F.at(i, j));
            total += e;
            const int km = std::max(k1, j);
            if (km > lo && km <= hi) tail += e;
        }
    }
    return total > 0.0 ? tail / total : 0.0;
}

// ---- stationarity ----------------------------------------------------------

ExperimentReport exp_stationarity(const StationarityOptions& o) {
    Stopwatch sw;
    ExperimentReport r;
    r.name = "stationarity";
    r.params = {{"n", o.n}, {"q", o.q}, {"t_end", o.t_end}, {"cutoff_run", o.cutoff_run},
                {"cutoff_t_end", o.cutoff_t_end}, {"preset", o.preset.to_json()}};

    const Grid g(o.n);
    const int q = o.q;
    const ScalarField th0 = q == 0 ? ScalarField(g, 1.0)
                                   : ScalarField::sample(g, [q](double x, double y) { return std::sin(q * x) * std::sin(q * y); });
    const SpectralField T0 = to_spectral(th0);
    const double l2_0 = l2_norm(T0);
    Series ts{"product_mode", {"t", "l2_rel_drift", "sup_drift"}, {}};
    double max_l2 = 0.0, max_sup = 0.0;
    SolverConfig cfg;
    cfg.t_end = o.t_end;
    const RunResult rr = run(T0, cfg, [&](double t, const SpectralField& T, int) {
        SpectralField D = T;
        D -= T0;
        const double l2 = l2_norm(D) / (l2_0 > 0 ? l2_0 : 1.0);
        const double sup = sup_diff(to_physical(T), th0);
        max_l2 = std::max(max_l2, l2);
        max_sup = std::max(max_sup, sup);
        ts.add({t, l2, sup});
        return true;
    });
    r.series.push_back(ts);
    r.scalars["l2_rel_drift"] = max_l2;
    r.scalars["sup_drift"] = max_sup;
    r.scalars["steps"] = rr.steps;
    add_check(r, "run_completed", !rr.halted, rr.halted ? rr.halt_reason : "reached t_end");
    add_check(r, "l2_drift", max_l2 < 1e-8, "max relative L2 change " + fmt(max_l2) + " (threshold 1e-8)");
    add_check(r, "sup_drift", max_sup < 1e-7, "max sup change " + fmt(max_sup) + " (threshold 1e-7)");

    if (o.cutoff_run) {
        // Cut-off background: the transport term no longer vanishes. The drift
        // is compared with the shape lambda^{-1} N^{-2} (log N)^2 t.
        const Preset& p = o.preset;
        const Grid gp(p.n, p.L);
        const BackgroundParams bp = preset_background(p, gp);
        record_background(r, bp);
        const ScalarField phi0 = make_background(bp, CutoffSpec::parse(p.cutoff), gp);
        const double sup0 = phi0.max_abs();
        Series cs{"cutoff_drift", {"t", "sup_drift_rel"}, {}};
        SolverConfig c2;
        c2.t_end = o.cutoff_t_end;
        const SpectralField P0 = to_spectral(phi0);
        // Enough samples for the drift fit even when the CFL step is long.
        c2.dt = std::min(choose_dt(P0, c2), o.cutoff_t_end / 20);
        const RunResult cr = run(P0, c2, [&](double t, const SpectralField& T, int) {
            cs.add({t, sup_diff(to_physical(T), phi0) / sup0});
            return true;
        });
        r.series.push_back(cs);
        const double shape = std::pow(std::log(bp.N), 2) / (bp.lambda * bp.N * bp.N);
        r.scalars["cutoff_shape_scale"] = shape;
        const auto t = cs.column("t");
        const auto d = cs.column("sup_drift_rel");
        r.fits["cutoff_drift_vs_t"] = fit_loglog(t, d, 1e-300);
        r.scalars["cutoff_drift_final"] = d.back();
        r.scalars["cutoff_drift_over_shape"] = d.back() * sup0 / (shape * bp.amplitude() * t.back());
        if (cr.halted) r.notes.push_back("cut-off run halted: " + cr.halt_reason);
        r.notes.push_back("cut-off drift fit is informational");
    }
    r.verdict = all_passed(r) ? Verdict::Pass : Verdict::Fail;
    r.runtime = sw.seconds();
    return r;
}

// ---- decay near the origin ------------------------------------------------

namespace {

struct RadialProfile {
    std::vector<double> r, f, v;
};

// Largest |f| and |v| over log-spaced radial bins in [r0, r1].
RadialProfile radial_sup(const ScalarField& f, const VectorField& v, double r0, double r1, int bins) {
    const Grid& g = f.grid();
    RadialProfile p;
    std::vector<double> hf(bins, 0.0), hv(bins, 0.0);
    const double lr = std::log(r1 / r0);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double r = std::hypot(g.coord(i), g.coord(j));
            if (r < r0 || r > r1) continue;
            const int b = std::min(bins - 1, static_cast<int>(bins * std::log(r / r0) / lr));
            hf[b] = std::max(hf[b], std::abs(f.at(i, j)));
            hv[b] = std::max(hv[b], std::hypot(v.x.at(i, j), v.y.at(i, j)));
        }
    for (int b = 0; b < bins; ++b) {
        if (hv[b] == 0.0) continue;  // empty bin
        p.r.push_back(r0 * std::exp(lr * (b + 0.5) / bins));
        p.f.push_back(hf[b]);
        p.v.push_back(hv[b]);
    }
    return p;
}

}  // namespace

ExperimentReport exp_decay(const DecayOptions& o) {
    Stopwatch sw;
    ExperimentReport r;
    r.name = "decay";
    r.params = {{"P", o.P}, {"n", o.n}, {"L", o.L}, {"R0", o.R0}, {"sharp_n", o.sharp_n}};
    const Grid g(o.n, o.L);
    const double r0 = 4 * g.dx(), r1 = o.R0 / 4;
    r.scalars["fit_rmin"] = r0;
    r.scalars["fit_rmax"] = r1;
    const bool range_ok = r1 / r0 >= 10.0;
    if (!range_ok) r.notes.push_back("radial fit range " + fmt(r1 / r0) + " is below one decade");

    const double R0 = o.R0;
    for (int P : o.P) {
        // Two P-fold data with zero mean on circles about 0: one concentrated
        // near the origin, one concentrated on an annulus around R0.
        struct Datum {
            std::string tag;
            std::function<double(double, double)> f;
            double f_min_slope;
        };
        const std::vector<Datum> data{
            {"core", [=](double x, double y) {
                 const std::complex<double> w(x / R0, y / R0);
                 return std::real(std::pow(w, P)) * std::exp(-std::norm(w));
             }, P - 0.3},
            {"annulus", [=](double x, double y) {
                 const std::complex<double> w(x / R0, y / R0);
                 const double q = std::norm(w);
                 return std::real(std::pow(w, P)) * std::pow(q, 4) * std::exp(4.0 - 4.0 * q);
             }, P - 0.3}};
        for (const auto& d : data) {
            const ScalarField f = ScalarField::sample(g, d.f);
            const VectorField v = riesz_velocity(f);
            const RadialProfile prof = radial_sup(f, v, r0, r1, 24);
            const std::string key = "P" + std::to_string(P) + "_" + d.tag;
            Series s{key, {"r", "sup_f", "sup_v"}, {}};
            for (std::size_t k = 0; k < prof.r.size(); ++k) s.add({prof.r[k], prof.f[k], prof.v[k]});
            r.series.push_back(s);
            const FitResult ff = fit_loglog(prof.r, prof.f);
            const FitResult fv = fit_loglog(prof.r, prof.v);
            r.fits[key + "_f"] = ff;
            r.fits[key + "_v"] = fv;
            const bool ok = !fv.inconclusive && fv.r2 >= 0.95 && fv.exponent >= P - 1 - 0.3 && ff.exponent >= d.f_min_slope;
            add_check(r, key, ok,
                      "slope(v) = " + fmt(fv.exponent) + " (need >= " + fmt(P - 1.3) + ", r2 " + fmt(fv.r2, 5) +
                          "), slope(f) = " + fmt(ff.exponent) + " (need >= " + fmt(d.f_min_slope) + ")");
            r.scalars[key + "_v_at_origin"] = std::hypot(v.x.at(g.n / 2, g.n / 2), v.y.at(g.n / 2, g.n / 2));
        }
    }

    // Sharpness: one-fold datum, velocity does not vanish at the origin.
    {
        const Grid gs(o.sharp_n);
        const ScalarField f = ScalarField::sample(gs, [](double x, double y) { return std::exp(-(x * x + y * y)) * y; });
        const VectorField v = riesz_velocity(f);
        const double v0 = std::hypot(v.x.at(gs.n / 2, gs.n / 2), v.y.at(gs.n / 2, gs.n / 2));
        r.scalars["sharp_v0"] = v0;
        r.scalars["sharp_f_sup"] = f.max_abs();
        add_check(r, "sharpness", v0 > 0.1 * f.max_abs(),
                  "|v(0)| = " + fmt(v0) + " vs 0.1*sup|f| = " + fmt(0.1 * f.max_abs()));
    }
    if (!range_ok)
        r.verdict = Verdict::Inconclusive;
    else
        r.verdict = all_passed(r) ? Verdict::Pass : Verdict::Fail;
    r.runtime = sw.seconds();
    return r;
}

// ---- cancellation ------------------------------------------------------------

namespace {

struct CancellationPoint {
    double nl = 0.0, pseudo = 0.0, resid = 0.0, tail = 0.0;
};

// Single piece in scaled units: h = g(|y|) sin(N y1) sin(N y2) on the 2*pi torus.
CancellationPoint cancellation_point(int N, const Grid& g, const CutoffSpec& cut) {
    const ScalarField mode = ScalarField::sample(g, [N](double x, double y) { return std::sin(N * x) * std::sin(N * y); });
    const ScalarField gr = ScalarField::sample(g, [&](double x, double y) { return cut(std::hypot(x, y)); });
    ScalarField h(g);
    for (std::size_t k = 0; k < h.size(); ++k) h[k] = gr[k] * mode[k];
    const SpectralField H = to_spectral(h);
    const VectorField v = riesz_velocity(H);
    const VectorField u0 = riesz_velocity(mode);
    const VectorField dh = gradient(H);
    CancellationPoint c;
    double vb_sup = 0.0, res_sup = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        const double vb1 = gr[k] * u0.x[k], vb2 = gr[k] * u0.y[k];
        c.nl = std::max(c.nl, std::abs(v.x[k] * dh.x[k] + v.y[k] * dh.y[k]));
        c.pseudo = std::max(c.pseudo, std::abs(vb1 * dh.x[k] + vb2 * dh.y[k]));
        res_sup = std::max(res_sup, std::hypot(v.x[k] - vb1, v.y[k] - vb2));
        vb_sup = std::max(vb_sup, std::hypot(vb1, vb2));
    }
    c.resid = vb_sup > 0 ? res_sup / vb_sup : 0.0;
    c.tail = spectral_tail_fraction(H);
    return c;
}

// lambda from the scale relation at given N: lambda^{2-s} = K log N N^{s-1}.
double lambda_from_N(double s, double K, double N) { return std::pow(K * std::log(N) * std::pow(N, s - 1), 1.0 / (2 - s)); }

}  // namespace

ExperimentReport exp_cancellation(const CancellationOptions& o) {
    Stopwatch sw;
    ExperimentReport r;
    r.name = "cancellation";
    r.params = {{"s", o.s}, {"K", o.K}, {"N", o.N}, {"points_per_N", o.points_per_N}, {"n_min", o.n_min}, {"n_max", o.n_max}};
    const CutoffSpec bump;
    Series s{"sweep", {"N", "n", "lambda", "nl_scaled", "pseudo_scaled", "resid_ratio", "nl_paper", "nl_compensated", "tail"}, {}};
    std::vector<double> Ns, paper, comp, resid;
    bool resolved = true;
    for (int N : o.N) {
        const int n = std::clamp(o.points_per_N * N, o.n_min, o.n_max);
        const Grid g(n);
        const CancellationPoint c = cancellation_point(N, g, bump);
        const double lam = lambda_from_N(o.s, o.K, N);
        // v[w].grad w for w(x) = A h(lambda x) is A^2 lambda (v[h].grad h)(lambda x).
        const double A = std::pow(lam, 1 - o.s) * std::pow(N, -o.s) / o.K;
        const double nl_paper = A * A * lam * c.nl;
        // Remove the fixed-lambda prefactor lambda^{-1} (log N)^2 / K^2; the rest is N^{-2} * nl.
        const double nl_comp = c.nl / (double(N) * N * o.K * o.K);
        s.add({double(N), double(n), lam, c.nl, c.pseudo, c.resid, nl_paper, nl_comp, c.tail});
        Ns.push_back(N);
        paper.push_back(nl_paper);
        comp.push_back(nl_comp);
        resid.push_back(c.resid);
        if (c.tail > 1e-8) {
            resolved = false;
            r.notes.push_back("N = " + std::to_string(N) + " underresolved at n = " + std::to_string(n) +
                              " (tail fraction " + fmt(c.tail) + ")");
        }
    }
    r.series.push_back(s);
    r.fits["nl_paper_vs_N"] = fit_loglog(Ns, paper);
    r.fits["nl_compensated_vs_N"] = fit_loglog(Ns, comp);
    r.fits["resid_ratio_vs_N"] = fit_loglog(Ns, resid);
    const FitResult& fp = r.fits["nl_paper_vs_N"];
    const FitResult& fc = r.fits["nl_compensated_vs_N"];
    const FitResult& fr = r.fits["resid_ratio_vs_N"];
    add_check(r, "nl_paper_exponent", fp.exponent <= -1.5 && fp.r2 >= 0.95,
              "exponent " + fmt(fp.exponent) + ", r2 " + fmt(fp.r2, 5) + " (need <= -1.5, r2 >= 0.95)");
    add_check(r, "nl_compensated_exponent", fc.exponent <= -1.5 && fc.r2 >= 0.95,
              "exponent " + fmt(fc.exponent) + ", r2 " + fmt(fc.r2, 5) + " (need <= -1.5, r2 >= 0.95)");
    add_check(r, "resid_exponent", fr.exponent <= -0.5,
              "exponent " + fmt(fr.exponent) + " (need <= -0.5)");
    add_check(r, "resid_decreasing", strictly_decreasing(resid), "residual velocity ratio decreasing in N");

    // Uncut window: every quantity is at roundoff.
    {
        const CutoffSpec none = CutoffSpec::parse("none");
        double worst = 0.0;
        for (int N : o.N) {
            const int n = std::clamp(o.points_per_N * N, o.n_min, o.n_max);
            const CancellationPoint c = cancellation_point(N, Grid(n), none);
            worst = std::max({worst, c.nl / N, c.pseudo / N, c.resid});
        }
        r.scalars["uncut_worst"] = worst;
        add_check(r, "uncut_window", worst < 1e-10, "largest of |v.grad h|/N, |vbar.grad h|/N, residual ratio: " + fmt(worst));
    }
    if (!resolved)
        r.verdict = Verdict::Inconclusive;
    else
        r.verdict = all_passed(r) ? Verdict::Pass : Verdict::Fail;
    r.runtime = sw.seconds();
    return r;
}

// ---- saddle strength and norm inflation ------------------------------------

namespace {

std::string beta_tag(double b) {
    std::ostringstream o;
    o << b;
    std::string s = o.str();
    std::replace(s.begin(), s.end(), '.', 'p');
    return s;
}

struct OracleOutcome {
    bool ran = false;
    double box = 0.0;
    int n = 0;
    std::map<double, double> numeric_rate, exact_rate;
    std::string note;
};

// Prescribed constant-rate deformation of the m = 0 perturbation piece moved to
// the origin, fitted with the same harness as the SQG run.
OracleOutcome inflation_oracle(const Preset& p, const PerturbationParams& pp, const BackgroundParams& bp,
                               const CutoffSpec& cut, const Mat2& rate, double t_w,
                               const std::vector<double>& betas, Series& out) {
    OracleOutcome oc;
    const double Ap = pp.amplitude(bp), lt = pp.lambda_t, kp = pp.kp;
    const double grow = std::exp(std::max(std::abs(rate.a11), std::abs(rate.a22)) * t_w) / lt;
    int shrink = 0;
    for (int k = 6; k >= 0; --k)
        if ((p.n >> k) >= 64 && 1.2 * grow <= 0.4 * p.L / (1 << k)) {
            shrink = k;
            break;
        }
    auto f0 = [=](double x, double y) { return Ap * cut(lt * std::hypot(x, y)) * std::sin(kp * x); };
    const AffineMotion motion = AffineMotion::constant_rate(Mat2::diag(rate.a11, rate.a22));
    // The oracle must resolve the compressed carrier at the end of the window,
    // which the experiment grid by construction no longer does; refine until
    // the exact field leaves the outer band empty.
    int on = p.n >> shrink;
    while (on < 1024 &&
           spectral_tail_fraction(to_spectral(affine_pushforward(Grid(on, p.L / (1 << shrink)), f0, motion, t_w))) > 1e-4)
        on *= 2;
    const Grid go(on, p.L / (1 << shrink));
    oc.box = go.L;
    oc.n = go.n;
    std::vector<double> ts;
    std::map<double, std::vector<double>> num, ex;
    // About 100 samples over the window; the exact field is resampled at each.
    double next = 0.0;
    try {
        run_prescribed(go, f0, motion, t_w, 0.0, true, [&](double t, const SpectralField& T, int) {
            if (t < next && t < t_w) return true;
            next = t + t_w / 100;
            ts.push_back(t);
            std::vector<double> row{t};
            const SpectralField E = to_spectral(affine_pushforward(go, f0, motion, t));
            for (double b : betas) {
                num[b].push_back(sobolev_norm(T, b, true));
                ex[b].push_back(sobolev_norm(E, b, true));
                row.push_back(num[b].back());
                row.push_back(ex[b].back());
            }
            out.add(row);
            return true;
        });
    } catch (const std::exception& e) {
        oc.note = e.what();
        return oc;
    }
    oc.ran = true;
    for (double b : betas) {
        oc.numeric_rate[b] = fit_loglinear(ts, num[b]).exponent;
        oc.exact_rate[b] = fit_loglinear(ts, ex[b]).exponent;
    }
    return oc;
}

}  // namespace

ExperimentReport exp_saddle_and_inflation(const InflationOptions& o) {
    Stopwatch sw;
    ExperimentReport r;
    r.name = "saddle_inflation";
    const Preset& p = o.preset;
    r.params = p.to_json();
    r.params["betas"] = o.betas;
    r.params["diag_every"] = o.diag_every;
    r.params["tail_threshold"] = o.tail_threshold;
    r.params["offdiag_tol"] = o.offdiag_tol;

    const Grid g(p.n, p.L);
    validate_exponents(p.s, p.gamma, p.eta, p.epsilon);
    const BackgroundParams bp = preset_background(p, g);
    const PerturbationParams pp = make_perturbation_params(bp, p.B, p.eta, p.gamma, p.epsilon, g, p.lambda_t, p.N_t);
    const CutoffSpec cut = CutoffSpec::parse(p.cutoff);
    record_background(r, bp);
    r.scalars["lambda_tilde"] = pp.lambda_t;
    r.scalars["N_tilde"] = pp.N_t;
    r.scalars["kp_lattice"] = pp.kp_lattice;
    r.scalars["perturbation_amplitude"] = pp.amplitude(bp);
    const Vec2 z = piece_center(bp, 0);
    const double max_dist = bp.center() / 4;
    const double sigma_pred = std::log(bp.N) / std::sqrt(2.0);

    // (a) saddle strength at t = 0, uncut then cut off.
    {
        const SpectralField U = to_spectral(translated_product_mode(g, bp.amplitude(), bp.k, z));
        const SaddlePoint sp = locate_saddle(U, z, max_dist);
        // The uncut mode has unit-amplitude gradient structure A k / sqrt(2) = log N / sqrt(2).
        const double d = sp.found ? diag_strength(sp.grad) : 0.0;
        const double rel = std::abs(d - sigma_pred) / sigma_pred;
        r.scalars["sigma_uncut"] = d;
        r.scalars["sigma_uncut_rel_err"] = rel;
        r.scalars["sigma_uncut_offdiag"] = sp.found ? offdiag_strength(sp.grad) / d : 1.0;
        add_check(r, "sigma_uncut", sp.found && rel < 1e-6,
                  sp.found ? "sigma = " + fmt(d, 10) + ", log N/sqrt2 = " + fmt(sigma_pred, 10) + ", rel " + fmt(rel)
                           : "no saddle: " + sp.reason);
    }
    const ScalarField phi0 = make_background(bp, cut, g);
    const ScalarField psi0 = make_perturbation(bp, pp, cut, g);
    SpectralField Phi = to_spectral(phi0);
    SpectralField Th = to_spectral(phi0 + psi0);
    {
        SpectralField D = Th;
        D -= Phi;
        const double e = sup_diff(to_physical(D), psi0);
        r.scalars["psi_initial_error"] = e;
        add_check(r, "psi_initial", e <= 1e-12 * psi0.max_abs(), "sup |psi(0) - perturbation| = " + fmt(e));
    }
    double sigma0 = 0.0;
    {
        const SaddlePoint sp = locate_saddle(Phi, z, max_dist);
        sigma0 = sp.found ? diag_strength(sp.grad) : 0.0;
        const double rel = std::abs(sigma0 - sigma_pred) / sigma_pred;
        r.scalars["sigma_cutoff"] = sigma0;
        r.scalars["sigma_cutoff_rel_err"] = rel;
        add_check(r, "sigma_cutoff", sp.found && rel < 0.25,
                  sp.found ? "sigma = " + fmt(sigma0) + ", rel " + fmt(rel) + " (threshold 0.25)" : "no saddle: " + sp.reason);
    }

    // (b) paired evolution; psi = theta - phi.
    SolverConfig cfg;
    const double t_end = o.t_end > 0 ? o.t_end : 1.05 * 3.0 / sigma_pred;
    double dt = choose_dt(Th, cfg);
    const int nsteps = static_cast<int>(std::ceil(t_end / dt));
    dt = t_end / nsteps;
    cfg.dt = dt;
    cfg.t_end = t_end;
    r.scalars["dt"] = dt;
    r.scalars["t_end"] = t_end;
    Integrator It(g, cfg), Ip(g, cfg);
    SaddleTracker tracker(z, max_dist);

    std::vector<std::string> cols{"t", "psi_L2"};
    for (double b : o.betas) cols.push_back("psi_H" + beta_tag(b));
    for (const char* c : {"psi_tail", "saddle_x", "saddle_y", "grad_a11", "grad_a22", "grad_offdiag", "acc_diag",
                          "acc_offdiag_ratio", "phi_rmax", "psi_extent", "cfl"})
        cols.push_back(c);
    Series ts{"timeseries", cols, {}};

    const double phi_margin = 1.5 * 2.0 * bp.center();
    const double cell = kPi / bp.k;
    double window = 0.0, cell_exit = -1.0, cfl = 0.0, max_offdiag_ratio = 0.0;
    std::string end_reason = "reached t_end";
    std::vector<double> tv;
    std::map<double, std::vector<double>> hb;
    for (int step = 0;; ++step) {
        const double t = step * dt;
        if (step % o.diag_every == 0 || step == nsteps) {
            SpectralField Psi = Th;
            Psi -= Phi;
            const double tail = spectral_tail_fraction(Psi);
            const bool have_saddle = tracker.update(t, Phi);
            const ScalarField phi = to_physical(Phi);
            const double rmax = support_radii(phi, kSupportTol).second;
            const ScalarField psi = to_physical(Psi);
            // Extent of psi about the saddle, within the half-radius disk around z.
            double extent = 0.0;
            {
                const double thr = 5e-2 * psi.max_abs();
                for (int i = 0; i < g.n; ++i)
                    for (int j = 0; j < g.n; ++j) {
                        const double d = std::hypot(g.coord(i) - z.x, g.coord(j) - z.y);
                        if (d < 0.5 * bp.center() && std::abs(psi.at(i, j)) > thr) extent = std::max(extent, d);
                    }
            }
            if (cell_exit < 0 && extent > cell) cell_exit = t;
            std::string violation;
            if (!have_saddle)
                violation = "saddle lost: " + tracker.reason();
            else if (tail > o.tail_threshold)
                violation = "perturbation underresolved (tail fraction " + fmt(tail) + ")";
            else if (rmax > phi_margin)
                violation = "background support left 1.5x its annulus";
            if (!violation.empty()) {
                end_reason = violation + " at t = " + fmt(t);
                break;
            }
            const Mat2 G = tracker.gradients().back();
            const Mat2 A = tracker.accumulated().back();
            if (t > 0) max_offdiag_ratio = std::max(max_offdiag_ratio, offdiag_strength(A) / diag_strength(A));
            std::vector<double> row{t, l2_norm(Psi)};
            tv.push_back(t);
            for (double b : o.betas) {
                hb[b].push_back(sobolev_norm(Psi, b, true));
                row.push_back(hb[b].back());
            }
            const Vec2 x = tracker.points().back();
            row.insert(row.end(), {tail, x.x, x.y, G.a11, G.a22, offdiag_strength(G), diag_strength(A),
                                   t > 0 ? offdiag_strength(A) / diag_strength(A) : 0.0, rmax, extent, cfl});
            ts.add(row);
            window = t;
        }
        if (step == nsteps) break;
        const StepStatus a = It.step(Th, t, dt);
        const StepStatus b = a.ok ? Ip.step(Phi, t, dt) : a;
        cfl = std::max(a.cfl, b.cfl);
        if (!a.ok || !b.ok) {
            end_reason = (a.ok ? b.reason : a.reason) + " at t = " + fmt(t);
            break;
        }
    }
    r.series.push_back(ts);
    r.scalars["window"] = window;
    r.scalars["cell_exit_time"] = cell_exit;
    r.scalars["offdiag_ratio_max"] = max_offdiag_ratio;
    r.notes.push_back("validity window ended: " + end_reason);

    // Time-averaged saddle strength over the window.
    double sigma_m = sigma0;
    Mat2 rate = Mat2::diag(-sigma0, sigma0);
    {
        const auto& times = tracker.times();
        const auto& acc = tracker.accumulated();
        std::size_t k = 0;
        while (k + 1 < times.size() && times[k + 1] <= window) ++k;
        if (window > 0 && !acc.empty()) {
            sigma_m = diag_strength(acc[k]) / times[k];
            rate = Mat2::diag(acc[k].a11 / times[k], acc[k].a22 / times[k]);
        }
    }
    r.scalars["sigma_measured"] = sigma_m;
    r.scalars["efold_times"] = sigma_m * window;
    add_check(r, "offdiag", max_offdiag_ratio <= o.offdiag_tol,
              "max |offdiag(A)|/|diag(A)| = " + fmt(max_offdiag_ratio) + " (threshold " + fmt(o.offdiag_tol) + ")");

    const bool long_enough = sigma_m * window >= 3.0;
    add_check(r, "window", long_enough,
              "window " + fmt(window) + " = " + fmt(sigma_m * window) + " e-folding times (need 3)");
    bool fits_conclusive = true;
    for (double b : o.betas) {
        const std::string tag = "psi_H" + beta_tag(b);
        const FitResult f = fit_loglinear(tv, hb[b], 0.0, window);
        r.fits[tag] = f;
        const double ratio = f.exponent / (b * sigma_m);
        r.scalars[tag + "_rate_ratio"] = ratio;
        fits_conclusive = fits_conclusive && !f.inconclusive;
        add_check(r, "rate_" + beta_tag(b), !f.inconclusive && ratio >= 0.6 && ratio <= 1.4,
                  "rate " + fmt(f.exponent) + " = " + fmt(ratio) + " * beta * sigma (need [0.6, 1.4], r2 " + fmt(f.r2) + ")");
    }

    bool oracle_ok = true;
    if (o.oracle && window > 0) {
        std::vector<std::string> oc{"t"};
        for (double b : o.betas) {
            oc.push_back("H" + beta_tag(b) + "_numeric");
            oc.push_back("H" + beta_tag(b) + "_exact");
        }
        Series os{"oracle", oc, {}};
        const OracleOutcome out = inflation_oracle(p, pp, bp, cut, rate, window, o.betas, os);
        r.series.push_back(os);
        if (!out.ran) {
            oracle_ok = false;
            add_check(r, "oracle", false, "prescribed run failed: " + out.note);
        } else {
            r.scalars["oracle_box"] = out.box;
            r.scalars["oracle_n"] = out.n;
            for (double b : o.betas) {
                const double rn = out.numeric_rate.at(b), re = out.exact_rate.at(b);
                const double rel = std::abs(rn / re - 1.0);
                r.scalars["oracle_H" + beta_tag(b) + "_rate"] = rn;
                r.scalars["oracle_H" + beta_tag(b) + "_exact_rate"] = re;
                r.scalars["oracle_H" + beta_tag(b) + "_over_beta_sigma"] = re / (b * sigma_m);
                const bool ok = rel < 0.05;
                oracle_ok = oracle_ok && ok;
                add_check(r, "oracle_" + beta_tag(b), ok,
                          "numeric rate " + fmt(rn) + " vs exact " + fmt(re) + " (rel " + fmt(rel) + ", threshold 0.05)");
            }
        }
    }

    bool hard_fail = false;
    for (const auto& c : r.checks)
        if (!c.passed && c.name.rfind("rate_", 0) != 0 && c.name != "window") hard_fail = true;
    if (hard_fail)
        r.verdict = Verdict::Fail;
    else if (!long_enough || !fits_conclusive)
        r.verdict = Verdict::Inconclusive;
    else
        r.verdict = all_passed(r) ? Verdict::Pass : Verdict::Fail;
    if (!long_enough) r.notes.push_back("window shorter than 3 e-folding times; rate fits are partial");
    (void)oracle_ok;
    r.runtime = sw.seconds();
    return r;
}

// ---- background error ------------------------------------------------------

ExperimentReport exp_background_error(const BackgroundErrorOptions& o) {
    Stopwatch sw;
    ExperimentReport r;
    r.name = "background_error";
    const Preset& p = o.preset;
    r.params = p.to_json();
    r.params["N_sweep"] = o.N_sweep;
    const Grid g(p.n, p.L);
    const BackgroundParams bp = preset_background(p, g);
    record_background(r, bp);
    const double sigma_pred = std::log(bp.N) / std::sqrt(2.0);
    const double t_desk = o.t_end > 0 ? o.t_end : 1.0 / sigma_pred;
    r.scalars["t_desk"] = t_desk;

    // Background-only run against the static pseudosolution.
    const ScalarField bar = make_background(bp, CutoffSpec::parse(p.cutoff), g);
    const double bar_sup = bar.max_abs();
    Series ts{"timeseries", {"t", "Phi_sup_rel", "Phi_C1", "rmax"}, {}};
    double worst = 0.0;
    SolverConfig cfg;
    cfg.t_end = t_desk;
    const SpectralField B0 = to_spectral(bar);
    cfg.dt = std::min(choose_dt(B0, cfg), t_desk / 20);
    std::vector<double> tv, sv;
    const RunResult rr = run(B0, cfg, [&](double t, const SpectralField& T, int step) {
        if (step % o.diag_every) return true;
        const ScalarField phi = to_physical(T);
        const ScalarField D = phi - bar;
        const double rel = D.max_abs() / bar_sup;
        worst = std::max(worst, rel);
        ts.add({t, rel, t > 0 ? holder_norm(D, 1, 0.0) : 0.0, support_radii(phi, kSupportTol).second});
        tv.push_back(t);
        sv.push_back(rel);
        return true;
    });
    r.series.push_back(ts);
    r.scalars["Phi_sup_rel_max"] = worst;
    r.fits["Phi_sup_growth"] = fit_loglog(tv, sv, 1e-300);
    bool resolved = !rr.halted;
    if (rr.halted) r.notes.push_back("background run halted: " + rr.halt_reason);
    add_check(r, "pseudosolution_window", worst < 0.2,
              "max ||Phi||_inf/||phibar||_inf = " + fmt(worst) + " over t <= " + fmt(t_desk) + " (threshold 0.2)");

    // Uncut window: the lattice product mode is stationary.
    {
        int ng = 128;
        while (ng < 4 * bp.k_lattice) ng *= 2;
        const Grid g1(ng, p.L);
        const ScalarField m0 = translated_product_mode(g1, bp.amplitude(), bp.k, piece_center(bp, 0));
        SolverConfig c1;
        c1.t_end = t_desk;
        const RunResult r1 = run(to_spectral(m0), c1);
        const double e = sup_diff(to_physical(r1.final_state), m0) / m0.max_abs();
        r.scalars["uncut_Phi_rel"] = e;
        add_check(r, "uncut_window", e < 1e-8, "relative drift of the uncut mode " + fmt(e) + " (threshold 1e-8)");
    }

    // N-sweep in scaled units at t_fix = 0.1 / sigma with sigma = N / sqrt(2).
    Series ns{"N_sweep", {"N", "n", "t_fix", "Phi_sup_rel"}, {}};
    std::vector<double> nv;
    for (int N : o.N_sweep) {
        const Grid gn(std::clamp(16 * N, 512, 2048));
        const double gfix = 0.1 * std::sqrt(2.0) / N;
        const CutoffSpec bump;
        const ScalarField h = ScalarField::sample(gn, [&](double x, double y) {
            return bump(std::hypot(x, y)) * std::sin(N * x) * std::sin(N * y);
        });
        SolverConfig cn;
        cn.t_end = gfix;
        const RunResult rn = run(to_spectral(h), cn);
        const double e = sup_diff(to_physical(rn.final_state), h) / h.max_abs();
        if (spectral_tail_fraction(to_spectral(h)) > 1e-8) resolved = false;
        ns.add({double(N), double(gn.n), gfix, e});
        nv.push_back(e);
    }
    r.series.push_back(ns);
    add_check(r, "N_sweep_decreasing", strictly_decreasing(nv), "||Phi(t_fix)||_inf decreasing over the N sweep");
    if (!resolved)
        r.verdict = Verdict::Inconclusive;
    else
        r.verdict = all_passed(r) ? Verdict::Pass : Verdict::Fail;
    r.runtime = sw.seconds();
    return r;
}

// ---- gluing ----------------------------------------------------------------

CouplingResult paired_coupling(const ScalarField& outer, const ScalarField& inner, double t_end, int diag_every,
                               std::pair<double, double> annulus) {
    const Grid& g = outer.grid();
    SpectralField Tf = to_spectral(outer + inner), To = to_spectral(outer), Ti = to_spectral(inner);
    SolverConfig cfg;
    double dt = choose_dt(Tf, cfg);
    const int nsteps = std::max(kMinSteps, static_cast<int>(std::ceil(t_end / dt)));
    dt = t_end / nsteps;
    cfg.dt = dt;
    Integrator a(g, cfg), b(g, cfg), c(g, cfg);
    CouplingResult out;
    for (int step = 0;; ++step) {
        const double t = step * dt;
        if (step % diag_every == 0 || step == nsteps) {
            SpectralField D = Tf;
            D -= To;
            const ScalarField d = to_physical(D);
            const auto [rmin, rmax] = support_radii(d, kSupportTol);
            double in = 0.0, all = 0.0;
            for (int i = 0; i < g.n; ++i)
                for (int j = 0; j < g.n; ++j) {
                    const double r = std::hypot(g.coord(i), g.coord(j)), e = d.at(i, j) * d.at(i, j);
                    all += e;
                    if (r >= annulus.first && r <= annulus.second) in += e;
                }
            out.inner_leak.push_back(all > 0 ? (all - in) / all : 0.0);
            D -= Ti;
            const double rel = l2_norm(D) / l2_norm(Ti);
            out.t.push_back(t);
            out.coupling.push_back(rel);
            out.inner_rmin.push_back(rmin);
            out.inner_rmax.push_back(rmax);
            out.max_coupling = std::max(out.max_coupling, rel);
            out.window = t;
        }
        if (step == nsteps) break;
        const std::pair<Integrator*, SpectralField*> runs[] = {{&a, &Tf}, {&b, &To}, {&c, &Ti}};
        for (const auto& pr : runs) {
            const StepStatus s = pr.first->step(*pr.second, t, dt);
            if (!s.ok) {
                out.halted = true;
                out.halt_reason = s.reason + " at t = " + fmt(t);
                return out;
            }
        }
    }
    return out;
}

ApproachCheck approach_check(const ScalarField& theta0, double r0, int seeds, double t_end, int diag_every) {
    const Grid& g = theta0.grid();
    SpectralField T = to_spectral(theta0);
    SolverConfig cfg;
    double dt = choose_dt(T, cfg);
    const int nsteps = std::max(kMinSteps, static_cast<int>(std::ceil(t_end / dt)));
    dt = t_end / nsteps;
    cfg.dt = dt;
    Integrator in(g, cfg);
    std::vector<Vec2> x;
    for (int k = 0; k < seeds; ++k) {
        // Offset keeps seeds off the symmetry axes, where the flow is trivially radial.
        const double a = kTwoPi * (k + 0.37) / seeds;
        x.push_back({r0 * std::cos(a), r0 * std::sin(a)});
    }
    ApproachCheck out;
    out.worst_ratio = 1.0;
    VectorField v = riesz_velocity(T);
    double gnow = max_velocity_gradient(T), integral = 0.0;
    auto record = [&](double t) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& p : x) m = std::min(m, p.norm());
        const double bound = r0 * std::exp(-integral);
        out.t.push_back(t);
        out.min_radius.push_back(m);
        out.bound.push_back(bound);
        out.worst_ratio = std::min(out.worst_ratio, m / bound);
    };
    record(0.0);
    for (int step = 0; step < nsteps; ++step) {
        const double t = step * dt;
        const StepStatus s = in.step(T, t, dt);
        if (!s.ok) break;
        const VectorField vn = riesz_velocity(T);
        advance_particles(x, v, vn, dt);
        const double gn = max_velocity_gradient(T);
        integral += 0.5 * dt * (gnow + gn);
        gnow = gn;
        v = vn;
        if ((step + 1) % diag_every == 0 || step + 1 == nsteps) record(t + dt);
    }
    return out;
}

GluingSchedule glue_schedule(const Preset& p, int J, double ratio, bool check_growth) {
    GluingSchedule sch;
    sch.P = p.P;
    sch.s = p.s;
    sch.J = J;
    // K_1 = sqrt(P) 2 / eps_total equals the preset K.
    sch.eps_total = 2.0 * std::sqrt(double(p.P)) / p.K;
    sch.lambda.clear();
    double lam = p.lambda;
    for (int j = 0; j < J; ++j) {
        sch.lambda.push_back(lam);
        lam *= ratio;
    }
    sch.B = p.B;
    sch.eta = p.eta;
    sch.gamma = p.gamma;
    sch.epsilon = p.epsilon;
    sch.lambda_t_ratio = p.lambda_t > 0 ? p.lambda_t / p.lambda : 0.0;
    sch.N_t = p.N_t;
    sch.check_growth = check_growth;
    return sch;
}

namespace {

// Largest truncation J' <= J whose schedule is resolvable; messages of the
// rejected truncations are collected.
int resolvable_truncation(GluingSchedule sch, const Grid& g, std::vector<std::string>& why) {
    for (int J = sch.J; J >= 1; --J) {
        sch.J = J;
        sch.lambda.resize(J);
        try {
            plan_glued(sch, g);
            return J;
        } catch (const std::exception& e) {
            why.push_back("J = " + std::to_string(J) + ": " + e.what());
        }
    }
    return 0;
}

}  // namespace

ExperimentReport exp_gluing(const GluingOptions& o) {
    Stopwatch sw;
    ExperimentReport r;
    r.name = "gluing";
    const Preset& p = o.preset;
    r.params = p.to_json();
    r.params["J"] = o.J;
    r.params["ratio"] = o.ratio;
    r.params["check_growth"] = o.check_growth;
    const Grid g(p.n, p.L);
    const GluingSchedule sch = glue_schedule(p, o.J, o.ratio, o.check_growth);
    std::vector<std::string> why;
    const int Jr = resolvable_truncation(sch, g, why);
    for (const auto& w : why) r.notes.push_back(w);
    r.scalars["J_requested"] = o.J;
    r.scalars["J_resolvable"] = Jr;
    if (Jr == 0) {
        r.verdict = Verdict::Inconclusive;
        r.runtime = sw.seconds();
        return r;
    }
    GluingSchedule run_sch = sch;
    run_sch.J = Jr;
    run_sch.lambda.resize(Jr);
    const GluedDatum gd = make_glued(run_sch, g);
    const double sigma1 = std::log(gd.meta[0].background.N) / std::sqrt(2.0);
    const double t_end = o.t_end > 0 ? o.t_end : 1.0 / sigma1;
    r.scalars["t_end"] = t_end;
    for (int j = 0; j < Jr; ++j) {
        r.scalars["lambda_" + std::to_string(j + 1)] = gd.meta[j].background.lambda;
        r.scalars["r_inner_" + std::to_string(j + 1)] = gd.meta[j].r_inner;
        r.scalars["r_outer_" + std::to_string(j + 1)] = gd.meta[j].r_outer;
    }

    // Coupling of the innermost piece with everything outside it. With a single
    // piece there is nothing to couple to; the support check still runs.
    const GluedPiece& last = gd.meta.back();
    ScalarField outer(g, 0.0);
    for (int j = 0; j + 1 < Jr; ++j) outer += gd.pieces[j];
    const CouplingResult cr =
        paired_coupling(outer, gd.pieces.back(), t_end, 1, {last.r_inner / 1.5, 1.5 * last.r_outer});
    Series cs{"coupling", {"t", "coupling", "inner_rmin", "inner_rmax", "inner_leak"}, {}};
    double leak = 0.0;
    for (std::size_t k = 0; k < cr.t.size(); ++k) {
        cs.add({cr.t[k], cr.coupling[k], cr.inner_rmin[k], cr.inner_rmax[k], cr.inner_leak[k]});
        leak = std::max(leak, cr.inner_leak[k]);
    }
    r.series.push_back(cs);
    r.scalars["coupling_max"] = cr.max_coupling;
    r.scalars["inner_leak_max"] = leak;
    r.scalars["window"] = cr.window;
    if (cr.halted) r.notes.push_back("coupling runs halted: " + cr.halt_reason);
    add_check(r, "support_inside_annulus", !cr.halted && leak < 1e-3,
              "energy fraction of the innermost piece outside 1.5x its annulus " + fmt(leak) + " (threshold 1e-3)");
    if (Jr >= 2)
        add_check(r, "coupling_J" + std::to_string(Jr), !cr.halted && cr.max_coupling < 0.1,
                  "max relative coupling " + fmt(cr.max_coupling) + " over window " + fmt(cr.window) + " (threshold 0.1)");

    // Trajectories started on the inner edge of the innermost support.
    const double r0 = support_radii(gd.pieces.back(), kSupportTol).first;
    const ApproachCheck ac = approach_check(gd.theta, r0, o.seeds, t_end);
    Series as{"approach", {"t", "min_radius", "bound"}, {}};
    for (std::size_t k = 0; k < ac.t.size(); ++k) as.add({ac.t[k], ac.min_radius[k], ac.bound[k]});
    r.series.push_back(as);
    r.scalars["approach_r0"] = r0;
    r.scalars["approach_worst_ratio"] = ac.worst_ratio;
    add_check(r, "approach_bound", ac.worst_ratio >= 0.99,
              "min_t min_seeds |X(t)| / (r0 exp(-int ||grad v||)) = " + fmt(ac.worst_ratio) + " (need >= 0.99)");

    if (!all_passed(r))
        r.verdict = Verdict::Fail;
    else if (Jr < o.J)
        r.verdict = Verdict::Inconclusive;
    else
        r.verdict = Verdict::Pass;
    if (Jr < o.J)
        r.notes.push_back("coupling for J = " + std::to_string(o.J) + " not measurable; truncated to J = " + std::to_string(Jr));
    r.runtime = sw.seconds();
    return r;
}

// ---- loss profile ----------------------------------------------------------

namespace {

ScalarField annulus_mask(const ScalarField& f, double rmin, double rmax) {
    const Grid& g = f.grid();
    ScalarField out(g, 0.0);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double r = std::hypot(g.coord(i), g.coord(j));
            if (r >= rmin && r < rmax) out.at(i, j) = f.at(i, j);
        }
    return out;
}

// Largest beta with sum_j ||f_j||^2_{H^beta} <= budget (monotone in beta for
// fields without modes below |k| = 1).
double budget_crossing(const std::vector<SpectralField>& pieces, double budget, double lo, double hi) {
    auto total = [&](double b) {
        double s = 0.0;
        for (const auto& F : pieces) s += std::pow(sobolev_norm(F, b, true), 2);
        return s;
    };
    if (total(lo) > budget) return lo;
    if (total(hi) <= budget) return hi;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (total(mid) <= budget ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

ExperimentReport exp_loss_profile(const LossProfileOptions& o) {
    Stopwatch sw;
    ExperimentReport r;
    r.name = "loss_profile";
    const Preset& p = o.preset;
    r.params = p.to_json();
    r.params["J"] = o.J;
    r.verdict = Verdict::Informational;
    const Grid g(p.n, p.L);
    const GluingSchedule sch = glue_schedule(p, o.J, 256.0, false);
    std::vector<std::string> why;
    const int Jr = resolvable_truncation(sch, g, why);
    for (const auto& w : why) r.notes.push_back(w);
    r.scalars["J_resolvable"] = Jr;
    if (Jr == 0) {
        r.runtime = sw.seconds();
        return r;
    }
    GluingSchedule run_sch = sch;
    run_sch.J = Jr;
    run_sch.lambda.resize(Jr);
    const GluedDatum gd = make_glued(run_sch, g);
    const double t_end = o.t_end > 0 ? o.t_end : p.t_end;

    std::vector<SpectralField> p0;
    for (const auto& f : gd.pieces) p0.push_back(to_spectral(f));
    double budget = 0.0;
    for (const auto& F : p0) budget += std::pow(sobolev_norm(F, p.s, true), 2);
    r.scalars["budget"] = budget;

    std::vector<std::string> cols{"t", "beta_star"};
    for (int j = 1; j <= Jr; ++j)
        for (double b : o.fit_betas) cols.push_back("piece" + std::to_string(j) + "_H" + beta_tag(b));
    Series ts{"profile", cols, {}};
    std::vector<double> tv, bstar;
    std::map<std::string, std::vector<double>> per;
    SolverConfig cfg;
    cfg.t_end = t_end;
    const RunResult rr = run(to_spectral(gd.theta), cfg, [&](double t, const SpectralField& T, int) {
        const ScalarField th = to_physical(T);
        std::vector<SpectralField> parts;
        for (const auto& m : gd.meta) parts.push_back(to_spectral(annulus_mask(th, m.r_inner / 1.5, 1.5 * m.r_outer)));
        const double b = budget_crossing(parts, budget, 0.0, 3.0);
        std::vector<double> row{t, b};
        for (int j = 0; j < Jr; ++j)
            for (double beta : o.fit_betas) {
                const double v = sobolev_norm(parts[j], beta, true);
                per["piece" + std::to_string(j + 1) + "_H" + beta_tag(beta)].push_back(v);
                row.push_back(v);
            }
        tv.push_back(t);
        bstar.push_back(b);
        ts.add(row);
        return true;
    });
    r.series.push_back(ts);
    if (rr.halted) r.notes.push_back("glued run halted: " + rr.halt_reason);
    for (const auto& [k, v] : per) r.fits[k] = fit_loglinear(tv, v);
    r.scalars["beta_star_0"] = bstar.front();
    r.scalars["beta_star_end"] = bstar.back();
    bool mono = true;
    for (std::size_t k = 1; k < bstar.size(); ++k) mono = mono && bstar[k] <= bstar[k - 1] + 1e-9;
    // Informational checks: they do not set the verdict.
    add_check(r, "starts_at_s", std::abs(bstar.front() - p.s) < 0.01,
              "beta*(0) = " + fmt(bstar.front(), 6) + " vs s = " + fmt(p.s));
    add_check(r, "monotone", mono, "beta*(t) nonincreasing");
    if (Jr >= 2) {
        const double bmax = o.fit_betas.back();
        const auto& inner = per["piece" + std::to_string(Jr) + "_H" + beta_tag(bmax)];
        bool dom = true;
        for (int j = 1; j < Jr; ++j) {
            const auto& other = per["piece" + std::to_string(j) + "_H" + beta_tag(bmax)];
            for (std::size_t k = 0; k < inner.size(); ++k) dom = dom && inner[k] >= other[k];
        }
        add_check(r, "finest_dominates", dom, "largest-lambda piece dominates the top-beta norm");
    }
    r.notes.push_back("profile is a desk-scale illustration; the verdict is informational");
    r.runtime = sw.seconds();
    return r;
}

// ---- dispatch and sweeps ---------------------------------------------------

std::vector<std::string> experiment_names() {
    return {"stationarity", "decay", "cancellation", "saddle_inflation", "background_error", "gluing", "loss_profile"};
}

ExperimentReport run_experiment(const std::string& name, const Preset& p) {
    if (name == "stationarity") {
        StationarityOptions o;
        o.preset = p;
        return exp_stationarity(o);
    }
    if (name == "decay") return exp_decay(DecayOptions{});
    if (name == "cancellation") {
        CancellationOptions o;
        o.s = p.s;
        o.K = p.K;
        return exp_cancellation(o);
    }
    if (name == "saddle_inflation") {
        InflationOptions o;
        o.preset = p;
        return exp_saddle_and_inflation(o);
    }
    if (name == "background_error") {
        BackgroundErrorOptions o;
        o.preset = p;
        return exp_background_error(o);
    }
    if (name == "gluing") {
        GluingOptions o;
        o.preset = p;
        return exp_gluing(o);
    }
    if (name == "loss_profile") {
        LossProfileOptions o;
        o.preset = p;
        return exp_loss_profile(o);
    }
    throw std::invalid_argument("unknown experiment '" + name + "'");
}

int sweep_threads() {
    const char* e = std::getenv("SQGLAB_THREADS");
    if (!e || !*e) return 1;
    char* end = nullptr;
    const long v = std::strtol(e, &end, 10);
    if (*end != '\0' || v < 1) throw std::invalid_argument("SQGLAB_THREADS must be a positive integer");
    return static_cast<int>(v);
}

std::vector<ExperimentReport> run_sweep(const std::vector<std::function<ExperimentReport()>>& jobs, int threads) {
    if (threads <= 0) threads = sweep_threads();
    threads = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
    std::vector<ExperimentReport> out(jobs.size());
    std::vector<std::exception_ptr> errs(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) {
            try {
                out[k] = jobs[k]();
            } catch (...) {
                errs[k] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace sqglab
