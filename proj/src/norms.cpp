#include "sqglab/norms.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace sqglab {

NormKind parse_norm_kind(const std::string& s) {
    if (s == "L2") return NormKind::L2;
    if (s == "Lp") return NormKind::Lp;
    if (s == "Linf") return NormKind::Linf;
    if (s == "Hs_inhom") return NormKind::Hs_inhom;
    if (s == "Hs_hom") return NormKind::Hs_hom;
    if (s == "SS_hom") return NormKind::SS_hom;
    if (s == "Ck") return NormKind::Ck;
    if (s == "Ck_alpha") return NormKind::Ck_alpha;
    throw std::invalid_argument("unknown norm kind '" + s + "'");
}

std::string norm_kind_name(NormKind k) {
    switch (k) {
        case NormKind::L2: return "L2";
        case NormKind::Lp: return "Lp";
        case NormKind::Linf: return "Linf";
        case NormKind::Hs_inhom: return "Hs_inhom";
        case NormKind::Hs_hom: return "Hs_hom";
        case NormKind::SS_hom: return "SS_hom";
        case NormKind::Ck: return "Ck";
        case NormKind::Ck_alpha: return "Ck_alpha";
    }
    return "?";
}

void NormRequest::validate() const {
    if (kind == NormKind::Hs_inhom && beta < 0.0) throw std::invalid_argument("beta must be >= 0");
    if (kind == NormKind::Hs_hom && beta < -0.5) throw std::invalid_argument("homogeneous order below -1/2 is not supported");
    if (kind == NormKind::SS_hom && !(beta > 0.0 && beta < 1.0))
        throw std::invalid_argument("double-integral seminorm needs s in (0,1)");
    if (kind == NormKind::Lp && !(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
    if ((kind == NormKind::Ck || kind == NormKind::Ck_alpha) && (k < 0 || k > 4))
        throw std::invalid_argument("derivative order must be in [0,4]");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0,1)");
}

namespace {

ScalarField masked(const ScalarField& f, const NormRequest& req) {
    if (!req.annulus) return f;
    ScalarField out = f;
    const Grid& g = f.grid();
    const auto [r0, r1] = *req.annulus;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double r = std::hypot(g.coord(i), g.coord(j));
            if (r < r0 || r >= r1) out.at(i, j) = 0.0;
        }
    return out;
}

}  // namespace

double sobolev_norm(const SpectralField& F, double beta, bool homogeneous) {
    const Grid& g = F.grid();
    const double ku = g.kunit();
    double acc = 0.0;
    for (int i = 0; i < g.n; ++i) {
        const double k1 = ku * g.wavenumber(i);
        for (int j = 0; j < g.nc(); ++j) {
            if (homogeneous && i == 0 && j == 0) continue;
            const double k2 = ku * j;
            const double kk = k1 * k1 + k2 * k2;
            const double w = homogeneous ? (beta == 0.0 ? 1.0 : std::pow(kk, beta)) : std::pow(1.0 + kk, beta);
            const double mult = (j == 0 || 2 * j == g.n) ? 1.0 : 2.0;
            acc += mult * w * std::norm(F.at(i, j));
        }
    }
    return g.L * std::sqrt(acc);
}

double sobolev_norm(const ScalarField& f, double beta, bool homogeneous) {
    return sobolev_norm(to_spectral(f), beta, homogeneous);
}

double lp_norm(const ScalarField& f, double p) {
    const double dx = f.grid().dx();
    double acc = 0.0;
    for (double x : f.values()) acc += std::pow(std::abs(x), p);
    return std::pow(acc * dx * dx, 1.0 / p);
}

double linf_norm(const ScalarField& f) { return f.max_abs(); }

double dirichlet_beta(double s) {
    // Alternating series sum (-1)^k (2k+1)^{-s}, accelerated (Cohen, Rodriguez Villegas, Zagier).
    const int n = 60;
    double d = std::pow(3.0 + std::sqrt(8.0), n);
    d = 0.5 * (d + 1.0 / d);
    double b = -1.0, c = -d, acc = 0.0;
    for (int k = 0; k < n; ++k) {
        c = b - c;
        acc += c * std::pow(2.0 * k + 1.0, -s);
        b = (k + n) * (k - n) * b / ((k + 0.5) * (k + 1.0));
    }
    return acc / d;
}

double square_lattice_zeta(double a) {
    const double s = 0.5 * a;
    if (s == 1.0) throw std::domain_error("lattice zeta has a pole at a = 2");
    return 4.0 * std::riemann_zeta(s) * dirichlet_beta(s);
}

double fractional_laplacian_constant(double s) {
    return std::pow(4.0, s) * std::tgamma(1.0 + s) / (kPi * std::abs(std::tgamma(-s)));
}

double ss_fourier_ratio(double s) { return std::sqrt(2.0 / fractional_laplacian_constant(s)); }

namespace {

// Periodised kernel sum_m |h + mL|^{-2-2s} on the grid offsets (a, b) in
// [0, n/2]^2, images |m|_inf <= 3 summed directly and the rest as an integral.
struct KernelTable {
    int n = 0, h = 0;
    std::vector<double> v;
    double operator()(int di, int dj) const {
        di = std::abs(((di % n) + n) % n);
        dj = std::abs(((dj % n) + n) % n);
        if (di > n / 2) di = n - di;
        if (dj > n / 2) dj = n - dj;
        return v[static_cast<std::size_t>(di) * (h + 1) + dj];
    }
};

KernelTable kernel_table(const Grid& g, double s) {
    KernelTable t;
    t.n = g.n;
    t.h = g.n / 2;
    t.v.assign(static_cast<std::size_t>(t.h + 1) * (t.h + 1), 0.0);
    const int M = 3;
    const double L = g.L, dx = g.dx(), e = 1.0 + s;
    const double R = (2 * M + 1) * L / std::sqrt(kPi);  // disc with the area of the summed block
    const double tail = kPi * std::pow(R, -2.0 * s) / (s * L * L);
    for (int a = 0; a <= t.h; ++a)
        for (int b = a; b <= t.h; ++b) {
            double acc = 0.0;
            for (int m1 = -M; m1 <= M; ++m1)
                for (int m2 = -M; m2 <= M; ++m2) {
                    const double x = a * dx + m1 * L, y = b * dx + m2 * L;
                    const double r2 = x * x + y * y;
                    if (r2 > 0.0) acc += std::pow(r2, -e);
                }
            t.v[static_cast<std::size_t>(a) * (t.h + 1) + b] = acc + tail;
            t.v[static_cast<std::size_t>(b) * (t.h + 1) + a] = acc + tail;
        }
    return t;
}

struct Support {
    std::vector<int> i, j;
    std::vector<double> f;
};

Support support_of(const ScalarField& f, double tol) {
    Support s;
    const double thr = tol * f.max_abs();
    const Grid& g = f.grid();
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            if (std::abs(f.at(i, j)) > thr) {
                s.i.push_back(i);
                s.j.push_back(j);
                s.f.push_back(f.at(i, j));
            }
    return s;
}

}  // namespace

NormValue ss_norm_detail(const ScalarField& f, double s, const SsOptions& opt) {
    if (!(s > 0.0 && s < 1.0)) throw std::domain_error("double-integral seminorm is defined for s in (0,1)");
    NormValue out;
    const Grid& g = f.grid();
    if (f.max_abs() == 0.0) {
        out.method = "double-integral, exact pairs";
        out.error_bar = 0.0;
        return out;
    }
    const double dx = g.dx();
    const Support S = support_of(f, opt.support_tol);
    const std::size_t ns = S.f.size();
    const KernelTable K = kernel_table(g, s);
    // Sum of the kernel over every nonzero lattice offset.
    const double Ktot = std::pow(dx, -2.0 - 2.0 * s) * square_lattice_zeta(2.0 + 2.0 * s);
    // Lattice-sum correction for the singular diagonal: the grid sum misses
    // -Z(2s) |grad f|^2 dx^{2-2s} / 2 relative to the integral.
    const double grad2 = std::pow(sobolev_norm(f, 1.0, true), 2);
    const double diag_corr = -square_lattice_zeta(2.0 * s) * 0.5 * grad2 * std::pow(dx, 2.0 - 2.0 * s);

    auto pair_term = [&](std::size_t x, std::size_t y) {
        const double fx = S.f[x], fy = S.f[y];
        const double d = fx - fy;
        return (d * d - 2.0 * fx * fx) * K(S.i[x] - S.i[y], S.j[x] - S.j[y]);
    };

    if (ns <= opt.exact_limit) {
        double total = 0.0;
        for (std::size_t x = 0; x < ns; ++x) {
            double inner = 0.0;
            for (std::size_t y = 0; y < ns; ++y)
                if (y != x) inner += pair_term(x, y);
            total += inner + 2.0 * S.f[x] * S.f[x] * Ktot;
        }
        const double ss = std::pow(dx, 4) * total + diag_corr;
        out.value = std::sqrt(std::max(ss, 0.0));
        out.method = "double-integral, exact pairs";
        out.error_bar = 0.0;
        return out;
    }

    // Near pairs (|offset|_inf <= 8) exactly; far pairs from one sample per
    // contiguous stratum of the support, two independent draws for the error bar.
    const std::size_t nstrata = std::min(opt.strata, ns);
    std::vector<std::size_t> bounds(nstrata + 1);
    for (std::size_t b = 0; b <= nstrata; ++b) bounds[b] = b * ns / nstrata;
    std::vector<long> pos(static_cast<std::size_t>(g.n) * g.n, -1);
    for (std::size_t x = 0; x < ns; ++x) pos[static_cast<std::size_t>(S.i[x]) * g.n + S.j[x]] = static_cast<long>(x);
    const int w = 8;
    auto is_near = [&](std::size_t x, std::size_t y) {
        int di = std::abs(S.i[x] - S.i[y]), dj = std::abs(S.j[x] - S.j[y]);
        di = std::min(di, g.n - di);
        dj = std::min(dj, g.n - dj);
        return di <= w && dj <= w;
    };
    double near = 0.0;
    for (std::size_t x = 0; x < ns; ++x) {
        for (int a = -w; a <= w; ++a)
            for (int b = -w; b <= w; ++b) {
                if (a == 0 && b == 0) continue;
                const int ii = ((S.i[x] + a) % g.n + g.n) % g.n, jj = ((S.j[x] + b) % g.n + g.n) % g.n;
                const long y = pos[static_cast<std::size_t>(ii) * g.n + jj];
                if (y >= 0) near += pair_term(x, static_cast<std::size_t>(y));
            }
        near += 2.0 * S.f[x] * S.f[x] * Ktot;
    }
    double far[2] = {0.0, 0.0};
    for (int draw = 0; draw < 2; ++draw) {
        std::mt19937_64 rng(opt.seed + draw);
        std::vector<std::size_t> picks(nstrata);
        for (std::size_t b = 0; b < nstrata; ++b) {
            std::uniform_int_distribution<std::size_t> u(bounds[b], bounds[b + 1] - 1);
            picks[b] = u(rng);
        }
        double acc = 0.0;
        for (std::size_t x = 0; x < ns; ++x)
            for (std::size_t b = 0; b < nstrata; ++b) {
                const std::size_t y = picks[b];
                if (y == x || is_near(x, y)) continue;
                acc += static_cast<double>(bounds[b + 1] - bounds[b]) * pair_term(x, y);
            }
        far[draw] = acc;
    }
    const double d4 = std::pow(dx, 4);
    const double ss0 = d4 * (near + far[0]) + diag_corr, ss1 = d4 * (near + far[1]) + diag_corr;
    const double v0 = std::sqrt(std::max(ss0, 0.0)), v1 = std::sqrt(std::max(ss1, 0.0));
    out.value = 0.5 * (v0 + v1);
    out.error_bar = 0.5 * std::abs(v0 - v1);
    out.method = "double-integral, exact near pairs + stratified far sample";
    return out;
}

double ss_norm(const ScalarField& f, double s) { return ss_norm_detail(f, s).value; }

SsCalibration ss_calibrate(double s, const Grid& grid) {
    const double w = grid.L / 16.0;
    auto ref = ScalarField::sample(grid, [w](double x, double y) { return std::exp(-(x * x + y * y) / (w * w)); });
    SsCalibration c;
    c.s = s;
    c.n = grid.n;
    c.measured_ratio = ss_norm(ref, s) / sobolev_norm(ref, s, true);
    c.analytic_ratio = ss_fourier_ratio(s);
    return c;
}

namespace {

double support_diameter(const ScalarField& f) {
    const Grid& g = f.grid();
    const double thr = 1e-12 * f.max_abs();
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            if (std::abs(f.at(i, j)) > thr) {
                x0 = std::min(x0, g.coord(i));
                x1 = std::max(x1, g.coord(i));
                y0 = std::min(y0, g.coord(j));
                y1 = std::max(y1, g.coord(j));
            }
    if (x1 < x0) return 0.0;
    return std::min(std::hypot(x1 - x0, y1 - y0), 0.5 * g.L * std::sqrt(2.0));
}

double holder_quotient(const ScalarField& D, double alpha, double diam, unsigned seed) {
    const Grid& g = D.grid();
    const int n = g.n;
    const double dx = g.dx();
    std::vector<std::pair<int, int>> offsets;
    for (int a = -8; a <= 8; ++a)
        for (int b = 0; b <= 8; ++b)
            if ((b > 0 || a > 0) && a * a + b * b <= 64) offsets.push_back({a, b});
    for (double r = 8.0 * dx; r <= diam; r *= std::pow(2.0, 0.25))
        for (int d = 0; d < 16; ++d) {
            const double th = kPi * d / 16.0;
            const int a = static_cast<int>(std::lround(r * std::cos(th) / dx));
            const int b = static_cast<int>(std::lround(r * std::sin(th) / dx));
            if (a == 0 && b == 0) continue;
            if (std::abs(a) > n / 2 || std::abs(b) > n / 2) continue;
            offsets.push_back({a, b});
        }
    std::sort(offsets.begin(), offsets.end());
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
    double best = 0.0;
    auto w = [n](int k) { return ((k % n) + n) % n; };
    for (const auto& [a, b] : offsets) {
        const double dist = dx * std::hypot(a, b);
        if (dist < dx || dist > std::max(diam, dx)) continue;
        const double inv = std::pow(dist, -alpha);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                best = std::max(best, std::abs(D.at(i, j) - D.at(w(i + a), w(j + b))) * inv);
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> u(0, n - 1);
    for (int t = 0; t < 100000; ++t) {
        const int i = u(rng), j = u(rng), k = u(rng), l = u(rng);
        int di = std::abs(i - k), dj = std::abs(j - l);
        di = std::min(di, n - di);
        dj = std::min(dj, n - dj);
        const double dist = dx * std::hypot(di, dj);
        if (dist < dx || dist > diam) continue;
        best = std::max(best, std::abs(D.at(i, j) - D.at(k, l)) * std::pow(dist, -alpha));
    }
    return best;
}

}  // namespace

double holder_norm(const ScalarField& f, int k, double alpha) {
    if (k < 0 || k > 4) throw std::invalid_argument("derivative order must be in [0,4]");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0,1)");
    const SpectralField F = to_spectral(f);
    double sup = 0.0, quot = 0.0;
    const double diam = support_diameter(f);
    for (int a = 0; a <= k; ++a) {
        ScalarField D = k == 0 ? f : to_physical(derivative(derivative(F, 0, k - a), 1, a));
        sup = std::max(sup, D.max_abs());
        if (alpha > 0.0) quot = std::max(quot, holder_quotient(D, alpha, diam, 77u + a));
    }
    return sup + quot;
}

NormValue evaluate_norm(const ScalarField& f0, const NormRequest& req) {
    req.validate();
    const ScalarField f = masked(f0, req);
    NormValue v;
    switch (req.kind) {
        case NormKind::L2: v = {lp_norm(f, 2.0), "quadrature", std::nullopt}; break;
        case NormKind::Lp: v = {lp_norm(f, req.p), "quadrature", std::nullopt}; break;
        case NormKind::Linf: v = {linf_norm(f), "grid max", std::nullopt}; break;
        case NormKind::Hs_inhom: v = {sobolev_norm(f, req.beta, false), "Fourier multiplier", std::nullopt}; break;
        case NormKind::Hs_hom: v = {sobolev_norm(f, req.beta, true), "Fourier multiplier", std::nullopt}; break;
        case NormKind::SS_hom: v = ss_norm_detail(f, req.beta); break;
        case NormKind::Ck: v = {holder_norm(f, req.k, 0.0), "spectral derivatives, grid max", std::nullopt}; break;
        case NormKind::Ck_alpha:
            v = {holder_norm(f, req.k, req.alpha), "spectral derivatives + pair quotients", std::nullopt};
            break;
    }
    return v;
}

DecompositionGap sum_decomposition_gap(const std::vector<ScalarField>& pieces, const std::vector<double>& radii,
                                       double s, double delta) {
    if (pieces.size() != radii.size() || pieces.empty()) throw std::invalid_argument("one radius per piece required");
    if (!(s > 0.0 && s < 1.0)) throw std::domain_error("s must lie in (0,1)");
    for (std::size_t j = 1; j < radii.size(); ++j)
        if (radii[j] > radii[j - 1] / 4.0) throw std::domain_error("annulus separation violated: R_{j+1} > R_j/4");
    const Grid& g = pieces.front().grid();
    std::vector<Support> S;
    for (std::size_t j = 0; j < pieces.size(); ++j) {
        const ScalarField& f = pieces[j];
        if (f.grid() != g) throw std::invalid_argument("pieces must share a grid");
        const double thr = 1e-12 * f.max_abs();
        for (int i = 0; i < g.n; ++i)
            for (int k = 0; k < g.n; ++k) {
                const double r = std::hypot(g.coord(i), g.coord(k));
                if (std::abs(f.at(i, k)) > thr && (r < radii[j] || r > 2.0 * radii[j]))
                    throw std::domain_error("annulus separation violated: piece " + std::to_string(j + 1) +
                                            " leaves B_{2R}\\B_R");
            }
        S.push_back(support_of(f, 0.0));
    }
    DecompositionGap out;
    if (pieces.size() > 1) {
        const KernelTable K = kernel_table(g, s);
        double cross = 0.0;
        for (std::size_t a = 0; a < S.size(); ++a)
            for (std::size_t b = a + 1; b < S.size(); ++b) {
                double acc = 0.0;
                for (std::size_t x = 0; x < S[a].f.size(); ++x) {
                    double inner = 0.0;
                    for (std::size_t y = 0; y < S[b].f.size(); ++y)
                        inner += S[b].f[y] * K(S[a].i[x] - S[b].i[y], S[a].j[x] - S[b].j[y]);
                    acc += S[a].f[x] * inner;
                }
                cross += acc;
            }
        // Sum over ordered pairs i != j of -2 X_ij, X symmetric.
        out.gap = std::abs(-4.0 * cross * std::pow(g.dx(), 4));
    }
    for (std::size_t j = 0; j < pieces.size(); ++j)
        out.bound += std::pow(radii[j], -2.0 * s - delta) * std::pow(lp_norm(pieces[j], 2.0), 2);
    return out;
}

}  // namespace sqglab
