#include "sqglab/construction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sqglab {

namespace {

double smooth_step_piece(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }

// Root of u + log(u) = c for u > 1, i.e. N log N = e^c with N = e^u.
double solve_u_plus_log_u(double c) {
    if (!(c > 1.0)) throw std::domain_error("scale relation unsolvable: no root N > e");
    double lo = 1.0, hi = std::max(2.0, c);
    for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mid + std::log(mid) > c ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

}  // namespace

double CutoffSpec::operator()(double r) const {
    if (kind == Kind::None) return 1.0;
    r = std::abs(r);
    if (r <= 0.5) return 1.0;
    if (r >= 1.0) return 0.0;
    const double u = 2.0 * (1.0 - r);  // 1 at r = 1/2, 0 at r = 1
    const double a = smooth_step_piece(u), b = smooth_step_piece(1.0 - u);
    return a / (a + b);
}

CutoffSpec CutoffSpec::parse(const std::string& name) {
    if (name == "bump") return {Kind::Bump};
    if (name == "none") return {Kind::None};
    throw std::invalid_argument("unknown cutoff '" + name + "' (expected bump or none)");
}

double solve_scale_relation(double s, double K, double lambda) {
    if (!(s > 1.5 && s < 2.0)) throw std::domain_error("s must lie in (3/2, 2)");
    if (!(K >= 1.0)) throw std::domain_error("K must be >= 1");
    if (!(lambda > 1.0)) throw std::domain_error("lambda must be > 1");
    // h(u) = (2-s) log lambda + (1-s) u - log(K u), u = log N, strictly decreasing.
    auto h = [&](double u) { return (2.0 - s) * std::log(lambda) + (1.0 - s) * u - std::log(K * u); };
    double lo = 1.0, hi = std::log(1e300);
    if (!(h(lo) > 0.0) || !(h(hi) < 0.0)) throw std::domain_error("scale relation unsolvable");
    for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (h(mid) > 0.0 ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

double BackgroundParams::amplitude() const { return std::pow(lambda, 1.0 - s) * std::pow(N, -s) / K; }

double BackgroundParams::scale_residual() const {
    const double lhs = std::pow(lambda, 2.0 - s) * std::pow(N, 1.0 - s);
    const double rhs = K * std::log(N);
    return std::abs(lhs - rhs) / rhs;
}

BackgroundParams make_background_params(double s, double K, int P, double lambda, const Grid& grid) {
    if (P < 3) throw std::invalid_argument("P must be an integer >= 3");
    BackgroundParams p;
    p.s = s;
    p.K = K;
    p.P = P;
    p.lambda_requested = lambda;
    const double N0 = solve_scale_relation(s, K, lambda);
    p.k_lattice = static_cast<int>(std::lround(lambda * N0 / grid.kunit()));
    if (p.k_lattice < 1) throw std::domain_error("carrier wavenumber rounds to zero on this grid");
    p.k = p.k_lattice * grid.kunit();
    // With lambda = k / N the relation becomes N log N = k^{2-s} / K.
    const double u = solve_u_plus_log_u((2.0 - s) * std::log(p.k) - std::log(K));
    p.N = std::exp(u);
    p.lambda = p.k / p.N;
    return p;
}

void validate_exponents(double s, double gamma, double eta, double epsilon) {
    for (auto [v, name] : {std::pair{gamma, "gamma"}, {eta, "eta"}, {epsilon, "epsilon"}})
        if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument(std::string(name) + " must lie in (0,1)");
    if (!(3.0 + 2.0 * gamma - 2.0 * s < 0.0))
        throw std::invalid_argument("constraint violated: 3+2γ−2s ≥ 0 (3+2γ−2s = " + fmt(3 + 2 * gamma - 2 * s) + ")");
    if (!(3.0 + 2.0 * gamma - 2.0 * s + 2.0 * eta < 0.0))
        throw std::invalid_argument("constraint violated: 3+2γ−2s+2η ≥ 0 (value " +
                                    fmt(3 + 2 * gamma - 2 * s + 2 * eta) + ")");
    if (!(2.0 - 2.0 * s + epsilon + eta < 0.0))
        throw std::invalid_argument("constraint violated: 2−2s+ε+η ≥ 0 (value " + fmt(2 - 2 * s + epsilon + eta) +
                                    ")");
}

double PerturbationParams::amplitude(const BackgroundParams& p) const {
    return std::pow(lambda_t, 1.0 - p.s) * std::pow(N_t, -p.s) / p.K;
}

PerturbationParams make_perturbation_params(const BackgroundParams& p, double B, double eta, double gamma,
                                            double epsilon, const Grid& grid, double lambda_t_override,
                                            double N_t_override) {
    validate_exponents(p.s, gamma, eta, epsilon);
    if (!(B > 1.0)) throw std::invalid_argument("B must be > 1");
    PerturbationParams q;
    q.B = B;
    q.eta = eta;
    q.gamma = gamma;
    q.epsilon = epsilon;
    q.lambda_t = lambda_t_override > 0.0 ? lambda_t_override : std::pow(p.lambda, B);
    const double Nt = N_t_override > 0.0 ? N_t_override : std::pow(q.lambda_t, 1.0 - eta);
    q.desk_override = lambda_t_override > 0.0 || N_t_override > 0.0;
    q.kp_lattice = static_cast<int>(std::lround(q.lambda_t * Nt / grid.kunit()));
    if (q.kp_lattice < 1) throw std::domain_error("perturbation carrier rounds to zero on this grid");
    q.kp = q.kp_lattice * grid.kunit();
    q.N_t = q.kp / q.lambda_t;
    return q;
}

Vec2 piece_center(const BackgroundParams& p, int m) {
    return Mat2::rotation(kTwoPi * m / p.P) * Vec2{p.center(), 0.0};
}

namespace {

void check_background_geometry(const BackgroundParams& p, const Grid& grid) {
    const double z = p.center();
    if (2.0 * z > grid.L / 8.0)
        throw std::domain_error("support overflow: 2λ^{-1/2} = " + fmt(2 * z) + " exceeds L/8 = " + fmt(grid.L / 8));
    const double r = 1.0 / p.lambda;
    if (r > 0.5 * z) throw std::domain_error("piece support leaves the annulus: 1/λ > λ^{-1/2}/2");
    if (2.0 * z * std::sin(kPi / p.P) < 2.0 * r)
        throw std::domain_error("rotated copies overlap: P = " + std::to_string(p.P) + " too small for λ = " +
                                fmt(p.lambda));
}

// Sector frame of piece m: y = R_{-m} x - (lambda^{-1/2}, 0).
struct SectorFrame {
    Mat2 rot_back;  // R_{-m}
    Mat2 rot;       // R_m
    double z;
};

std::vector<SectorFrame> frames(const BackgroundParams& p) {
    std::vector<SectorFrame> out;
    for (int m = 0; m < p.P; ++m) {
        const double a = kTwoPi * m / p.P;
        out.push_back({Mat2::rotation(-a), Mat2::rotation(a), p.center()});
    }
    return out;
}

}  // namespace

ScalarField make_background(const BackgroundParams& p, const CutoffSpec& g, const Grid& grid) {
    check_background_geometry(p, grid);
    const double A = p.amplitude();
    const double lam = p.lambda, k = p.k, reach = 1.0 / lam;
    const auto fr = frames(p);
    ScalarField out(grid);
    for (int i = 0; i < grid.n; ++i) {
        for (int j = 0; j < grid.n; ++j) {
            const Vec2 x{grid.coord(i), grid.coord(j)};
            double acc = 0.0;
            for (const auto& f : fr) {
                const Vec2 y = f.rot_back * x - Vec2{f.z, 0.0};
                const double r = y.norm();
                if (g.kind == CutoffSpec::Kind::Bump && r >= reach) continue;
                acc += g(lam * r) * std::sin(k * y.x) * std::sin(k * y.y);
            }
            out.at(i, j) = A * acc;
        }
    }
    return out;
}

VectorField pseudovelocity_background(const BackgroundParams& p, const CutoffSpec& g, const Grid& grid) {
    check_background_geometry(p, grid);
    const double c = p.amplitude() / std::sqrt(2.0);
    const double lam = p.lambda, k = p.k, reach = 1.0 / lam;
    const auto fr = frames(p);
    VectorField v{ScalarField(grid), ScalarField(grid)};
    for (int i = 0; i < grid.n; ++i) {
        for (int j = 0; j < grid.n; ++j) {
            const Vec2 x{grid.coord(i), grid.coord(j)};
            Vec2 acc;
            for (const auto& f : fr) {
                const Vec2 y = f.rot_back * x - Vec2{f.z, 0.0};
                const double r = y.norm();
                if (g.kind == CutoffSpec::Kind::Bump && r >= reach) continue;
                const double w = c * g(lam * r);
                const Vec2 loc{-w * std::sin(k * y.x) * std::cos(k * y.y), w * std::cos(k * y.x) * std::sin(k * y.y)};
                acc = acc + f.rot * loc;
            }
            v.x.at(i, j) = acc.x;
            v.y.at(i, j) = acc.y;
        }
    }
    return v;
}

ScalarField make_perturbation(const BackgroundParams& p, const PerturbationParams& q, const CutoffSpec& g,
                              const Grid& grid) {
    check_background_geometry(p, grid);
    if (1.0 / q.lambda_t > 0.5 / p.lambda)
        throw std::domain_error("perturbation support 1/λ̃ = " + fmt(1.0 / q.lambda_t) +
                                " not inside the background plateau radius 1/(2λ) = " + fmt(0.5 / p.lambda));
    const double A = q.amplitude(p);
    const double lt = q.lambda_t, kp = q.kp, reach = 1.0 / lt;
    const auto fr = frames(p);
    ScalarField out(grid);
    for (int i = 0; i < grid.n; ++i) {
        for (int j = 0; j < grid.n; ++j) {
            const Vec2 x{grid.coord(i), grid.coord(j)};
            double acc = 0.0;
            for (const auto& f : fr) {
                const Vec2 y = f.rot_back * x - Vec2{f.z, 0.0};
                const double r = y.norm();
                if (g.kind == CutoffSpec::Kind::Bump && r >= reach) continue;
                acc += g(lt * r) * std::sin(kp * y.x);
            }
            out.at(i, j) = A * acc;
        }
    }
    return out;
}

double sector_weight(double x1, double x2, int m, int P) {
    if (x1 == 0.0 && x2 == 0.0) return 1.0 / P;
    const double th = std::atan2(x2, x1);
    const double width = kTwoPi / P;
    const CutoffSpec cut{CutoffSpec::Kind::Bump};
    auto w = [&](int mm) {
        const double d = std::remainder(th - width * mm, kTwoPi);
        return cut(std::abs(d) / width);
    };
    double total = 0.0;
    for (int mm = 0; mm < P; ++mm) total += w(mm);
    return w(m) / total;
}

VectorField pseudovelocity_perturbation(const BackgroundParams& p, const PerturbationParams& q,
                                        const CutoffSpec& g, const Grid& grid, const Deformation& d,
                                        std::vector<std::string>* warnings, double offdiag_tol) {
    const double diag = std::max(std::abs(d.A.a11), std::abs(d.A.a22));
    const double off = std::max(std::abs(d.A.a12), std::abs(d.A.a21));
    if (warnings && off > offdiag_tol * std::max(1.0, diag))
        warnings->push_back("deformation has off-diagonal part " + fmt(off) + " beyond tolerance");
    const Mat2 E = expm(d.A * -1.0);
    const double A = q.amplitude(p);
    const double lt = q.lambda_t, kp = q.kp;
    const auto fr = frames(p);
    VectorField v{ScalarField(grid), ScalarField(grid)};
    for (int i = 0; i < grid.n; ++i) {
        for (int j = 0; j < grid.n; ++j) {
            const Vec2 x{grid.coord(i), grid.coord(j)};
            Vec2 acc;
            for (int m = 0; m < p.P; ++m) {
                const auto& f = fr[m];
                const Vec2 y = f.rot_back * x - Vec2{f.z, 0.0};
                const Vec2 xp = E * y - d.b;
                const double gv = g(lt * xp.norm());
                if (gv == 0.0) continue;
                const double w = p.P > 1 ? sector_weight(x.x, x.y, m, p.P) : 1.0;
                if (w == 0.0) continue;
                acc = acc + f.rot * Vec2{0.0, w * A * gv * std::cos(kp * xp.x)};
            }
            v.x.at(i, j) = acc.x;
            v.y.at(i, j) = acc.y;
        }
    }
    return v;
}

double GluingSchedule::K(int j) const { return std::sqrt(static_cast<double>(P)) * std::pow(2.0, j) / eps_total; }

std::vector<GluedPiece> plan_glued(const GluingSchedule& sch, const Grid& grid) {
    if (sch.J < 1) throw std::invalid_argument("J must be >= 1");
    if (static_cast<int>(sch.lambda.size()) != sch.J)
        throw std::invalid_argument("schedule needs one lambda per piece");
    if (!(sch.eps_total > 0.0)) throw std::invalid_argument("epsilon must be positive");
    for (int j = 1; j < sch.J; ++j)
        if (1.0 / std::sqrt(sch.lambda[j]) > (1.0 / std::sqrt(sch.lambda[j - 1])) / 16.0)
            throw std::domain_error("nesting violated: λ_{j+1}^{-1/2} > λ_j^{-1/2}/16 at j = " + std::to_string(j));
    if (sch.check_growth)
        for (int j = 1; j <= sch.J; ++j)
            if (sch.lambda[j - 1] < std::exp(sch.K(j)))
                throw std::domain_error("growth condition violated: λ_" + std::to_string(j) + " = " +
                                        fmt(sch.lambda[j - 1]) + " < exp(K_j) = " + fmt(std::exp(sch.K(j))));
    std::vector<GluedPiece> out;
    for (int j = 1; j <= sch.J; ++j) {
        // Resolution first: a lattice carrier above n/4 cannot be represented.
        const double lam = sch.lambda[j - 1];
        double N0;
        try {
            N0 = solve_scale_relation(sch.s, sch.K(j), lam);
        } catch (const std::domain_error& e) {
            throw std::domain_error("piece " + std::to_string(j) + ": " + e.what());
        }
        const double k_needed = lam * N0 / grid.kunit();
        const double lt = sch.lambda_t_ratio > 0.0 ? sch.lambda_t_ratio * lam : std::pow(lam, sch.B);
        const double Nt = sch.N_t > 0.0 ? sch.N_t : std::pow(lt, 1.0 - sch.eta);
        const double kp_needed = lt * Nt / grid.kunit();
        if (4.0 * std::max(k_needed, kp_needed) > grid.n)
            throw std::domain_error("resolution deficit: piece " + std::to_string(j) + " needs n >= " +
                                    std::to_string(static_cast<long long>(std::ceil(4 * std::max(k_needed, kp_needed)))) +
                                    ", finest resolvable piece is j = " + std::to_string(j - 1));
        GluedPiece gp;
        gp.j = j;
        gp.background = make_background_params(sch.s, sch.K(j), sch.P, lam, grid);
        gp.perturbation = make_perturbation_params(gp.background, sch.B, sch.eta, sch.gamma, sch.epsilon, grid,
                                                   sch.lambda_t_ratio > 0.0 ? lt : 0.0, sch.N_t);
        gp.r_inner = 0.5 * gp.background.center();
        gp.r_outer = 2.0 * gp.background.center();
        out.push_back(gp);
    }
    return out;
}

GluedDatum make_glued(const GluingSchedule& sch, const Grid& grid) {
    GluedDatum d;
    d.meta = plan_glued(sch, grid);
    d.theta = ScalarField(grid);
    const CutoffSpec g{CutoffSpec::Kind::Bump};
    for (const auto& gp : d.meta) {
        ScalarField piece = make_background(gp.background, g, grid);
        piece += make_perturbation(gp.background, gp.perturbation, g, grid);
        d.theta += piece;
        d.pieces.push_back(std::move(piece));
    }
    return d;
}

namespace {

void lagrange_weights(double u, int& i0, double w[8]) {
    const int base = static_cast<int>(std::floor(u)) - 3;
    i0 = base;
    const double t = u - base;  // nodes at 0..7
    for (int a = 0; a < 8; ++a) {
        double num = 1.0, den = 1.0;
        for (int b = 0; b < 8; ++b) {
            if (b == a) continue;
            num *= t - b;
            den *= a - b;
        }
        w[a] = num / den;
    }
}

}  // namespace

double interpolate_lagrange8(const ScalarField& f, double x1, double x2) {
    const Grid& g = f.grid();
    const int n = g.n;
    const double u = (wrap_coord(x1, g.L) + 0.5 * g.L) / g.dx();
    const double v = (wrap_coord(x2, g.L) + 0.5 * g.L) / g.dx();
    int i0, j0;
    double wi[8], wj[8];
    lagrange_weights(u, i0, wi);
    lagrange_weights(v, j0, wj);
    double acc = 0.0;
    for (int a = 0; a < 8; ++a) {
        const int ii = ((i0 + a) % n + n) % n;
        double row = 0.0;
        for (int b = 0; b < 8; ++b) row += wj[b] * f.at(ii, ((j0 + b) % n + n) % n);
        acc += wi[a] * row;
    }
    return acc;
}

ScalarField rotate_pfold(const ScalarField& f, int m, int P, Resample method) {
    if (P < 1) throw std::invalid_argument("P must be positive");
    const Grid& g = f.grid();
    const int n = g.n;
    ScalarField out(g);
    const int mm = ((m % P) + P) % P;
    if ((4 * mm) % P == 0) {
        const int q = (4 * mm / P) % 4;
        auto w = [n](int k) { return ((k % n) + n) % n; };
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const int a = i - n / 2, b = j - n / 2;
                int sa = a, sb = b;  // source offsets R_{-q*90}(a, b)
                if (q == 1) { sa = b; sb = -a; }
                if (q == 2) { sa = -a; sb = -b; }
                if (q == 3) { sa = -b; sb = a; }
                out.at(i, j) = f.at(w(sa + n / 2), w(sb + n / 2));
            }
        return out;
    }
    const Mat2 R = Mat2::rotation(-kTwoPi * mm / P);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const Vec2 src = R * Vec2{g.coord(i), g.coord(j)};
            out.at(i, j) = method == Resample::Bilinear ? interpolate_bilinear(f, src.x, src.y)
                                                        : interpolate_lagrange8(f, src.x, src.y);
        }
    return out;
}

}  // namespace sqglab
