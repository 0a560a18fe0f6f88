#include "sqglab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sqglab {

AffineMotion AffineMotion::constant_rate(const Mat2& M, const Vec2& c) {
    AffineMotion a;
    a.A = [M](double t) { return M * t; };
    a.Adot = [M](double) { return M; };
    a.b = [c](double t) { return c * t; };
    a.bdot = [c](double) { return c; };
    return a;
}

AffineMotion AffineMotion::saddle(double sigma, const Vec2& center) {
    const Mat2 M = Mat2::diag(-sigma, sigma);
    AffineMotion a;
    a.A = [M](double t) { return M * t; };
    a.Adot = [M](double) { return M; };
    // x(t) - z = exp(tM)(x0 - z) gives b(t) = exp(-tM) z - z.
    a.b = [M, center](double t) { return expm(M * -t) * center - center; };
    a.bdot = [M, center](double t) { return (M * -1.0) * (expm(M * -t) * center); };
    return a;
}

namespace {

void riesz_into(const SpectralField& T, SpectralField& out, int component) {
    const Grid& g = T.grid();
    if (out.grid() != g) out = SpectralField(g);
    const int n = g.n, nc = g.nc();
    const cplx I(0.0, kRieszSign);
    for (int i = 0; i < n; ++i) {
        const double k1 = g.wavenumber(i);
        for (int j = 0; j < nc; ++j) {
            if ((i == 0 && j == 0) || i == n / 2 || j == n / 2) {
                out.at(i, j) = 0.0;
                continue;
            }
            const double k2 = j;
            const double inv = 1.0 / std::sqrt(k1 * k1 + k2 * k2);
            out.at(i, j) = I * ((component == 0 ? -k2 : k1) * inv) * T.at(i, j);
        }
    }
}

void derivative_into(const SpectralField& T, SpectralField& out, int axis) {
    const Grid& g = T.grid();
    if (out.grid() != g) out = SpectralField(g);
    const int n = g.n, nc = g.nc();
    const double ku = g.kunit();
    for (int i = 0; i < n; ++i) {
        const double k1 = ku * g.wavenumber(i);
        for (int j = 0; j < nc; ++j) {
            if (i == n / 2 || j == n / 2) {
                out.at(i, j) = 0.0;
                continue;
            }
            out.at(i, j) = cplx(0.0, axis == 0 ? k1 : ku * j) * T.at(i, j);
        }
    }
}

bool all_finite(const SpectralField& F) {
    for (const cplx& c : F.coeffs())
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
    return true;
}

double max_speed(const ScalarField& a, const ScalarField& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, a[k] * a[k] + b[k] * b[k]);
    return std::sqrt(m);
}

}  // namespace

SpectralField nonlinear_term(const SpectralField& T, bool dealias, double* vmax) {
    SolverConfig cfg;
    cfg.dealias = dealias;
    Integrator it(T.grid(), cfg);
    SpectralField out(T.grid());
    double vm = 0.0;
    it.rhs(T, 0.0, out, vm);
    if (vmax) *vmax = vm;
    return out;
}

ScalarField nonlinear_term(const ScalarField& theta) { return to_physical(nonlinear_term(to_spectral(theta))); }

double max_velocity(const SpectralField& T) {
    SpectralField V(T.grid());
    ScalarField a(T.grid()), b(T.grid());
    riesz_into(T, V, 0);
    to_physical(V, a);
    riesz_into(T, V, 1);
    to_physical(V, b);
    return max_speed(a, b);
}

Integrator::Integrator(const Grid& g, SolverConfig cfg) : g_(g), cfg_(std::move(cfg)) {
    if (cfg_.mode == VelocityMode::Frozen) {
        if (!cfg_.frozen) throw std::invalid_argument("frozen mode needs a velocity field");
        if (cfg_.frozen->x.grid() != g) throw std::invalid_argument("frozen velocity grid mismatch");
    }
    if (cfg_.filter_strength > 0.0) {
        filter_.resize(g.spectral_size());
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.nc(); ++j) {
                const double r = std::max(std::abs(g.wavenumber(i)), j) / (0.5 * g.n);
                filter_[static_cast<std::size_t>(i) * g.nc() + j] =
                    std::exp(-cfg_.filter_strength * std::pow(r, cfg_.filter_order));
            }
    }
    if (cfg_.mode == VelocityMode::Prescribed) {
        // An affine field jumps across the periodic boundary, and the product
        // with the ringing tail of a compactly supported datum then grows
        // without bound. Tapering the velocity to zero over 0.45L <= |x| <= 0.5L
        // keeps it smooth; run_prescribed keeps the solution out of that band.
        auto step = [](double u) {
            if (u <= 0.0) return 0.0;
            if (u >= 1.0) return 1.0;
            const double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
            return a / (a + b);
        };
        taper_.resize(g.n);
        for (int i = 0; i < g.n; ++i) taper_[i] = step((0.5 * g.L - std::abs(g.coord(i))) / (0.05 * g.L));
    }
}

void Integrator::rhs(const SpectralField& T, double t, SpectralField& out, double& vmax) {
    const Grid& g = T.grid();
    if (a_.grid() != g) {
        a_ = ScalarField(g);
        b_ = ScalarField(g);
        c_ = ScalarField(g);
        d_ = ScalarField(g);
        work_ = SpectralField(g);
    }
    switch (cfg_.mode) {
        case VelocityMode::Sqg:
            riesz_into(T, work_, 0);
            to_physical(work_, a_);
            riesz_into(T, work_, 1);
            to_physical(work_, b_);
            break;
        case VelocityMode::Prescribed: {
            const Mat2 Ad = cfg_.affine.Adot(t);
            const Vec2 c = expm(cfg_.affine.A(t)) * cfg_.affine.bdot(t);
            for (int i = 0; i < g.n; ++i) {
                const double x1 = g.coord(i);
                for (int j = 0; j < g.n; ++j) {
                    const double x2 = g.coord(j);
                    const double w = taper_[i] * taper_[j];
                    a_.at(i, j) = w * (Ad.a11 * x1 + Ad.a12 * x2 + c.x);
                    b_.at(i, j) = w * (Ad.a21 * x1 + Ad.a22 * x2 + c.y);
                }
            }
            break;
        }
        case VelocityMode::Frozen:
            a_ = cfg_.frozen->x;
            b_ = cfg_.frozen->y;
            break;
    }
    vmax = max_speed(a_, b_);
    derivative_into(T, work_, 0);
    to_physical(work_, c_);
    derivative_into(T, work_, 1);
    to_physical(work_, d_);
    for (std::size_t k = 0; k < a_.size(); ++k) c_[k] = -(a_[k] * c_[k] + b_[k] * d_[k]);
    to_spectral(c_, out);
    if (cfg_.dealias) dealias_inplace(out);
}

StepStatus Integrator::step(SpectralField& T, double t, double dt) {
    StepStatus st;
    const Grid& g = T.grid();
    if (k1_.grid() != g) {
        k1_ = k2_ = k3_ = k4_ = tmp_ = SpectralField(g);
    }
    double vm = 0.0, vtmp = 0.0;
    try {
        rhs(T, t, k1_, vm);
    } catch (const std::invalid_argument&) {  // to_spectral refuses non-finite products
        st.ok = false;
        st.reason = "non-finite state";
        return st;
    }
    st.vmax = vm;
    st.cfl = vm * dt / g.dx();
    if (st.cfl > cfg_.cfl_limit) {
        st.ok = false;
        st.reason = "CFL limit exceeded";
        return st;
    }
    const std::size_t N = T.coeffs().size();
    const cplx* x = T.coeffs().data();
    cplx* y = tmp_.coeffs().data();
    try {
        for (std::size_t k = 0; k < N; ++k) y[k] = x[k] + (0.5 * dt) * k1_.coeffs()[k];
        rhs(tmp_, t + 0.5 * dt, k2_, vtmp);
        for (std::size_t k = 0; k < N; ++k) y[k] = x[k] + (0.5 * dt) * k2_.coeffs()[k];
        rhs(tmp_, t + 0.5 * dt, k3_, vtmp);
        for (std::size_t k = 0; k < N; ++k) y[k] = x[k] + dt * k3_.coeffs()[k];
        rhs(tmp_, t + dt, k4_, vtmp);
    } catch (const std::invalid_argument&) {
        st.ok = false;
        st.reason = "non-finite state";
        return st;
    }
    const double w = dt / 6.0;
    for (std::size_t k = 0; k < N; ++k)
        y[k] = x[k] + w * (k1_.coeffs()[k] + 2.0 * k2_.coeffs()[k] + 2.0 * k3_.coeffs()[k] + k4_.coeffs()[k]);
    if (!filter_.empty())
        for (std::size_t k = 0; k < N; ++k) y[k] *= filter_[k];
    if (!all_finite(tmp_)) {
        st.ok = false;
        st.reason = "non-finite state";
        return st;
    }
    std::swap(T.coeffs(), tmp_.coeffs());
    return st;
}

StepStatus step(SpectralField& T, double t, double dt, const SolverConfig& cfg) {
    Integrator it(T.grid(), cfg);
    return it.step(T, t, dt);
}

double choose_dt(const SpectralField& T0, const SolverConfig& cfg) {
    if (cfg.dt > 0.0) return cfg.dt;
    Integrator it(T0.grid(), cfg);
    SpectralField tmp(T0.grid());
    double vm = 0.0;
    it.rhs(T0, 0.0, tmp, vm);
    if (vm <= 0.0) return cfg.t_end > 0.0 ? cfg.t_end : 1.0;
    return cfg.cfl_target * T0.grid().dx() / vm;
}

RunResult run(const SpectralField& T0, const SolverConfig& cfg, const Observer& obs) {
    RunResult r;
    r.final_state = T0;
    r.filtered = cfg.filter_strength > 0.0;
    const double dt0 = choose_dt(T0, cfg);
    const int nsteps = std::max(1, static_cast<int>(std::ceil(cfg.t_end / dt0 - 1e-9)));
    r.dt = cfg.t_end / nsteps;
    Integrator it(T0.grid(), cfg);
    if (obs && !obs(0.0, r.final_state, 0)) return r;
    for (int s = 0; s < nsteps; ++s) {
        const double t = s * r.dt;
        StepStatus st = it.step(r.final_state, t, r.dt);
        r.max_cfl = std::max(r.max_cfl, st.cfl);
        if (!st.ok) {
            r.halted = true;
            r.halt_reason = st.reason + " at t = " + std::to_string(t);
            r.t = t;
            return r;
        }
        r.steps = s + 1;
        r.t = (s + 1 == nsteps) ? cfg.t_end : (s + 1) * r.dt;
        if (obs && !obs(r.t, r.final_state, r.steps)) break;
    }
    return r;
}

ScalarField affine_pushforward(const Grid& g, const std::function<double(double, double)>& f0,
                               const AffineMotion& motion, double t) {
    const Mat2 E = expm(motion.A(t) * -1.0);
    const Vec2 b = motion.b(t);
    return ScalarField::sample(g, [&](double x1, double x2) {
        const Vec2 y = E * Vec2{x1, x2} - b;
        return f0(y.x, y.y);
    });
}

PrescribedResult run_prescribed(const Grid& g, const std::function<double(double, double)>& f0,
                                const AffineMotion& motion, double t_end, double dt, bool dealias,
                                const Observer& obs) {
    auto margin_check = [&](double t) {
        const ScalarField a = affine_pushforward(g, f0, motion, t);
        const double amax = a.max_abs();
        double edge = 0.0;
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                if (std::max(std::abs(g.coord(i)), std::abs(g.coord(j))) >= 0.45 * g.L)
                    edge = std::max(edge, std::abs(a.at(i, j)));
        if (edge > 1e-6 * amax)
            throw std::domain_error("deformation stretches the support beyond the torus margin at t = " +
                                    std::to_string(t));
    };
    margin_check(0.0);
    margin_check(t_end);
    SolverConfig cfg;
    cfg.mode = VelocityMode::Prescribed;
    cfg.affine = motion;
    cfg.t_end = t_end;
    cfg.dt = dt;
    cfg.dealias = dealias;
    const RunResult r = run(to_spectral(ScalarField::sample(g, f0)), cfg, obs);
    if (r.halted) throw std::runtime_error("prescribed run halted: " + r.halt_reason);
    PrescribedResult out;
    out.numeric = to_physical(r.final_state);
    out.analytic = affine_pushforward(g, f0, motion, r.t);
    out.t = r.t;
    out.steps = r.steps;
    for (std::size_t k = 0; k < out.numeric.size(); ++k)
        out.sup_error = std::max(out.sup_error, std::abs(out.numeric[k] - out.analytic[k]));
    return out;
}

VelocitySource bilinear_source(const VectorField& v) {
    return [v](double, const Vec2& x) { return Vec2{interpolate_bilinear(v.x, x.x, x.y), interpolate_bilinear(v.y, x.x, x.y)}; };
}

TrajectorySet integrate_trajectories(const VelocitySource& v, const std::vector<Vec2>& seeds, double t_end,
                                     double dt, int save_every, double wrap_L) {
    if (!(dt > 0.0)) throw std::invalid_argument("trajectory step must be positive");
    TrajectorySet ts;
    ts.seeds = seeds;
    std::vector<Vec2> x = seeds;
    const int nsteps = std::max(1, static_cast<int>(std::ceil(t_end / dt - 1e-9)));
    const double h = t_end / nsteps;
    ts.times.push_back(0.0);
    ts.positions.push_back(x);
    for (int s = 0; s < nsteps; ++s) {
        const double t = s * h;
        for (Vec2& p : x) {
            const Vec2 k1 = v(t, p);
            const Vec2 k2 = v(t + 0.5 * h, p + k1 * (0.5 * h));
            const Vec2 k3 = v(t + 0.5 * h, p + k2 * (0.5 * h));
            const Vec2 k4 = v(t + h, p + k3 * h);
            p = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::runtime_error("trajectory became non-finite");
            if (wrap_L > 0.0) p = {wrap_coord(p.x, wrap_L), wrap_coord(p.y, wrap_L)};
        }
        if ((s + 1) % std::max(1, save_every) == 0 || s + 1 == nsteps) {
            ts.times.push_back((s + 1) * h);
            ts.positions.push_back(x);
        }
    }
    return ts;
}

void advance_particles(std::vector<Vec2>& x, const VectorField& v_now, const VectorField& v_next, double dt) {
    const double L = v_now.x.grid().L;
    auto vel = [&](double w, const Vec2& p) {
        const double a = (1 - w) * interpolate_bilinear(v_now.x, p.x, p.y) + w * interpolate_bilinear(v_next.x, p.x, p.y);
        const double b = (1 - w) * interpolate_bilinear(v_now.y, p.x, p.y) + w * interpolate_bilinear(v_next.y, p.x, p.y);
        return Vec2{a, b};
    };
    for (Vec2& p : x) {
        const Vec2 k1 = vel(0.0, p);
        const Vec2 k2 = vel(0.5, p + k1 * (0.5 * dt));
        const Vec2 k3 = vel(0.5, p + k2 * (0.5 * dt));
        const Vec2 k4 = vel(1.0, p + k3 * dt);
        p = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        p = {wrap_coord(p.x, L), wrap_coord(p.y, L)};
    }
}

namespace {

struct GradFields {
    ScalarField v1, v2, g11, g12, g21, g22;
    SpectralField V1, V2, G11, G12, G21, G22;
};

GradFields grad_fields(const SpectralField& T) {
    GradFields f;
    riesz_velocity_hat(T, f.V1, f.V2);
    f.G11 = derivative(f.V1, 0);
    f.G12 = derivative(f.V1, 1);
    f.G21 = derivative(f.V2, 0);
    f.G22 = derivative(f.V2, 1);
    f.v1 = to_physical(f.V1);
    f.v2 = to_physical(f.V2);
    f.g11 = to_physical(f.G11);
    f.g12 = to_physical(f.G12);
    f.g21 = to_physical(f.G21);
    f.g22 = to_physical(f.G22);
    return f;
}

double spectral_norm(double a, double b, double c, double d) {
    return 0.5 * (std::hypot(a + d, c - b) + std::hypot(a - d, b + c));
}

}  // namespace

double max_velocity_gradient(const SpectralField& T) {
    const GradFields f = grad_fields(T);
    double m = 0.0;
    for (std::size_t k = 0; k < f.g11.size(); ++k)
        m = std::max(m, spectral_norm(f.g11[k], f.g12[k], f.g21[k], f.g22[k]));
    return m;
}

void velocity_and_gradient_at(const SpectralField& T, const Vec2& x, Vec2& v, Mat2& grad) {
    SpectralField V1, V2;
    riesz_velocity_hat(T, V1, V2);
    const SpectralField G11 = derivative(V1, 0), G12 = derivative(V1, 1), G21 = derivative(V2, 0),
                        G22 = derivative(V2, 1);
    const auto e = evaluate_at({&V1, &V2, &G11, &G12, &G21, &G22}, x.x, x.y);
    v = {e[0], e[1]};
    grad = {e[2], e[3], e[4], e[5]};
}

SaddlePoint locate_saddle(const SpectralField& T, const Vec2& guess, double max_dist) {
    SaddlePoint sp;
    const GradFields f = grad_fields(T);
    const double L = T.grid().L;
    const double vscale = std::max(max_speed(f.v1, f.v2), 1e-300);
    auto interp_v = [&](const Vec2& p) {
        return Vec2{interpolate_bilinear(f.v1, p.x, p.y), interpolate_bilinear(f.v2, p.x, p.y)};
    };
    auto interp_g = [&](const Vec2& p) {
        return Mat2{interpolate_bilinear(f.g11, p.x, p.y), interpolate_bilinear(f.g12, p.x, p.y),
                    interpolate_bilinear(f.g21, p.x, p.y), interpolate_bilinear(f.g22, p.x, p.y)};
    };
    Vec2 x = guess;
    const double cap = 0.25 * max_dist;
    for (int it = 0; it < 60; ++it) {
        const Vec2 v = interp_v(x);
        const Mat2 J = interp_g(x);
        if (std::abs(J.det()) < 1e-300) break;
        Vec2 dx = J.inverse() * v * -1.0;
        if (dx.norm() > cap) dx = dx * (cap / dx.norm());
        double lam = 1.0;
        const double r0 = v.norm();
        for (int h = 0; h < 12; ++h) {
            if (interp_v(x + dx * lam).norm() < r0 || h == 11) break;
            lam *= 0.5;
        }
        x = x + dx * lam;
        sp.iterations = it + 1;
        if ((dx * lam).norm() < 1e-10 * L) break;
    }
    // Polish on the exact trigonometric polynomial.
    const auto evalx = [&](const Vec2& p, Vec2& v, Mat2& J) {
        const auto e = evaluate_at({&f.V1, &f.V2, &f.G11, &f.G12, &f.G21, &f.G22}, p.x, p.y);
        v = {e[0], e[1]};
        J = {e[2], e[3], e[4], e[5]};
    };
    Vec2 v;
    Mat2 J;
    for (int it = 0; it < 8; ++it) {
        evalx(x, v, J);
        if (std::abs(J.det()) < 1e-300) break;
        Vec2 dx = J.inverse() * v * -1.0;
        if (dx.norm() > cap) dx = dx * (cap / dx.norm());
        x = x + dx;
        if (dx.norm() < 1e-13 * L) break;
    }
    evalx(x, v, J);
    sp.x = x;
    sp.grad = J;
    sp.residual = v.norm();
    if ((x - guess).norm() > max_dist) {
        sp.reason = "no velocity zero within the search radius";
    } else if (sp.residual > 1e-8 * vscale) {
        sp.reason = "Newton did not converge";
    } else if (J.det() >= 0.0) {
        sp.reason = "velocity zero is not hyperbolic";
    } else {
        sp.found = true;
    }
    return sp;
}

bool SaddleTracker::update(double t, const SpectralField& T) {
    if (lost_) return false;
    const Vec2 guess = points_.empty() ? z_ : points_.back();
    const SaddlePoint sp = locate_saddle(T, guess, max_dist_);
    if (!sp.found || (sp.x - z_).norm() > max_dist_) {
        lost_ = true;
        reason_ = sp.found ? "saddle drifted beyond the search radius" : sp.reason;
        return false;
    }
    Mat2 acc{};
    if (!times_.empty()) acc = acc_.back() + (grads_.back() + sp.grad) * (0.5 * (t - times_.back()));
    times_.push_back(t);
    points_.push_back(sp.x);
    grads_.push_back(sp.grad);
    acc_.push_back(acc);
    return true;
}

SaddleTrack track_saddle(const std::vector<std::pair<double, SpectralField>>& path, const Vec2& z, double max_dist) {
    SaddleTracker tr(z, max_dist);
    for (const auto& [t, T] : path)
        if (!tr.update(t, T)) break;
    SaddleTrack out;
    out.times = tr.times();
    out.points = tr.points();
    out.gradients = tr.gradients();
    out.accumulated = tr.accumulated();
    out.lost = tr.lost();
    out.last_valid_time = tr.last_valid_time();
    return out;
}

}  // namespace sqglab
