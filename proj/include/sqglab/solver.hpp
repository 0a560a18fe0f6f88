#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sqglab/linalg.hpp"
#include "sqglab/spectral.hpp"

namespace sqglab {

// Affine velocity u(x,t) = A'(t) x + exp(A(t)) b'(t). For commuting A(t) the
// exact transport solution is f(x,t) = f0(exp(-A(t)) x - b(t)).
struct AffineMotion {
    std::function<Mat2(double)> A, Adot;
    std::function<Vec2(double)> b, bdot;

    Vec2 velocity(double t, const Vec2& x) const { return Adot(t) * x + expm(A(t)) * bdot(t); }
    Vec2 pullback(double t, const Vec2& x) const { return expm(A(t) * -1.0) * x - b(t); }

    // A(t) = t M, b(t) = t c.
    static AffineMotion constant_rate(const Mat2& M, const Vec2& c = {});
    // Hyperbolic point at `center` with u = diag(-sigma, sigma) (x - center).
    static AffineMotion saddle(double sigma, const Vec2& center = {});
    static AffineMotion none() { return constant_rate(Mat2{}); }
};

enum class VelocityMode { Sqg, Prescribed, Frozen };

struct SolverConfig {
    double dt = 0.0;          // <= 0: chosen from cfl_target at t = 0
    double t_end = 1.0;
    bool dealias = true;
    VelocityMode mode = VelocityMode::Sqg;
    AffineMotion affine = AffineMotion::none();
    std::optional<VectorField> frozen;
    double filter_strength = 0.0;  // exp(-a (|k|/kmax)^order) after each step; 0 disables
    int filter_order = 36;
    double cfl_target = 0.4;
    double cfl_limit = 0.5;
};

// -v[theta] . grad(theta) with the product dealiased when requested.
SpectralField nonlinear_term(const SpectralField& T, bool dealias = true, double* vmax = nullptr);
ScalarField nonlinear_term(const ScalarField& theta);

double max_velocity(const SpectralField& T);

struct StepStatus {
    bool ok = true;
    double vmax = 0.0;
    double cfl = 0.0;
    std::string reason;
};

// RK4 integrator with reusable workspace.
class Integrator {
public:
    Integrator(const Grid& g, SolverConfig cfg);
    // Advances T from t to t + dt in place. On a non-finite result T keeps the
    // last good state and the status reports the halt.
    StepStatus step(SpectralField& T, double t, double dt);
    void rhs(const SpectralField& T, double t, SpectralField& out, double& vmax);
    const SolverConfig& config() const { return cfg_; }
    bool filtered() const { return cfg_.filter_strength > 0.0; }

private:
    Grid g_;
    SolverConfig cfg_;
    SpectralField k1_, k2_, k3_, k4_, tmp_, work_;
    ScalarField a_, b_, c_, d_;
    std::vector<double> filter_;
    std::vector<double> taper_;  // prescribed mode: 1 inside 0.45L, 0 at the box edge
};

StepStatus step(SpectralField& T, double t, double dt, const SolverConfig& cfg);

struct RunResult {
    SpectralField final_state;
    double t = 0.0;
    double dt = 0.0;
    int steps = 0;
    bool halted = false;
    std::string halt_reason;
    bool filtered = false;
    double max_cfl = 0.0;
};

// Observer is called at t = 0 and after every step; returning false stops the run.
using Observer = std::function<bool(double t, const SpectralField& T, int step)>;

double choose_dt(const SpectralField& T0, const SolverConfig& cfg);
RunResult run(const SpectralField& T0, const SolverConfig& cfg, const Observer& obs = {});

struct PrescribedResult {
    ScalarField numeric;
    ScalarField analytic;
    double sup_error = 0.0;
    double t = 0.0;
    int steps = 0;
};

// Transport of f0 by an affine velocity and comparison with the exact pushforward.
PrescribedResult run_prescribed(const Grid& g, const std::function<double(double, double)>& f0,
                                const AffineMotion& motion, double t_end, double dt = 0.0, bool dealias = true,
                                const Observer& obs = {});
ScalarField affine_pushforward(const Grid& g, const std::function<double(double, double)>& f0,
                               const AffineMotion& motion, double t);

using VelocitySource = std::function<Vec2(double t, const Vec2& x)>;

VelocitySource bilinear_source(const VectorField& v);

struct TrajectorySet {
    std::vector<Vec2> seeds;
    std::vector<double> times;
    std::vector<std::vector<Vec2>> positions;  // [time][seed]
};

TrajectorySet integrate_trajectories(const VelocitySource& v, const std::vector<Vec2>& seeds, double t_end,
                                     double dt, int save_every = 1, double wrap_L = 0.0);

// One RK4 step for particles between two velocity snapshots, linear in time.
void advance_particles(std::vector<Vec2>& x, const VectorField& v_now, const VectorField& v_next, double dt);

// max over the grid of the spectral norm of grad v.
double max_velocity_gradient(const SpectralField& T);

struct SaddlePoint {
    bool found = false;
    Vec2 x;
    Mat2 grad;  // [d1 v1, d2 v1; d1 v2, d2 v2]
    double residual = 0.0;
    int iterations = 0;
    std::string reason;
};

// Damped Newton for v = 0 near `guess` (bilinear samples of v and of its
// spectral gradient), polished with exact trigonometric evaluation. A zero with
// det(grad v) >= 0 is not a saddle and is reported as not found.
SaddlePoint locate_saddle(const SpectralField& T, const Vec2& guess, double max_dist);

// Exact velocity and velocity gradient at a point.
void velocity_and_gradient_at(const SpectralField& T, const Vec2& x, Vec2& v, Mat2& grad);

class SaddleTracker {
public:
    SaddleTracker(const Vec2& z, double max_dist) : z_(z), max_dist_(max_dist) {}
    // Returns false once the saddle is lost; later calls are ignored.
    bool update(double t, const SpectralField& T);

    bool lost() const { return lost_; }
    double last_valid_time() const { return times_.empty() ? 0.0 : times_.back(); }
    const std::vector<double>& times() const { return times_; }
    const std::vector<Vec2>& points() const { return points_; }
    const std::vector<Mat2>& gradients() const { return grads_; }
    const std::vector<Mat2>& accumulated() const { return acc_; }  // A(t) by the trapezoid rule
    std::string reason() const { return reason_; }

private:
    Vec2 z_;
    double max_dist_;
    bool lost_ = false;
    std::string reason_;
    std::vector<double> times_;
    std::vector<Vec2> points_;
    std::vector<Mat2> grads_, acc_;
};

struct SaddleTrack {
    std::vector<double> times;
    std::vector<Vec2> points;
    std::vector<Mat2> gradients, accumulated;
    bool lost = false;
    double last_valid_time = 0.0;
};

SaddleTrack track_saddle(const std::vector<std::pair<double, SpectralField>>& path, const Vec2& z, double max_dist);

}  // namespace sqglab
