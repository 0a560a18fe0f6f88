#pragma once

#include <string>
#include <vector>

#include "sqglab/linalg.hpp"
#include "sqglab/spectral.hpp"

namespace sqglab {

// Radial cutoff g. "bump" is the smooth step exp(-1/u)/(exp(-1/u)+exp(-1/(1-u)))
// in u = 2(1-|x|): equal to 1 on |x| <= 1/2 and 0 on |x| >= 1. "none" is g == 1.
struct CutoffSpec {
    enum class Kind { Bump, None };
    Kind kind = Kind::Bump;

    double operator()(double r) const;
    std::string name() const { return kind == Kind::Bump ? "bump" : "none"; }
    static CutoffSpec parse(const std::string& name);
};

// Unique N > e with lambda^{2-s} N^{1-s} = K log N.
double solve_scale_relation(double s, double K, double lambda);

struct BackgroundParams {
    double s = 1.75;
    double K = 1.0;
    int P = 4;
    double lambda_requested = 0.0;
    double lambda = 0.0;  // after rounding: lambda * N = k exactly
    double N = 0.0;
    int k_lattice = 0;    // rounded carrier wavenumber in units of 2*pi/L
    double k = 0.0;       // physical carrier wavenumber lambda * N

    double amplitude() const;  // K^{-1} lambda^{1-s} N^{-s}
    double center() const { return 1.0 / std::sqrt(lambda); }
    double scale_residual() const;
};

// Solves the scale relation, rounds lambda*N to a lattice wavenumber and
// re-solves so both the scale relation and the lattice condition hold.
BackgroundParams make_background_params(double s, double K, int P, double lambda, const Grid& grid);

// Raises std::invalid_argument naming the first violated inequality.
void validate_exponents(double s, double gamma, double eta, double epsilon);

struct PerturbationParams {
    double B = 1.5;
    double eta = 0.01;
    double gamma = 0.01;
    double epsilon = 0.1;
    double lambda_t = 0.0;  // lambda^B unless overridden
    double N_t = 0.0;       // lambda_t^{1-eta} unless overridden
    double kp = 0.0;        // physical carrier, rounded to a lattice wavenumber
    int kp_lattice = 0;
    bool desk_override = false;

    double amplitude(const BackgroundParams& p) const;  // K^{-1} lt^{1-s} Nt^{-s}
};

// lambda_t_override / N_t_override <= 0 select the asymptotic relations.
PerturbationParams make_perturbation_params(const BackgroundParams& p, double B, double eta, double gamma,
                                            double epsilon, const Grid& grid, double lambda_t_override = 0.0,
                                            double N_t_override = 0.0);

// Centre of piece m: R_m (lambda^{-1/2}, 0).
Vec2 piece_center(const BackgroundParams& p, int m);

ScalarField make_background(const BackgroundParams& p, const CutoffSpec& g, const Grid& grid);
VectorField pseudovelocity_background(const BackgroundParams& p, const CutoffSpec& g, const Grid& grid);

ScalarField make_perturbation(const BackgroundParams& p, const PerturbationParams& q, const CutoffSpec& g,
                              const Grid& grid);

// Affine deformation x' = exp(-A) y - b applied in each sector frame y.
struct Deformation {
    Mat2 A;
    Vec2 b;
};

// Sector-frame pseudovelocity of the (deformed) perturbation. Off-diagonal
// entries of A beyond offdiag_tol are reported in warnings.
VectorField pseudovelocity_perturbation(const BackgroundParams& p, const PerturbationParams& q,
                                        const CutoffSpec& g, const Grid& grid, const Deformation& d,
                                        std::vector<std::string>* warnings = nullptr, double offdiag_tol = 1e-8);

// Smooth partition of unity subordinate to the P angular sectors.
double sector_weight(double x1, double x2, int m, int P);

struct GluingSchedule {
    double eps_total = 1.0;  // size of the glued datum; sets K_j
    int J = 1;
    int P = 4;
    double s = 1.75;
    std::vector<double> lambda;  // requested lambda_j, j = 1..J
    double B = 1.5, eta = 0.01, gamma = 0.01;
    double epsilon = 0.1;  // exponent in 2-2s+epsilon+eta < 0, unrelated to eps_total
    double lambda_t_ratio = 0.0;  // desk override: lt_j = ratio * lambda_j
    double N_t = 0.0;             // desk override for every piece
    bool check_growth = true;     // enforce lambda_j >= exp(K_j)

    double K(int j) const;  // P^{1/2} 2^j / eps, j is 1-based
};

struct GluedPiece {
    int j = 0;
    BackgroundParams background;
    PerturbationParams perturbation;
    double r_inner = 0.0, r_outer = 0.0;  // annulus [lambda^{-1/2}/2, 2 lambda^{-1/2}]
};

struct GluedDatum {
    ScalarField theta;
    std::vector<ScalarField> pieces;
    std::vector<GluedPiece> meta;
};

// Validates the schedule (separation, growth, resolution of the finest piece).
std::vector<GluedPiece> plan_glued(const GluingSchedule& sch, const Grid& grid);
GluedDatum make_glued(const GluingSchedule& sch, const Grid& grid);

enum class Resample { Bilinear, Lagrange8 };

// Rotation by 2*pi*m/P about the origin: out(x) = f(R_{-m} x). Quarter turns are
// exact sample permutations; other angles are resampled.
ScalarField rotate_pfold(const ScalarField& f, int m, int P, Resample method = Resample::Lagrange8);

// Interpolation used by rotate_pfold, exposed for symmetry checks.
double interpolate_lagrange8(const ScalarField& f, double x1, double x2);

}  // namespace sqglab
