#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sqglab/spectral.hpp"

namespace sqglab {

enum class NormKind { L2, Lp, Linf, Hs_inhom, Hs_hom, SS_hom, Ck, Ck_alpha };

NormKind parse_norm_kind(const std::string& s);
std::string norm_kind_name(NormKind k);

struct NormRequest {
    NormKind kind = NormKind::L2;
    double beta = 0.0;  // Sobolev index (Hs_*, SS_hom)
    double p = 2.0;     // Lp exponent
    int k = 0;          // derivative order (Ck, Ck_alpha)
    double alpha = 0.0;
    // Optional annulus restriction rmin <= |x| < rmax for pointwise norms.
    std::optional<std::pair<double, double>> annulus;

    void validate() const;
};

struct NormValue {
    double value = 0.0;
    std::string method;
    std::optional<double> error_bar;
};

NormValue evaluate_norm(const ScalarField& f, const NormRequest& req);

// Fourier Sobolev norm with L^2 normalisation ||f||_{L2}^2 = L^2 sum |c_k|^2.
// Negative beta is accepted for the homogeneous norm (zero mode dropped).
double sobolev_norm(const SpectralField& F, double beta, bool homogeneous);
double sobolev_norm(const ScalarField& f, double beta, bool homogeneous);

double lp_norm(const ScalarField& f, double p);
double linf_norm(const ScalarField& f);

// Riemann zeta (std) and Dirichlet beta; used by the lattice sums below.
double dirichlet_beta(double s);
// Epstein zeta of the square lattice, sum over m != 0 of |m|^{-a} (continued for a < 2).
double square_lattice_zeta(double a);

// 4^s Gamma(1+s) / (pi |Gamma(-s)|): the fractional Laplacian constant in 2D.
double fractional_laplacian_constant(double s);
// SS^2 = (2 / C(2,s)) ||f||_{H^s}^2 exactly on the torus; returns sqrt(2/C).
double ss_fourier_ratio(double s);

struct SsOptions {
    double support_tol = 1e-14;      // relative threshold defining the support
    std::size_t exact_limit = 40000; // max support size for the exact pair sum
    std::size_t strata = 4096;
    unsigned seed = 12345;
};

// Double-integral seminorm sqrt( int int |f(x)-f(y)|^2 / |x-y|^{2+2s} ) over
// torus x plane, evaluated on grid pairs with the periodised kernel plus the
// lattice correction for the singular diagonal.
NormValue ss_norm_detail(const ScalarField& f, double s, const SsOptions& opt = {});
double ss_norm(const ScalarField& f, double s);

struct SsCalibration {
    double s = 0.0;
    int n = 0;
    double measured_ratio = 0.0;  // ss_norm / sobolev_norm on the reference Gaussian
    double analytic_ratio = 0.0;  // sqrt(2 / C(2,s))
};
SsCalibration ss_calibrate(double s, const Grid& grid);

// sup over the grid of |D^gamma f| for |gamma| = k, plus (alpha > 0) the largest
// Hoelder quotient of the order-k derivatives over the probed pair set.
double holder_norm(const ScalarField& f, int k, double alpha);

struct DecompositionGap {
    double gap = 0.0;
    double bound = 0.0;
    double ratio() const { return bound > 0.0 ? gap / bound : 0.0; }
};

// Pieces f_j supported in B_{2R_j} \ B_{R_j} with R_{j+1} <= R_j / 4.
// gap = | ||sum f_j||^2 - sum ||f_j||^2 | in the double-integral seminorm, which
// for disjoint supports reduces to the cross terms -2 int int f_i(x) f_j(y) K.
DecompositionGap sum_decomposition_gap(const std::vector<ScalarField>& pieces, const std::vector<double>& radii,
                                       double s, double delta);

}  // namespace sqglab
