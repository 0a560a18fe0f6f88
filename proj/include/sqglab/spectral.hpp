#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace sqglab {

using cplx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// Periodic square grid. Sample (i, j) sits at x1 = -L/2 + i*dx, x2 = -L/2 + j*dx,
// so the origin is the sample (n/2, n/2). Index i runs over x1 and is the slow
// (row) index.
struct Grid {
    int n = 0;
    double L = kTwoPi;

    Grid() = default;
    Grid(int n_, double L_ = kTwoPi);

    double dx() const { return L / n; }
    double coord(int i) const { return -0.5 * L + i * dx(); }
    // 2*pi/L: physical wavenumber of lattice mode 1.
    double kunit() const { return kTwoPi / L; }
    // Signed lattice wavenumber of FFT index i in [0, n).
    int wavenumber(int i) const { return i <= n / 2 ? i : i - n; }
    std::size_t size() const { return static_cast<std::size_t>(n) * n; }
    int nc() const { return n / 2 + 1; }
    std::size_t spectral_size() const { return static_cast<std::size_t>(n) * nc(); }

    bool operator==(const Grid& o) const { return n == o.n && L == o.L; }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const Grid& g, double fill = 0.0);
    ScalarField(const Grid& g, std::vector<double> values);

    const Grid& grid() const { return grid_; }
    double& at(int i, int j) { return v_[static_cast<std::size_t>(i) * grid_.n + j]; }
    double at(int i, int j) const { return v_[static_cast<std::size_t>(i) * grid_.n + j]; }
    double& operator[](std::size_t k) { return v_[k]; }
    double operator[](std::size_t k) const { return v_[k]; }
    std::vector<double>& values() { return v_; }
    const std::vector<double>& values() const { return v_; }
    std::size_t size() const { return v_.size(); }

    ScalarField& operator+=(const ScalarField& o);
    ScalarField& operator-=(const ScalarField& o);
    ScalarField& operator*=(double a);

    double max_abs() const;
    double mean() const;
    bool all_finite() const;

    // Fill from f(x1, x2) on the grid nodes.
    static ScalarField sample(const Grid& g, const std::function<double(double, double)>& f);

private:
    Grid grid_;
    std::vector<double> v_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);

// Half-plane spectrum: row i <-> k1 = wavenumber(i), column j <-> k2 = j >= 0.
// coeff(k) multiplies exp(i k.x) with k in lattice units of 2*pi/L, so a field
// equal to exp(i k.x) has coefficient 1.
class SpectralField {
public:
    SpectralField() = default;
    explicit SpectralField(const Grid& g);

    const Grid& grid() const { return grid_; }
    cplx& at(int i, int j) { return c_[static_cast<std::size_t>(i) * grid_.nc() + j]; }
    cplx at(int i, int j) const { return c_[static_cast<std::size_t>(i) * grid_.nc() + j]; }
    std::vector<cplx>& coeffs() { return c_; }
    const std::vector<cplx>& coeffs() const { return c_; }

    // Coefficient of lattice mode (k1, k2), either half plane.
    cplx coeff(int k1, int k2) const;

    SpectralField& operator+=(const SpectralField& o);
    SpectralField& operator-=(const SpectralField& o);
    SpectralField& operator*=(double a);
    SpectralField& axpy(double a, const SpectralField& x);

private:
    Grid grid_;
    std::vector<cplx> c_;
};

struct VectorField {
    ScalarField x;
    ScalarField y;
};

SpectralField to_spectral(const ScalarField& f);
ScalarField to_physical(const SpectralField& F);
// In-place variants reuse the output storage.
void to_spectral(const ScalarField& f, SpectralField& out);
void to_physical(const SpectralField& F, ScalarField& out);

// Multiplier receives physical wavenumbers (kunit * lattice index).
using Multiplier = std::function<cplx(double k1, double k2)>;
SpectralField apply_multiplier(const SpectralField& F, const Multiplier& m);

// Global sign of the Riesz velocity; +1 reproduces the product-mode identity
// v[sin(qx1) sin(qx2)] = 2^{-1/2} (-sin cos, cos sin).
constexpr double kRieszSign = 1.0;

// v_hat = i k_perp / |k| theta_hat, k_perp = (-k2, k1), zero mode dropped.
void riesz_velocity_hat(const SpectralField& T, SpectralField& V1, SpectralField& V2);
VectorField riesz_velocity(const ScalarField& theta);
VectorField riesz_velocity(const SpectralField& T);

// 2/3 rule: zero modes with max(|k1|, |k2|) > n/3.
SpectralField dealias(const SpectralField& F);
void dealias_inplace(SpectralField& F);
bool dealias_keeps(const Grid& g, int k1, int k2);

VectorField gradient(const ScalarField& f);
VectorField gradient(const SpectralField& F);
// d/dx_axis of a spectral field (axis 0 -> x1, 1 -> x2).
SpectralField derivative(const SpectralField& F, int axis, int order = 1);

// Spectral divergence of a vector field, returned as a physical field.
ScalarField divergence(const VectorField& v);

// Exact trigonometric-polynomial value at an arbitrary point. Several fields
// sharing the same point are evaluated with one set of phase factors.
double evaluate_at(const SpectralField& F, double x1, double x2);
std::vector<double> evaluate_at(const std::vector<const SpectralField*>& fields, double x1, double x2);

// Bilinear interpolation of grid samples with periodic wrap.
double interpolate_bilinear(const ScalarField& f, double x1, double x2);

// Map a coordinate into [-L/2, L/2).
double wrap_coord(double x, double L);

}  // namespace sqglab
