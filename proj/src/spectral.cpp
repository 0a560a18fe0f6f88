#include "sqglab/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

namespace sqglab {

namespace {

// The FFTW planner is not thread safe; plans are created once per n under a
// lock and then executed through the new-array interface on per-thread buffers.
struct Plans {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
};

struct Buffers {
    double* real = nullptr;
    fftw_complex* spec = nullptr;
    Buffers() = default;
    Buffers(const Buffers&) = delete;
    Buffers& operator=(const Buffers&) = delete;
    ~Buffers() {
        if (real) fftw_free(real);
        if (spec) fftw_free(spec);
    }
};

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

const Plans& plans_for(int n) {
    static std::map<int, Plans> cache;
    std::lock_guard<std::mutex> lock(planner_mutex());
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    const std::size_t nr = static_cast<std::size_t>(n) * n;
    const std::size_t nc = static_cast<std::size_t>(n) * (n / 2 + 1);
    double* r = fftw_alloc_real(nr);
    fftw_complex* c = fftw_alloc_complex(nc);
    Plans p;
    p.r2c = fftw_plan_dft_r2c_2d(n, n, r, c, FFTW_ESTIMATE);
    p.c2r = fftw_plan_dft_c2r_2d(n, n, c, r, FFTW_ESTIMATE);
    fftw_free(r);
    fftw_free(c);
    if (!p.r2c || !p.c2r) throw std::runtime_error("FFT planning failed for n=" + std::to_string(n));
    return cache.emplace(n, p).first->second;
}

Buffers& buffers_for(int n) {
    thread_local std::unordered_map<int, Buffers> bufs;
    Buffers& b = bufs[n];
    if (!b.real) {
        b.real = fftw_alloc_real(static_cast<std::size_t>(n) * n);
        b.spec = fftw_alloc_complex(static_cast<std::size_t>(n) * (n / 2 + 1));
    }
    return b;
}

// Sample origin sits at -L/2, which multiplies mode k by (-1)^(k1+k2).
inline double centering_sign(int i, int j) { return ((i + j) & 1) ? -1.0 : 1.0; }

void zero_nyquist(SpectralField& F) {
    const Grid& g = F.grid();
    const int n = g.n, nc = g.nc();
    for (int j = 0; j < nc; ++j) F.at(n / 2, j) = 0.0;
    for (int i = 0; i < n; ++i) F.at(i, n / 2) = 0.0;
}

}  // namespace

Grid::Grid(int n_, double L_) : n(n_), L(L_) {
    if (n < 16 || n % 2 != 0) throw std::invalid_argument("grid size must be even and >= 16, got " + std::to_string(n));
    if (!(L > 0.0) || !std::isfinite(L)) throw std::invalid_argument("domain length must be positive");
}

ScalarField::ScalarField(const Grid& g, double fill) : grid_(g), v_(g.size(), fill) {}

ScalarField::ScalarField(const Grid& g, std::vector<double> values) : grid_(g), v_(std::move(values)) {
    if (v_.size() != g.size()) throw std::invalid_argument("value count does not match grid");
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
    if (grid_ != o.grid_) throw std::invalid_argument("grid mismatch");
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
    return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
    if (grid_ != o.grid_) throw std::invalid_argument("grid mismatch");
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
    return *this;
}

ScalarField& ScalarField::operator*=(double a) {
    for (double& x : v_) x *= a;
    return *this;
}

double ScalarField::max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
}

double ScalarField::mean() const {
    double s = 0.0;
    for (double x : v_) s += x;
    return v_.empty() ? 0.0 : s / static_cast<double>(v_.size());
}

bool ScalarField::all_finite() const {
    return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
}

ScalarField ScalarField::sample(const Grid& g, const std::function<double(double, double)>& f) {
    ScalarField out(g);
    for (int i = 0; i < g.n; ++i) {
        const double x1 = g.coord(i);
        for (int j = 0; j < g.n; ++j) out.at(i, j) = f(x1, g.coord(j));
    }
    return out;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

SpectralField::SpectralField(const Grid& g) : grid_(g), c_(g.spectral_size(), cplx(0.0, 0.0)) {}

cplx SpectralField::coeff(int k1, int k2) const {
    const int n = grid_.n;
    auto idx = [n](int k) { return ((k % n) + n) % n; };
    if (std::abs(k2) > n / 2 || std::abs(k1) > n / 2) throw std::out_of_range("wavenumber outside the grid");
    if (k2 < 0) return std::conj(at(idx(-k1), -k2));
    return at(idx(k1), k2);
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
    if (grid_ != o.grid_) throw std::invalid_argument("grid mismatch");
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
    return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
    if (grid_ != o.grid_) throw std::invalid_argument("grid mismatch");
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
    return *this;
}

SpectralField& SpectralField::operator*=(double a) {
    for (cplx& x : c_) x *= a;
    return *this;
}

SpectralField& SpectralField::axpy(double a, const SpectralField& x) {
    if (grid_ != x.grid_) throw std::invalid_argument("grid mismatch");
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += a * x.c_[k];
    return *this;
}

void to_spectral(const ScalarField& f, SpectralField& out) {
    const Grid& g = f.grid();
    if (!f.all_finite()) throw std::invalid_argument("to_spectral: non-finite input values");
    const Plans& p = plans_for(g.n);
    Buffers& b = buffers_for(g.n);
    std::copy(f.values().begin(), f.values().end(), b.real);
    fftw_execute_dft_r2c(p.r2c, b.real, b.spec);
    if (out.grid() != g || out.coeffs().size() != g.spectral_size()) out = SpectralField(g);
    const int n = g.n, nc = g.nc();
    const double scale = 1.0 / (static_cast<double>(n) * n);
    cplx* o = out.coeffs().data();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < nc; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * nc + j;
            o[k] = cplx(b.spec[k][0], b.spec[k][1]) * (scale * centering_sign(i, j));
        }
    }
}

SpectralField to_spectral(const ScalarField& f) {
    SpectralField F(f.grid());
    to_spectral(f, F);
    return F;
}

void to_physical(const SpectralField& F, ScalarField& out) {
    const Grid& g = F.grid();
    const Plans& p = plans_for(g.n);
    Buffers& b = buffers_for(g.n);
    const int n = g.n, nc = g.nc();
    const cplx* in = F.coeffs().data();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < nc; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * nc + j;
            const cplx c = in[k] * centering_sign(i, j);
            b.spec[k][0] = c.real();
            b.spec[k][1] = c.imag();
        }
    }
    fftw_execute_dft_c2r(p.c2r, b.spec, b.real);
    if (out.grid() != g || out.size() != g.size()) out = ScalarField(g);
    std::copy(b.real, b.real + g.size(), out.values().begin());
}

ScalarField to_physical(const SpectralField& F) {
    ScalarField f(F.grid());
    to_physical(F, f);
    return f;
}

SpectralField apply_multiplier(const SpectralField& F, const Multiplier& m) {
    const Grid& g = F.grid();
    SpectralField out(g);
    const double ku = g.kunit();
    for (int i = 0; i < g.n; ++i) {
        const int k1 = g.wavenumber(i);
        for (int j = 0; j < g.nc(); ++j) {
            const cplx mk = m(ku * k1, ku * j);
            if (!std::isfinite(mk.real()) || !std::isfinite(mk.imag()))
                throw std::domain_error("multiplier is not finite at mode (" + std::to_string(k1) + ", " +
                                        std::to_string(j) + ")");
            out.at(i, j) = mk * F.at(i, j);
        }
    }
    return out;
}

void riesz_velocity_hat(const SpectralField& T, SpectralField& V1, SpectralField& V2) {
    const Grid& g = T.grid();
    V1 = SpectralField(g);
    V2 = SpectralField(g);
    const int n = g.n, nc = g.nc();
    const cplx I(0.0, kRieszSign);
    for (int i = 0; i < n; ++i) {
        const double k1 = g.wavenumber(i);
        for (int j = 0; j < nc; ++j) {
            if (i == 0 && j == 0) continue;
            const double k2 = j;
            const double inv = 1.0 / std::sqrt(k1 * k1 + k2 * k2);
            const cplx t = T.at(i, j);
            V1.at(i, j) = I * (-k2 * inv) * t;
            V2.at(i, j) = I * (k1 * inv) * t;
        }
    }
    zero_nyquist(V1);
    zero_nyquist(V2);
}

VectorField riesz_velocity(const SpectralField& T) {
    SpectralField V1, V2;
    riesz_velocity_hat(T, V1, V2);
    return VectorField{to_physical(V1), to_physical(V2)};
}

VectorField riesz_velocity(const ScalarField& theta) { return riesz_velocity(to_spectral(theta)); }

bool dealias_keeps(const Grid& g, int k1, int k2) {
    // max(|k1|,|k2|) <= n/3 in exact integer arithmetic.
    return 3 * std::abs(k1) <= g.n && 3 * std::abs(k2) <= g.n;
}

void dealias_inplace(SpectralField& F) {
    const Grid& g = F.grid();
    for (int i = 0; i < g.n; ++i) {
        const int k1 = g.wavenumber(i);
        for (int j = 0; j < g.nc(); ++j)
            if (!dealias_keeps(g, k1, j)) F.at(i, j) = 0.0;
    }
}

SpectralField dealias(const SpectralField& F) {
    SpectralField out = F;
    dealias_inplace(out);
    return out;
}

SpectralField derivative(const SpectralField& F, int axis, int order) {
    const Grid& g = F.grid();
    SpectralField out(g);
    const double ku = g.kunit();
    for (int i = 0; i < g.n; ++i) {
        const double k1 = ku * g.wavenumber(i);
        for (int j = 0; j < g.nc(); ++j) {
            const double k = axis == 0 ? k1 : ku * j;
            out.at(i, j) = std::pow(cplx(0.0, k), order) * F.at(i, j);
        }
    }
    if (order % 2 == 1) zero_nyquist(out);
    return out;
}

VectorField gradient(const SpectralField& F) {
    return VectorField{to_physical(derivative(F, 0)), to_physical(derivative(F, 1))};
}

VectorField gradient(const ScalarField& f) { return gradient(to_spectral(f)); }

ScalarField divergence(const VectorField& v) {
    SpectralField d = derivative(to_spectral(v.x), 0);
    d += derivative(to_spectral(v.y), 1);
    return to_physical(d);
}

std::vector<double> evaluate_at(const std::vector<const SpectralField*>& fields, double x1, double x2) {
    std::vector<double> out(fields.size(), 0.0);
    if (fields.empty()) return out;
    const Grid& g = fields.front()->grid();
    const int n = g.n, nc = g.nc();
    const double ku = g.kunit();
    std::vector<cplx> e1(n), e2(nc);
    for (int i = 0; i < n; ++i) e1[i] = std::polar(1.0, ku * g.wavenumber(i) * x1);
    for (int j = 0; j < nc; ++j) e2[j] = std::polar(j == 0 || j == n / 2 ? 1.0 : 2.0, ku * j * x2);
    for (std::size_t f = 0; f < fields.size(); ++f) {
        const SpectralField& F = *fields[f];
        if (F.grid() != g) throw std::invalid_argument("evaluate_at: grid mismatch");
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const cplx* row = &F.coeffs()[static_cast<std::size_t>(i) * nc];
            cplx s(0.0, 0.0);
            for (int j = 0; j < nc; ++j) s += row[j] * e2[j];
            acc += (s * e1[i]).real();
        }
        out[f] = acc;
    }
    return out;
}

double evaluate_at(const SpectralField& F, double x1, double x2) { return evaluate_at({&F}, x1, x2)[0]; }

double wrap_coord(double x, double L) {
    double y = std::fmod(x + 0.5 * L, L);
    if (y < 0) y += L;
    return y - 0.5 * L;
}

double interpolate_bilinear(const ScalarField& f, double x1, double x2) {
    const Grid& g = f.grid();
    const double dx = g.dx();
    const double u = (wrap_coord(x1, g.L) + 0.5 * g.L) / dx;
    const double w = (wrap_coord(x2, g.L) + 0.5 * g.L) / dx;
    const int i0 = static_cast<int>(std::floor(u));
    const int j0 = static_cast<int>(std::floor(w));
    const double a = u - i0, b = w - j0;
    const int n = g.n;
    auto idx = [n](int k) { return ((k % n) + n) % n; };
    const int i1 = idx(i0 + 1), j1 = idx(j0 + 1);
    const int ii = idx(i0), jj = idx(j0);
    return (1 - a) * (1 - b) * f.at(ii, jj) + a * (1 - b) * f.at(i1, jj) + (1 - a) * b * f.at(ii, j1) +
           a * b * f.at(i1, j1);
}

}  // namespace sqglab
