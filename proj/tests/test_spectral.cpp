#include <doctest.h>

#include <cmath>
#include <random>

#include "sqglab/spectral.hpp"

using namespace sqglab;

namespace {

ScalarField random_field(const Grid& g, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ScalarField f(g);
    for (auto& x : f.values()) x = u(rng);
    return f;
}

// Random real field with modes |k1|,|k2| <= kmax only.
ScalarField random_bandlimited(const Grid& g, int kmax, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    SpectralField F(g);
    for (int i = 0; i < g.n; ++i) {
        const int k1 = g.wavenumber(i);
        if (std::abs(k1) > kmax) continue;
        for (int j = 0; j <= kmax; ++j) F.at(i, j) = cplx(nd(rng), nd(rng));
    }
    return to_physical(F);  // c2r projects onto the Hermitian part
}

double max_diff(const ScalarField& a, const ScalarField& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

double l2(const ScalarField& f) {
    double s = 0.0;
    for (double x : f.values()) s += x * x;
    return std::sqrt(s * f.grid().dx() * f.grid().dx());
}

}  // namespace

TEST_CASE("grid rejects small or odd sizes") {
    CHECK_THROWS(Grid(8));
    CHECK_THROWS(Grid(17));
    CHECK_NOTHROW(Grid(16));
    Grid g(16);
    CHECK(g.coord(8) == doctest::Approx(0.0));
    CHECK(g.wavenumber(15) == -1);
    CHECK(g.wavenumber(8) == 8);
}

TEST_CASE("constant field has a single unit zero mode") {
    Grid g(32);
    SpectralField F = to_spectral(ScalarField(g, 1.0));
    CHECK(std::abs(F.coeff(0, 0) - cplx(1.0, 0.0)) < 1e-14);
    double other = 0.0;
    for (std::size_t k = 1; k < F.coeffs().size(); ++k) other = std::max(other, std::abs(F.coeffs()[k]));
    CHECK(other < 1e-14);
}

TEST_CASE("sin(x1) has coefficients -i/2 and +i/2") {
    Grid g(32);
    SpectralField F = to_spectral(ScalarField::sample(g, [](double x, double) { return std::sin(x); }));
    CHECK(std::abs(F.coeff(1, 0) - cplx(0.0, -0.5)) < 1e-14);
    CHECK(std::abs(F.coeff(-1, 0) - cplx(0.0, 0.5)) < 1e-14);
}

TEST_CASE("transform matches a direct DFT at n=16") {
    Grid g(16, 3.0);
    ScalarField f = random_field(g, 7);
    SpectralField F = to_spectral(f);
    const int n = g.n;
    double err = 0.0;
    for (int k1 = -n / 2 + 1; k1 <= n / 2; ++k1) {
        for (int k2 = 0; k2 <= n / 2; ++k2) {
            cplx s(0.0, 0.0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const double ph = -g.kunit() * (k1 * g.coord(i) + k2 * g.coord(j));
                    s += f.at(i, j) * std::polar(1.0, ph);
                }
            s /= double(n * n);
            err = std::max(err, std::abs(s - F.coeff(k1, k2)));
        }
    }
    CHECK(err < 1e-13);
}

TEST_CASE("round trip is exact to machine precision") {
    for (int n : {16, 64, 128}) {
        Grid g(n);
        ScalarField f = random_field(g, n);
        ScalarField back = to_physical(to_spectral(f));
        CHECK(max_diff(f, back) < 1e-12 * f.max_abs());
    }
}

TEST_CASE("non-finite input is rejected") {
    Grid g(16);
    ScalarField f(g);
    f.at(3, 4) = std::nan("");
    CHECK_THROWS_AS(to_spectral(f), std::invalid_argument);
}

TEST_CASE("multipliers act on single modes") {
    Grid g(32);
    auto s1 = ScalarField::sample(g, [](double x, double) { return std::sin(x); });
    auto s2 = ScalarField::sample(g, [](double x, double) { return std::sin(2 * x); });
    auto id = to_physical(apply_multiplier(to_spectral(s1), [](double, double) { return cplx(1.0); }));
    CHECK(max_diff(id, s1) < 1e-14);
    auto abs1 = to_physical(apply_multiplier(to_spectral(s1), [](double a, double b) { return cplx(std::hypot(a, b)); }));
    CHECK(max_diff(abs1, s1) < 1e-13);
    auto half = to_physical(
        apply_multiplier(to_spectral(s2), [](double a, double b) { return cplx(std::sqrt(std::hypot(a, b))); }));
    CHECK(max_diff(half, std::sqrt(2.0) * s2) < 1e-13);
}

TEST_CASE("non-finite multiplier names the mode") {
    Grid g(16);
    auto F = to_spectral(ScalarField(g, 1.0));
    try {
        apply_multiplier(F, [](double a, double b) { return cplx(1.0 / std::hypot(a, b)); });
        FAIL("expected throw");
    } catch (const std::domain_error& e) {
        CHECK(std::string(e.what()).find("(0, 0)") != std::string::npos);
    }
}

TEST_CASE("Riesz velocity of a product mode") {
    Grid g(128);
    for (int q : {4, 8, 16}) {
        auto th = ScalarField::sample(g, [q](double x, double y) { return std::sin(q * x) * std::sin(q * y); });
        VectorField v = riesz_velocity(th);
        const double c = 1.0 / std::sqrt(2.0);
        auto e1 = ScalarField::sample(g, [q, c](double x, double y) { return -c * std::sin(q * x) * std::cos(q * y); });
        auto e2 = ScalarField::sample(g, [q, c](double x, double y) { return c * std::cos(q * x) * std::sin(q * y); });
        CHECK(max_diff(v.x, e1) < 1e-12);
        CHECK(max_diff(v.y, e2) < 1e-12);
    }
}

TEST_CASE("Riesz velocity of a plane wave points along x2") {
    // Oracle: i k_perp/|k| on modes +-(k,0) gives (0, cos(k x1)) for sin(k x1).
    Grid g(64);
    for (int k : {1, 3, 7}) {
        auto th = ScalarField::sample(g, [k](double x, double) { return std::sin(k * x); });
        VectorField v = riesz_velocity(th);
        auto e2 = ScalarField::sample(g, [k](double x, double) { return std::cos(k * x); });
        CHECK(v.x.max_abs() < 1e-13);
        CHECK(max_diff(v.y, e2) < 1e-13);
    }
}

TEST_CASE("zero field gives zero velocity") {
    Grid g(32);
    VectorField v = riesz_velocity(ScalarField(g));
    CHECK(v.x.max_abs() == 0.0);
    CHECK(v.y.max_abs() == 0.0);
}

TEST_CASE("velocity has no zero mode") {
    Grid g(32);
    ScalarField th = random_bandlimited(g, 8, 3);
    th += ScalarField(g, 5.0);
    VectorField v = riesz_velocity(th);
    CHECK(std::abs(v.x.mean()) < 1e-15);
    CHECK(std::abs(v.y.mean()) < 1e-15);
}

TEST_CASE("Riesz velocity is an isometry off the mean and divergence free") {
    for (unsigned trial = 0; trial < 100; ++trial) {
        Grid g(32, 1.0 + trial * 0.1);
        ScalarField th = random_bandlimited(g, 10, 100 + trial);
        th += ScalarField(g, 0.3);
        VectorField v = riesz_velocity(th);
        ScalarField c = th - ScalarField(g, th.mean());
        const double lv = std::sqrt(std::pow(l2(v.x), 2) + std::pow(l2(v.y), 2));
        CHECK(std::abs(lv - l2(c)) <= 1e-10 * l2(c));
        ScalarField d = divergence(v);
        CHECK(d.max_abs() <= 1e-12 * (v.x.max_abs() + v.y.max_abs()) * g.kunit() * g.n);
    }
}

TEST_CASE("multiplier operations are linear") {
    Grid g(32);
    auto a = random_bandlimited(g, 10, 11), b = random_bandlimited(g, 10, 12);
    VectorField va = riesz_velocity(a), vb = riesz_velocity(b);
    VectorField vs = riesz_velocity(2.5 * a + b);
    CHECK(max_diff(vs.x, 2.5 * va.x + vb.x) < 1e-12 * vs.x.max_abs());
    CHECK(max_diff(vs.y, 2.5 * va.y + vb.y) < 1e-12 * vs.y.max_abs());
    VectorField ga = gradient(a), gb = gradient(b), gs = gradient(a - 3.0 * b);
    CHECK(max_diff(gs.x, ga.x - 3.0 * gb.x) < 1e-12 * gs.x.max_abs());
}

TEST_CASE("Riesz velocity commutes with quarter turns on the grid") {
    // Rotation by 90 degrees about the origin maps sample (i,j) to (n-j, i).
    Grid g(64);
    auto th = random_bandlimited(g, 12, 5);
    ScalarField rot(g);
    const int n = g.n;
    auto w = [n](int k) { return ((k % n) + n) % n; };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) rot.at(w(n - j), i) = th.at(i, j);
    VectorField v = riesz_velocity(th), vr = riesz_velocity(rot);
    double err = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            // Rotated vector: R(v1, v2) = (-v2, v1).
            err = std::max(err, std::abs(vr.x.at(w(n - j), i) + v.y.at(i, j)));
            err = std::max(err, std::abs(vr.y.at(w(n - j), i) - v.x.at(i, j)));
        }
    CHECK(err < 1e-12);
}

TEST_CASE("dealias follows the two-thirds rule") {
    Grid g(32);
    SpectralField F(g);
    F.at(12, 0) = 1.0;
    F.at(10, 0) = 1.0;
    F.at(0, 11) = 1.0;
    SpectralField D = dealias(F);
    CHECK(std::abs(D.coeff(12, 0)) == 0.0);
    CHECK(std::abs(D.coeff(10, 0)) == 1.0);
    CHECK(std::abs(D.coeff(0, 11)) == 0.0);
    auto a = random_bandlimited(g, 10, 9);
    auto A = to_spectral(a);
    auto B = dealias(A);
    // Kept modes are untouched; removed ones only held roundoff.
    double kept = 0.0, removed = 0.0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.nc(); ++j) {
            const double d = std::abs(A.at(i, j) - B.at(i, j));
            if (dealias_keeps(g, g.wavenumber(i), j)) kept = std::max(kept, d);
            else removed = std::max(removed, d);
        }
    CHECK(kept == 0.0);
    CHECK(removed < 1e-14);
}

TEST_CASE("spectral gradient") {
    Grid g(64);
    auto s = ScalarField::sample(g, [](double x, double) { return std::sin(x); });
    VectorField gs = gradient(s);
    CHECK(max_diff(gs.x, ScalarField::sample(g, [](double x, double) { return std::cos(x); })) < 1e-13);
    CHECK(gs.y.max_abs() < 1e-13);
    VectorField gc = gradient(ScalarField(g, 4.0));
    CHECK(gc.x.max_abs() < 1e-13);
    auto f = ScalarField::sample(g, [](double x, double y) { return std::sin(3 * x) * std::sin(5 * y); });
    VectorField gf = gradient(f);
    auto d1 = ScalarField::sample(g, [](double x, double y) { return 3 * std::cos(3 * x) * std::sin(5 * y); });
    CHECK(max_diff(gf.x, d1) < 1e-10);
}

TEST_CASE("point evaluation reproduces the trigonometric polynomial") {
    Grid g(32, 2.0);
    const double k = kTwoPi / 2.0;
    auto f = ScalarField::sample(g, [k](double x, double y) { return std::cos(3 * k * x) * std::sin(2 * k * y) + 0.5; });
    auto F = to_spectral(f);
    for (double x : {0.013, -0.71, 0.333})
        for (double y : {0.2, -0.97}) {
            const double e = std::cos(3 * k * x) * std::sin(2 * k * y) + 0.5;
            CHECK(std::abs(evaluate_at(F, x, y) - e) < 1e-13);
        }
    CHECK(std::abs(evaluate_at(F, g.coord(5), g.coord(9)) - f.at(5, 9)) < 1e-13);
}

TEST_CASE("bilinear interpolation is exact at nodes and wraps") {
    Grid g(16);
    auto f = random_field(g, 1);
    CHECK(interpolate_bilinear(f, g.coord(3), g.coord(4)) == doctest::Approx(f.at(3, 4)));
    CHECK(interpolate_bilinear(f, g.coord(3) + g.L, g.coord(4) - g.L) == doctest::Approx(f.at(3, 4)));
    const double mid = interpolate_bilinear(f, g.coord(3) + 0.5 * g.dx(), g.coord(4));
    CHECK(mid == doctest::Approx(0.5 * (f.at(3, 4) + f.at(4, 4))));
}
