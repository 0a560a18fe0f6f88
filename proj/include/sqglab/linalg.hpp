#pragma once

#include <cmath>

namespace sqglab {

struct Vec2 {
    double x = 0.0, y = 0.0;
    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double a) const { return {a * x, a * y}; }
    double norm() const { return std::hypot(x, y); }
};

struct Mat2 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static Mat2 diag(double a, double b) { return {a, 0.0, 0.0, b}; }
    static Mat2 rotation(double angle) {
        const double c = std::cos(angle), s = std::sin(angle);
        return {c, -s, s, c};
    }

    Vec2 operator*(const Vec2& v) const { return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y}; }
    Mat2 operator*(const Mat2& o) const {
        return {a11 * o.a11 + a12 * o.a21, a11 * o.a12 + a12 * o.a22, a21 * o.a11 + a22 * o.a21,
                a21 * o.a12 + a22 * o.a22};
    }
    Mat2 operator+(const Mat2& o) const { return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22}; }
    Mat2 operator*(double s) const { return {s * a11, s * a12, s * a21, s * a22}; }
    double det() const { return a11 * a22 - a12 * a21; }
    double trace() const { return a11 + a22; }
    Mat2 inverse() const {
        const double d = det();
        return {a22 / d, -a12 / d, -a21 / d, a11 / d};
    }
};

// exp(M) for a real 2x2 matrix via the Cayley-Hamilton closed form.
inline Mat2 expm(const Mat2& M) {
    const double t = 0.5 * M.trace();
    const Mat2 B = M + Mat2::identity() * (-t);  // traceless part
    const double q = -B.det();                     // B^2 = q I
    double c, s;                                   // exp(B) = c I + s B
    if (q > 0) {
        const double r = std::sqrt(q);
        c = std::cosh(r);
        s = r > 1e-300 ? std::sinh(r) / r : 1.0;
    } else if (q < 0) {
        const double r = std::sqrt(-q);
        c = std::cos(r);
        s = std::sin(r) / r;
    } else {
        c = 1.0;
        s = 1.0;
    }
    return (Mat2::identity() * c + B * s) * std::exp(t);
}

}  // namespace sqglab
