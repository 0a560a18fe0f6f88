#include "sqglab/fit.hpp"

#include <cmath>
#include <stdexcept>

namespace sqglab {

namespace {

FitResult least_squares(const std::vector<double>& x, const std::vector<double>& y, std::string kind,
                        std::pair<double, double> window) {
    FitResult f;
    f.kind = std::move(kind);
    f.window = window;
    f.samples = x.size();
    if (x.size() < 3) {
        f.note = "fewer than 3 samples";
        return f;
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= x.size();
    my /= y.size();
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
        syy += (y[k] - my) * (y[k] - my);
    }
    if (sxx == 0.0) {
        f.note = "degenerate abscissae";
        return f;
    }
    f.exponent = sxy / sxx;
    f.intercept = my - f.exponent * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    f.inconclusive = f.r2 < kFitMinR2;
    if (f.inconclusive) f.note = "r2 below 0.9";
    return f;
}

void check_sizes(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("fit: x and y differ in length");
}

}  // namespace

FitResult fit_linear(const std::vector<double>& x, const std::vector<double>& y, double xmin, double xmax) {
    check_sizes(x, y);
    std::vector<double> a, b;
    for (std::size_t k = 0; k < x.size(); ++k)
        if (x[k] >= xmin && x[k] <= xmax && std::isfinite(y[k])) {
            a.push_back(x[k]);
            b.push_back(y[k]);
        }
    return least_squares(a, b, "linear", {xmin, xmax});
}

FitResult fit_loglog(const std::vector<double>& x, const std::vector<double>& y, double xmin, double xmax) {
    check_sizes(x, y);
    std::vector<double> a, b;
    for (std::size_t k = 0; k < x.size(); ++k)
        if (x[k] > 0.0 && x[k] >= xmin && x[k] <= xmax && y[k] > 0.0 && std::isfinite(y[k])) {
            a.push_back(std::log(x[k]));
            b.push_back(std::log(y[k]));
        }
    return least_squares(a, b, "log-log", {xmin, xmax});
}

FitResult fit_loglinear(const std::vector<double>& t, const std::vector<double>& y, double tmin, double tmax) {
    check_sizes(t, y);
    std::vector<double> a, b;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] >= tmin && t[k] <= tmax && y[k] > 0.0 && std::isfinite(y[k])) {
            a.push_back(t[k]);
            b.push_back(std::log(y[k]));
        }
    return least_squares(a, b, "log-linear", {tmin, tmax});
}

}  // namespace sqglab
