#pragma once

#include <string>
#include <utility>
#include <vector>

namespace sqglab {

// Least-squares line through (x, y) after the transform named by `kind`:
// "log-log" fits log y against log x, "log-linear" fits log y against x,
// "linear" fits y against x.
struct FitResult {
    std::string kind;
    double exponent = 0.0;  // slope
    double intercept = 0.0;
    double r2 = 0.0;
    std::pair<double, double> window{0.0, 0.0};
    std::size_t samples = 0;
    bool inconclusive = true;  // fewer than 3 samples or r2 < 0.9
    std::string note;
};

constexpr double kFitMinR2 = 0.9;

FitResult fit_linear(const std::vector<double>& x, const std::vector<double>& y, double xmin = -1e300,
                     double xmax = 1e300);
FitResult fit_loglog(const std::vector<double>& x, const std::vector<double>& y, double xmin = 0.0,
                     double xmax = 1e300);
FitResult fit_loglinear(const std::vector<double>& t, const std::vector<double>& y, double tmin = -1e300,
                        double tmax = 1e300);

}  // namespace sqglab
