#pragma once

// Power calibration of per-evaluator significance levels.
//
// For a 1-df Wald test with alternative |L^T beta| = c the statistic is
// noncentral chi-square with lambda = c^2 / (L^T Sigma L), so the power at
// size alpha is 1 - F_{chi2_1(lambda)}(chi2_{1, 1-alpha}). Fixing the power
// and inverting gives an evaluator-specific alpha_j.

#include "evalguard/inference.hpp"

#include <string>
#include <vector>

namespace evalguard {

enum class SolveStatus {
    ok,
    lower_bracket,  // target power is below the power at alpha = 1e-16
    degenerate,     // lambda == 0: power equals alpha, returned alpha = phi
};

const char* to_string(SolveStatus status);

struct AlphaSolution {
    double alpha = 0.0;
    SolveStatus status = SolveStatus::ok;
    int iterations = 0;
};

constexpr double kAlphaLowerBracket = 1e-16;
constexpr double kAlphaUpperBracket = 1 - 1e-16;
constexpr double kDefaultAlphaTol = 1e-9;
constexpr int kMaxBisection = 60;

double power_given_alpha(double alpha, double lambda);

// Bisection on log(alpha) over (1e-16, 1 - 1e-16); stops once
// |power - phi| < tol or after 60 halvings.
AlphaSolution alpha_given_power(double phi, double lambda, double tol = kDefaultAlphaTol);

struct CalibrationPoint {
    Index j = 0;
    double c = 0.0;
    double phi = 0.0;
    double lambda = 0.0;
    double alpha = 0.0;
    SolveStatus status = SolveStatus::ok;
};

// lambda = c^2 / v; throws NumericError unless v > 0 and c > 0.
double noncentrality(double c, double contrast_variance);

// One calibration point per evaluator for a fixed power.
std::vector<CalibrationPoint> calibrate(const std::vector<double>& contrast_variances, double c, double phi);

template <typename Scalar>
std::vector<CalibrationPoint> calibrate_all(const FitResult<Scalar>& fit,
                                            const std::vector<ContrastSpec<Scalar>>& contrasts, double c,
                                            double phi)
{
    if (!fit.converged) throw NumericError("fit did not converge; refusing to calibrate");
    std::vector<double> variances;
    variances.reserve(contrasts.size());
    for (const auto& contrast : contrasts) {
        variances.push_back(static_cast<double>(contrast_variance(fit, contrast)));
    }
    auto points = calibrate(variances, c, phi);
    for (std::size_t k = 0; k < points.size(); ++k) points[k].j = contrasts[k].j;
    return points;
}

// phi = 0.10, 0.11, ..., 0.95.
std::vector<double> default_power_grid();
// Inclusive "start:stop:step" grid; each point is start + k * step rounded
// to 10 decimals. All points must lie in (0, 1).
std::vector<double> make_power_grid(double start, double stop, double step);
std::vector<double> parse_power_grid(const std::string& spec);

} // namespace evalguard
