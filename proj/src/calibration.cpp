#include "evalguard/calibration.hpp"

#include "evalguard/distributions.hpp"
#include "evalguard/error.hpp"

#include <cmath>
#include <sstream>

namespace evalguard {

const char* to_string(SolveStatus status)
{
    switch (status) {
    case SolveStatus::ok: return "ok";
    case SolveStatus::lower_bracket: return "lower_bracket";
    case SolveStatus::degenerate: return "degenerate";
    }
    return "ok";
}

double power_given_alpha(double alpha, double lambda)
{
    if (!(alpha > 0 && alpha < 1)) throw InputError("alpha must lie in (0, 1)");
    if (!(lambda >= 0)) throw InputError("noncentrality must be non-negative");
    return noncentral_chisq1_sf(chisq1_upper_quantile(alpha), lambda);
}

AlphaSolution alpha_given_power(double phi, double lambda, double tol)
{
    if (!(phi > 0 && phi < 1)) throw InputError("power must lie in (0, 1)");
    if (!(lambda >= 0) || !std::isfinite(lambda)) {
        throw InputError("noncentrality must be finite and non-negative");
    }
    if (lambda == 0) return {phi, SolveStatus::degenerate, 0};

    if (phi <= power_given_alpha(kAlphaLowerBracket, lambda)) {
        return {kAlphaLowerBracket, SolveStatus::lower_bracket, 0};
    }

    double lo = std::log(kAlphaLowerBracket);
    double hi = std::log(kAlphaUpperBracket);
    double mid = 0.5 * (lo + hi);
    int it = 0;
    while (it < kMaxBisection) {
        ++it;
        mid = 0.5 * (lo + hi);
        const double power = power_given_alpha(std::exp(mid), lambda);
        if (std::abs(power - phi) < tol) break;
        if (power < phi) lo = mid;
        else hi = mid;
    }
    return {std::exp(mid), SolveStatus::ok, it};
}

double noncentrality(double c, double contrast_variance)
{
    if (!(c > 0)) throw InputError("alternative magnitude c must be positive");
    if (!(contrast_variance > 0) || !std::isfinite(contrast_variance)) {
        throw NumericError("degenerate contrast variance");
    }
    return c * c / contrast_variance;
}

std::vector<CalibrationPoint> calibrate(const std::vector<double>& contrast_variances, double c, double phi)
{
    std::vector<CalibrationPoint> out;
    out.reserve(contrast_variances.size());
    for (std::size_t j = 0; j < contrast_variances.size(); ++j) {
        CalibrationPoint point;
        point.j = static_cast<Index>(j);
        point.c = c;
        point.phi = phi;
        point.lambda = noncentrality(c, contrast_variances[j]);
        const AlphaSolution sol = alpha_given_power(phi, point.lambda);
        point.alpha = sol.alpha;
        point.status = sol.status;
        out.push_back(point);
    }
    return out;
}

std::vector<double> make_power_grid(double start, double stop, double step)
{
    if (!(step > 0)) throw InputError("grid step must be positive");
    if (!(start <= stop)) throw InputError("grid start must not exceed stop");
    std::vector<double> grid;
    for (long k = 0;; ++k) {
        const double value = std::round((start + static_cast<double>(k) * step) * 1e10) / 1e10;
        if (value > stop + 1e-12) break;
        if (!(value > 0 && value < 1)) throw InputError("power grid points must lie in (0, 1)");
        grid.push_back(value);
        if (k > 1000000) throw InputError("power grid is too fine");
    }
    return grid;
}

std::vector<double> default_power_grid() { return make_power_grid(0.10, 0.95, 0.01); }

std::vector<double> parse_power_grid(const std::string& spec)
{
    std::stringstream in(spec);
    std::string part;
    std::vector<double> values;
    while (std::getline(in, part, ':')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw InputError("malformed grid spec '" + spec + "', expected start:stop:step");
        }
    }
    if (values.size() != 3) throw InputError("malformed grid spec '" + spec + "', expected start:stop:step");
    return make_power_grid(values[0], values[1], values[2]);
}

} // namespace evalguard
