#include "evalguard/distributions.hpp"

#include "evalguard/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace evalguard {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kSqrt2Pi = 2.50662827463100050242;

// Acklam's rational approximation (relative error < 1.15e-9), used as the
// starting point for one Halley refinement.
double normal_quantile_initial(double p)
{
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    if (p < p_low) {
        const double q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
               / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > 1 - p_low) {
        const double q = std::sqrt(-2 * std::log1p(-p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
               / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
           / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

// Lower-tail quantile for p <= 0.5, refined against erfc so that tiny p keep
// full relative precision.
double lower_normal_quantile(double p)
{
    double x = normal_quantile_initial(p);
    for (int it = 0; it < 2; ++it) {
        const double e = normal_cdf(x) - p;
        const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
        x -= u / (1 + 0.5 * x * u);
    }
    return x;
}

double erfc_inv_lower(double q)
{
    // erfc(y) = q  <=>  y = -Phi^{-1}(q / 2) / sqrt(2)
    return -lower_normal_quantile(0.5 * q) / kSqrt2;
}

double erf_inv_small(double p)
{
    // p <= 0.5: start from the erfc route, then Newton on erf itself, which
    // is evaluated with full relative precision near zero.
    double y = erfc_inv_lower(1 - p);
    for (int it = 0; it < 3; ++it) {
        const double f = std::erf(y) - p;
        const double fp = 2 / std::sqrt(std::numbers::pi) * std::exp(-y * y);
        y -= f / fp;
    }
    return y;
}

void require_open_unit(double p, const char* what)
{
    if (!(p > 0 && p < 1)) {
        throw InputError(std::string(what) + " must lie in (0, 1), got " + std::to_string(p));
    }
}

} // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double normal_quantile(double p)
{
    require_open_unit(p, "probability");
    if (p <= 0.5) return lower_normal_quantile(p);
    return -lower_normal_quantile(1 - p);
}

double chisq1_cdf(double x)
{
    if (x <= 0) return 0.0;
    return std::erf(std::sqrt(0.5 * x));
}

double chisq1_sf(double x)
{
    if (x <= 0) return 1.0;
    return std::erfc(std::sqrt(0.5 * x));
}

double chisq1_quantile(double p)
{
    require_open_unit(p, "probability");
    const double y = p <= 0.5 ? erf_inv_small(p) : erfc_inv_lower(1 - p);
    return 2 * y * y;
}

double chisq1_upper_quantile(double q)
{
    require_open_unit(q, "upper tail probability");
    const double y = q >= 0.5 ? erf_inv_small(1 - q) : erfc_inv_lower(q);
    return 2 * y * y;
}

double noncentral_chisq1_cdf(double x, double lambda)
{
    if (!(x >= 0) || !(lambda >= 0)) {
        throw InputError("noncentral chi-square arguments must be non-negative");
    }
    if (x == 0) return 0.0;
    const double y = 0.5 * x;
    const double h = 0.5 * lambda;

    // P(1/2 + k, y) by the upward recurrence P(a + 1, y) = P(a, y) - y^a e^{-y} / Gamma(a + 1).
    double central = std::erf(std::sqrt(y));
    if (h == 0) return central;

    const double log_y = std::log(y);
    const double log_h = std::log(h);
    const double k_limit = h + 40 * std::sqrt(h) + 200;
    double sum = 0.0;
    double mass = 0.0;
    for (double k = 0;; k += 1) {
        const double weight = std::exp(-h + k * log_h - std::lgamma(k + 1));
        sum += weight * central;
        mass += weight;
        if ((k >= h && 1 - mass < 1e-12) || k > k_limit) break;
        const double a = 0.5 + k;
        central -= std::exp(a * log_y - y - std::lgamma(a + 1));
        if (central < 0) central = 0;
    }
    return sum;
}

double noncentral_chisq1_cdf_normal(double x, double lambda)
{
    if (!(x >= 0) || !(lambda >= 0)) {
        throw InputError("noncentral chi-square arguments must be non-negative");
    }
    const double sx = std::sqrt(x);
    const double sl = std::sqrt(lambda);
    // Phi(sx - sl) - Phi(-sx - sl), written as a difference of upper tails
    // to keep precision when sl is large.
    return normal_sf(sl - sx) - normal_sf(sx + sl);
}

double noncentral_chisq1_sf(double x, double lambda)
{
    if (!(x >= 0) || !(lambda >= 0)) {
        throw InputError("noncentral chi-square arguments must be non-negative");
    }
    const double sx = std::sqrt(x);
    const double sl = std::sqrt(lambda);
    return normal_sf(sx - sl) + normal_sf(sx + sl);
}

} // namespace evalguard
