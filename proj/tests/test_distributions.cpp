#include "evalguard/distributions.hpp"
#include "evalguard/error.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace evalguard;

namespace {

// Regularized lower incomplete gamma by its power series; fine for the
// moderate arguments used here.
double gamma_p(double a, double x)
{
    if (x <= 0) return 0.0;
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 2000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return std::exp(a * std::log(x) - x - std::lgamma(a)) * sum;
}

double oracle_chisq1_cdf(double x) { return gamma_p(0.5, x / 2); }

double oracle_chisq1_quantile(double p)
{
    double lo = 0, hi = 100;
    while (hi - lo > 1e-13) {
        const double mid = 0.5 * (lo + hi);
        (oracle_chisq1_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

TEST_SUITE("distributions") {

TEST_CASE("normal quantile inverts the cdf")
{
    for (double p : {1e-300, 1e-20, 1e-8, 0.001, 0.025, 0.3, 0.5, 0.7, 0.975, 0.999, 1 - 1e-12}) {
        const double x = normal_quantile(p);
        const double back = p < 0.5 ? normal_cdf(x) : normal_sf(x);
        const double target = p < 0.5 ? p : 1 - p;
        CHECK(std::abs(back - target) <= 1e-13 * target + 1e-300);
    }
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK_THROWS_AS(normal_quantile(0.0), InputError);
    CHECK_THROWS_AS(normal_quantile(1.0), InputError);
}

TEST_CASE("chi-square(1) cdf against the incomplete gamma series")
{
    for (double x : {1e-6, 0.01, 0.5, 1.0, 3.841459, 7.0, 15.0, 30.0}) {
        CHECK(chisq1_cdf(x) == doctest::Approx(oracle_chisq1_cdf(x)).epsilon(1e-12));
    }
}

TEST_CASE("chi-square(1) 0.95 quantile")
{
    const double oracle = oracle_chisq1_quantile(0.95);
    CHECK(std::abs(oracle - 3.841458820694124) < 1e-11);
    CHECK(std::abs(chisq1_quantile(0.95) - oracle) < 1e-10);
    CHECK(std::abs(chisq1_upper_quantile(0.05) - oracle) < 1e-10);
}

TEST_CASE("chi-square(1) quantile inverse identity and small-p limit")
{
    for (int k = 1; k < 100; ++k) {
        const double p = k / 100.0;
        CHECK(std::abs(chisq1_cdf(chisq1_quantile(p)) - p) < 1e-9);
    }
    double prev = chisq1_quantile(1e-3);
    for (double p : {1e-5, 1e-8, 1e-12}) {
        const double q = chisq1_quantile(p);
        CHECK(q > 0);
        CHECK(q < prev);
        prev = q;
    }
    CHECK(prev < 1e-20);
    for (double q : {1e-16, 1e-10, 1e-4, 0.5}) {
        CHECK(chisq1_sf(chisq1_upper_quantile(q)) == doctest::Approx(q).epsilon(1e-9));
    }
}

TEST_CASE("noncentral cdf: degenerate case, normal identity, monotone in lambda")
{
    for (double x : {0.1, 1.0, 3.84, 10.0}) {
        CHECK(noncentral_chisq1_cdf(x, 0.0) == doctest::Approx(chisq1_cdf(x)).epsilon(1e-12));
    }
    for (int a = 0; a < 20; ++a) {
        for (int b = 0; b < 20; ++b) {
            const double x = 0.05 + 1.5 * a;
            const double lambda = 0.3 * b * b;
            CHECK(std::abs(noncentral_chisq1_cdf(x, lambda) - noncentral_chisq1_cdf_normal(x, lambda)) < 1e-9);
        }
    }
    for (double x : {0.5, 3.84, 12.0}) {
        double prev = 2.0;
        for (double lambda = 0; lambda < 40; lambda += 0.5) {
            const double f = noncentral_chisq1_cdf(x, lambda);
            CHECK(f < prev);
            prev = f;
        }
    }
    CHECK(noncentral_chisq1_sf(3.8415, 7.85) == doctest::Approx(0.8).epsilon(2e-3));
    CHECK_THROWS_AS(noncentral_chisq1_cdf(1.0, -1.0), InputError);
}

TEST_CASE("noncentral upper tail matches a Monte Carlo of (Z + sqrt(lambda))^2")
{
    std::mt19937_64 rng(99);
    std::normal_distribution<double> z;
    const int draws = 400000;
    const double x = 3.8415, lambda = 7.85;
    int above = 0;
    for (int i = 0; i < draws; ++i) {
        const double v = z(rng) + std::sqrt(lambda);
        above += v * v > x;
    }
    const double p_hat = static_cast<double>(above) / draws;
    const double se = std::sqrt(p_hat * (1 - p_hat) / draws);
    CHECK(std::abs(noncentral_chisq1_sf(x, lambda) - p_hat) < 3 * se);
}

}
