#include "evalguard/calibration.hpp"
#include "evalguard/distributions.hpp"
#include "evalguard/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace evalguard;

namespace {

// 1-df power via the normal identity, independent of the library series.
double oracle_power(double alpha, double lambda)
{
    const double z = std::sqrt(2.0) * [](double q) {
        // erfc^{-1}(q) by bisection
        double lo = 0, hi = 30;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (std::erfc(mid) > q ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }(alpha);
    const double s = std::sqrt(lambda);
    return 0.5 * std::erfc((z - s) / std::sqrt(2.0)) + 0.5 * std::erfc((z + s) / std::sqrt(2.0));
}

} // namespace

TEST_SUITE("calibration") {

TEST_CASE("zero noncentrality: power equals size, inverse flags degenerate")
{
    for (double a : {0.01, 0.05, 0.5, 0.9}) CHECK(std::abs(power_given_alpha(a, 0.0) - a) < 1e-9);
    const auto sol = alpha_given_power(0.8, 0.0);
    CHECK(sol.status == SolveStatus::degenerate);
    CHECK(sol.alpha == 0.8);
}

TEST_CASE("power at alpha 0.05 and lambda 7.849")
{
    const double p = power_given_alpha(0.05, 7.849);
    CHECK(std::abs(p - oracle_power(0.05, 7.849)) < 1e-10);
    CHECK(p == doctest::Approx(0.8).epsilon(1e-3));
}

TEST_CASE("alpha_given_power inverts power_given_alpha")
{
    CHECK(std::abs(power_given_alpha(alpha_given_power(0.8, 7.849).alpha, 7.849) - 0.8) < 1e-8);
    for (double lambda : {0.5, 2.0, 7.849, 25.0, 80.0}) {
        for (double phi = 0.05; phi < 0.951; phi += 0.05) {
            const auto sol = alpha_given_power(phi, lambda);
            if (sol.status != SolveStatus::ok) continue;
            CHECK(std::abs(power_given_alpha(sol.alpha, lambda) - phi) < 1e-8);
        }
    }
}

TEST_CASE("monotonicity in alpha, lambda and phi")
{
    for (double lambda : {0.5, 5.0, 20.0}) {
        double prev = 0;
        for (double a = 0.001; a < 0.99; a += 0.01) {
            const double p = power_given_alpha(a, lambda);
            CHECK(p > prev);
            prev = p;
        }
    }
    for (double a : {0.01, 0.2}) {
        double prev = 0;
        for (double lambda = 0.1; lambda < 30; lambda += 0.7) {
            const double p = power_given_alpha(a, lambda);
            CHECK(p > prev);
            prev = p;
        }
    }
    for (double lambda : {3.0, 12.0}) {
        double prev = 0;
        for (double phi : make_power_grid(0.10, 0.95, 0.01)) {
            const auto sol = alpha_given_power(phi, lambda);
            if (sol.status == SolveStatus::lower_bracket) continue;
            CHECK(sol.alpha > prev);
            prev = sol.alpha;
        }
    }
}

TEST_CASE("very large noncentrality gives tiny alpha or the lower bracket")
{
    const auto sol = alpha_given_power(0.8, 1e4);
    CHECK(sol.alpha < 1e-6);
    CHECK(sol.status == SolveStatus::lower_bracket);
    const auto moderate = alpha_given_power(0.8, 60.0);
    CHECK(moderate.status == SolveStatus::ok);
    CHECK(moderate.alpha < 1e-6);
}

TEST_CASE("evaluator-specific levels")
{
    const auto points = calibrate({1.0, 4.0, 1.0}, 5.0, 0.8);
    REQUIRE(points.size() == 3);
    CHECK(points[0].lambda == 25.0);
    CHECK(points[1].lambda == 6.25);
    CHECK(points[0].alpha != points[1].alpha);
    CHECK(points[0].alpha == points[2].alpha);
    // Smaller variance: more power at any alpha, so a smaller alpha suffices.
    CHECK(points[0].alpha < points[1].alpha);
    const auto c10 = calibrate({4.0}, 10.0, 0.8);
    CHECK(c10[0].lambda == 25.0);
    CHECK(c10[0].alpha == points[0].alpha);
}

TEST_CASE("noncentrality validation")
{
    CHECK_THROWS_AS(noncentrality(5.0, 0.0), NumericError);
    CHECK_THROWS_AS(noncentrality(0.0, 1.0), InputError);
    CHECK_THROWS_AS(alpha_given_power(1.0, 3.0), InputError);
    CHECK_THROWS_AS(power_given_alpha(0.0, 3.0), InputError);
}

TEST_CASE("power grids")
{
    const auto g = default_power_grid();
    CHECK(g.size() == 86);
    CHECK(g.front() == 0.1);
    CHECK(g.back() == 0.95);
    CHECK(g[47] == 0.57);
    CHECK(parse_power_grid("0.2:0.8:0.2") == std::vector<double>{0.2, 0.4, 0.6, 0.8});
    CHECK_THROWS_AS(parse_power_grid("0.2:0.8"), InputError);
    CHECK_THROWS_AS(parse_power_grid("0:0.5:0.1"), InputError);
    CHECK_THROWS_AS(parse_power_grid("a:b:c"), InputError);
}

}
