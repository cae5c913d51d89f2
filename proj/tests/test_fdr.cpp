#include "evalguard/error.hpp"
#include "evalguard/fdr.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

using namespace evalguard;

namespace {

// Exhaustive step-up: the largest k with p_(k) <= k alpha / M, by scanning
// every k over every sorted order statistic.
std::set<Index> bh_oracle(const std::vector<double>& p, double alpha)
{
    const std::size_t M = p.size();
    std::size_t best = 0;
    for (std::size_t k = 1; k <= M; ++k) {
        // p_(k): the value with exactly k-1 strictly smaller or tied earlier entries
        std::vector<double> sorted = p;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
        if (sorted[k - 1] <= static_cast<double>(k) * alpha / static_cast<double>(M)) best = k;
    }
    std::vector<Index> order(M);
    for (std::size_t j = 0; j < M; ++j) order[j] = static_cast<Index>(j);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return p[a] < p[b]; });
    return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(best)};
}

EvaluatorTests synthetic_tests(const std::vector<double>& p, const std::vector<double>& variances)
{
    EvaluatorTests t;
    for (std::size_t j = 0; j < p.size(); ++j) {
        TestResult<double> r;
        r.j = static_cast<Index>(j);
        r.p_value = p[j];
        r.variance = variances[j];
        r.se = std::sqrt(variances[j]);
        t.tests.push_back(r);
        t.variances.push_back(variances[j]);
    }
    return t;
}

} // namespace

TEST_SUITE("fdr") {

TEST_CASE("estimate_fdr arithmetic")
{
    std::vector<double> alpha(100, 0.01), p(100, 0.5);
    auto est = estimate_fdr(alpha, p);
    CHECK(est.rejections == 0);
    CHECK(est.q_hat == 0.0);

    std::fill(alpha.begin(), alpha.end(), 0.05);
    for (int j = 0; j < 10; ++j) p[static_cast<std::size_t>(j)] = 0.001;
    est = estimate_fdr(alpha, p);
    CHECK(est.rejections == 10);
    CHECK(est.q_hat == doctest::Approx(0.5));

    // Strict inequality: p == alpha is not a rejection.
    CHECK(estimate_fdr(std::vector<double>{0.05}, std::vector<double>{0.05}).rejections == 0);
}

TEST_CASE("rejections ordered by p, ties by index")
{
    const std::vector<double> p{0.03, 0.01, 0.03, 0.9, 0.001};
    const std::vector<double> a(5, 0.05);
    CHECK(rejected_by_threshold(p, a) == std::vector<Index>{4, 1, 0, 2});
}

TEST_CASE("adjustment arithmetic")
{
    CHECK(round_half_up(2.5) == 3);
    CHECK(round_half_up(2.49) == 2);
    CHECK(adjustment_removal_count(10, 0.5) == 5);
    CHECK(adjustment_removal_count(3, 0.5) == 2);  // 1.5 -> 2
    CHECK(adjustment_removal_count(2, 0.5) == 0);  // k Q = 1 is not > 1
    CHECK(adjustment_removal_count(3, 0.5, AdjustRule::algorithm) == 3);
    CHECK(adjustment_removal_count(5, 0.9) == 5);
    CHECK(adjustment_removal_count(4, 2.0) == 4);  // capped at k

    const std::vector<Index> rejected{7, 2, 9, 4};
    CHECK(adjust_rejections(rejected, 0.5) == std::vector<Index>{7, 2});
    CHECK(adjust_rejections(rejected, 0.2) == rejected);
}

TEST_CASE("detect: adjustment is a subset, idempotent, and off by default")
{
    std::vector<double> p{1e-8, 0.004, 0.02, 0.03, 0.2, 0.5, 0.7, 0.9};
    std::vector<double> v(8, 1.5);
    const auto tests = synthetic_tests(p, v);
    const auto plain = detect(tests, 5.0, 0.8, false);
    CHECK(plain.adjusted_rejected == plain.rejected);
    CHECK_FALSE(plain.adjustment_applied);
    const auto adj = detect(tests, 5.0, 0.8, true);
    CHECK(adj.rejected == plain.rejected);
    CHECK(adj.adjustment_applied);
    for (Index j : adj.adjusted_rejected) {
        CHECK(std::find(adj.rejected.begin(), adj.rejected.end(), j) != adj.rejected.end());
    }
    CHECK(static_cast<Index>(adj.rejected.size() - adj.adjusted_rejected.size())
          == adjustment_removal_count(static_cast<Index>(adj.rejected.size()), adj.q_hat));
    const auto again = apply_adjustment(adj);
    CHECK(again.adjusted_rejected == adj.adjusted_rejected);
    CHECK(again.removed == adj.removed);

    // Numerator is exactly the sum of the stored thresholds.
    double sum = 0;
    for (const auto& c : plain.calibration) sum += c.alpha;
    CHECK(sum == plain.numerator);
}

TEST_CASE("rejection set grows with power")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> p(40), v(40);
    for (std::size_t j = 0; j < 40; ++j) {
        p[j] = std::pow(u(rng), 3);
        v[j] = 0.5 + 3 * u(rng);
    }
    const auto tests = synthetic_tests(p, v);
    std::vector<Index> prev;
    for (double phi : default_power_grid()) {
        auto r = detect(tests, 5.0, phi, false).rejected;
        std::sort(r.begin(), r.end());
        CHECK(std::includes(r.begin(), r.end(), prev.begin(), prev.end()));
        prev = r;
    }
    const auto curve = decision_curve(tests, 5.0, default_power_grid());
    for (std::size_t g = 1; g < curve.points.size(); ++g) {
        CHECK(curve.points[g].n_rejected >= curve.points[g - 1].n_rejected);
        if (curve.points[g].n_rejected == 0) CHECK(curve.points[g].q_hat == 0.0);
    }
}

TEST_CASE("null data: no rejections at small power")
{
    const auto tests = synthetic_tests(std::vector<double>(20, 0.999), std::vector<double>(20, 1.0));
    const auto curve = decision_curve(tests, 5.0, make_power_grid(0.1, 0.3, 0.1));
    for (const auto& point : curve.points) {
        CHECK(point.n_rejected == 0);
        CHECK(point.q_hat == 0.0);
    }
}

TEST_CASE("detect_at_fdr picks the largest feasible power")
{
    std::vector<double> p{1e-10, 1e-9, 0.003, 0.04, 0.3, 0.6, 0.8, 0.95, 0.5, 0.45};
    const auto tests = synthetic_tests(p, std::vector<double>(10, 2.0));
    const auto grid = default_power_grid();
    const auto curve = decision_curve(tests, 5.0, grid);
    const double target = 0.3;
    double best = -1;
    for (const auto& pt : curve.points) {
        if (pt.n_rejected > 0 && pt.q_hat <= target) best = pt.phi;
    }
    REQUIRE(best > 0);
    const auto report = detect_at_fdr(tests, 5.0, target, false);
    REQUIRE(report.phi.has_value());
    CHECK(*report.phi == best);
    CHECK(report.q_hat <= target);

    const auto none = detect_at_fdr(tests, 5.0, 0.0, false);
    CHECK_FALSE(none.phi.has_value());
    CHECK(none.rejected.empty());
    REQUIRE(none.diagnostics.size() == 1);
    CHECK(none.diagnostics[0].find("no feasible power") != std::string::npos);
}

TEST_CASE("BH step-up")
{
    CHECK(bh_procedure(std::vector<double>{0.001, 0.02, 0.8}, 0.1) == std::vector<Index>{0, 1});
    CHECK(bh_procedure(std::vector<double>(5, 1.0), 0.1).empty());
    CHECK(bh_procedure(std::vector<double>{0.9, 0.02, 0.9, 0.9}, 0.1) == std::vector<Index>{1});
    CHECK_THROWS_AS(bh_procedure(std::vector<double>{0.5, 1.2}, 0.1), InputError);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t M = 1 + rng() % 20;
        std::vector<double> p(M);
        for (auto& x : p) x = rep % 2 ? std::pow(u(rng), 4) : std::round(u(rng) * 20) / 100;
        const auto got = bh_procedure(p, 0.1);
        const auto expect = bh_oracle(p, 0.1);
        CHECK(std::set<Index>(got.begin(), got.end()) == expect);

        // Set semantics under permutation.
        std::vector<std::size_t> perm(M);
        for (std::size_t j = 0; j < M; ++j) perm[j] = j;
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> q(M);
        for (std::size_t j = 0; j < M; ++j) q[j] = p[perm[j]];
        std::set<Index> mapped;
        for (Index j : bh_procedure(q, 0.1)) mapped.insert(static_cast<Index>(perm[static_cast<std::size_t>(j)]));
        CHECK(mapped.size() == got.size());
    }
}

TEST_CASE("curve artifacts")
{
    const auto tests = synthetic_tests({1e-6, 0.01, 0.4, 0.7}, {1.0, 1.0, 2.0, 2.0});
    const auto curve = decision_curve(tests, 5.0, make_power_grid(0.5, 0.9, 0.1));
    fixtures::TempDir dir("curve");
    write_curve_csv(curve, dir.path() / "c.csv");
    write_curve_svg(curve, dir.path() / "c.svg");
    std::ifstream csv(dir.path() / "c.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header.rfind("phi,q_hat,n_rejected,", 0) == 0);
    int rows = 0;
    for (std::string line; std::getline(csv, line);) rows += !line.empty();
    CHECK(rows == 5);
    std::ifstream svg(dir.path() / "c.svg");
    std::string text((std::istreambuf_iterator<char>(svg)), {});
    CHECK(text.find("<svg") != std::string::npos);
    CHECK(text.find("polyline") != std::string::npos);
}

}
