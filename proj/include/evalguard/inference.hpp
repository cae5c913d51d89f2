#pragma once

// Second-stage contrasts and Wald tests of each evaluator against the
// (optionally trimmed) mean evaluator effect.

#include "evalguard/distributions.hpp"
#include "evalguard/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace evalguard {

enum class ContrastKind { untruncated, truncated };

inline const char* to_string(ContrastKind kind)
{
    return kind == ContrastKind::truncated ? "truncated" : "untruncated";
}

inline ContrastKind parse_contrast_kind(const std::string& text)
{
    if (text == "truncated") return ContrastKind::truncated;
    if (text == "untruncated") return ContrastKind::untruncated;
    throw InputError("unknown contrast kind '" + text + "'");
}

constexpr double kDefaultDelta = 0.1;

template <typename Scalar>
struct ContrastSpec {
    Index j = 0;
    ContrastKind kind = ContrastKind::untruncated;
    double delta = 0.0;
    Vector<Scalar> L;
    std::vector<Index> truncated_set;  // sorted; empty for untruncated
};

template <typename Scalar>
struct TestResult {
    Index j = 0;
    Scalar estimate = 0;   // L^T beta_hat
    Scalar variance = 0;   // L^T Sigma L
    Scalar se = 0;
    Scalar statistic = 0;  // (estimate / se)^2
    double p_value = 1.0;
};

// [M * delta], validating 0 <= delta < 0.5 and M - 2 [M * delta] >= 1.
inline Index trim_count(Index M, double delta)
{
    if (!(delta >= 0.0 && delta < 0.5)) {
        throw InputError("truncation fraction delta must lie in [0, 0.5), got " + std::to_string(delta));
    }
    // The small offset keeps products like 10 * 0.1 from flooring to 0.
    const auto m = static_cast<Index>(std::floor(static_cast<double>(M) * delta + 1e-9));
    if (M - 2 * m < 1) {
        throw InputError("truncation removes every evaluator (M = " + std::to_string(M) + ", delta = "
                         + std::to_string(delta) + ")");
    }
    return m;
}

// Indices of the [M delta] smallest and [M delta] largest entries, ranked by
// a stable ascending sort on (value, index). Returned sorted by index.
template <typename Derived>
std::vector<Index> trimmed_set(const Eigen::MatrixBase<Derived>& beta, double delta)
{
    const Index M = beta.size();
    const Index m = trim_count(M, delta);
    std::vector<Index> order(static_cast<std::size_t>(M));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return beta(a) < beta(b); });
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(2 * m));
    for (Index k = 0; k < m; ++k) out.push_back(order[static_cast<std::size_t>(k)]);
    for (Index k = M - m; k < M; ++k) out.push_back(order[static_cast<std::size_t>(k)]);
    std::sort(out.begin(), out.end());
    return out;
}

template <typename Derived>
typename Derived::Scalar truncated_mean(const Eigen::MatrixBase<Derived>& beta, double delta)
{
    using Scalar = typename Derived::Scalar;
    const Index M = beta.size();
    const Index m = trim_count(M, delta);
    std::vector<Scalar> sorted(static_cast<std::size_t>(M));
    for (Index l = 0; l < M; ++l) sorted[static_cast<std::size_t>(l)] = beta(l);
    std::sort(sorted.begin(), sorted.end());
    Scalar sum = 0;
    for (Index q = m; q < M - m; ++q) sum += sorted[static_cast<std::size_t>(q)];
    return sum / Scalar(M - 2 * m);
}

namespace detail {

template <typename Scalar>
Vector<Scalar> contrast_vector(Index j, Index M, ContrastKind kind, std::span<const Index> trimmed)
{
    if (kind == ContrastKind::untruncated) {
        Vector<Scalar> L = Vector<Scalar>::Constant(M, -Scalar(1) / Scalar(M));
        L(j) = Scalar(M - 1) / Scalar(M);
        return L;
    }
    const Index kept = M - static_cast<Index>(trimmed.size());
    Vector<Scalar> L = Vector<Scalar>::Constant(M, -Scalar(1) / Scalar(kept));
    for (Index l : trimmed) L(l) = 0;
    const bool j_trimmed = std::binary_search(trimmed.begin(), trimmed.end(), j);
    L(j) = j_trimmed ? Scalar(1) : Scalar(1) - Scalar(1) / Scalar(kept);
    return L;
}

} // namespace detail

// The truncated kind needs beta_hat to locate the trimmed set; the
// untruncated kind ignores it.
template <typename Derived>
ContrastSpec<typename Derived::Scalar> make_contrast(Index j, Index M, ContrastKind kind, double delta,
                                                     const Eigen::MatrixBase<Derived>& beta_hat)
{
    using Scalar = typename Derived::Scalar;
    if (j < 0 || j >= M) throw InputError("evaluator index out of range");
    ContrastSpec<Scalar> spec;
    spec.j = j;
    spec.kind = kind;
    if (kind == ContrastKind::truncated) {
        if (beta_hat.size() != M) throw InputError("beta_hat length does not match M");
        spec.delta = delta;
        spec.truncated_set = trimmed_set(beta_hat, delta);
    } else {
        if (M < 2) throw InputError("contrasts need at least two evaluators");
        spec.delta = 0.0;
    }
    spec.L = detail::contrast_vector<Scalar>(j, M, kind, spec.truncated_set);
    return spec;
}

template <typename Scalar>
std::vector<ContrastSpec<Scalar>> make_contrasts(const FitResult<Scalar>& fit, ContrastKind kind,
                                                 double delta)
{
    const Index M = fit.layout.evaluators;
    const Vector<Scalar> beta = fit.beta_hat();
    std::vector<ContrastSpec<Scalar>> out;
    out.reserve(static_cast<std::size_t>(M));
    if (kind == ContrastKind::untruncated) {
        for (Index j = 0; j < M; ++j) out.push_back(make_contrast(j, M, kind, delta, beta));
        return out;
    }
    const std::vector<Index> trimmed = trimmed_set(beta, delta);
    for (Index j = 0; j < M; ++j) {
        ContrastSpec<Scalar> spec;
        spec.j = j;
        spec.kind = kind;
        spec.delta = delta;
        spec.truncated_set = trimmed;
        spec.L = detail::contrast_vector<Scalar>(j, M, kind, trimmed);
        out.push_back(std::move(spec));
    }
    return out;
}

template <typename Scalar>
Scalar contrast_variance(const FitResult<Scalar>& fit, const ContrastSpec<Scalar>& contrast)
{
    return contrast.L.dot(fit.beta_cov() * contrast.L);
}

template <typename Scalar>
TestResult<Scalar> wald_test(const FitResult<Scalar>& fit, const ContrastSpec<Scalar>& contrast)
{
    if (!fit.converged) throw NumericError("fit did not converge; refusing to test");
    if (contrast.L.size() != fit.layout.evaluators) {
        throw InputError("contrast length does not match the number of evaluators");
    }
    TestResult<Scalar> out;
    out.j = contrast.j;
    out.estimate = contrast.L.dot(fit.beta_hat());
    out.variance = contrast_variance(fit, contrast);
    if (!(out.variance > 0) || !std::isfinite(static_cast<double>(out.variance))) {
        throw NumericError("degenerate contrast variance for evaluator index " + std::to_string(contrast.j));
    }
    out.se = std::sqrt(out.variance);
    const Scalar z = out.estimate / out.se;
    out.statistic = z * z;
    // Floor at the smallest positive double so p stays in (0, 1].
    out.p_value = std::max(chisq1_sf(static_cast<double>(out.statistic)),
                           std::numeric_limits<double>::denorm_min());
    return out;
}

template <typename Scalar>
std::vector<TestResult<Scalar>> test_all(const FitResult<Scalar>& fit, ContrastKind kind, double delta)
{
    std::vector<TestResult<Scalar>> out;
    for (const auto& contrast : make_contrasts(fit, kind, delta)) out.push_back(wald_test(fit, contrast));
    return out;
}

} // namespace evalguard
