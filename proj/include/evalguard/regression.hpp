#pragma once

// First-stage estimation of evaluator effects.
//
// Both solvers work on a no-intercept design whose leading columns are the
// evaluator indicators. The coefficient vector is stacked as
// theta = (beta over evaluators, gamma over covariates, eta over
// measurement covariates); see BlockLayout.
//
// fit_ols handles one measurement per participant. fit_gee solves the
// identity-link Gaussian estimating equation
//
//     sum_i X_i^T V_i^{-1} (y_i - X_i theta) = 0,    V_i = phi * R_i(alpha)
//
// with (alpha, phi) re-estimated by moments between steps and the
// Liang-Zeger sandwich A^{-1} B A^{-1} as covariance. Each step is solved by
// pre-whitening every cluster with the Cholesky factor of R_i and running a
// pivoted QR on the stacked result, so the normal equations are never formed.

#include "evalguard/dataset.hpp"
#include "evalguard/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace evalguard {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class CorrelationKind { independent, exchangeable, unstructured };

inline const char* to_string(CorrelationKind kind)
{
    switch (kind) {
    case CorrelationKind::independent: return "independent";
    case CorrelationKind::exchangeable: return "exchangeable";
    case CorrelationKind::unstructured: return "unstructured";
    }
    return "independent";
}

inline CorrelationKind parse_correlation_kind(const std::string& text)
{
    if (text == "independent") return CorrelationKind::independent;
    if (text == "exchangeable") return CorrelationKind::exchangeable;
    if (text == "unstructured") return CorrelationKind::unstructured;
    throw InputError("unknown working correlation '" + text + "'");
}

template <typename Scalar>
struct WorkingCorrelation {
    CorrelationKind kind = CorrelationKind::independent;
    Scalar alpha = 0;       // exchangeable
    Matrix<Scalar> matrix;  // unstructured, unit diagonal

    Matrix<Scalar> correlation(Index t) const
    {
        switch (kind) {
        case CorrelationKind::independent:
            return Matrix<Scalar>::Identity(t, t);
        case CorrelationKind::exchangeable: {
            Matrix<Scalar> r = Matrix<Scalar>::Constant(t, t, alpha);
            r.diagonal().setOnes();
            return r;
        }
        case CorrelationKind::unstructured:
            if (matrix.rows() != t) {
                throw InputError("unstructured working correlation has dimension "
                                 + std::to_string(matrix.rows()) + ", cluster size is "
                                 + std::to_string(t));
            }
            return matrix;
        }
        return Matrix<Scalar>::Identity(t, t);
    }
};

struct SolverControl {
    double tol = 1e-8;   // on max |theta^{t+1} - theta^t|
    int max_iter = 100;
};

enum class OlsCovariance { model_based, hc0 };

template <typename Scalar>
struct FitResult {
    BlockLayout layout;
    Vector<Scalar> theta;
    Matrix<Scalar> full_cov;
    Scalar dispersion = 0;
    WorkingCorrelation<Scalar> working_correlation;
    int n_iterations = 0;
    bool converged = false;
    Index n_obs = 0;
    Index n_clusters = 0;
    // ||sum_i X_i^T V_i^{-1} (y_i - mu_i)||_inf at the returned estimate.
    Scalar score_norm = 0;
    std::string engine;      // "ols" or "gee"
    std::string covariance;  // "model", "hc0" or "sandwich"
    std::vector<std::string> warnings;

    auto beta_hat() const { return theta.head(layout.evaluators); }
    auto gamma_hat() const { return theta.segment(layout.evaluators, layout.covariates); }
    auto eta_hat() const
    {
        return theta.segment(layout.evaluators + layout.covariates, layout.measurement_covariates);
    }
    auto beta_cov() const { return full_cov.topLeftCorner(layout.evaluators, layout.evaluators); }
};

namespace detail {

inline std::string column_label(std::span<const std::string> names, Index c)
{
    if (c < static_cast<Index>(names.size())) return names[static_cast<std::size_t>(c)];
    return "column " + std::to_string(c);
}

// Pivoted QR with relative pivot tolerance 1e-10. Throws naming the columns
// the pivoting pushed past the numerical rank.
template <typename Scalar>
void require_full_rank(const Eigen::ColPivHouseholderQR<Matrix<Scalar>>& qr,
                       std::span<const std::string> names)
{
    const Index cols = qr.cols();
    if (qr.rank() == cols) return;
    std::vector<Index> offending;
    for (Index k = qr.rank(); k < cols; ++k) offending.push_back(qr.colsPermutation().indices()(k));
    std::sort(offending.begin(), offending.end());
    std::string msg = "rank-deficient design: linearly dependent column(s) ";
    for (std::size_t k = 0; k < offending.size(); ++k) {
        if (k) msg += ", ";
        msg += column_label(names, offending[k]);
    }
    throw InputError(msg);
}

template <typename Scalar>
Eigen::ColPivHouseholderQR<Matrix<Scalar>> pivoted_qr(const Matrix<Scalar>& X,
                                                      std::span<const std::string> names)
{
    if (X.rows() <= X.cols()) {
        throw InputError("insufficient degrees of freedom: " + std::to_string(X.rows())
                         + " observations for " + std::to_string(X.cols()) + " parameters");
    }
    Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(X.rows(), X.cols());
    qr.setThreshold(Scalar(1e-10));
    qr.compute(X);
    require_full_rank(qr, names);
    return qr;
}

// (X^T X)^{-1} = P R^{-1} R^{-T} P^T from X P = Q R.
template <typename Scalar>
Matrix<Scalar> gram_inverse(const Eigen::ColPivHouseholderQR<Matrix<Scalar>>& qr)
{
    const Index P = qr.cols();
    const Matrix<Scalar> R = qr.matrixR().topLeftCorner(P, P).template triangularView<Eigen::Upper>();
    const Matrix<Scalar> r_inv =
        R.template triangularView<Eigen::Upper>().solve(Matrix<Scalar>::Identity(P, P));
    const Matrix<Scalar> inner = r_inv * r_inv.transpose();
    Matrix<Scalar> out = qr.colsPermutation() * inner * qr.colsPermutation().transpose();
    return Scalar(0.5) * (out + out.transpose());
}

template <typename Scalar>
Matrix<Scalar> sandwich(const Matrix<Scalar>& bread, const Matrix<Scalar>& meat)
{
    Matrix<Scalar> out = bread * meat * bread;
    return Scalar(0.5) * (out + out.transpose());
}

} // namespace detail

template <typename DerivedX, typename DerivedY>
FitResult<typename DerivedX::Scalar> fit_ols(const Eigen::MatrixBase<DerivedX>& design,
                                             const Eigen::MatrixBase<DerivedY>& y,
                                             BlockLayout layout,
                                             OlsCovariance cov_kind = OlsCovariance::model_based,
                                             std::span<const std::string> names = {})
{
    using Scalar = typename DerivedX::Scalar;
    const Matrix<Scalar> X = design;
    const Vector<Scalar> Y = y;
    if (Y.size() != X.rows()) throw InputError("outcome length does not match design rows");
    if (layout.total() != X.cols()) throw InputError("block layout does not match design columns");

    const auto qr = detail::pivoted_qr<Scalar>(X, names);
    const Index n = X.rows();
    const Index P = X.cols();

    FitResult<Scalar> fit;
    fit.layout = layout;
    fit.engine = "ols";
    fit.n_obs = n;
    fit.n_clusters = n;
    fit.n_iterations = 1;
    fit.converged = true;
    fit.theta = qr.solve(Y);

    const Vector<Scalar> resid = Y - X * fit.theta;
    fit.dispersion = resid.squaredNorm() / Scalar(n - P);
    fit.score_norm = (X.transpose() * resid).cwiseAbs().maxCoeff();
    if (!(fit.dispersion > 0)) fit.warnings.emplace_back("residual variance is zero (exact fit)");

    const Matrix<Scalar> bread = detail::gram_inverse(qr);
    if (cov_kind == OlsCovariance::hc0) {
        const Matrix<Scalar> scores = X.array().colwise() * resid.array();
        fit.full_cov = detail::sandwich<Scalar>(bread, scores.transpose() * scores);
        fit.covariance = "hc0";
    } else {
        fit.full_cov = fit.dispersion * bread;
        fit.covariance = "model";
    }
    return fit;
}

template <typename DerivedX, typename DerivedY>
FitResult<typename DerivedX::Scalar> fit_gee(const Eigen::MatrixBase<DerivedX>& design,
                                             const Eigen::MatrixBase<DerivedY>& y,
                                             std::span<const Index> cluster_sizes,
                                             BlockLayout layout, CorrelationKind kind,
                                             const SolverControl& ctrl = {},
                                             std::span<const std::string> names = {})
{
    using Scalar = typename DerivedX::Scalar;
    const Matrix<Scalar> X = design;
    const Vector<Scalar> Y = y;
    const Index n = X.rows();
    const Index P = X.cols();
    if (Y.size() != n) throw InputError("outcome length does not match design rows");
    if (layout.total() != P) throw InputError("block layout does not match design columns");

    const Index n_clusters = static_cast<Index>(cluster_sizes.size());
    std::vector<Index> offsets(cluster_sizes.size() + 1, 0);
    Index t_max = 0;
    Index t_min = n + 1;
    for (std::size_t i = 0; i < cluster_sizes.size(); ++i) {
        if (cluster_sizes[i] < 1) throw InputError("cluster with no measurements");
        offsets[i + 1] = offsets[i] + cluster_sizes[i];
        t_max = std::max(t_max, cluster_sizes[i]);
        t_min = std::min(t_min, cluster_sizes[i]);
    }
    if (offsets.back() != n) throw InputError("cluster sizes do not sum to the number of design rows");
    if (kind == CorrelationKind::unstructured && t_min != t_max) {
        throw InputError("unstructured working correlation requires every participant to have the "
                         "same number of measurements");
    }

    auto qr = detail::pivoted_qr<Scalar>(X, names);

    FitResult<Scalar> fit;
    fit.layout = layout;
    fit.engine = "gee";
    fit.covariance = "sandwich";
    fit.n_obs = n;
    fit.n_clusters = n_clusters;
    fit.working_correlation.kind = kind;
    fit.theta = qr.solve(Y);

    // Whitening factors L_t^{-1} with R_t = L_t L_t^T, one per cluster size.
    std::map<Index, Matrix<Scalar>> whiteners;
    Matrix<Scalar> Xw(n, P);
    Vector<Scalar> Yw(n);

    const Scalar upper = Scalar(1) - Scalar(1e-6);
    const Scalar lower = t_max > 1 ? -Scalar(1) / Scalar(t_max - 1) + Scalar(1e-6) : Scalar(-1);

    Vector<Scalar> resid = Y - X * fit.theta;
    for (int iter = 1; iter <= ctrl.max_iter; ++iter) {
        fit.n_iterations = iter;
        fit.dispersion = resid.squaredNorm() / Scalar(n - P);
        const bool exact_fit = !(fit.dispersion > 0);

        auto& wc = fit.working_correlation;
        if (kind == CorrelationKind::exchangeable) {
            Scalar cross = 0;
            Index pairs = 0;
            for (Index i = 0; i < n_clusters; ++i) {
                const Index o = offsets[static_cast<std::size_t>(i)];
                const Index t = cluster_sizes[static_cast<std::size_t>(i)];
                for (Index a = 0; a < t; ++a) {
                    for (Index b = a + 1; b < t; ++b) cross += resid(o + a) * resid(o + b);
                }
                pairs += t * (t - 1) / 2;
            }
            Scalar alpha = (pairs > 0 && !exact_fit) ? cross / (Scalar(pairs) * fit.dispersion) : Scalar(0);
            if (alpha > upper || alpha < lower) {
                alpha = std::clamp(alpha, lower, upper);
                fit.warnings.emplace_back("exchangeable correlation estimate clamped to its legal interval");
            }
            wc.alpha = alpha;
        } else if (kind == CorrelationKind::unstructured) {
            const Index t = t_max;
            Matrix<Scalar> S = Matrix<Scalar>::Zero(t, t);
            for (Index i = 0; i < n_clusters; ++i) {
                const auto r = resid.segment(offsets[static_cast<std::size_t>(i)], t);
                S.noalias() += r * r.transpose();
            }
            if (exact_fit) S.setZero();
            else S /= Scalar(n_clusters) * fit.dispersion;
            S.diagonal().setOnes();
            wc.matrix = S;
        }

        whiteners.clear();
        for (Index i = 0; i < n_clusters; ++i) {
            const Index t = cluster_sizes[static_cast<std::size_t>(i)];
            if (whiteners.count(t)) continue;
            Eigen::LLT<Matrix<Scalar>> llt(wc.correlation(t));
            if (llt.info() != Eigen::Success) {
                throw NumericError("singular working covariance V_i for cluster size " + std::to_string(t));
            }
            const Matrix<Scalar> L = llt.matrixL();
            whiteners.emplace(t, L.template triangularView<Eigen::Lower>().solve(Matrix<Scalar>::Identity(t, t)));
        }
        for (Index i = 0; i < n_clusters; ++i) {
            const Index o = offsets[static_cast<std::size_t>(i)];
            const Index t = cluster_sizes[static_cast<std::size_t>(i)];
            const auto& W = whiteners.at(t);
            Xw.middleRows(o, t).noalias() = W * X.middleRows(o, t);
            Yw.segment(o, t).noalias() = W * Y.segment(o, t);
        }

        qr.compute(Xw);
        detail::require_full_rank(qr, names);
        const Vector<Scalar> next = qr.solve(Yw);
        const Scalar step = (next - fit.theta).cwiseAbs().maxCoeff();
        fit.theta = next;
        resid = Y - X * fit.theta;
        if (step < Scalar(ctrl.tol) || exact_fit) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged) {
        fit.warnings.emplace_back("GEE did not converge in " + std::to_string(ctrl.max_iter) + " iterations");
    }

    // Sandwich: the dispersion cancels between bread and meat.
    const Matrix<Scalar> bread = detail::gram_inverse(qr);
    Matrix<Scalar> meat = Matrix<Scalar>::Zero(P, P);
    Vector<Scalar> score_total = Vector<Scalar>::Zero(P);
    const Vector<Scalar> resid_w = Yw - Xw * fit.theta;
    for (Index i = 0; i < n_clusters; ++i) {
        const Index o = offsets[static_cast<std::size_t>(i)];
        const Index t = cluster_sizes[static_cast<std::size_t>(i)];
        const Vector<Scalar> u = Xw.middleRows(o, t).transpose() * resid_w.segment(o, t);
        meat.noalias() += u * u.transpose();
        score_total += u;
    }
    fit.full_cov = detail::sandwich<Scalar>(bread, meat);
    fit.score_norm = fit.dispersion > 0 ? score_total.cwiseAbs().maxCoeff() / fit.dispersion
                                        : score_total.cwiseAbs().maxCoeff();
    return fit;
}

// Dataset-level entry points.

inline FitResult<double> fit_ols(const DesignMatrix& design, const Eigen::VectorXd& y,
                                 OlsCovariance cov_kind = OlsCovariance::model_based)
{
    return fit_ols(design.values, y, design.layout, cov_kind, design.column_names);
}

inline FitResult<double> fit_ols(const Dataset& dataset, const DesignMatrix& design,
                                 OlsCovariance cov_kind = OlsCovariance::model_based)
{
    if (!dataset.single_measurement()) {
        throw InputError("OLS requires one measurement per participant; use the GEE engine for "
                         "repeated measurements");
    }
    return fit_ols(design, dataset.outcomes(), cov_kind);
}

inline FitResult<double> fit_gee(const Dataset& dataset, const DesignMatrix& design,
                                 CorrelationKind kind, const SolverControl& ctrl = {})
{
    return fit_gee(design.values, dataset.outcomes(), dataset.cluster_sizes(), design.layout, kind,
                   ctrl, design.column_names);
}

} // namespace evalguard
