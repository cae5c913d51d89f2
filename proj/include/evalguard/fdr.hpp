#pragma once

// False discovery rate estimation, the power/FDR decision curve, detection
// with evaluator-specific thresholds, the FDR-based adjustment and the
// Benjamini-Hochberg step-up fallback.

#include "evalguard/calibration.hpp"
#include "evalguard/inference.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evalguard {

struct FdrEstimate {
    double numerator = 0.0;  // sum_j alpha_j, expected false discoveries when outliers are rare
    Index rejections = 0;    // R = #{j : p_j < alpha_j}
    double q_hat = 0.0;      // numerator / R, or 0 when R == 0
};

// Rejection is strict: p_j < alpha_j.
FdrEstimate estimate_fdr(std::span<const double> alphas, std::span<const double> pvalues);

// Tests and contrast variances for every evaluator, computed once per fit.
struct EvaluatorTests {
    ContrastKind kind = ContrastKind::truncated;
    double delta = kDefaultDelta;
    std::vector<TestResult<double>> tests;
    std::vector<double> variances;

    std::vector<double> pvalues() const;
};

EvaluatorTests prepare_tests(const FitResult<double>& fit, ContrastKind kind, double delta);

struct DecisionPoint {
    double phi = 0.0;
    std::vector<double> alphas;
    std::vector<SolveStatus> status;
    Index n_rejected = 0;
    double numerator = 0.0;
    double q_hat = 0.0;
};

struct DecisionCurve {
    double c = 0.0;
    ContrastKind kind = ContrastKind::truncated;
    double delta = kDefaultDelta;
    std::vector<DecisionPoint> points;
};

DecisionCurve decision_curve(const EvaluatorTests& tests, double c, const std::vector<double>& phi_grid);
DecisionCurve decision_curve(const FitResult<double>& fit, ContrastKind kind, double delta, double c,
                             const std::vector<double>& phi_grid);

// How the FDR-based adjustment counts removals. `prose` removes
// round(Q * k) rejections; `algorithm` removes the index range
// k - round(Q * k) .. k, one more. Both require k * Q > 1.
enum class AdjustRule { prose, algorithm };

const char* to_string(AdjustRule rule);
AdjustRule parse_adjust_rule(const std::string& text);

// Round half up to the nearest integer.
long round_half_up(double x);
Index adjustment_removal_count(Index k, double q_hat, AdjustRule rule = AdjustRule::prose);

struct DetectionSettings {
    double c = 5.0;
    std::optional<double> phi;
    std::optional<double> target_fdr;
    ContrastKind kind = ContrastKind::truncated;
    double delta = kDefaultDelta;
    bool adjust = false;
    AdjustRule rule = AdjustRule::prose;
};

struct OutlierReport {
    DetectionSettings settings;
    std::optional<double> phi;  // operating power; empty when no grid point was feasible
    std::vector<TestResult<double>> tests;
    std::vector<CalibrationPoint> calibration;
    std::vector<Index> rejected;  // ascending p-value, ties by evaluator index
    double numerator = 0.0;
    double q_hat = 0.0;
    std::vector<Index> adjusted_rejected;
    Index removed = 0;
    bool adjustment_applied = false;
    std::vector<std::string> diagnostics;
};

// Evaluators with p_j < alpha_j, ordered by ascending p (ties by index).
std::vector<Index> rejected_by_threshold(std::span<const double> pvalues, std::span<const double> alphas);

// Drops the removal count of largest-p entries from `rejected`, which must
// already be ordered by ascending p.
std::vector<Index> adjust_rejections(const std::vector<Index>& rejected, double q_hat,
                                     AdjustRule rule = AdjustRule::prose);

// Applies the FDR-based adjustment using the report's stored q_hat. A report
// that is already adjusted is returned unchanged.
OutlierReport apply_adjustment(OutlierReport report, AdjustRule rule = AdjustRule::prose);

OutlierReport detect(const EvaluatorTests& tests, double c, double phi, bool adjust,
                     AdjustRule rule = AdjustRule::prose);
OutlierReport detect(const FitResult<double>& fit, ContrastKind kind, double delta, double c, double phi,
                     bool adjust, AdjustRule rule = AdjustRule::prose);

// Largest grid power with at least one rejection and q_hat <= target_q.
OutlierReport detect_at_fdr(const EvaluatorTests& tests, double c, double target_q, bool adjust,
                            AdjustRule rule = AdjustRule::prose,
                            const std::vector<double>& phi_grid = default_power_grid());
OutlierReport detect_at_fdr(const FitResult<double>& fit, ContrastKind kind, double delta, double c,
                            double target_q, bool adjust, AdjustRule rule = AdjustRule::prose,
                            const std::vector<double>& phi_grid = default_power_grid());

// Benjamini-Hochberg step-up: rejects the k smallest p-values for the largest
// k with p_(k) <= k alpha / M. Returns indices in ascending index order.
std::vector<Index> bh_procedure(std::span<const double> pvalues, double alpha);

// CSV columns: phi, q_hat, n_rejected, alpha_1 .. alpha_M.
void write_curve_csv(const DecisionCurve& curve, const std::filesystem::path& path);
// Line chart of q_hat against phi with reference lines at phi = 0.8 and
// q_hat = 0.5.
void write_curve_svg(const DecisionCurve& curve, const std::filesystem::path& path);

} // namespace evalguard
