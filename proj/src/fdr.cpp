#include "evalguard/fdr.hpp"

#include "evalguard/csv.hpp"
#include "evalguard/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace evalguard {

FdrEstimate estimate_fdr(std::span<const double> alphas, std::span<const double> pvalues)
{
    if (alphas.size() != pvalues.size()) {
        throw InputError("alpha and p-value vectors differ in length");
    }
    FdrEstimate est;
    for (std::size_t j = 0; j < alphas.size(); ++j) {
        est.numerator += alphas[j];
        if (pvalues[j] < alphas[j]) ++est.rejections;
    }
    est.q_hat = est.rejections > 0 ? est.numerator / static_cast<double>(est.rejections) : 0.0;
    return est;
}

std::vector<double> EvaluatorTests::pvalues() const
{
    std::vector<double> out;
    out.reserve(tests.size());
    for (const auto& t : tests) out.push_back(t.p_value);
    return out;
}

EvaluatorTests prepare_tests(const FitResult<double>& fit, ContrastKind kind, double delta)
{
    EvaluatorTests out;
    out.kind = kind;
    out.delta = kind == ContrastKind::truncated ? delta : 0.0;
    for (const auto& contrast : make_contrasts(fit, kind, delta)) {
        out.tests.push_back(wald_test(fit, contrast));
        out.variances.push_back(out.tests.back().variance);
    }
    return out;
}

DecisionCurve decision_curve(const EvaluatorTests& tests, double c, const std::vector<double>& phi_grid)
{
    DecisionCurve curve;
    curve.c = c;
    curve.kind = tests.kind;
    curve.delta = tests.delta;
    const std::vector<double> p = tests.pvalues();
    for (double phi : phi_grid) {
        DecisionPoint point;
        point.phi = phi;
        for (const auto& cal : calibrate(tests.variances, c, phi)) {
            point.alphas.push_back(cal.alpha);
            point.status.push_back(cal.status);
        }
        const FdrEstimate est = estimate_fdr(point.alphas, p);
        point.n_rejected = est.rejections;
        point.numerator = est.numerator;
        point.q_hat = est.q_hat;
        curve.points.push_back(std::move(point));
    }
    return curve;
}

DecisionCurve decision_curve(const FitResult<double>& fit, ContrastKind kind, double delta, double c,
                             const std::vector<double>& phi_grid)
{
    return decision_curve(prepare_tests(fit, kind, delta), c, phi_grid);
}

const char* to_string(AdjustRule rule) { return rule == AdjustRule::algorithm ? "algorithm" : "prose"; }

AdjustRule parse_adjust_rule(const std::string& text)
{
    if (text == "prose") return AdjustRule::prose;
    if (text == "algorithm") return AdjustRule::algorithm;
    throw InputError("unknown adjustment rule '" + text + "'");
}

long round_half_up(double x) { return static_cast<long>(std::floor(x + 0.5)); }

Index adjustment_removal_count(Index k, double q_hat, AdjustRule rule)
{
    const double expected_false = q_hat * static_cast<double>(k);
    if (!(expected_false > 1)) return 0;
    Index remove = round_half_up(expected_false);
    if (rule == AdjustRule::algorithm) ++remove;
    return std::min(remove, k);
}

std::vector<Index> rejected_by_threshold(std::span<const double> pvalues, std::span<const double> alphas)
{
    if (alphas.size() != pvalues.size()) {
        throw InputError("alpha and p-value vectors differ in length");
    }
    std::vector<Index> out;
    for (std::size_t j = 0; j < pvalues.size(); ++j) {
        if (pvalues[j] < alphas[j]) out.push_back(static_cast<Index>(j));
    }
    std::stable_sort(out.begin(), out.end(), [&](Index a, Index b) {
        return pvalues[static_cast<std::size_t>(a)] < pvalues[static_cast<std::size_t>(b)];
    });
    return out;
}

std::vector<Index> adjust_rejections(const std::vector<Index>& rejected, double q_hat, AdjustRule rule)
{
    const Index k = static_cast<Index>(rejected.size());
    const Index remove = adjustment_removal_count(k, q_hat, rule);
    return {rejected.begin(), rejected.begin() + (k - remove)};
}

OutlierReport apply_adjustment(OutlierReport report, AdjustRule rule)
{
    if (report.adjustment_applied) return report;
    report.adjusted_rejected = adjust_rejections(report.rejected, report.q_hat, rule);
    report.removed = static_cast<Index>(report.rejected.size() - report.adjusted_rejected.size());
    report.adjustment_applied = true;
    report.settings.adjust = true;
    report.settings.rule = rule;
    return report;
}

OutlierReport detect(const EvaluatorTests& tests, double c, double phi, bool adjust, AdjustRule rule)
{
    if (!(phi > 0 && phi < 1)) throw InputError("power must lie in (0, 1)");
    OutlierReport report;
    report.settings.c = c;
    report.settings.phi = phi;
    report.settings.kind = tests.kind;
    report.settings.delta = tests.delta;
    report.settings.adjust = adjust;
    report.settings.rule = rule;
    report.phi = phi;
    report.tests = tests.tests;
    report.calibration = calibrate(tests.variances, c, phi);

    std::vector<double> alphas;
    alphas.reserve(report.calibration.size());
    for (const auto& cal : report.calibration) alphas.push_back(cal.alpha);
    const std::vector<double> p = tests.pvalues();
    const FdrEstimate est = estimate_fdr(alphas, p);
    report.numerator = est.numerator;
    report.q_hat = est.q_hat;
    report.rejected = rejected_by_threshold(p, alphas);
    report.adjusted_rejected = report.rejected;
    if (report.q_hat > 1) {
        report.diagnostics.push_back("estimated FDR exceeds 1: expected false discoveries exceed rejections");
    }
    if (std::any_of(report.calibration.begin(), report.calibration.end(),
                    [](const CalibrationPoint& cal) { return cal.status == SolveStatus::lower_bracket; })) {
        report.diagnostics.push_back("some evaluators reach the target power below alpha = 1e-16; "
                                     "their alpha is clamped to the lower bracket");
    }
    if (adjust) report = apply_adjustment(std::move(report), rule);
    return report;
}

OutlierReport detect(const FitResult<double>& fit, ContrastKind kind, double delta, double c, double phi,
                     bool adjust, AdjustRule rule)
{
    return detect(prepare_tests(fit, kind, delta), c, phi, adjust, rule);
}

OutlierReport detect_at_fdr(const EvaluatorTests& tests, double c, double target_q, bool adjust,
                            AdjustRule rule, const std::vector<double>& phi_grid)
{
    if (!(target_q >= 0)) throw InputError("target FDR must be non-negative");
    const DecisionCurve curve = decision_curve(tests, c, phi_grid);
    std::optional<double> chosen;
    for (const auto& point : curve.points) {
        if (point.n_rejected > 0 && point.q_hat <= target_q && (!chosen || point.phi >= *chosen)) {
            chosen = point.phi;
        }
    }
    if (chosen) {
        OutlierReport report = detect(tests, c, *chosen, adjust, rule);
        report.settings.target_fdr = target_q;
        return report;
    }

    OutlierReport report;
    report.settings.c = c;
    report.settings.target_fdr = target_q;
    report.settings.kind = tests.kind;
    report.settings.delta = tests.delta;
    report.settings.adjust = adjust;
    report.settings.rule = rule;
    report.tests = tests.tests;
    report.adjustment_applied = adjust;
    std::ostringstream msg;
    msg << "no feasible power: no grid point has rejections with estimated FDR <= " << target_q;
    report.diagnostics.push_back(msg.str());
    return report;
}

OutlierReport detect_at_fdr(const FitResult<double>& fit, ContrastKind kind, double delta, double c,
                            double target_q, bool adjust, AdjustRule rule,
                            const std::vector<double>& phi_grid)
{
    return detect_at_fdr(prepare_tests(fit, kind, delta), c, target_q, adjust, rule, phi_grid);
}

std::vector<Index> bh_procedure(std::span<const double> pvalues, double alpha)
{
    if (!(alpha > 0 && alpha < 1)) throw InputError("BH level alpha must lie in (0, 1)");
    const std::size_t M = pvalues.size();
    for (double p : pvalues) {
        if (!(p >= 0 && p <= 1)) throw InputError("p-values must lie in [0, 1]");
    }
    std::vector<Index> order(M);
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return pvalues[static_cast<std::size_t>(a)] < pvalues[static_cast<std::size_t>(b)];
    });
    std::size_t k = 0;
    for (std::size_t rank = 1; rank <= M; ++rank) {
        const double p = pvalues[static_cast<std::size_t>(order[rank - 1])];
        if (p <= static_cast<double>(rank) / static_cast<double>(M) * alpha) k = rank;
    }
    std::vector<Index> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.begin(), out.end());
    return out;
}

void write_curve_csv(const DecisionCurve& curve, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path.string());
    const std::size_t M = curve.points.empty() ? 0 : curve.points.front().alphas.size();
    out << "phi,q_hat,n_rejected";
    for (std::size_t j = 1; j <= M; ++j) out << ",alpha_" << j;
    out << '\n';
    for (const auto& point : curve.points) {
        out << csv::format_double(point.phi) << ',' << csv::format_double(point.q_hat) << ','
            << point.n_rejected;
        for (double a : point.alphas) out << ',' << csv::format_double(a);
        out << '\n';
    }
}

void write_curve_svg(const DecisionCurve& curve, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path.string());

    constexpr double width = 640, height = 420, left = 60, right = 20, top = 30, bottom = 50;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    double y_max = 1.0;
    for (const auto& point : curve.points) y_max = std::max(y_max, point.q_hat);
    auto sx = [&](double phi) { return left + phi * plot_w; };
    auto sy = [&](double q) { return top + plot_h * (1 - q / y_max); };
    auto num = [](double v) {
        std::ostringstream s;
        s.setf(std::ios::fixed);
        s.precision(2);
        s << v;
        return s.str();
    };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
        << "Estimated FDR vs power (c = " << csv::format_double(curve.c) << ", " << to_string(curve.kind)
        << ")</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
        << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 10; k += 2) {
        const double phi = k / 10.0;
        out << "<text x=\"" << num(sx(phi)) << "\" y=\"" << top + plot_h + 18
            << "\" text-anchor=\"middle\" font-size=\"11\">" << num(phi) << "</text>\n";
        const double q = phi * y_max;
        out << "<text x=\"" << left - 6 << "\" y=\"" << num(sy(q) + 4)
            << "\" text-anchor=\"end\" font-size=\"11\">" << num(q) << "</text>\n";
    }
    out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 10
        << "\" text-anchor=\"middle\" font-size=\"12\">power</text>\n";
    out << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
        << "transform=\"rotate(-90 16 " << top + plot_h / 2 << ")\">estimated FDR</text>\n";
    // Reference lines at power 0.8 and estimated FDR 0.5.
    out << "<line x1=\"" << num(sx(0.8)) << "\" y1=\"" << top << "\" x2=\"" << num(sx(0.8)) << "\" y2=\""
        << top + plot_h << "\" stroke=\"grey\" stroke-dasharray=\"4 3\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << num(sy(0.5)) << "\" x2=\"" << left + plot_w << "\" y2=\""
        << num(sy(0.5)) << "\" stroke=\"grey\" stroke-dasharray=\"4 3\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < curve.points.size(); ++k) {
        if (k) out << ' ';
        out << num(sx(curve.points[k].phi)) << ',' << num(sy(curve.points[k].q_hat));
    }
    out << "\"/>\n</svg>\n";
}

} // namespace evalguard
