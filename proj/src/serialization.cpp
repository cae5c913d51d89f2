#include "evalguard/serialization.hpp"

#include "evalguard/csv.hpp"
#include "evalguard/error.hpp"
#include "evalguard/simulation.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace evalguard {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m)
{
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j)
{
    const auto rows = static_cast<Index>(j.size());
    const Index cols = rows ? static_cast<Index>(j.at(0).size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const json& row = j.at(static_cast<std::size_t>(r));
        if (static_cast<Index>(row.size()) != cols) throw InputError("ragged matrix in JSON artifact");
        for (Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j)
{
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

SolveStatus parse_solve_status(const std::string& text)
{
    if (text == "ok") return SolveStatus::ok;
    if (text == "lower_bracket") return SolveStatus::lower_bracket;
    if (text == "degenerate") return SolveStatus::degenerate;
    throw InputError("unknown calibration status '" + text + "'");
}

json read_json_file(const std::filesystem::path& path, const char* what)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(std::string("cannot open ") + what + ": " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed ") + what + " " + path.string() + ": " + e.what());
    }
}

void check_format(const json& j, const char* expected)
{
    if (!j.is_object() || j.value("format", std::string{}) != expected) {
        throw InputError(std::string("not a ") + expected + " artifact");
    }
}

json ids_to_json(const std::vector<Index>& indices, const std::vector<std::string>& ids)
{
    json out = json::array();
    for (Index j : indices) out.push_back(ids.at(static_cast<std::size_t>(j)));
    return out;
}

std::vector<Index> ids_from_json(const json& j, const std::vector<std::string>& ids)
{
    std::vector<Index> out;
    for (const auto& item : j) {
        const auto id = item.get<std::string>();
        const auto it = std::find(ids.begin(), ids.end(), id);
        if (it == ids.end()) throw InputError("report references unknown evaluator '" + id + "'");
        out.push_back(static_cast<Index>(it - ids.begin()));
    }
    return out;
}

std::string fmt(double v, int precision)
{
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

} // namespace

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path.string());
    out << text;
    if (!out) throw InputError("write failed: " + path.string());
}

FitArtifact make_fit_artifact(const Dataset& dataset, const DesignMatrix& design, FitResult<double> fit)
{
    FitArtifact a;
    a.fit = std::move(fit);
    a.evaluator_ids = dataset.evaluator_ids();
    a.evaluator_counts = dataset.evaluator_counts();
    a.column_names = design.column_names;
    return a;
}

json to_json(const FitArtifact& a)
{
    const auto& f = a.fit;
    json wc{{"kind", to_string(f.working_correlation.kind)}, {"alpha", f.working_correlation.alpha}};
    if (f.working_correlation.kind == CorrelationKind::unstructured) {
        wc["matrix"] = matrix_to_json(f.working_correlation.matrix);
    }
    return json{
        {"format", kFitFormat},
        {"engine", f.engine},
        {"covariance", f.covariance},
        {"layout",
         {{"evaluators", f.layout.evaluators},
          {"covariates", f.layout.covariates},
          {"measurement_covariates", f.layout.measurement_covariates}}},
        {"evaluator_ids", a.evaluator_ids},
        {"evaluator_counts", a.evaluator_counts},
        {"column_names", a.column_names},
        {"theta", vector_to_json(f.theta)},
        {"beta_hat", vector_to_json(f.beta_hat())},
        {"covariance_matrix", matrix_to_json(f.full_cov)},
        {"diagnostics",
         {{"dispersion", f.dispersion},
          {"working_correlation", wc},
          {"iterations", f.n_iterations},
          {"converged", f.converged},
          {"n_obs", f.n_obs},
          {"n_clusters", f.n_clusters},
          {"score_norm", f.score_norm},
          {"warnings", f.warnings}}},
    };
}

FitArtifact fit_artifact_from_json(const json& j)
{
    check_format(j, kFitFormat);
    try {
        FitArtifact a;
        auto& f = a.fit;
        f.engine = j.at("engine").get<std::string>();
        f.covariance = j.at("covariance").get<std::string>();
        const json& layout = j.at("layout");
        f.layout.evaluators = layout.at("evaluators").get<Index>();
        f.layout.covariates = layout.at("covariates").get<Index>();
        f.layout.measurement_covariates = layout.at("measurement_covariates").get<Index>();
        a.evaluator_ids = j.at("evaluator_ids").get<std::vector<std::string>>();
        a.evaluator_counts = j.at("evaluator_counts").get<std::vector<Index>>();
        a.column_names = j.at("column_names").get<std::vector<std::string>>();
        f.theta = vector_from_json(j.at("theta"));
        f.full_cov = matrix_from_json(j.at("covariance_matrix"));
        const json& d = j.at("diagnostics");
        f.dispersion = d.at("dispersion").get<double>();
        const json& wc = d.at("working_correlation");
        f.working_correlation.kind = parse_correlation_kind(wc.at("kind").get<std::string>());
        f.working_correlation.alpha = wc.at("alpha").get<double>();
        if (wc.contains("matrix")) f.working_correlation.matrix = matrix_from_json(wc.at("matrix"));
        f.n_iterations = d.at("iterations").get<int>();
        f.converged = d.at("converged").get<bool>();
        f.n_obs = d.at("n_obs").get<Index>();
        f.n_clusters = d.at("n_clusters").get<Index>();
        f.score_norm = d.at("score_norm").get<double>();
        f.warnings = d.at("warnings").get<std::vector<std::string>>();

        const Index P = f.layout.total();
        if (f.theta.size() != P || f.full_cov.rows() != P || f.full_cov.cols() != P
            || static_cast<Index>(a.evaluator_ids.size()) != f.layout.evaluators) {
            throw InputError("fit artifact dimensions are inconsistent");
        }
        return a;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed fit artifact: ") + e.what());
    }
}

void write_fit_json(const FitArtifact& artifact, const std::filesystem::path& path)
{
    write_text_file(path, to_json(artifact).dump(2) + "\n");
}

FitArtifact read_fit_json(const std::filesystem::path& path)
{
    return fit_artifact_from_json(read_json_file(path, "fit artifact"));
}

json to_json(const ReportArtifact& a)
{
    const OutlierReport& r = a.report;
    const auto& s = r.settings;
    json settings{{"c", s.c},
                  {"contrast", to_string(s.kind)},
                  {"delta", s.delta},
                  {"adjust", s.adjust},
                  {"adjust_rule", to_string(s.rule)},
                  {"power", s.phi ? json(*s.phi) : json(nullptr)},
                  {"target_fdr", s.target_fdr ? json(*s.target_fdr) : json(nullptr)}};

    json evaluators = json::array();
    for (std::size_t k = 0; k < r.tests.size(); ++k) {
        const auto& t = r.tests[k];
        json e{{"id", a.evaluator_ids.at(static_cast<std::size_t>(t.j))},
               {"estimate", t.estimate},
               {"variance", t.variance},
               {"statistic", t.statistic},
               {"p_value", t.p_value}};
        if (k < r.calibration.size()) {
            e["lambda"] = r.calibration[k].lambda;
            e["alpha"] = r.calibration[k].alpha;
            e["status"] = to_string(r.calibration[k].status);
        }
        evaluators.push_back(std::move(e));
    }

    json curve = json::array();
    for (const auto& p : a.curve) {
        curve.push_back({{"phi", p.phi}, {"q_hat", p.q_hat}, {"n_rejected", p.n_rejected}});
    }

    return json{
        {"format", kReportFormat},
        {"settings", settings},
        {"power", r.phi ? json(*r.phi) : json(nullptr)},
        {"numerator", r.numerator},
        {"q_hat", r.q_hat},
        {"rejected", ids_to_json(r.rejected, a.evaluator_ids)},
        {"adjusted_rejected", ids_to_json(r.adjusted_rejected, a.evaluator_ids)},
        {"removed", r.removed},
        {"adjustment_applied", r.adjustment_applied},
        {"diagnostics", r.diagnostics},
        {"evaluators", evaluators},
        {"curve", curve},
    };
}

ReportArtifact report_artifact_from_json(const json& j)
{
    check_format(j, kReportFormat);
    try {
        ReportArtifact a;
        OutlierReport& r = a.report;
        const json& s = j.at("settings");
        r.settings.c = s.at("c").get<double>();
        r.settings.kind = parse_contrast_kind(s.at("contrast").get<std::string>());
        r.settings.delta = s.at("delta").get<double>();
        r.settings.adjust = s.at("adjust").get<bool>();
        r.settings.rule = parse_adjust_rule(s.at("adjust_rule").get<std::string>());
        if (!s.at("power").is_null()) r.settings.phi = s.at("power").get<double>();
        if (!s.at("target_fdr").is_null()) r.settings.target_fdr = s.at("target_fdr").get<double>();
        if (!j.at("power").is_null()) r.phi = j.at("power").get<double>();

        Index index = 0;
        for (const auto& e : j.at("evaluators")) {
            a.evaluator_ids.push_back(e.at("id").get<std::string>());
            TestResult<double> t;
            t.j = index;
            t.estimate = e.at("estimate").get<double>();
            t.variance = e.at("variance").get<double>();
            t.se = std::sqrt(t.variance);
            t.statistic = e.at("statistic").get<double>();
            t.p_value = e.at("p_value").get<double>();
            r.tests.push_back(t);
            if (e.contains("alpha")) {
                CalibrationPoint cal;
                cal.j = index;
                cal.c = r.settings.c;
                cal.phi = r.phi.value_or(0.0);
                cal.lambda = e.at("lambda").get<double>();
                cal.alpha = e.at("alpha").get<double>();
                cal.status = parse_solve_status(e.at("status").get<std::string>());
                r.calibration.push_back(cal);
            }
            ++index;
        }
        r.numerator = j.at("numerator").get<double>();
        r.q_hat = j.at("q_hat").get<double>();
        r.rejected = ids_from_json(j.at("rejected"), a.evaluator_ids);
        r.adjusted_rejected = ids_from_json(j.at("adjusted_rejected"), a.evaluator_ids);
        r.removed = j.at("removed").get<Index>();
        r.adjustment_applied = j.at("adjustment_applied").get<bool>();
        r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
        for (const auto& p : j.at("curve")) {
            DecisionPoint point;
            point.phi = p.at("phi").get<double>();
            point.q_hat = p.at("q_hat").get<double>();
            point.n_rejected = p.at("n_rejected").get<Index>();
            a.curve.push_back(std::move(point));
        }
        return a;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed report artifact: ") + e.what());
    }
}

void write_report_json(const ReportArtifact& artifact, const std::filesystem::path& path)
{
    write_text_file(path, to_json(artifact).dump(2) + "\n");
}

ReportArtifact read_report_json(const std::filesystem::path& path)
{
    return report_artifact_from_json(read_json_file(path, "report"));
}

std::string format_report_text(const ReportArtifact& a)
{
    const OutlierReport& r = a.report;
    auto id_list = [&](const std::vector<Index>& indices) {
        if (indices.empty()) return std::string("none");
        std::string out;
        for (Index j : indices) {
            if (!out.empty()) out += ", ";
            out += a.evaluator_ids.at(static_cast<std::size_t>(j));
        }
        return out;
    };

    std::ostringstream out;
    out << "Contrast: " << to_string(r.settings.kind);
    if (r.settings.kind == ContrastKind::truncated) out << " (delta = " << fmt(r.settings.delta, 6) << ")";
    out << "\n";
    if (r.settings.target_fdr) out << "Target FDR: " << fmt(*r.settings.target_fdr, 6) << "\n";
    out << "\n";
    out << "Alternative\tPower\tFDR\tOutliers\tAdjusted\n";
    out << "c = " << fmt(r.settings.c, 6) << '\t' << (r.phi ? fmt(*r.phi, 4) : std::string("-")) << '\t'
        << fmt(r.q_hat, 4) << '\t' << id_list(r.rejected) << '\t'
        << (r.adjustment_applied ? id_list(r.adjusted_rejected) : std::string("-")) << "\n\n";

    out << "evaluator\testimate\tse\tp_value\talpha\trejected\n";
    for (std::size_t k = 0; k < r.tests.size(); ++k) {
        const auto& t = r.tests[k];
        const bool rejected = std::find(r.rejected.begin(), r.rejected.end(), t.j) != r.rejected.end();
        out << a.evaluator_ids.at(static_cast<std::size_t>(t.j)) << '\t' << fmt(t.estimate, 6) << '\t'
            << fmt(t.se, 6) << '\t' << fmt(t.p_value, 6) << '\t'
            << (k < r.calibration.size() ? fmt(r.calibration[k].alpha, 6) : std::string("-")) << '\t'
            << (rejected ? "yes" : "no") << '\n';
    }
    for (const auto& d : r.diagnostics) out << "note: " << d << '\n';
    return out.str();
}

// Lives here rather than in simulation.cpp because the manifest is JSON.
void write_sim_bundle(const SimSummary& s, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());

    const SimConfig& cfg = s.config;
    const Index M = cfg.evaluators;
    auto label = [&](Index j) {
        std::string digits = std::to_string(j + 1);
        const std::size_t width = std::to_string(M).size();
        if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
        return "E" + digits;
    };
    const auto f = [](double v) { return csv::format_double(v); };

    std::ostringstream curve;
    curve << "phi,fdr_est_mean,fdr_emp_mean,fdr_alpha05\n";
    for (std::size_t g = 0; g < s.phi_grid.size(); ++g) {
        curve << f(s.phi_grid[g]) << ',' << f(s.fdr_est_mean[g]) << ',' << f(s.fdr_emp_mean[g]) << ','
              << f(s.fdr_alpha_mean) << '\n';
    }
    write_text_file(dir / "fdr_curve.csv", curve.str());

    std::ostringstream props;
    props << "evaluator,phi,tp_or_fp,adjusted_flag,proportion\n";
    for (Index j = 0; j < M; ++j) {
        const char* kind = cfg.is_outlier(j) ? "tp" : "fp";
        for (std::size_t g = 0; g < s.phi_grid.size(); ++g) {
            const auto gi = static_cast<Index>(g);
            props << label(j) << ',' << f(s.phi_grid[g]) << ',' << kind << ",0,"
                  << f(s.detect_unadjusted(j, gi)) << '\n';
            props << label(j) << ',' << f(s.phi_grid[g]) << ',' << kind << ",1,"
                  << f(s.detect_adjusted(j, gi)) << '\n';
        }
    }
    write_text_file(dir / "proportions.csv", props.str());

    std::ostringstream fixed;
    fixed << "evaluator,alpha,tp_or_fp,proportion\n";
    for (Index j = 0; j < M; ++j) {
        fixed << label(j) << ',' << f(cfg.fixed_alpha) << ',' << (cfg.is_outlier(j) ? "tp" : "fp") << ','
              << f(s.detect_fixed_alpha(j)) << '\n';
    }
    write_text_file(dir / "alpha05_proportions.csv", fixed.str());

    json outliers = json::array();
    for (const auto& o : cfg.outliers) outliers.push_back({{"evaluator", label(o.evaluator)}, {"beta", o.beta}});
    json manifest{
        {"format", "evalguard-simulation/1"},
        {"config",
         {{"evaluators", cfg.evaluators},
          {"participants_per_evaluator", cfg.participants_per_evaluator},
          {"normal_beta", cfg.normal_beta},
          {"outliers", outliers},
          {"age_mean", cfg.age_mean},
          {"age_sd", cfg.age_sd},
          {"p_very_good", cfg.p_very_good},
          {"p_little_trouble", cfg.p_little_trouble},
          {"gamma", cfg.gamma},
          {"sigma", cfg.sigma},
          {"replicates", cfg.replicates},
          {"c", cfg.c},
          {"contrast", to_string(cfg.kind)},
          {"delta", cfg.delta},
          {"power_grid", {{"first", s.phi_grid.front()}, {"last", s.phi_grid.back()},
                          {"points", s.phi_grid.size()}}},
          {"fixed_alpha", cfg.fixed_alpha},
          {"adjust_rule", to_string(cfg.rule)},
          {"paired", cfg.paired},
          {"rho", cfg.rho},
          {"working_correlation", to_string(cfg.working)}}},
        {"seeds", {{"base_seed", cfg.base_seed}, {"rule", "replicate r uses base_seed + r"},
                   {"first", cfg.base_seed}, {"last", cfg.base_seed + static_cast<std::uint64_t>(cfg.replicates) - 1}}},
        {"replicates_ok", s.n_ok},
        {"replicates_failed", s.n_failed},
        {"failures", s.failures},
        {"summary",
         {{"noise_ratio_mean", s.noise_ratio_mean},
          {"normal_beta_mean", s.normal_beta_mean},
          {"working_alpha_mean", s.working_alpha_mean},
          {"fdr_alpha05", s.fdr_alpha_mean}}},
    };
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

} // namespace evalguard
