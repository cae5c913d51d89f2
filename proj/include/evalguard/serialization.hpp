#pragma once

// JSON artifacts passed between CLI steps: the first-stage fit and the
// detection report. Both carry a format tag and enough state to be reloaded
// without the original data.

#include "evalguard/dataset.hpp"
#include "evalguard/fdr.hpp"
#include "evalguard/regression.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace evalguard {

inline constexpr const char* kFitFormat = "evalguard-fit/1";
inline constexpr const char* kReportFormat = "evalguard-report/1";

struct FitArtifact {
    FitResult<double> fit;
    std::vector<std::string> evaluator_ids;  // original ids, internal index order
    std::vector<Index> evaluator_counts;
    std::vector<std::string> column_names;
};

FitArtifact make_fit_artifact(const Dataset& dataset, const DesignMatrix& design, FitResult<double> fit);

nlohmann::json to_json(const FitArtifact& artifact);
FitArtifact fit_artifact_from_json(const nlohmann::json& j);
void write_fit_json(const FitArtifact& artifact, const std::filesystem::path& path);
// Throws InputError when the file is missing or malformed.
FitArtifact read_fit_json(const std::filesystem::path& path);

struct ReportArtifact {
    OutlierReport report;
    std::vector<std::string> evaluator_ids;
    // Decision curve rows (phi, q_hat, n_rejected) stored for reference.
    std::vector<DecisionPoint> curve;
};

nlohmann::json to_json(const ReportArtifact& artifact);
ReportArtifact report_artifact_from_json(const nlohmann::json& j);
void write_report_json(const ReportArtifact& artifact, const std::filesystem::path& path);
ReportArtifact read_report_json(const std::filesystem::path& path);

// Human-readable report: a summary row with the columns Alternative, Power,
// FDR, Outliers, Adjusted, then one line per evaluator.
std::string format_report_text(const ReportArtifact& artifact);

// Writes `text` verbatim, throwing InputError on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace evalguard
