#pragma once

// Long-format measurement data and the no-intercept evaluator design.
//
// A Dataset is immutable once built. Records are held in canonical order
// (participant index, then repeat index) so that every participant's
// measurements form one contiguous block of design rows; the estimating
// equation solvers rely on that layout.

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace evalguard {

using Index = Eigen::Index;

struct MeasurementRecord {
    std::string participant_id;
    std::string evaluator_id;
    int repeat = 1;
    double outcome = 0.0;
    std::vector<double> participant_covariates;   // X_i, constant per participant
    std::vector<double> measurement_covariates;   // Z_{i,k}, may be empty
};

// Which CSV columns play which role.
struct ColumnBinding {
    std::string outcome;
    std::string participant;
    std::string evaluator;
    std::vector<std::string> covariates;
    // Subset of `covariates` holding category labels; each is expanded to
    // reference-coded dummies (reference = first level in sorted order).
    std::vector<std::string> categorical;
    std::optional<std::string> repeat;
    std::vector<std::string> measurement_covariates;
};

class Dataset {
public:
    Dataset() = default;

    // Validates and canonicalises. Throws InputError on any invariant
    // violation (participant under two evaluators, ragged covariates,
    // participant covariates varying across repeats, duplicate repeats,
    // non-finite values, empty input).
    static Dataset from_records(std::vector<MeasurementRecord> records,
                                std::vector<std::string> covariate_names,
                                std::vector<std::string> measurement_covariate_names = {});

    const std::vector<MeasurementRecord>& records() const { return records_; }
    Index num_records() const { return static_cast<Index>(records_.size()); }
    Index num_evaluators() const { return static_cast<Index>(evaluator_ids_.size()); }
    Index num_participants() const { return static_cast<Index>(participant_ids_.size()); }
    Index num_covariates() const { return static_cast<Index>(covariate_names_.size()); }
    Index num_measurement_covariates() const {
        return static_cast<Index>(measurement_covariate_names_.size());
    }

    // Sorted lexicographically; position = internal evaluator index.
    const std::vector<std::string>& evaluator_ids() const { return evaluator_ids_; }
    const std::vector<std::string>& participant_ids() const { return participant_ids_; }
    const std::vector<std::string>& covariate_names() const { return covariate_names_; }
    const std::vector<std::string>& measurement_covariate_names() const {
        return measurement_covariate_names_;
    }

    // n_j, participants per evaluator.
    const std::vector<Index>& evaluator_counts() const { return evaluator_counts_; }
    // t_i, measurements per participant, in participant index order.
    const std::vector<Index>& cluster_sizes() const { return cluster_sizes_; }
    Index max_cluster_size() const;
    bool single_measurement() const { return max_cluster_size() == 1; }

    Index record_evaluator(Index r) const { return record_evaluator_[static_cast<std::size_t>(r)]; }
    Index record_participant(Index r) const {
        return record_participant_[static_cast<std::size_t>(r)];
    }
    Index participant_evaluator(Index i) const {
        return participant_evaluator_[static_cast<std::size_t>(i)];
    }

    Eigen::VectorXd outcomes() const;

    bool operator==(const Dataset& other) const;

private:
    std::vector<MeasurementRecord> records_;
    std::vector<std::string> evaluator_ids_;
    std::vector<std::string> participant_ids_;
    std::vector<std::string> covariate_names_;
    std::vector<std::string> measurement_covariate_names_;
    std::vector<Index> evaluator_counts_;
    std::vector<Index> cluster_sizes_;
    std::vector<Index> record_evaluator_;
    std::vector<Index> record_participant_;
    std::vector<Index> participant_evaluator_;
};

// Column block sizes of a stacked coefficient vector (beta, gamma, eta).
struct BlockLayout {
    Index evaluators = 0;
    Index covariates = 0;
    Index measurement_covariates = 0;

    Index total() const { return evaluators + covariates + measurement_covariates; }
    bool operator==(const BlockLayout&) const = default;
};

struct DesignMatrix {
    Eigen::MatrixXd values;                 // one row per record
    BlockLayout layout;
    std::vector<std::string> column_names;  // evaluator columns first
    std::map<std::string, Index> column_map;

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
};

// Evaluator indicators, then participant covariates, then measurement
// covariates. No intercept.
DesignMatrix build_design(const Dataset& dataset);

Dataset ingest_csv(const std::filesystem::path& path, const ColumnBinding& schema);

// Writes the canonical long-format CSV. Columns: participant, evaluator,
// repeat, outcome, then covariates and measurement covariates under their
// dataset names. Re-ingesting with `export_binding(dataset)` reproduces an
// identical Dataset.
void export_csv(const Dataset& dataset, const std::filesystem::path& path);
ColumnBinding export_binding(const Dataset& dataset);

} // namespace evalguard
