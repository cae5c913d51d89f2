#include "evalguard/dataset.hpp"

#include "evalguard/csv.hpp"
#include "evalguard/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

namespace evalguard {

namespace {

bool all_finite(const std::vector<double>& v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<std::string> sorted_unique(std::vector<std::string> values)
{
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return values;
}

Index position_of(const std::vector<std::string>& sorted, const std::string& key)
{
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), key);
    return static_cast<Index>(it - sorted.begin());
}

} // namespace

Dataset Dataset::from_records(std::vector<MeasurementRecord> records,
                              std::vector<std::string> covariate_names,
                              std::vector<std::string> measurement_covariate_names)
{
    if (records.empty()) throw InputError("empty dataset: no measurement records");

    const std::size_t p = covariate_names.size();
    const std::size_t q = measurement_covariate_names.size();

    std::unordered_map<std::string, std::size_t> first_record;
    first_record.reserve(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.participant_covariates.size() != p) {
            throw InputError("record " + std::to_string(r + 1) + " has "
                             + std::to_string(rec.participant_covariates.size())
                             + " covariates, expected " + std::to_string(p));
        }
        if (rec.measurement_covariates.size() != q) {
            throw InputError("record " + std::to_string(r + 1) + " has "
                             + std::to_string(rec.measurement_covariates.size())
                             + " measurement covariates, expected " + std::to_string(q));
        }
        if (!std::isfinite(rec.outcome) || !all_finite(rec.participant_covariates)
            || !all_finite(rec.measurement_covariates)) {
            throw InputError("record " + std::to_string(r + 1) + " has a missing or non-finite value");
        }
        if (rec.repeat < 1) {
            throw InputError("record " + std::to_string(r + 1) + " has repeat index < 1");
        }
        const auto [it, inserted] = first_record.emplace(rec.participant_id, r);
        if (!inserted) {
            const auto& first = records[it->second];
            if (first.evaluator_id != rec.evaluator_id) {
                throw InputError("participant assigned to multiple evaluators: " + rec.participant_id
                                 + " (" + first.evaluator_id + ", " + rec.evaluator_id + ")");
            }
            if (first.participant_covariates != rec.participant_covariates) {
                throw InputError("participant covariates differ across measurements of participant "
                                 + rec.participant_id);
            }
        }
    }

    Dataset ds;
    ds.covariate_names_ = std::move(covariate_names);
    ds.measurement_covariate_names_ = std::move(measurement_covariate_names);

    std::vector<std::string> evaluators;
    std::vector<std::string> participants;
    evaluators.reserve(records.size());
    participants.reserve(first_record.size());
    for (const auto& rec : records) evaluators.push_back(rec.evaluator_id);
    for (const auto& [id, r] : first_record) participants.push_back(id);
    ds.evaluator_ids_ = sorted_unique(std::move(evaluators));
    ds.participant_ids_ = sorted_unique(std::move(participants));

    const std::size_t n = records.size();
    std::vector<Index> participant_of(n);
    std::vector<Index> evaluator_of(n);
    for (std::size_t r = 0; r < n; ++r) {
        participant_of[r] = position_of(ds.participant_ids_, records[r].participant_id);
        evaluator_of[r] = position_of(ds.evaluator_ids_, records[r].evaluator_id);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (participant_of[a] != participant_of[b]) return participant_of[a] < participant_of[b];
        return records[a].repeat < records[b].repeat;
    });

    const auto N = ds.participant_ids_.size();
    ds.cluster_sizes_.assign(N, 0);
    ds.participant_evaluator_.assign(N, 0);
    ds.evaluator_counts_.assign(ds.evaluator_ids_.size(), 0);
    ds.records_.reserve(n);
    ds.record_evaluator_.reserve(n);
    ds.record_participant_.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t r = order[k];
        if (k > 0) {
            const std::size_t prev = order[k - 1];
            if (participant_of[prev] == participant_of[r] && records[prev].repeat == records[r].repeat) {
                throw InputError("duplicate repeat index " + std::to_string(records[r].repeat)
                                 + " for participant " + records[r].participant_id);
            }
        }
        const auto i = static_cast<std::size_t>(participant_of[r]);
        if (ds.cluster_sizes_[i] == 0) {
            ds.participant_evaluator_[i] = evaluator_of[r];
            ++ds.evaluator_counts_[static_cast<std::size_t>(evaluator_of[r])];
        }
        ++ds.cluster_sizes_[i];
        ds.record_participant_.push_back(participant_of[r]);
        ds.record_evaluator_.push_back(evaluator_of[r]);
        ds.records_.push_back(std::move(records[r]));
    }
    return ds;
}

Index Dataset::max_cluster_size() const
{
    if (cluster_sizes_.empty()) return 0;
    return *std::max_element(cluster_sizes_.begin(), cluster_sizes_.end());
}

Eigen::VectorXd Dataset::outcomes() const
{
    Eigen::VectorXd y(num_records());
    for (Index r = 0; r < num_records(); ++r) y(r) = records_[static_cast<std::size_t>(r)].outcome;
    return y;
}

bool Dataset::operator==(const Dataset& other) const
{
    if (evaluator_ids_ != other.evaluator_ids_ || participant_ids_ != other.participant_ids_
        || covariate_names_ != other.covariate_names_
        || measurement_covariate_names_ != other.measurement_covariate_names_
        || cluster_sizes_ != other.cluster_sizes_ || records_.size() != other.records_.size()) {
        return false;
    }
    for (std::size_t r = 0; r < records_.size(); ++r) {
        const auto& a = records_[r];
        const auto& b = other.records_[r];
        if (a.participant_id != b.participant_id || a.evaluator_id != b.evaluator_id
            || a.repeat != b.repeat || a.outcome != b.outcome
            || a.participant_covariates != b.participant_covariates
            || a.measurement_covariates != b.measurement_covariates) {
            return false;
        }
    }
    return true;
}

DesignMatrix build_design(const Dataset& dataset)
{
    DesignMatrix design;
    design.layout = {dataset.num_evaluators(), dataset.num_covariates(),
                     dataset.num_measurement_covariates()};
    const Index M = design.layout.evaluators;
    const Index p = design.layout.covariates;
    const Index q = design.layout.measurement_covariates;

    design.values = Eigen::MatrixXd::Zero(dataset.num_records(), design.layout.total());
    for (Index r = 0; r < dataset.num_records(); ++r) {
        const auto& rec = dataset.records()[static_cast<std::size_t>(r)];
        design.values(r, dataset.record_evaluator(r)) = 1.0;
        for (Index c = 0; c < p; ++c) {
            design.values(r, M + c) = rec.participant_covariates[static_cast<std::size_t>(c)];
        }
        for (Index c = 0; c < q; ++c) {
            design.values(r, M + p + c) = rec.measurement_covariates[static_cast<std::size_t>(c)];
        }
    }

    design.column_names.reserve(static_cast<std::size_t>(design.layout.total()));
    for (const auto& id : dataset.evaluator_ids()) design.column_names.push_back("evaluator[" + id + "]");
    for (const auto& name : dataset.covariate_names()) design.column_names.push_back(name);
    for (const auto& name : dataset.measurement_covariate_names()) design.column_names.push_back(name);
    for (std::size_t c = 0; c < design.column_names.size(); ++c) {
        design.column_map.emplace(design.column_names[c], static_cast<Index>(c));
    }
    return design;
}

namespace {

std::size_t require_column(const csv::Table& table, const std::string& name, const char* role)
{
    const auto pos = table.find(name);
    if (!pos) throw InputError(std::string("missing column: '") + name + "' (" + role + ")");
    return *pos;
}

double require_number(const csv::Table& table, std::size_t row, std::size_t col, const char* what)
{
    const std::string& field = table.rows[row][col];
    const std::string where = " at data row " + std::to_string(row + 1) + ", column '"
                              + table.header[col] + "'";
    if (field.find_first_not_of(" \t") == std::string::npos) {
        throw InputError(std::string("missing ") + what + " value" + where);
    }
    const auto value = csv::parse_double(field);
    if (!value) throw InputError(std::string("non-numeric ") + what + " '" + field + "'" + where);
    return *value;
}

} // namespace

Dataset ingest_csv(const std::filesystem::path& path, const ColumnBinding& schema)
{
    const csv::Table table = csv::read(path);
    if (table.rows.empty()) throw InputError("empty file: no data rows in " + path.string());

    const auto outcome_col = require_column(table, schema.outcome, "outcome");
    const auto participant_col = require_column(table, schema.participant, "participant");
    const auto evaluator_col = require_column(table, schema.evaluator, "evaluator");
    std::optional<std::size_t> repeat_col;
    if (schema.repeat) repeat_col = require_column(table, *schema.repeat, "repeat");

    const std::set<std::string> categorical(schema.categorical.begin(), schema.categorical.end());
    for (const auto& name : categorical) {
        if (std::find(schema.covariates.begin(), schema.covariates.end(), name) == schema.covariates.end()) {
            throw InputError("categorical column '" + name + "' is not listed among the covariates");
        }
    }

    // Per covariate column: either numeric, or categorical with sorted levels
    // (first level is the reference and gets no dummy).
    struct CovariateColumn {
        std::size_t col;
        bool is_categorical;
        std::vector<std::string> levels;
    };
    std::vector<CovariateColumn> cov_cols;
    std::vector<std::string> cov_names;
    for (const auto& name : schema.covariates) {
        CovariateColumn cc{require_column(table, name, "covariate"), categorical.count(name) > 0, {}};
        if (cc.is_categorical) {
            std::vector<std::string> levels;
            for (std::size_t r = 0; r < table.rows.size(); ++r) {
                const std::string& field = table.rows[r][cc.col];
                if (field.empty()) {
                    throw InputError("missing categorical value at data row " + std::to_string(r + 1)
                                     + ", column '" + name + "'");
                }
                levels.push_back(field);
            }
            cc.levels = sorted_unique(std::move(levels));
            for (std::size_t l = 1; l < cc.levels.size(); ++l) {
                cov_names.push_back(name + "[" + cc.levels[l] + "]");
            }
        } else {
            cov_names.push_back(name);
        }
        cov_cols.push_back(std::move(cc));
    }
    std::vector<std::size_t> mcov_cols;
    for (const auto& name : schema.measurement_covariates) {
        mcov_cols.push_back(require_column(table, name, "measurement covariate"));
    }

    std::unordered_map<std::string, int> next_repeat;
    std::vector<MeasurementRecord> records;
    records.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        MeasurementRecord rec;
        rec.participant_id = row[participant_col];
        rec.evaluator_id = row[evaluator_col];
        if (rec.participant_id.empty()) {
            throw InputError("missing participant id at data row " + std::to_string(r + 1));
        }
        if (rec.evaluator_id.empty()) {
            throw InputError("missing evaluator id at data row " + std::to_string(r + 1));
        }
        rec.outcome = require_number(table, r, outcome_col, "outcome");
        if (repeat_col) {
            const double k = require_number(table, r, *repeat_col, "repeat");
            if (k < 1 || k != std::floor(k) || k > 1e9) {
                throw InputError("repeat index must be a positive integer at data row "
                                 + std::to_string(r + 1));
            }
            rec.repeat = static_cast<int>(k);
        } else {
            rec.repeat = ++next_repeat[rec.participant_id];
        }
        for (const auto& cc : cov_cols) {
            if (cc.is_categorical) {
                const auto& level = row[cc.col];
                for (std::size_t l = 1; l < cc.levels.size(); ++l) {
                    rec.participant_covariates.push_back(level == cc.levels[l] ? 1.0 : 0.0);
                }
            } else {
                rec.participant_covariates.push_back(require_number(table, r, cc.col, "covariate"));
            }
        }
        for (const auto col : mcov_cols) {
            rec.measurement_covariates.push_back(require_number(table, r, col, "measurement covariate"));
        }
        records.push_back(std::move(rec));
    }
    return Dataset::from_records(std::move(records), std::move(cov_names), schema.measurement_covariates);
}

ColumnBinding export_binding(const Dataset& dataset)
{
    ColumnBinding binding;
    binding.participant = "participant";
    binding.evaluator = "evaluator";
    binding.repeat = "repeat";
    binding.outcome = "outcome";
    binding.covariates = dataset.covariate_names();
    binding.measurement_covariates = dataset.measurement_covariate_names();

    std::set<std::string> seen{"participant", "evaluator", "repeat", "outcome"};
    for (const auto* names : {&binding.covariates, &binding.measurement_covariates}) {
        for (const auto& name : *names) {
            if (!seen.insert(name).second) {
                throw InputError("cannot export: column name '" + name + "' is not unique");
            }
        }
    }
    return binding;
}

void export_csv(const Dataset& dataset, const std::filesystem::path& path)
{
    const ColumnBinding binding = export_binding(dataset);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path.string());

    out << "participant,evaluator,repeat,outcome";
    for (const auto& name : binding.covariates) out << ',' << csv::escape(name);
    for (const auto& name : binding.measurement_covariates) out << ',' << csv::escape(name);
    out << '\n';
    for (const auto& rec : dataset.records()) {
        out << csv::escape(rec.participant_id) << ',' << csv::escape(rec.evaluator_id) << ','
            << rec.repeat << ',' << csv::format_double(rec.outcome);
        for (double x : rec.participant_covariates) out << ',' << csv::format_double(x);
        for (double z : rec.measurement_covariates) out << ',' << csv::format_double(z);
        out << '\n';
    }
}

} // namespace evalguard
