#pragma once

// Synthetic CSV fixtures written on demand into a scratch directory, plus
// the ground truth they were generated from.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fixtures {

// Unique directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

struct FixtureTruth {
    std::vector<std::string> evaluator_ids;
    std::vector<std::string> planted;  // evaluators with a shifted effect
    std::vector<double> shift;         // matching shifts
};

// 12 evaluators x 30 participants, one measurement each; columns
// participant, evaluator, outcome, age, status (categorical). Evaluator
// "E07" is shifted by +10.
FixtureTruth write_planted_fixture(const std::filesystem::path& csv, std::uint64_t seed = 7);

// 10 evaluators with identical effects and residual SD 1e-3.
FixtureTruth write_null_fixture(const std::filesystem::path& csv, std::uint64_t seed = 11);

// 15 evaluators x 40 participants, two measurements per participant with
// residual correlation `rho`; columns add `repeat`.
FixtureTruth write_paired_fixture(const std::filesystem::path& csv, double rho = 0.6, std::uint64_t seed = 13);

// Schema of the audiology application: 68 audiologists, 3568 participants,
// both ears measured. Columns subject_id, audiologist, ear (1 right, 2 left),
// threshold_db, age, age_sq, hearing_status (excellent / very good / a
// little trouble), right_ear (measurement covariate). Audiologists A04, A13
// and A48 are planted with shifts +13, +14 and -13 dB.
FixtureTruth write_audiology_fixture(const std::filesystem::path& csv, std::uint64_t seed = 2014);

} // namespace fixtures
