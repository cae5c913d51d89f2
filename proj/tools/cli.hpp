#pragma once

// Command-line front end. Each subcommand is also callable directly with a
// RunConfig so tests can drive it without spawning a process.
//
// Exit codes: 0 ok, 1 verification mismatch, 2 input error, 3 numeric
// error, 4 simulation error.

#include "evalguard/calibration.hpp"
#include "evalguard/fdr.hpp"
#include "evalguard/regression.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace evalguard::cli {

struct RunConfig {
    std::string subcommand;

    std::filesystem::path input;
    std::filesystem::path fit_path;
    std::filesystem::path report_path;
    std::string outcome_col = "outcome";
    std::string participant_col = "participant";
    std::string evaluator_col = "evaluator";
    std::vector<std::string> covariates;
    std::vector<std::string> categorical;
    std::vector<std::string> measurement_covariates;
    std::optional<std::string> repeat_col;

    std::string engine = "auto";  // auto: ols when every participant has one measurement
    std::string corr = "exchangeable";
    std::string ols_cov = "model";

    double c = 5.0;
    std::optional<double> power;
    std::optional<double> target_fdr;
    std::string contrast = "truncated";
    double delta = kDefaultDelta;
    bool adjust = false;
    std::string adjust_rule = "prose";
    std::string grid = "0.10:0.95:0.01";

    double sigma = 8.0;
    int replicates = 300;
    int evaluators = 100;
    int per_evaluator = 40;
    double rho = 0.5;
    bool paired = false;
    std::uint64_t seed = 20220501;
    int threads = 0;

    double bh_alpha = 0.1;
    std::string p_col = "p_value";
    std::string id_col = "evaluator";

    std::filesystem::path out = ".";
    bool svg = false;
};

int cmd_fit(const RunConfig& config);
int cmd_curve(const RunConfig& config);
int cmd_detect(const RunConfig& config);
int cmd_simulate(const RunConfig& config);
int cmd_bh(const RunConfig& config);
int cmd_verify(const RunConfig& config);

// Dispatches on config.subcommand and maps exceptions to exit codes.
int run(const RunConfig& config);

// Parses argv and runs. argv[0] is the program name.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

} // namespace evalguard::cli
