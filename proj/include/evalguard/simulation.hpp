#pragma once

// Monte Carlo harness: synthetic audiology-like data with planted outlier
// evaluators, the full two-stage pipeline per replicate, and aggregation of
// estimated vs empirical FDR and per-evaluator detection proportions.

#include "evalguard/dataset.hpp"
#include "evalguard/fdr.hpp"
#include "evalguard/regression.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace evalguard {

struct PlantedEffect {
    Index evaluator = 0;  // 0-based internal index
    double beta = 0.0;
};

struct SimConfig {
    Index evaluators = 100;
    Index participants_per_evaluator = 40;
    // Evaluators 1-5 at 75 and 6-8 at 70 (0-based 0..7); all others at normal_beta.
    std::vector<PlantedEffect> outliers = default_outliers();
    double normal_beta = 67.0;

    double age_mean = 56.6;
    double age_sd = 4.4;
    // Self-reported hearing status; "excellent" is the reference category.
    double p_very_good = 0.44;
    double p_little_trouble = 0.25;
    // age, age^2, I(very good), I(a little trouble)
    std::array<double, 4> gamma{-2.7, 0.03, 3.3, 10.3};

    double sigma = 8.0;
    int replicates = 300;
    double c = 5.0;
    ContrastKind kind = ContrastKind::truncated;
    double delta = kDefaultDelta;
    std::vector<double> phi_grid = default_power_grid();
    double fixed_alpha = 0.05;
    AdjustRule rule = AdjustRule::prose;

    // Two measurements per participant with residual correlation rho, fitted
    // by GEE with the given working structure.
    bool paired = false;
    double rho = 0.0;
    CorrelationKind working = CorrelationKind::exchangeable;

    std::uint64_t base_seed = 20220501;
    int threads = 0;  // 0: EVALGUARD_THREADS, else hardware concurrency

    static std::vector<PlantedEffect> default_outliers();
    void validate() const;
    bool is_outlier(Index j) const;
    double true_beta(Index j) const;
};

// t_i = 1. Evaluator ids E001.., participant ids P00001.. (zero padded so
// lexicographic order equals generation order). Covariates: age, age_sq,
// status_very_good, status_little_trouble.
Dataset generate_dataset(const SimConfig& config, std::uint64_t seed);

// t_i = 2 with bivariate normal residuals, correlation rho.
Dataset generate_paired_dataset(const SimConfig& config, double rho, std::uint64_t seed);

struct SimSummary {
    SimConfig config;
    std::vector<double> phi_grid;
    std::vector<double> fdr_est_mean;
    std::vector<double> fdr_emp_mean;
    double fdr_alpha_mean = 0.0;  // empirical FDR at the fixed alpha
    // Detection proportions, evaluators x grid points.
    Eigen::MatrixXd detect_unadjusted;
    Eigen::MatrixXd detect_adjusted;
    Eigen::VectorXd detect_fixed_alpha;
    double noise_ratio_mean = 0.0;
    double normal_beta_mean = 0.0;   // mean beta_hat over non-planted evaluators
    double working_alpha_mean = 0.0; // GEE exchangeable alpha (paired runs)
    int n_ok = 0;
    int n_failed = 0;
    std::vector<std::string> failures;

    // For planted evaluators these are true positive proportions, otherwise
    // false positive proportions.
    double fixed_alpha_proportion(Index j) const { return detect_fixed_alpha(j); }
};

int resolve_threads(int requested);

// Throws SimulationError when more than 5% of replicates fail.
SimSummary run_study(const SimConfig& config);

// fdr_curve.csv, proportions.csv, alpha05_proportions.csv and manifest.json.
void write_sim_bundle(const SimSummary& summary, const std::filesystem::path& dir);

} // namespace evalguard
