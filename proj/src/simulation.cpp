#include "evalguard/simulation.hpp"

#include "evalguard/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <random>
#include <set>
#include <thread>

namespace evalguard {

std::vector<PlantedEffect> SimConfig::default_outliers()
{
    std::vector<PlantedEffect> out;
    for (Index j = 0; j < 5; ++j) out.push_back({j, 75.0});
    for (Index j = 5; j < 8; ++j) out.push_back({j, 70.0});
    return out;
}

void SimConfig::validate() const
{
    if (evaluators < 2) throw InputError("simulation needs at least two evaluators");
    if (participants_per_evaluator < 1) throw InputError("participants per evaluator must be positive");
    if (!(age_sd >= 0)) throw InputError("age SD must be non-negative");
    if (!(p_very_good >= 0 && p_little_trouble >= 0 && p_very_good + p_little_trouble <= 1)) {
        throw InputError("status probabilities must be non-negative and sum to at most 1");
    }
    if (!(sigma >= 0)) throw InputError("sigma must be non-negative");
    if (replicates < 1) throw InputError("replicates must be positive");
    if (!(c > 0)) throw InputError("alternative magnitude c must be positive");
    if (!(fixed_alpha > 0 && fixed_alpha < 1)) throw InputError("fixed alpha must lie in (0, 1)");
    if (phi_grid.empty()) throw InputError("power grid is empty");
    if (paired && !(rho > -1 && rho < 1)) throw InputError("rho must lie in (-1, 1)");
    trim_count(evaluators, kind == ContrastKind::truncated ? delta : 0.0);
    std::set<Index> seen;
    for (const auto& o : outliers) {
        if (o.evaluator < 0 || o.evaluator >= evaluators) throw InputError("outlier index out of range");
        if (!seen.insert(o.evaluator).second) throw InputError("outlier indices must be distinct");
    }
}

bool SimConfig::is_outlier(Index j) const
{
    return std::any_of(outliers.begin(), outliers.end(), [j](const PlantedEffect& o) { return o.evaluator == j; });
}

double SimConfig::true_beta(Index j) const
{
    for (const auto& o : outliers) {
        if (o.evaluator == j) return o.beta;
    }
    return normal_beta;
}

namespace {

std::string padded(const char* prefix, Index value, Index max_value)
{
    const std::size_t width = std::to_string(max_value).size();
    std::string digits = std::to_string(value);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return prefix + digits;
}

struct ParticipantDraw {
    std::vector<double> covariates;
    double mean = 0.0;
};

ParticipantDraw draw_participant(const SimConfig& config, Index evaluator, std::mt19937_64& rng,
                                 std::normal_distribution<double>& normal,
                                 std::uniform_real_distribution<double>& uniform)
{
    const double age = config.age_mean + config.age_sd * normal(rng);
    const double u = uniform(rng);
    const double very_good = u < config.p_very_good ? 1.0 : 0.0;
    const double little_trouble =
        (u >= config.p_very_good && u < config.p_very_good + config.p_little_trouble) ? 1.0 : 0.0;
    ParticipantDraw draw;
    draw.covariates = {age, age * age, very_good, little_trouble};
    draw.mean = config.true_beta(evaluator);
    for (std::size_t c = 0; c < 4; ++c) draw.mean += config.gamma[c] * draw.covariates[c];
    return draw;
}

const std::vector<std::string>& simulation_covariates()
{
    static const std::vector<std::string> names{"age", "age_sq", "status_very_good", "status_little_trouble"};
    return names;
}

Dataset generate(const SimConfig& config, std::optional<double> rho, std::uint64_t seed)
{
    config.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const Index M = config.evaluators;
    const Index n = config.participants_per_evaluator;
    std::vector<MeasurementRecord> records;
    records.reserve(static_cast<std::size_t>(M * n * (rho ? 2 : 1)));
    Index participant = 0;
    for (Index j = 0; j < M; ++j) {
        const std::string evaluator_id = padded("E", j + 1, M);
        for (Index k = 0; k < n; ++k, ++participant) {
            const std::string participant_id = padded("P", participant + 1, M * n);
            const ParticipantDraw draw = draw_participant(config, j, rng, normal, uniform);
            const double z1 = normal(rng);
            MeasurementRecord rec{participant_id, evaluator_id, 1, draw.mean + config.sigma * z1,
                                  draw.covariates, {}};
            records.push_back(rec);
            if (rho) {
                const double z2 = normal(rng);
                rec.repeat = 2;
                rec.outcome = draw.mean + config.sigma * (*rho * z1 + std::sqrt(1 - *rho * *rho) * z2);
                records.push_back(std::move(rec));
            }
        }
    }
    return Dataset::from_records(std::move(records), simulation_covariates());
}

struct ReplicateResult {
    bool ok = false;
    std::string error;
    std::vector<double> fdr_est;
    std::vector<double> fdr_emp;
    double fdr_alpha = 0.0;
    std::vector<std::uint8_t> hits_unadjusted;  // grid-major: g * M + j
    std::vector<std::uint8_t> hits_adjusted;
    std::vector<std::uint8_t> hits_fixed;
    double noise_ratio = 0.0;
    double normal_beta_mean = 0.0;
    double working_alpha = 0.0;
};

double false_fraction(const SimConfig& config, const std::vector<Index>& rejected)
{
    if (rejected.empty()) return 0.0;
    const auto false_hits = std::count_if(rejected.begin(), rejected.end(),
                                          [&](Index j) { return !config.is_outlier(j); });
    return static_cast<double>(false_hits) / static_cast<double>(rejected.size());
}

ReplicateResult run_replicate(const SimConfig& config, std::uint64_t seed)
{
    ReplicateResult out;
    const Dataset ds = config.paired ? generate_paired_dataset(config, config.rho, seed)
                                     : generate_dataset(config, seed);
    try {
        const DesignMatrix design = build_design(ds);
        const FitResult<double> fit = config.paired ? fit_gee(ds, design, config.working)
                                                    : fit_ols(ds, design);
        if (!fit.converged) throw NumericError("first-stage fit did not converge");
        const EvaluatorTests tests = prepare_tests(fit, config.kind, config.delta);
        const std::vector<double> p = tests.pvalues();
        const auto M = static_cast<std::size_t>(config.evaluators);
        const std::size_t G = config.phi_grid.size();

        out.hits_unadjusted.assign(G * M, 0);
        out.hits_adjusted.assign(G * M, 0);
        for (std::size_t g = 0; g < G; ++g) {
            std::vector<double> alphas;
            alphas.reserve(M);
            for (const auto& cal : calibrate(tests.variances, config.c, config.phi_grid[g])) {
                alphas.push_back(cal.alpha);
            }
            const FdrEstimate est = estimate_fdr(alphas, p);
            const std::vector<Index> rejected = rejected_by_threshold(p, alphas);
            out.fdr_est.push_back(est.q_hat);
            out.fdr_emp.push_back(false_fraction(config, rejected));
            for (Index j : rejected) out.hits_unadjusted[g * M + static_cast<std::size_t>(j)] = 1;
            for (Index j : adjust_rejections(rejected, est.q_hat, config.rule)) {
                out.hits_adjusted[g * M + static_cast<std::size_t>(j)] = 1;
            }
        }

        const std::vector<double> fixed(M, config.fixed_alpha);
        const std::vector<Index> rejected_fixed = rejected_by_threshold(p, fixed);
        out.fdr_alpha = false_fraction(config, rejected_fixed);
        out.hits_fixed.assign(M, 0);
        for (Index j : rejected_fixed) out.hits_fixed[static_cast<std::size_t>(j)] = 1;

        const Eigen::VectorXd y = ds.outcomes();
        const double var_y = (y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1);
        out.noise_ratio = var_y > 0 ? config.sigma * config.sigma / var_y : 0.0;

        double normal_sum = 0.0;
        Index normal_count = 0;
        for (Index j = 0; j < config.evaluators; ++j) {
            if (config.is_outlier(j)) continue;
            normal_sum += fit.theta(j);
            ++normal_count;
        }
        out.normal_beta_mean = normal_count ? normal_sum / static_cast<double>(normal_count) : 0.0;
        out.working_alpha = fit.working_correlation.alpha;
        out.ok = true;
    } catch (const InputError& e) {
        out.error = e.what();
    } catch (const NumericError& e) {
        out.error = e.what();
    }
    return out;
}

} // namespace

Dataset generate_dataset(const SimConfig& config, std::uint64_t seed)
{
    return generate(config, std::nullopt, seed);
}

Dataset generate_paired_dataset(const SimConfig& config, double rho, std::uint64_t seed)
{
    if (!(rho > -1 && rho < 1)) throw InputError("rho must lie in (-1, 1)");
    return generate(config, rho, seed);
}

int resolve_threads(int requested)
{
    if (requested > 0) return requested;
    if (const char* env = std::getenv("EVALGUARD_THREADS")) {
        char* end = nullptr;
        const long value = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && value > 0) return static_cast<int>(value);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

SimSummary run_study(const SimConfig& config)
{
    config.validate();
    const auto R = static_cast<std::size_t>(config.replicates);
    std::vector<ReplicateResult> results(R);

    const int threads = std::min<int>(resolve_threads(config.threads), static_cast<int>(R));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next++; r < R; r = next++) results[r] = run_replicate(config, config.base_seed + r);
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    const auto M = static_cast<std::size_t>(config.evaluators);
    const std::size_t G = config.phi_grid.size();
    SimSummary summary;
    summary.config = config;
    summary.phi_grid = config.phi_grid;
    summary.fdr_est_mean.assign(G, 0.0);
    summary.fdr_emp_mean.assign(G, 0.0);
    summary.detect_unadjusted = Eigen::MatrixXd::Zero(static_cast<Index>(M), static_cast<Index>(G));
    summary.detect_adjusted = Eigen::MatrixXd::Zero(static_cast<Index>(M), static_cast<Index>(G));
    summary.detect_fixed_alpha = Eigen::VectorXd::Zero(static_cast<Index>(M));

    // Aggregate in replicate order so the result does not depend on threading.
    for (std::size_t r = 0; r < R; ++r) {
        const auto& rep = results[r];
        if (!rep.ok) {
            ++summary.n_failed;
            summary.failures.push_back("replicate " + std::to_string(r) + ": " + rep.error);
            continue;
        }
        ++summary.n_ok;
        for (std::size_t g = 0; g < G; ++g) {
            summary.fdr_est_mean[g] += rep.fdr_est[g];
            summary.fdr_emp_mean[g] += rep.fdr_emp[g];
            for (std::size_t j = 0; j < M; ++j) {
                summary.detect_unadjusted(static_cast<Index>(j), static_cast<Index>(g)) += rep.hits_unadjusted[g * M + j];
                summary.detect_adjusted(static_cast<Index>(j), static_cast<Index>(g)) += rep.hits_adjusted[g * M + j];
            }
        }
        for (std::size_t j = 0; j < M; ++j) summary.detect_fixed_alpha(static_cast<Index>(j)) += rep.hits_fixed[j];
        summary.fdr_alpha_mean += rep.fdr_alpha;
        summary.noise_ratio_mean += rep.noise_ratio;
        summary.normal_beta_mean += rep.normal_beta_mean;
        summary.working_alpha_mean += rep.working_alpha;
    }

    if (static_cast<double>(summary.n_failed) > 0.05 * static_cast<double>(R)) {
        throw SimulationError(std::to_string(summary.n_failed) + " of " + std::to_string(R)
                              + " replicates failed (limit 5%); first failure: " + summary.failures.front());
    }
    const double n_ok = summary.n_ok;
    for (std::size_t g = 0; g < G; ++g) {
        summary.fdr_est_mean[g] /= n_ok;
        summary.fdr_emp_mean[g] /= n_ok;
    }
    summary.detect_unadjusted /= n_ok;
    summary.detect_adjusted /= n_ok;
    summary.detect_fixed_alpha /= n_ok;
    summary.fdr_alpha_mean /= n_ok;
    summary.noise_ratio_mean /= n_ok;
    summary.normal_beta_mean /= n_ok;
    summary.working_alpha_mean /= n_ok;
    return summary;
}

} // namespace evalguard
