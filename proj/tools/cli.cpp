#include "cli.hpp"

#include "evalguard/csv.hpp"
#include "evalguard/dataset.hpp"
#include "evalguard/distributions.hpp"
#include "evalguard/error.hpp"
#include "evalguard/serialization.hpp"
#include "evalguard/simulation.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

namespace evalguard::cli {

namespace {

std::filesystem::path prepare_out(const RunConfig& config)
{
    std::error_code ec;
    std::filesystem::create_directories(config.out, ec);
    if (ec) throw InputError("cannot create output directory " + config.out.string() + ": " + ec.message());
    return config.out;
}

ColumnBinding binding_of(const RunConfig& config)
{
    ColumnBinding b;
    b.outcome = config.outcome_col;
    b.participant = config.participant_col;
    b.evaluator = config.evaluator_col;
    b.covariates = config.covariates;
    b.categorical = config.categorical;
    b.repeat = config.repeat_col;
    b.measurement_covariates = config.measurement_covariates;
    return b;
}

FitArtifact fit_from_input(const RunConfig& config)
{
    if (config.input.empty()) throw InputError("missing --input data file");
    const Dataset ds = ingest_csv(config.input, binding_of(config));
    const DesignMatrix design = build_design(ds);

    std::string engine = config.engine;
    if (engine == "auto") engine = ds.single_measurement() ? "ols" : "gee";
    FitResult<double> fit;
    if (engine == "ols") {
        OlsCovariance cov = OlsCovariance::model_based;
        if (config.ols_cov == "hc0") {
            cov = OlsCovariance::hc0;
        } else if (config.ols_cov != "model") {
            throw InputError("unknown OLS covariance '" + config.ols_cov + "' (expected model or hc0)");
        }
        fit = fit_ols(ds, design, cov);
    } else if (engine == "gee") {
        fit = fit_gee(ds, design, parse_correlation_kind(config.corr));
    } else {
        throw InputError("unknown engine '" + engine + "' (expected ols, gee or auto)");
    }
    if (!fit.converged) {
        throw NumericError("first-stage fit did not converge after " + std::to_string(fit.n_iterations)
                           + " iterations");
    }
    return make_fit_artifact(ds, design, std::move(fit));
}

FitArtifact load_fit(const RunConfig& config)
{
    if (!config.fit_path.empty()) return read_fit_json(config.fit_path);
    if (!config.input.empty()) return fit_from_input(config);
    throw InputError("missing fit artifact: pass --fit fit.json (or --input to fit inline)");
}

void check_delta(double delta)
{
    if (!(delta >= 0 && delta < 0.5)) throw InputError("--delta must lie in [0, 0.5)");
}

bool close(double a, double b, double rel)
{
    if (a == b) return true;
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

} // namespace

int cmd_fit(const RunConfig& config)
{
    check_delta(config.delta);
    const FitArtifact artifact = fit_from_input(config);
    const auto dir = prepare_out(config);
    write_fit_json(artifact, dir / "fit.json");

    const Eigen::VectorXd beta = artifact.fit.beta_hat();
    const double mean = beta.mean();
    const double tmean = truncated_mean(beta, config.delta);
    std::ostringstream table;
    table << "evaluator,beta_hat,centered_mean,centered_truncated_mean\n";
    for (Index j = 0; j < beta.size(); ++j) {
        table << csv::escape(artifact.evaluator_ids[static_cast<std::size_t>(j)]) << ','
              << csv::format_double(beta(j)) << ',' << csv::format_double(beta(j) - mean) << ','
              << csv::format_double(beta(j) - tmean) << '\n';
    }
    write_text_file(dir / "beta_table.csv", table.str());

    const auto& f = artifact.fit;
    std::cout << "engine " << f.engine << ", " << f.n_obs << " measurements, " << f.n_clusters
              << " participants, " << f.layout.evaluators << " evaluators";
    if (f.engine == "gee") {
        std::cout << ", working correlation " << to_string(f.working_correlation.kind);
        if (f.working_correlation.kind == CorrelationKind::exchangeable) {
            std::cout << " (alpha = " << f.working_correlation.alpha << ")";
        }
        std::cout << ", " << f.n_iterations << " iterations";
    }
    std::cout << '\n';
    for (const auto& w : f.warnings) std::cerr << "warning: " << w << '\n';
    return 0;
}

int cmd_curve(const RunConfig& config)
{
    check_delta(config.delta);
    const FitArtifact artifact = load_fit(config);
    const auto grid = parse_power_grid(config.grid);
    const DecisionCurve curve =
        decision_curve(artifact.fit, parse_contrast_kind(config.contrast), config.delta, config.c, grid);
    const auto dir = prepare_out(config);
    write_curve_csv(curve, dir / "fdr_curve.csv");
    if (config.svg) write_curve_svg(curve, dir / "curve.svg");
    return 0;
}

int cmd_detect(const RunConfig& config)
{
    check_delta(config.delta);
    if (config.power.has_value() == config.target_fdr.has_value()) {
        throw InputError("detect needs exactly one of --power or --target-fdr");
    }
    const FitArtifact artifact = load_fit(config);
    const EvaluatorTests tests =
        prepare_tests(artifact.fit, parse_contrast_kind(config.contrast), config.delta);
    const AdjustRule rule = parse_adjust_rule(config.adjust_rule);
    const auto grid = parse_power_grid(config.grid);

    ReportArtifact out;
    out.evaluator_ids = artifact.evaluator_ids;
    out.report = config.power ? detect(tests, config.c, *config.power, config.adjust, rule)
                              : detect_at_fdr(tests, config.c, *config.target_fdr, config.adjust, rule, grid);
    out.curve = decision_curve(tests, config.c, grid).points;
    for (auto& point : out.curve) {
        point.alphas.clear();
        point.status.clear();
    }

    const auto dir = prepare_out(config);
    write_report_json(out, dir / "report.json");
    const std::string text = format_report_text(out);
    write_text_file(dir / "report.txt", text);
    std::cout << text;
    return 0;
}

int cmd_simulate(const RunConfig& config)
{
    SimConfig sim;
    sim.evaluators = config.evaluators;
    sim.participants_per_evaluator = config.per_evaluator;
    sim.sigma = config.sigma;
    sim.replicates = config.replicates;
    sim.c = config.c;
    sim.kind = parse_contrast_kind(config.contrast);
    sim.delta = config.delta;
    sim.phi_grid = parse_power_grid(config.grid);
    sim.rule = parse_adjust_rule(config.adjust_rule);
    sim.paired = config.paired;
    sim.rho = config.rho;
    sim.working = parse_correlation_kind(config.corr);
    sim.base_seed = config.seed;
    sim.threads = config.threads;

    const SimSummary summary = run_study(sim);
    write_sim_bundle(summary, prepare_out(config));
    if (summary.n_failed > 0) {
        std::cerr << "warning: " << summary.n_failed << " of " << sim.replicates
                  << " replicates failed and were excluded\n";
    }
    return 0;
}

int cmd_bh(const RunConfig& config)
{
    if (config.input.empty()) throw InputError("missing --input p-value file");
    const csv::Table table = csv::read(config.input);
    const auto p_pos = table.find(config.p_col);
    if (!p_pos) throw InputError("missing column: '" + config.p_col + "' (p-value)");
    const auto id_pos = table.find(config.id_col);

    std::vector<double> p;
    std::vector<std::string> ids;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto value = csv::parse_double(table.rows[r][*p_pos]);
        if (!value || *value < 0 || *value > 1) {
            throw InputError("malformed p-value at data row " + std::to_string(r + 1) + ": '"
                             + table.rows[r][*p_pos] + "'");
        }
        p.push_back(*value);
        ids.push_back(id_pos ? table.rows[r][*id_pos] : std::to_string(r + 1));
    }
    if (p.empty()) throw InputError("no p-values in " + config.input.string());

    const std::vector<Index> rejected = bh_procedure(p, config.bh_alpha);
    std::vector<bool> flag(p.size(), false);
    for (Index j : rejected) flag[static_cast<std::size_t>(j)] = true;

    std::ostringstream out;
    out << "id,p_value,rejected\n";
    for (std::size_t j = 0; j < p.size(); ++j) {
        out << csv::escape(ids[j]) << ',' << csv::format_double(p[j]) << ',' << (flag[j] ? 1 : 0) << '\n';
    }
    write_text_file(prepare_out(config) / "bh.csv", out.str());
    for (Index j : rejected) std::cout << ids[static_cast<std::size_t>(j)] << '\n';
    return 0;
}

int cmd_verify(const RunConfig& config)
{
    if (config.report_path.empty()) throw InputError("missing --report report.json");
    const ReportArtifact stored = read_report_json(config.report_path);
    const OutlierReport& r = stored.report;
    std::vector<std::string> problems;
    auto mismatch = [&](const std::string& what) { problems.push_back(what); };
    constexpr double rel = 1e-12;

    EvaluatorTests tests;
    tests.kind = r.settings.kind;
    tests.delta = r.settings.delta;
    tests.tests = r.tests;
    for (auto& t : tests.tests) {
        const double p = std::max(chisq1_sf(t.statistic), std::numeric_limits<double>::denorm_min());
        const double z = t.estimate / t.se;
        if (!close(z * z, t.statistic, 1e-10)) mismatch("statistic of " + stored.evaluator_ids[t.j]);
        if (!close(p, t.p_value, rel)) mismatch("p-value of " + stored.evaluator_ids[t.j]);
        t.p_value = p;
        tests.variances.push_back(t.variance);
    }

    if (!config.fit_path.empty()) {
        const FitArtifact fit = read_fit_json(config.fit_path);
        if (fit.evaluator_ids != stored.evaluator_ids) {
            mismatch("evaluator ids differ between fit and report");
        } else {
            const EvaluatorTests fresh = prepare_tests(fit.fit, r.settings.kind, r.settings.delta);
            for (std::size_t k = 0; k < fresh.tests.size(); ++k) {
                if (!close(fresh.tests[k].estimate, tests.tests[k].estimate, 1e-10)
                    || !close(fresh.variances[k], tests.variances[k], 1e-10)) {
                    mismatch("contrast of " + stored.evaluator_ids[k] + " does not match the fit");
                }
            }
        }
    }

    std::vector<double> grid;
    for (const auto& point : stored.curve) grid.push_back(point.phi);
    OutlierReport again;
    if (r.settings.target_fdr) {
        if (grid.empty()) grid = default_power_grid();
        again = detect_at_fdr(tests, r.settings.c, *r.settings.target_fdr, r.settings.adjust, r.settings.rule, grid);
    } else if (r.settings.phi) {
        again = detect(tests, r.settings.c, *r.settings.phi, r.settings.adjust, r.settings.rule);
    } else {
        throw InputError("report settings carry neither a power nor a target FDR");
    }

    if (again.phi != r.phi) mismatch("operating power");
    if (again.calibration.size() != r.calibration.size()) {
        mismatch("number of calibrated thresholds");
    } else {
        for (std::size_t k = 0; k < r.calibration.size(); ++k) {
            if (!close(again.calibration[k].alpha, r.calibration[k].alpha, rel)
                || !close(again.calibration[k].lambda, r.calibration[k].lambda, rel)) {
                mismatch("threshold alpha of " + stored.evaluator_ids[k]);
            }
        }
    }
    if (!close(again.numerator, r.numerator, rel)) mismatch("sum of thresholds");
    if (!close(again.q_hat, r.q_hat, rel)) mismatch("estimated FDR");
    if (again.rejected != r.rejected) mismatch("rejected set");
    if (again.adjusted_rejected != r.adjusted_rejected || again.removed != r.removed) mismatch("adjusted set");

    if (problems.empty()) {
        std::cout << "verify: ok (" << r.rejected.size() << " rejected, estimated FDR "
                  << csv::format_double(r.q_hat) << ")\n";
        return 0;
    }
    for (const auto& p : problems) std::cerr << "verify: mismatch: " << p << '\n';
    return 1;
}

int run(const RunConfig& config)
{
    try {
        if (config.subcommand == "fit") return cmd_fit(config);
        if (config.subcommand == "curve") return cmd_curve(config);
        if (config.subcommand == "detect") return cmd_detect(config);
        if (config.subcommand == "simulate") return cmd_simulate(config);
        if (config.subcommand == "bh") return cmd_bh(config);
        if (config.subcommand == "verify") return cmd_verify(config);
        throw InputError("unknown subcommand '" + config.subcommand + "'");
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const SimulationError& e) {
        std::cerr << "simulation error: " << e.what() << '\n';
        return 4;
    }
}

int run_cli(int argc, const char* const* argv)
{
    RunConfig config;
    CLI::App app{"Outlier evaluator detection with power-calibrated thresholds"};
    app.require_subcommand(1);

    auto data_options = [&](CLI::App* sub) {
        sub->add_option("--input", config.input, "long-format CSV, one row per measurement");
        sub->add_option("--outcome-col", config.outcome_col, "outcome column")->capture_default_str();
        sub->add_option("--participant-col", config.participant_col, "participant id column")->capture_default_str();
        sub->add_option("--evaluator-col", config.evaluator_col, "evaluator id column")->capture_default_str();
        sub->add_option("--covariates", config.covariates, "participant covariates (comma list)")->delimiter(',');
        sub->add_option("--categorical", config.categorical, "covariates to dummy-code (comma list)")->delimiter(',');
        sub->add_option("--measurement-covariates", config.measurement_covariates,
                        "per-measurement covariates (comma list)")->delimiter(',');
        sub->add_option("--repeat-col", config.repeat_col, "repeat index column");
        sub->add_option("--engine", config.engine, "ols, gee or auto")->capture_default_str();
        sub->add_option("--corr", config.corr, "GEE working correlation")->capture_default_str();
        sub->add_option("--ols-cov", config.ols_cov, "OLS covariance: model or hc0")->capture_default_str();
    };
    auto contrast_options = [&](CLI::App* sub) {
        sub->add_option("--contrast", config.contrast, "truncated or untruncated")->capture_default_str();
        sub->add_option("--delta", config.delta, "truncation fraction")->capture_default_str();
    };
    auto out_option = [&](CLI::App* sub) {
        sub->add_option("--out", config.out, "output directory")->capture_default_str();
    };

    auto* fit = app.add_subcommand("fit", "first-stage regression; writes fit.json and beta_table.csv");
    data_options(fit);
    fit->add_option("--delta", config.delta, "truncation fraction for beta_table.csv")->capture_default_str();
    out_option(fit);

    auto* curve = app.add_subcommand("curve", "estimated FDR against power; writes fdr_curve.csv");
    curve->add_option("--fit", config.fit_path, "fit.json from the fit subcommand");
    data_options(curve);
    contrast_options(curve);
    curve->add_option("--c", config.c, "alternative magnitude")->capture_default_str();
    curve->add_option("--grid", config.grid, "power grid start:stop:step")->capture_default_str();
    curve->add_flag("--svg", config.svg, "also write curve.svg");
    out_option(curve);

    auto* det = app.add_subcommand("detect", "flag outlying evaluators; writes report.json and report.txt");
    det->add_option("--fit", config.fit_path, "fit.json from the fit subcommand");
    data_options(det);
    contrast_options(det);
    det->add_option("--c", config.c, "alternative magnitude")->capture_default_str();
    auto* power = det->add_option("--power", config.power, "target power");
    auto* target = det->add_option("--target-fdr", config.target_fdr, "largest acceptable estimated FDR");
    power->excludes(target);
    det->add_flag("--adjust", config.adjust, "apply the FDR-based adjustment");
    det->add_option("--adjust-rule", config.adjust_rule, "prose or algorithm")->capture_default_str();
    det->add_option("--grid", config.grid, "power grid for --target-fdr")->capture_default_str();
    out_option(det);

    auto* sim = app.add_subcommand("simulate", "Monte Carlo study; writes a CSV bundle and manifest.json");
    contrast_options(sim);
    sim->add_option("--sigma", config.sigma, "residual SD")->capture_default_str();
    sim->add_option("--replicates", config.replicates, "number of replicates")->capture_default_str();
    sim->add_option("--evaluators", config.evaluators, "number of evaluators")->capture_default_str();
    sim->add_option("--per-evaluator", config.per_evaluator, "participants per evaluator")->capture_default_str();
    sim->add_option("--seed", config.seed, "base seed; replicate r uses seed + r")->capture_default_str();
    sim->add_flag("--paired", config.paired, "two correlated measurements per participant, GEE fit");
    sim->add_option("--rho", config.rho, "within-participant correlation for --paired")->capture_default_str();
    sim->add_option("--corr", config.corr, "GEE working correlation for --paired")->capture_default_str();
    sim->add_option("--c", config.c, "alternative magnitude")->capture_default_str();
    sim->add_option("--grid", config.grid, "power grid start:stop:step")->capture_default_str();
    sim->add_option("--adjust-rule", config.adjust_rule, "prose or algorithm")->capture_default_str();
    sim->add_option("--threads", config.threads, "worker threads (0: EVALGUARD_THREADS or all cores)");
    out_option(sim);

    auto* bh = app.add_subcommand("bh", "Benjamini-Hochberg step-up on a p-value CSV");
    bh->add_option("--input", config.input, "CSV with a p-value column")->required();
    bh->add_option("--alpha", config.bh_alpha, "FDR level")->capture_default_str();
    bh->add_option("--p-col", config.p_col, "p-value column")->capture_default_str();
    bh->add_option("--id-col", config.id_col, "id column (row number if absent)")->capture_default_str();
    out_option(bh);

    auto* verify = app.add_subcommand("verify", "re-derive a detection report and compare");
    verify->add_option("--report", config.report_path, "report.json")->required();
    verify->add_option("--fit", config.fit_path, "optional fit.json to check the contrasts against");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    for (auto* sub : app.get_subcommands()) config.subcommand = sub->get_name();
    return run(config);
}

int run_cli(const std::vector<std::string>& args)
{
    std::vector<const char*> argv{"evalguard"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

} // namespace evalguard::cli
