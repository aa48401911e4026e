// protocal: batch front-end for prototypical-calibration runs.
// Subcommands: synth, calibrate, evaluate, sweep. Exit codes: 0 success,
// 2 usage/config, 3 data, 4 estimation failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "protocal/calibrator.hpp"
#include "protocal/io.hpp"
#include "protocal/rng.hpp"
#include "protocal/synth.hpp"

namespace {

using namespace protocal;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::uint64_t kEstimateSampleStream = 17;

// shortest round-trip decimal form, byte-stable across runs
std::string format_double(double x) { return json(x).dump(); }

struct CalibrateOptions {
    std::string mode = "log-prob";
    int restarts = 100;
    int max_iter = 100;
    double tol = 1e-3;
    double reg = 1e-6;
    std::string selection = "assignment-score";
    long estimate_size = 0; // 0 = 250 * N
    std::uint64_t seed = 42;
    int threads = 0;

    CalibrationConfig to_config() const {
        CalibrationConfig config;
        config.mode = mode_from_string(mode);
        config.restarts = restarts;
        config.em.max_iter = max_iter;
        config.em.tol = tol;
        config.em.reg = reg;
        config.strategy = selection_from_string(selection);
        config.seed = seed;
        config.threads = threads;
        return config;
    }
};

void add_calibrate_flags(CLI::App* cmd, CalibrateOptions& opt) {
    cmd->add_option("--mode", opt.mode, "Representation: log-prob, prob, or logits")
        ->capture_default_str();
    cmd->add_option("--restarts", opt.restarts, "EM restarts")->capture_default_str();
    cmd->add_option("--max-iter", opt.max_iter, "EM iteration cap")->capture_default_str();
    cmd->add_option("--tol", opt.tol, "EM convergence threshold on the mean log-likelihood")
        ->capture_default_str();
    cmd->add_option("--reg", opt.reg, "Covariance ridge")->capture_default_str();
    cmd->add_option("--selection", opt.selection, "assignment-score or max-likelihood")
        ->capture_default_str();
    cmd->add_option("--estimate-size", opt.estimate_size,
                    "Estimate-set size sampled from the input (0 = 250 per class)")
        ->capture_default_str();
    cmd->add_option("--seed", opt.seed, "Base seed")->envname("PROTOCAL_SEED")->capture_default_str();
    cmd->add_option("--threads", opt.threads, "Restart workers (0 = hardware)")->capture_default_str();
}

std::vector<Eigen::VectorXd> logits_of(const std::vector<PredictionRecord>& records) {
    std::vector<Eigen::VectorXd> logits;
    logits.reserve(records.size());
    for (const auto& r : records) logits.push_back(r.logits);
    return logits;
}

std::vector<int> labels_of(const std::vector<PredictionRecord>& records, const std::string& path) {
    std::vector<int> labels;
    labels.reserve(records.size());
    for (const auto& r : records) {
        if (!r.label)
            throw MissingLabels(path + ": record '" + r.id + "' has no gold label");
        labels.push_back(*r.label);
    }
    return labels;
}

// uniform sample without replacement, returned in the original file order
EstimateSet sample_estimate_set(const std::vector<PredictionRecord>& records, long size,
                                std::uint64_t seed) {
    const long available = static_cast<long>(records.size());
    if (size > available)
        throw InsufficientData("estimate size " + std::to_string(size) + " exceeds the " +
                               std::to_string(available) + " available records");
    std::vector<std::size_t> indices(records.size());
    std::iota(indices.begin(), indices.end(), 0);
    if (size < available) {
        Rng rng = Rng(seed).fork(kEstimateSampleStream);
        for (long i = 0; i < size; ++i) {
            const auto j = i + static_cast<long>(rng.next_below(static_cast<std::uint64_t>(available - i)));
            std::swap(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(j)]);
        }
        indices.resize(static_cast<std::size_t>(size));
        std::sort(indices.begin(), indices.end());
    }
    EstimateSet out;
    out.source = EstimateSet::Source::Sampled;
    out.vectors.reserve(indices.size());
    for (std::size_t i : indices) out.vectors.push_back(records[i].logits);
    return out;
}

ordered_json diagnostics_to_json(const CalibrationDiagnostics& d, const CalibrateOptions& opt,
                                 int n_classes, long n_estimate) {
    ordered_json j;
    j["format"] = "protocal.diagnostics";
    j["version"] = 1;
    j["n_classes"] = n_classes;
    j["n_estimate"] = n_estimate;
    j["mode"] = opt.mode;
    j["selection"] = opt.selection;
    j["seed"] = opt.seed;
    j["restarts"] = d.restarts;
    j["converged"] = d.converged;
    j["failed"] = d.failed;
    j["selected"] = {{"index", d.selected_index},
                     {"seed", d.selected_seed},
                     {"cla_score", d.selected_cla},
                     {"log_likelihood", d.selected_log_likelihood},
                     {"degenerate", d.degenerate}};
    return j;
}

int cmd_calibrate(const std::string& in_path, const std::string& out_path,
                  const CalibrateOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const CalibrationConfig config = opt.to_config(); // validate before touching data
    const auto records = read_dump(in_path);
    if (records.empty()) throw InsufficientData(in_path + ": dump is empty");
    const int n_classes = static_cast<int>(records.front().logits.size());
    const long estimate_size = opt.estimate_size > 0 ? opt.estimate_size : 250L * n_classes;

    const long labeled = static_cast<long>(
        std::count_if(records.begin(), records.end(), [](const auto& r) { return r.label.has_value(); }));
    if (labeled > 0)
        std::cerr << "note: ignoring labels on " << labeled
                  << " estimate-pool records (calibration is unsupervised)\n";

    const auto estimate = sample_estimate_set(records, estimate_size, opt.seed);

    CalibrationDiagnostics diagnostics;
    const CalibratedClassifier classifier = calibrate(estimate, n_classes, config, &diagnostics);
    save_classifier(out_path, classifier);
    write_text_file(out_path + ".diag.json",
                    diagnostics_to_json(diagnostics, opt, n_classes, estimate_size).dump(2) + "\n");

    const auto wall =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    std::cerr << "calibrated " << n_classes << "-way classifier from " << estimate_size << "/"
              << records.size() << " records; " << diagnostics.converged << "/"
              << diagnostics.restarts << " restarts converged, " << diagnostics.failed
              << " failed; CLA " << format_double(diagnostics.selected_cla) << "; wall "
              << wall.count() << " ms\n";
    std::cout << out_path << "\n";
    return 0;
}

struct EvaluateRun {
    std::string input;
    std::optional<std::uint64_t> seed;
    Metrics metrics;
};

ordered_json evaluate_report(const std::vector<EvaluateRun>& runs) {
    ordered_json j;
    j["format"] = "protocal.metrics";
    j["version"] = 1;
    ordered_json run_array = json::array();
    double cal_sum = 0.0, conv_sum = 0.0;
    for (const auto& run : runs) {
        ordered_json rj = metrics_to_json(run.metrics);
        ordered_json entry;
        entry["input"] = run.input;
        if (run.seed) entry["seed"] = *run.seed;
        entry.update(rj);
        run_array.push_back(std::move(entry));
        cal_sum += run.metrics.calibrated_accuracy;
        conv_sum += run.metrics.conventional_accuracy;
    }
    const auto n = static_cast<double>(runs.size());
    const double cal_mean = cal_sum / n;
    const double conv_mean = conv_sum / n;
    double cal_var = 0.0, conv_var = 0.0;
    for (const auto& run : runs) {
        cal_var += (run.metrics.calibrated_accuracy - cal_mean) * (run.metrics.calibrated_accuracy - cal_mean);
        conv_var += (run.metrics.conventional_accuracy - conv_mean) *
                    (run.metrics.conventional_accuracy - conv_mean);
    }
    j["runs"] = std::move(run_array);
    j["aggregate"] = {{"n_runs", runs.size()},
                      {"calibrated_mean", cal_mean},
                      {"calibrated_std", std::sqrt(cal_var / n)},
                      {"conventional_mean", conv_mean},
                      {"conventional_std", std::sqrt(conv_var / n)}};
    return j;
}

int cmd_evaluate(const std::string& classifier_path, const std::vector<std::string>& in_paths,
                 const std::string& out_path, const std::string& pool_path, int seeds,
                 const CalibrateOptions& opt) {
    (void)opt.to_config(); // validate before touching data
    std::vector<EvaluateRun> runs;
    if (!pool_path.empty()) {
        // multi-seed mode: recalibrate on a fresh estimate sample per seed,
        // mirroring the accuracy-over-estimate-sets reporting convention
        if (in_paths.size() != 1)
            throw InvalidConfig("multi-seed evaluation expects exactly one --in dump");
        if (seeds < 1) throw InvalidConfig("--seeds must be >= 1");
        const auto pool = read_dump(pool_path);
        if (pool.empty()) throw InsufficientData(pool_path + ": dump is empty");
        const auto test = read_dump(in_paths.front());
        const auto test_logits = logits_of(test);
        const auto gold = labels_of(test, in_paths.front());
        const int n_classes = static_cast<int>(pool.front().logits.size());
        const long estimate_size = opt.estimate_size > 0 ? opt.estimate_size : 250L * n_classes;
        for (int s = 0; s < seeds; ++s) {
            CalibrateOptions per_seed = opt;
            per_seed.seed = opt.seed + static_cast<std::uint64_t>(s);
            const auto estimate = sample_estimate_set(pool, estimate_size, per_seed.seed);
            const auto classifier = calibrate(estimate, n_classes, per_seed.to_config(), nullptr);
            runs.push_back({in_paths.front(), per_seed.seed,
                            evaluate(classifier, test_logits, gold)});
        }
    } else {
        if (classifier_path.empty())
            throw InvalidConfig("either --classifier or --pool is required");
        const auto classifier = load_classifier(classifier_path);
        for (const auto& path : in_paths) {
            const auto test = read_dump(path);
            runs.push_back({path, std::nullopt,
                            evaluate(classifier, logits_of(test), labels_of(test, path))});
        }
    }

    const ordered_json report = evaluate_report(runs);
    write_text_file(out_path, report.dump(2) + "\n");
    std::cerr << "calibrated " << format_double(report["aggregate"]["calibrated_mean"].get<double>())
              << " vs conventional "
              << format_double(report["aggregate"]["conventional_mean"].get<double>()) << " over "
              << runs.size() << " run(s)\n";
    std::cout << out_path << "\n";
    return 0;
}

int cmd_sweep(const std::string& in_path, const std::string& out_path, int grid_points,
              double grid_min, double grid_max) {
    if (grid_points < 1) throw InvalidConfig("--grid-points must be >= 1");
    if (!(grid_min > 0.0 && grid_max < 1.0 && grid_min <= grid_max))
        throw InvalidConfig("grid bounds must satisfy 0 < min <= max < 1");

    const auto test = read_dump(in_path);
    const auto logits = logits_of(test);
    const auto gold = labels_of(test, in_path);

    std::vector<double> grid;
    if (grid_points == 1) {
        grid.push_back(grid_min);
    } else {
        for (int i = 0; i < grid_points; ++i)
            grid.push_back(grid_min + (grid_max - grid_min) * i / (grid_points - 1));
    }
    if (std::find(grid.begin(), grid.end(), 0.5) == grid.end()) grid.push_back(0.5);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const SweepResult sweep = boundary_sweep(logits, gold, grid);

    std::ostringstream csv;
    csv << "threshold,accuracy\n";
    for (std::size_t i = 0; i < sweep.thresholds.size(); ++i) {
        csv << format_double(sweep.thresholds[i]) << "," << format_double(sweep.accuracies[i])
            << "\n";
        if (sweep.thresholds[i] == 0.5)
            std::cerr << "conventional boundary t=0.5: accuracy "
                      << format_double(sweep.accuracies[i]) << "\n";
    }
    write_text_file(out_path, csv.str());
    std::cout << out_path << "\n";
    return 0;
}

Eigen::VectorXd parse_priors(const std::string& csv) {
    std::vector<double> values;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            values.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw InvalidConfig("cannot parse prior value '" + item + "'");
        }
    }
    Eigen::VectorXd priors(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) priors[static_cast<Eigen::Index>(i)] = values[i];
    return priors;
}

int cmd_synth(const std::string& preset, const std::string& scenario_path,
              const std::string& out_prefix, long n_estimate, long n_test,
              std::optional<std::uint64_t> seed, const std::string& priors_csv,
              const std::string& estimate_priors_csv, bool no_project, long bayes_draws) {
    ScenarioSpec spec;
    if (!scenario_path.empty()) {
        std::ifstream in(scenario_path);
        if (!in) throw ParseError("cannot open scenario: " + scenario_path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ParseError(scenario_path + ": " + e.what());
        }
        spec = scenario_from_json(j);
    } else if (preset == "biased-binary") {
        spec = biased_binary_scenario();
    } else if (preset == "symmetric-binary") {
        spec = symmetric_binary_scenario();
    } else {
        throw InvalidConfig("unknown preset '" + preset +
                            "' (expected biased-binary or symmetric-binary)");
    }
    if (n_estimate >= 0) spec.n_estimate = static_cast<int>(n_estimate);
    if (n_test >= 0) spec.n_test = static_cast<int>(n_test);
    if (seed) spec.seed = *seed;
    if (!priors_csv.empty()) spec.class_priors = parse_priors(priors_csv);
    if (!estimate_priors_csv.empty()) spec.estimate_priors = parse_priors(estimate_priors_csv);
    if (no_project) spec.project_log_softmax = false;
    validate(spec);

    const ScenarioSample sample = sample_scenario(spec);

    std::vector<PredictionRecord> estimate_records;
    estimate_records.reserve(sample.estimate_logits.size());
    for (std::size_t i = 0; i < sample.estimate_logits.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "e%06zu", i + 1);
        estimate_records.push_back({id, sample.estimate_logits[i], sample.estimate_gold[i]});
    }
    std::vector<PredictionRecord> test_records;
    test_records.reserve(sample.test_logits.size());
    for (std::size_t i = 0; i < sample.test_logits.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "t%06zu", i + 1);
        test_records.push_back({id, sample.test_logits[i], sample.test_gold[i]});
    }
    write_dump(out_prefix + ".estimate.jsonl", estimate_records);
    write_dump(out_prefix + ".test.jsonl", test_records);

    const BayesAccuracy bayes = bayes_optimal_accuracy(spec, bayes_draws);
    ordered_json truth;
    truth["format"] = "protocal.scenario-truth";
    truth["version"] = 1;
    truth["scenario"] = scenario_to_json(spec);
    truth["bayes"] = {{"accuracy", bayes.accuracy},
                      {"std_error", bayes.std_error},
                      {"draws", bayes.draws}};
    write_text_file(out_prefix + ".truth.json", truth.dump(2) + "\n");

    std::cerr << "wrote " << sample.estimate_logits.size() << " estimate and "
              << sample.test_logits.size() << " test records; Bayes accuracy "
              << format_double(bayes.accuracy) << " (se " << format_double(bayes.std_error)
              << ")\n";
    std::cout << out_prefix << ".estimate.jsonl\n"
              << out_prefix << ".test.jsonl\n"
              << out_prefix << ".truth.json\n";
    return 0;
}

int exit_code_for(const Error& e) {
    if (dynamic_cast<const InvalidConfig*>(&e)) return 2;
    if (dynamic_cast<const EstimationFailed*>(&e) || dynamic_cast<const SingularCovariance*>(&e))
        return 4;
    return 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"prototypical calibration of N-way classifier outputs"};
    app.require_subcommand(1);

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "Fit a calibrated classifier from a prediction dump");
    std::string cal_in, cal_out;
    CalibrateOptions cal_opt;
    cal->add_option("--in", cal_in, "Input JSONL dump")->required();
    cal->add_option("--out", cal_out, "Output classifier JSON")->required();
    add_calibrate_flags(cal, cal_opt);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score a labeled dump with a calibrated classifier");
    std::string ev_classifier, ev_out, ev_pool;
    std::vector<std::string> ev_in;
    int ev_seeds = 1;
    CalibrateOptions ev_opt;
    ev->add_option("--classifier", ev_classifier, "Classifier JSON from `calibrate`");
    ev->add_option("--in", ev_in, "Labeled test dump(s)")->required();
    ev->add_option("--out", ev_out, "Output metrics JSON")->required();
    ev->add_option("--pool", ev_pool, "Estimate pool for multi-seed recalibration");
    ev->add_option("--seeds", ev_seeds, "Seeds to aggregate in --pool mode")->capture_default_str();
    add_calibrate_flags(ev, ev_opt);

    // sweep
    auto* sw = app.add_subcommand("sweep", "Decision-boundary sweep over a binary labeled dump");
    std::string sw_in, sw_out;
    int sw_points = 99;
    double sw_min = 0.01, sw_max = 0.99;
    sw->add_option("--in", sw_in, "Labeled binary test dump")->required();
    sw->add_option("--out", sw_out, "Output CSV (threshold,accuracy)")->required();
    sw->add_option("--grid-points", sw_points, "Number of thresholds")->capture_default_str();
    sw->add_option("--grid-min", sw_min, "Lowest threshold")->capture_default_str();
    sw->add_option("--grid-max", sw_max, "Highest threshold")->capture_default_str();

    // synth
    auto* sy = app.add_subcommand("synth", "Generate synthetic prediction dumps with known truth");
    std::string sy_preset = "biased-binary", sy_scenario, sy_prefix, sy_priors, sy_est_priors;
    long sy_n_estimate = -1, sy_n_test = -1, sy_bayes_draws = 200000;
    std::optional<std::uint64_t> sy_seed;
    bool sy_no_project = false;
    sy->add_option("--preset", sy_preset, "biased-binary or symmetric-binary")->capture_default_str();
    sy->add_option("--scenario", sy_scenario, "Scenario spec JSON (overrides --preset)");
    sy->add_option("--out-prefix", sy_prefix, "Output path prefix")->required();
    sy->add_option("--n-estimate", sy_n_estimate, "Estimate split size");
    sy->add_option("--n-test", sy_n_test, "Test split size");
    sy->add_option("--seed", sy_seed, "Scenario seed")->envname("PROTOCAL_SEED");
    sy->add_option("--priors", sy_priors, "Class priors, comma separated");
    sy->add_option("--estimate-priors", sy_est_priors,
                   "Priors for the estimate split only (class imbalance studies)");
    sy->add_flag("--no-project", sy_no_project, "Keep raw draws instead of log-softmax projection");
    sy->add_option("--bayes-draws", sy_bayes_draws, "Monte-Carlo draws for the Bayes oracle")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cal->parsed()) return cmd_calibrate(cal_in, cal_out, cal_opt);
        if (ev->parsed())
            return cmd_evaluate(ev_classifier, ev_in, ev_out, ev_pool, ev_seeds, ev_opt);
        if (sw->parsed()) return cmd_sweep(sw_in, sw_out, sw_points, sw_min, sw_max);
        if (sy->parsed())
            return cmd_synth(sy_preset, sy_scenario, sy_prefix, sy_n_estimate, sy_n_test, sy_seed,
                             sy_priors, sy_est_priors, sy_no_project, sy_bayes_draws);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
