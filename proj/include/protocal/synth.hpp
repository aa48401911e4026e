#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "protocal/errors.hpp"

namespace protocal {

// Synthetic prediction-dump generator. Cluster geometry lives in logit
// space; with project_log_softmax the draws are pushed through log-softmax
// so they sit on the valid log-probability manifold. estimate_priors, when
// non-empty, overrides class_priors for the estimate split only (the class
// imbalance experiments).
struct ScenarioSpec {
    int n_classes = 0;
    std::vector<Eigen::VectorXd> cluster_means;
    std::vector<Eigen::MatrixXd> cluster_covs;
    Eigen::VectorXd class_priors;
    Eigen::VectorXd estimate_priors; // empty = class_priors
    int n_estimate = 0;
    int n_test = 0;
    std::uint64_t seed = 0;
    bool project_log_softmax = true;
};

void validate(const ScenarioSpec& spec);

// Two-cluster binary task whose clusters both sit on the positive side of
// the conventional boundary (softmax-positive 0.70 and 0.90): argmax
// misclassifies nearly every negative while the clusters stay separable.
ScenarioSpec biased_binary_scenario();

// Mirror-image binary task (softmax-positive 0.28 / 0.72); the conventional
// boundary is already right, used for the class-imbalance experiments.
ScenarioSpec symmetric_binary_scenario();

struct ScenarioSample {
    std::vector<Eigen::VectorXd> estimate_logits;
    std::vector<int> estimate_gold; // generator truth; calibration never sees it
    std::vector<Eigen::VectorXd> test_logits;
    std::vector<int> test_gold;
};

ScenarioSample sample_scenario(const ScenarioSpec& spec);

struct BayesAccuracy {
    double accuracy = 0.0;
    double std_error = 0.0;
    long draws = 0;
};

// Monte-Carlo accuracy of the true-parameter rule (argmax of log prior +
// generating log density, evaluated on the raw pre-projection draw). An
// upper bound, up to MC noise, for any classifier of the emitted vectors.
BayesAccuracy bayes_optimal_accuracy(const ScenarioSpec& spec, long draws = 200000);

struct SweepResult {
    std::vector<double> thresholds;
    std::vector<double> accuracies;
};

// For each threshold t: accuracy of "predict label 2 iff softmax probability
// of label 2 >= t" on a binary dump. t = 0.5 reproduces the conventional
// rule for untied inputs.
SweepResult boundary_sweep(const std::vector<Eigen::VectorXd>& test_logits,
                           const std::vector<int>& gold, const std::vector<double>& grid);

} // namespace protocal
