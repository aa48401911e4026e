#include "protocal/calibrator.hpp"

#include <cmath>
#include <limits>

namespace protocal {

CalibratedClassifier calibrate(const EstimateSet& estimate_set, int n_classes,
                               const CalibrationConfig& config,
                               CalibrationDiagnostics* diagnostics) {
    return calibrate(estimate_set.vectors, n_classes, config, diagnostics);
}

CalibratedClassifier calibrate(const std::vector<LogitVector>& raw_logits, int n_classes,
                               const CalibrationConfig& config,
                               CalibrationDiagnostics* diagnostics) {
    if (n_classes < 2) throw InvalidShape("need at least 2 classes");
    const auto minimum = static_cast<std::size_t>(std::max(n_classes, 2));
    if (raw_logits.size() < minimum)
        throw InsufficientData("estimate set has " + std::to_string(raw_logits.size()) +
                               " vectors, need at least " + std::to_string(minimum));

    Eigen::MatrixXd data(static_cast<Eigen::Index>(raw_logits.size()), n_classes);
    for (std::size_t i = 0; i < raw_logits.size(); ++i) {
        if (raw_logits[i].size() != n_classes)
            throw InvalidShape("logit vector " + std::to_string(i) + " has length " +
                               std::to_string(raw_logits[i].size()) + ", expected " +
                               std::to_string(n_classes));
        data.row(static_cast<Eigen::Index>(i)) = to_representation(raw_logits[i], config.mode).values.transpose();
    }

    RestartBatch batch =
        run_restarts(data, n_classes, config.seed, config.restarts, config.em, config.threads);
    batch.strategy = config.strategy;
    const Selection selection = select_estimate(batch);

    CalibratedClassifier classifier;
    classifier.estimate = selection.estimate(batch);
    classifier.assignment = selection.assignment;
    classifier.mode = config.mode;
    classifier.config = config;

    if (diagnostics) {
        diagnostics->restarts = batch.restarts;
        diagnostics->converged = 0;
        diagnostics->failed = 0;
        for (const auto& fit : batch.fits) {
            if (!fit.ok)
                ++diagnostics->failed;
            else if (fit.estimate.converged)
                ++diagnostics->converged;
        }
        diagnostics->selected_index = selection.index;
        diagnostics->selected_seed = classifier.estimate.seed;
        diagnostics->selected_cla = selection.assignment.score;
        diagnostics->selected_log_likelihood = classifier.estimate.log_likelihood;
        diagnostics->degenerate = classifier.estimate.degenerate;
    }
    return classifier;
}

Predictor::Predictor(const CalibratedClassifier& classifier)
    : mapping_(classifier.assignment.mapping),
      mode_(classifier.mode),
      n_classes_(classifier.n_classes()) {
    densities_.reserve(classifier.estimate.components.size());
    for (const auto& component : classifier.estimate.components) densities_.emplace_back(component);
}

int Predictor::predict(const LogitVector& logits) const {
    if (logits.size() != n_classes_)
        throw InvalidShape("logit vector has length " + std::to_string(logits.size()) +
                           ", classifier expects " + std::to_string(n_classes_));
    const Eigen::VectorXd x = to_representation(logits, mode_).values;
    // mixing weights are discarded: compare component log-densities only
    int best = 0;
    double best_log_density = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < n_classes_; ++k) {
        const double d = densities_[static_cast<std::size_t>(k)].log_density(x);
        if (d > best_log_density) {
            best_log_density = d;
            best = k;
        }
    }
    return mapping_[static_cast<std::size_t>(best)];
}

int predict(const CalibratedClassifier& classifier, const LogitVector& logits) {
    return Predictor(classifier).predict(logits);
}

int predict_conventional(const LogitVector& logits) {
    if (logits.size() < 1) throw InvalidShape("empty logit vector");
    if (!logits.allFinite()) throw InvalidInput("logit vector contains non-finite values");
    Eigen::Index best = 0;
    logits.maxCoeff(&best); // Eigen returns the first maximizer
    return static_cast<int>(best) + 1;
}

Metrics evaluate(const CalibratedClassifier& classifier,
                 const std::vector<LogitVector>& logits, const std::vector<int>& gold) {
    if (logits.size() != gold.size())
        throw InvalidShape("logits and gold labels differ in length");
    const int n_classes = classifier.n_classes();
    for (int label : gold)
        if (label < 1 || label > n_classes)
            throw InvalidLabel("gold label " + std::to_string(label) + " outside 1.." +
                               std::to_string(n_classes));

    Metrics metrics;
    metrics.n = static_cast<int>(logits.size());
    metrics.confusion.assign(static_cast<std::size_t>(n_classes),
                             std::vector<int>(static_cast<std::size_t>(n_classes), 0));
    std::vector<int> class_total(static_cast<std::size_t>(n_classes), 0);
    std::vector<int> class_correct(static_cast<std::size_t>(n_classes), 0);

    const Predictor predictor(classifier);
    int calibrated_correct = 0;
    int conventional_correct = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const int truth = gold[i];
        const int cal = predictor.predict(logits[i]);
        const int conv = predict_conventional(logits[i]);
        if (cal == truth) {
            ++calibrated_correct;
            ++class_correct[static_cast<std::size_t>(truth - 1)];
        }
        if (conv == truth) ++conventional_correct;
        ++class_total[static_cast<std::size_t>(truth - 1)];
        ++metrics.confusion[static_cast<std::size_t>(truth - 1)][static_cast<std::size_t>(cal - 1)];
    }

    metrics.calibrated_accuracy = metrics.n ? static_cast<double>(calibrated_correct) / metrics.n : 0.0;
    metrics.conventional_accuracy =
        metrics.n ? static_cast<double>(conventional_correct) / metrics.n : 0.0;
    metrics.per_class_accuracy.resize(static_cast<std::size_t>(n_classes));
    for (int c = 0; c < n_classes; ++c) {
        const int total = class_total[static_cast<std::size_t>(c)];
        metrics.per_class_accuracy[static_cast<std::size_t>(c)] =
            total ? static_cast<double>(class_correct[static_cast<std::size_t>(c)]) / total
                  : std::numeric_limits<double>::quiet_NaN();
    }
    return metrics;
}

} // namespace protocal
