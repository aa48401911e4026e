#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "protocal/representation.hpp"
#include "protocal/selection.hpp"

namespace protocal {

struct CalibrationConfig {
    Mode mode = Mode::LogProb;
    int restarts = 100;
    EmConfig em;
    SelectionStrategy strategy = SelectionStrategy::AssignmentScore;
    std::uint64_t seed = 0;
    int threads = 0; // restart fan-out; 0 = hardware concurrency
};

// Unlabeled logit vectors the mixture is estimated from. Holds no labels by
// construction; the source tag records whether the CLI sampled it from a
// larger pool or the caller supplied it as-is.
struct EstimateSet {
    std::vector<LogitVector> vectors;
    enum class Source { Sampled, External } source = Source::External;
};

// The deployable decision rule: selected estimate, its optimal cluster-label
// assignment, and the representation the mixture was fit on. Immutable after
// construction; predict/evaluate are read-only.
struct CalibratedClassifier {
    MixtureEstimate estimate;
    ClusterLabelAssignment assignment;
    Mode mode = Mode::LogProb;
    CalibrationConfig config;

    int n_classes() const { return static_cast<int>(estimate.components.size()); }
};

struct CalibrationDiagnostics {
    int restarts = 0;
    int converged = 0;
    int failed = 0;
    int selected_index = -1;
    std::uint64_t selected_seed = 0;
    double selected_cla = 0.0;
    double selected_log_likelihood = 0.0;
    bool degenerate = false;
};

// Full pipeline: representation -> multi-restart EM -> selection.
// raw_logits are one vector per example, all of length n_classes.
CalibratedClassifier calibrate(const EstimateSet& estimate_set, int n_classes,
                               const CalibrationConfig& config,
                               CalibrationDiagnostics* diagnostics = nullptr);
CalibratedClassifier calibrate(const std::vector<LogitVector>& raw_logits, int n_classes,
                               const CalibrationConfig& config,
                               CalibrationDiagnostics* diagnostics = nullptr);

// Cached per-component Cholesky factors for batch prediction.
class Predictor {
public:
    explicit Predictor(const CalibratedClassifier& classifier);

    // label in 1..N: the assignment image of the most likely cluster, mixing
    // weights discarded; ties go to the lowest cluster index
    int predict(const LogitVector& logits) const;

private:
    std::vector<ComponentDensity> densities_;
    std::vector<int> mapping_;
    Mode mode_;
    int n_classes_;
};

int predict(const CalibratedClassifier& classifier, const LogitVector& logits);

// the conventional rule: argmax over logits, lowest index on ties; 1-based
int predict_conventional(const LogitVector& logits);

struct Metrics {
    double calibrated_accuracy = 0.0;
    double conventional_accuracy = 0.0;
    std::vector<double> per_class_accuracy;  // calibrated rule; NaN for absent classes
    std::vector<std::vector<int>> confusion; // [gold-1][predicted-1], calibrated rule
    int n = 0;
};

Metrics evaluate(const CalibratedClassifier& classifier, const std::vector<LogitVector>& logits,
                 const std::vector<int>& gold);

} // namespace protocal
