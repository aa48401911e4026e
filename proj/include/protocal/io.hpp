#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "protocal/calibrator.hpp"
#include "protocal/synth.hpp"

namespace protocal {

// One line of a prediction dump: {"id": "...", "logits": [...], "label": n}.
// label is optional and 1-based.
struct PredictionRecord {
    std::string id;
    Eigen::VectorXd logits;
    std::optional<int> label;
};

// Throws ParseError naming the offending line. Records must have finite
// logits of a consistent dimension; labels, when present, must be in range.
std::vector<PredictionRecord> read_dump(const std::string& path);
void write_dump(const std::string& path, const std::vector<PredictionRecord>& records);

// Versioned classifier document; reals survive a round trip bit-for-bit.
nlohmann::ordered_json classifier_to_json(const CalibratedClassifier& classifier);
CalibratedClassifier classifier_from_json(const nlohmann::json& j);

void save_classifier(const std::string& path, const CalibratedClassifier& classifier);
CalibratedClassifier load_classifier(const std::string& path);

nlohmann::ordered_json metrics_to_json(const Metrics& metrics);

nlohmann::ordered_json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const nlohmann::json& j);

void write_text_file(const std::string& path, const std::string& contents);

} // namespace protocal
