#include "protocal/representation.hpp"

#include <cmath>

namespace protocal {

Mode mode_from_string(const std::string& name) {
    if (name == "log-prob") return Mode::LogProb;
    if (name == "prob") return Mode::Prob;
    if (name == "logits") return Mode::Logits;
    throw InvalidConfig("unknown representation mode: '" + name +
                        "' (expected log-prob, prob, or logits)");
}

std::string to_string(Mode mode) {
    switch (mode) {
    case Mode::LogProb: return "log-prob";
    case Mode::Prob: return "prob";
    case Mode::Logits: return "logits";
    }
    throw InvalidConfig("unknown representation mode");
}

namespace {

void check_logits(const LogitVector& logits) {
    if (logits.size() < 2) throw InvalidShape("logit vector needs at least 2 classes");
    if (!logits.allFinite()) throw InvalidInput("logit vector contains non-finite values");
}

} // namespace

Eigen::VectorXd to_log_prob(const LogitVector& logits) {
    check_logits(logits);
    // shifted[i] = o_i - max is exact whenever the additions are; the log
    // term is >= 0 because one shifted entry is exactly zero, so every
    // output is <= 0
    const double shift = logits.maxCoeff();
    Eigen::VectorXd shifted = logits.array() - shift;
    const double log_norm = std::log(shifted.array().exp().sum());
    return shifted.array() - log_norm;
}

PredictionVector to_representation(const LogitVector& logits, Mode mode) {
    switch (mode) {
    case Mode::LogProb: return {to_log_prob(logits), mode};
    case Mode::Prob: return {to_log_prob(logits).array().exp(), mode};
    case Mode::Logits:
        check_logits(logits);
        return {logits, mode};
    }
    throw InvalidConfig("unknown representation mode");
}

} // namespace protocal
