#pragma once

#include <Eigen/Dense>
#include <string>

#include "protocal/errors.hpp"

namespace protocal {

// Output representation the mixture is fit on. Log-probability is the
// default; it normalizes over the label space and keeps clusters close to
// Gaussian. Logits skip normalization entirely.
enum class Mode { LogProb, Prob, Logits };

Mode mode_from_string(const std::string& name);
std::string to_string(Mode mode);

// one unnormalized score per label of the task; the engine never sees a
// vocabulary, only the pre-selected label coordinates
using LogitVector = Eigen::VectorXd;

struct PredictionVector {
    Eigen::VectorXd values;
    Mode mode = Mode::LogProb;
};

// x_n = o_n - logsumexp(o), computed with the max shift. Subtracting the
// maximum first makes the result invariant under o -> o + c (identical
// floats whenever the additions o_i + c are exact) and immune to overflow.
Eigen::VectorXd to_log_prob(const LogitVector& logits);

PredictionVector to_representation(const LogitVector& logits, Mode mode);

} // namespace protocal
