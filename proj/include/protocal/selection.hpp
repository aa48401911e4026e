#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "protocal/assignment.hpp"
#include "protocal/gmm.hpp"

namespace protocal {

enum class SelectionStrategy { AssignmentScore, MaxLikelihood };

SelectionStrategy selection_from_string(const std::string& name);
std::string to_string(SelectionStrategy strategy);

struct RestartBatch {
    struct Fit {
        MixtureEstimate estimate;
        bool ok = false;
        std::string error; // set when the restart failed
    };
    std::vector<Fit> fits; // one per restart, ordered by seed
    int restarts = 0;
    SelectionStrategy strategy = SelectionStrategy::AssignmentScore;
};

// fits[r] = fit_em(data, n, base_seed + r, config). Restarts run on up to
// `threads` workers (0 = hardware concurrency) but the batch is ordered by r
// and bit-identical to a sequential run. A restart failing with
// SingularCovariance is recorded and excluded from selection; throws
// EstimationFailed when every restart failed.
RestartBatch run_restarts(const Eigen::MatrixXd& data, int n_components, std::uint64_t base_seed,
                          int restarts, const EmConfig& config = {}, int threads = 0);

// The winner is identified by its index into batch.fits (identity, not a
// copy), plus its optimal assignment.
struct Selection {
    int index = -1;
    ClusterLabelAssignment assignment;

    const MixtureEstimate& estimate(const RestartBatch& batch) const {
        return batch.fits[static_cast<std::size_t>(index)].estimate;
    }
};

// assignment-score: argmax_e CLA(e, k*(e)); max-likelihood: argmax_e of the
// final mean log-likelihood. Ties go to the lowest seed.
Selection select_estimate(const RestartBatch& batch);

} // namespace protocal
