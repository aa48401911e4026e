#include "protocal/selection.hpp"

#include <algorithm>
#include <thread>

namespace protocal {

SelectionStrategy selection_from_string(const std::string& name) {
    if (name == "assignment-score") return SelectionStrategy::AssignmentScore;
    if (name == "max-likelihood") return SelectionStrategy::MaxLikelihood;
    throw InvalidConfig("unknown selection strategy: '" + name +
                        "' (expected assignment-score or max-likelihood)");
}

std::string to_string(SelectionStrategy strategy) {
    switch (strategy) {
    case SelectionStrategy::AssignmentScore: return "assignment-score";
    case SelectionStrategy::MaxLikelihood: return "max-likelihood";
    }
    throw InvalidConfig("unknown selection strategy");
}

RestartBatch run_restarts(const Eigen::MatrixXd& data, int n_components, std::uint64_t base_seed,
                          int restarts, const EmConfig& config, int threads) {
    validate(config);
    if (restarts < 1) throw InvalidConfig("restarts must be >= 1");
    if (data.rows() < n_components)
        throw InsufficientData("estimation needs at least " + std::to_string(n_components) +
                               " samples, got " + std::to_string(data.rows()));

    RestartBatch batch;
    batch.restarts = restarts;
    batch.fits.resize(static_cast<std::size_t>(restarts));

    auto run_range = [&](int begin, int end) {
        for (int r = begin; r < end; ++r) {
            auto& fit = batch.fits[static_cast<std::size_t>(r)];
            try {
                fit.estimate = fit_em(data, n_components, base_seed + static_cast<std::uint64_t>(r), config);
                fit.ok = true;
            } catch (const Error& e) {
                fit.ok = false;
                fit.error = e.what();
                fit.estimate.seed = base_seed + static_cast<std::uint64_t>(r);
            }
        }
    };

    int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, restarts);
    if (workers == 1) {
        run_range(0, restarts);
    } else {
        // restarts are independent and land in distinct slots, so the merge
        // order (by r) matches sequential execution exactly
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        const int chunk = (restarts + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int begin = w * chunk;
            const int end = std::min(restarts, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run_range, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    if (std::none_of(batch.fits.begin(), batch.fits.end(), [](const auto& f) { return f.ok; }))
        throw EstimationFailed("all " + std::to_string(restarts) + " restarts failed: " +
                               batch.fits.front().error);
    return batch;
}

Selection select_estimate(const RestartBatch& batch) {
    Selection best;
    double best_key = 0.0;
    for (int r = 0; r < static_cast<int>(batch.fits.size()); ++r) {
        const auto& fit = batch.fits[static_cast<std::size_t>(r)];
        if (!fit.ok) continue;
        double key = 0.0;
        ClusterLabelAssignment assignment;
        if (batch.strategy == SelectionStrategy::AssignmentScore) {
            assignment = optimal_assignment(fit.estimate);
            key = assignment.score;
        } else {
            key = fit.estimate.log_likelihood;
        }
        if (best.index < 0 || key > best_key) { // strict: ties keep the lowest seed
            best.index = r;
            best_key = key;
            best.assignment = std::move(assignment);
        }
    }
    if (best.index < 0) throw EstimationFailed("no successful fit to select from");
    if (batch.strategy == SelectionStrategy::MaxLikelihood)
        best.assignment = optimal_assignment(batch.fits[static_cast<std::size_t>(best.index)].estimate);
    return best;
}

} // namespace protocal
