#pragma once

#include <vector>

#include "protocal/gmm.hpp"

namespace protocal {

// A cluster-to-label matching: mapping[n] is the 1-based label assigned to
// cluster n, and score is the sum of each component mean's coordinate at its
// assigned label.
struct ClusterLabelAssignment {
    std::vector<int> mapping;
    double score = 0.0;
};

// score of one candidate mapping: sum_n mean[n][mapping[n]]
double cla_score(const MixtureEstimate& estimate, const std::vector<int>& mapping);

// Maximum-weight bipartite matching between clusters and labels via the
// Kuhn-Munkres algorithm. Ties between equal-score optima are broken by the
// lexicographically smallest mapping.
ClusterLabelAssignment optimal_assignment(const MixtureEstimate& estimate);

// Exhaustive N! enumeration with the same tie-break rule; the test oracle.
// Guarded to N <= 9.
ClusterLabelAssignment brute_force_assignment(const MixtureEstimate& estimate);

} // namespace protocal
