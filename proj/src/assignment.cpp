#include "protocal/assignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace protocal {

namespace {

Eigen::MatrixXd mean_matrix(const MixtureEstimate& estimate) {
    const int n = static_cast<int>(estimate.components.size());
    if (n == 0) throw InvalidEstimate("estimate has no components");
    Eigen::MatrixXd means(n, n);
    for (int i = 0; i < n; ++i) {
        const auto& mean = estimate.components[static_cast<std::size_t>(i)].mean;
        if (mean.size() != n)
            throw InvalidEstimate("component means must have one coordinate per label");
        means.row(i) = mean.transpose();
    }
    if (!means.allFinite()) throw InvalidEstimate("component means contain non-finite values");
    return means;
}

void check_permutation(const std::vector<int>& mapping, int n) {
    if (static_cast<int>(mapping.size()) != n)
        throw InvalidAssignment("mapping length does not match the component count");
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int label : mapping) {
        if (label < 1 || label > n || seen[static_cast<std::size_t>(label - 1)])
            throw InvalidAssignment("mapping is not a permutation of 1..N");
        seen[static_cast<std::size_t>(label - 1)] = 1;
    }
}

// ordered sum so both solvers and the oracle compare identical floats
double ordered_score(const Eigen::MatrixXd& means, const std::vector<int>& mapping) {
    double s = 0.0;
    for (int i = 0; i < static_cast<int>(mapping.size()); ++i)
        s += means(i, mapping[static_cast<std::size_t>(i)] - 1);
    return s;
}

// Kuhn-Munkres with potentials on a square min-cost matrix; returns the
// column matched to each row.
std::vector<int> hungarian_min(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> match(static_cast<std::size_t>(n) + 1, 0); // row matched to column j (1-based)
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> min_slack(static_cast<std::size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = match[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < min_slack[static_cast<std::size_t>(j)]) {
                    min_slack[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (min_slack[static_cast<std::size_t>(j)] < delta) {
                    delta = min_slack[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    min_slack[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (match[static_cast<std::size_t>(j)] != 0)
            row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

// best completion for rows `from_row..` over the still-free labels
std::vector<int> complete_assignment(const Eigen::MatrixXd& means, int from_row,
                                     const std::vector<int>& free_labels) {
    const int m = static_cast<int>(free_labels.size());
    Eigen::MatrixXd cost(m, m);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) cost(r, c) = -means(from_row + r, free_labels[static_cast<std::size_t>(c)]);
    return hungarian_min(cost);
}

} // namespace

double cla_score(const MixtureEstimate& estimate, const std::vector<int>& mapping) {
    const Eigen::MatrixXd means = mean_matrix(estimate);
    check_permutation(mapping, static_cast<int>(means.rows()));
    return ordered_score(means, mapping);
}

ClusterLabelAssignment optimal_assignment(const MixtureEstimate& estimate) {
    const Eigen::MatrixXd means = mean_matrix(estimate);
    const int n = static_cast<int>(means.rows());

    // Fix clusters one at a time in index order; for each candidate label,
    // solve the remaining matching and keep the smallest label that still
    // reaches the optimum. This pins down the lexicographically smallest
    // argmax among equal-score optima.
    std::vector<int> mapping(static_cast<std::size_t>(n), 0);
    std::vector<int> free_labels(static_cast<std::size_t>(n));
    std::iota(free_labels.begin(), free_labels.end(), 0);

    for (int row = 0; row < n; ++row) {
        int best_label_pos = -1;
        double best_total = -std::numeric_limits<double>::infinity();
        for (int pos = 0; pos < static_cast<int>(free_labels.size()); ++pos) {
            std::vector<int> rest = free_labels;
            rest.erase(rest.begin() + pos);

            std::vector<int> candidate = mapping;
            candidate[static_cast<std::size_t>(row)] = free_labels[static_cast<std::size_t>(pos)] + 1;
            if (!rest.empty()) {
                const std::vector<int> completion = complete_assignment(means, row + 1, rest);
                for (int r = 0; r < static_cast<int>(rest.size()); ++r)
                    candidate[static_cast<std::size_t>(row + 1 + r)] =
                        rest[static_cast<std::size_t>(completion[static_cast<std::size_t>(r)])] + 1;
            }
            const double total = ordered_score(means, candidate);
            if (total > best_total) {
                best_total = total;
                best_label_pos = pos;
            }
        }
        mapping[static_cast<std::size_t>(row)] = free_labels[static_cast<std::size_t>(best_label_pos)] + 1;
        free_labels.erase(free_labels.begin() + best_label_pos);
    }

    return {mapping, ordered_score(means, mapping)};
}

ClusterLabelAssignment brute_force_assignment(const MixtureEstimate& estimate) {
    const Eigen::MatrixXd means = mean_matrix(estimate);
    const int n = static_cast<int>(means.rows());
    if (n > 9) throw OracleTooLarge("exhaustive assignment is guarded to N <= 9");

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 1);

    std::vector<int> best = perm;
    double best_score = ordered_score(means, perm);
    while (std::next_permutation(perm.begin(), perm.end())) {
        const double s = ordered_score(means, perm);
        if (s > best_score) { // strict: the first optimum in lexicographic order wins
            best_score = s;
            best = perm;
        }
    }
    return {best, best_score};
}

} // namespace protocal
