#include "protocal/synth.hpp"

#include <cmath>
#include <limits>

#include "protocal/gmm.hpp"
#include "protocal/representation.hpp"
#include "protocal/rng.hpp"

namespace protocal {

namespace {

// rng stream tags so the estimate split, test split, and the Monte-Carlo
// oracle never share draws
constexpr std::uint64_t kEstimateStream = 1;
constexpr std::uint64_t kTestStream = 2;
constexpr std::uint64_t kBayesStream = 3;

Eigen::VectorXd effective_estimate_priors(const ScenarioSpec& spec) {
    return spec.estimate_priors.size() ? spec.estimate_priors : spec.class_priors;
}

void check_priors(const Eigen::VectorXd& priors, int n, const char* which) {
    if (priors.size() != n)
        throw InvalidScenario(std::string(which) + " priors must have one entry per class");
    if ((priors.array() < 0.0).any())
        throw InvalidScenario(std::string(which) + " priors must be non-negative");
    if (std::abs(priors.sum() - 1.0) > 1e-9)
        throw InvalidScenario(std::string(which) + " priors must sum to 1");
}

int draw_class(const Eigen::VectorXd& priors, Rng& rng) {
    const double u = rng.next_double();
    double acc = 0.0;
    for (int c = 0; c < priors.size(); ++c) {
        acc += priors[c];
        if (u < acc) return c;
    }
    return static_cast<int>(priors.size()) - 1;
}

struct ClusterSampler {
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> chol; // lower factors

    explicit ClusterSampler(const ScenarioSpec& spec) : means(spec.cluster_means) {
        chol.reserve(spec.cluster_covs.size());
        for (std::size_t k = 0; k < spec.cluster_covs.size(); ++k) {
            Eigen::LLT<Eigen::MatrixXd> llt(spec.cluster_covs[k]);
            if (llt.info() != Eigen::Success)
                throw InvalidScenario("cluster covariance " + std::to_string(k + 1) +
                                      " is not positive definite");
            chol.push_back(llt.matrixL());
        }
    }

    Eigen::VectorXd draw(int cluster, Rng& rng) const {
        Eigen::VectorXd z(means[static_cast<std::size_t>(cluster)].size());
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.next_gaussian();
        return means[static_cast<std::size_t>(cluster)] + chol[static_cast<std::size_t>(cluster)] * z;
    }
};

ScenarioSpec binary_scenario(double p_positive_neg_cluster, double p_positive_pos_cluster,
                             double sigma) {
    ScenarioSpec spec;
    spec.n_classes = 2;
    spec.cluster_means = {
        Eigen::Vector2d(std::log(1.0 - p_positive_neg_cluster), std::log(p_positive_neg_cluster)),
        Eigen::Vector2d(std::log(1.0 - p_positive_pos_cluster), std::log(p_positive_pos_cluster)),
    };
    const Eigen::MatrixXd cov = sigma * sigma * Eigen::MatrixXd::Identity(2, 2);
    spec.cluster_covs = {cov, cov};
    spec.class_priors = Eigen::Vector2d(0.5, 0.5);
    spec.n_estimate = 500;
    spec.n_test = 2000;
    spec.seed = 1;
    return spec;
}

} // namespace

void validate(const ScenarioSpec& spec) {
    const int n = spec.n_classes;
    if (n < 2) throw InvalidScenario("scenario needs at least 2 classes");
    if (static_cast<int>(spec.cluster_means.size()) != n)
        throw InvalidScenario("scenario needs one cluster mean per class");
    if (static_cast<int>(spec.cluster_covs.size()) != n)
        throw InvalidScenario("scenario needs one cluster covariance per class");
    for (int k = 0; k < n; ++k) {
        if (spec.cluster_means[static_cast<std::size_t>(k)].size() != n)
            throw InvalidScenario("cluster means must live in N-dimensional score space");
        const auto& cov = spec.cluster_covs[static_cast<std::size_t>(k)];
        if (cov.rows() != n || cov.cols() != n)
            throw InvalidScenario("cluster covariances must be N x N");
        if (!cov.allFinite() || !spec.cluster_means[static_cast<std::size_t>(k)].allFinite())
            throw InvalidScenario("cluster parameters contain non-finite values");
    }
    check_priors(spec.class_priors, n, "class");
    if (spec.estimate_priors.size()) check_priors(spec.estimate_priors, n, "estimate");
    if (spec.n_estimate < 0 || spec.n_test < 0)
        throw InvalidScenario("sample counts must be non-negative");
}

ScenarioSpec biased_binary_scenario() { return binary_scenario(0.70, 0.90, 0.20); }

ScenarioSpec symmetric_binary_scenario() { return binary_scenario(0.28, 0.72, 0.25); }

ScenarioSample sample_scenario(const ScenarioSpec& spec) {
    validate(spec);
    const ClusterSampler sampler(spec);
    const Eigen::VectorXd estimate_priors = effective_estimate_priors(spec);
    const Rng root(spec.seed);

    ScenarioSample sample;
    sample.estimate_logits.reserve(static_cast<std::size_t>(spec.n_estimate));
    sample.estimate_gold.reserve(static_cast<std::size_t>(spec.n_estimate));
    Rng est_rng = root.fork(kEstimateStream);
    for (int i = 0; i < spec.n_estimate; ++i) {
        const int cls = draw_class(estimate_priors, est_rng);
        Eigen::VectorXd v = sampler.draw(cls, est_rng);
        sample.estimate_logits.push_back(spec.project_log_softmax ? to_log_prob(v) : v);
        sample.estimate_gold.push_back(cls + 1);
    }

    sample.test_logits.reserve(static_cast<std::size_t>(spec.n_test));
    sample.test_gold.reserve(static_cast<std::size_t>(spec.n_test));
    Rng test_rng = root.fork(kTestStream);
    for (int i = 0; i < spec.n_test; ++i) {
        const int cls = draw_class(spec.class_priors, test_rng);
        Eigen::VectorXd v = sampler.draw(cls, test_rng);
        sample.test_logits.push_back(spec.project_log_softmax ? to_log_prob(v) : v);
        sample.test_gold.push_back(cls + 1);
    }
    return sample;
}

BayesAccuracy bayes_optimal_accuracy(const ScenarioSpec& spec, long draws) {
    validate(spec);
    if (draws < 1) throw InvalidScenario("Monte-Carlo oracle needs at least one draw");
    const ClusterSampler sampler(spec);

    std::vector<ComponentDensity> densities;
    Eigen::VectorXd log_prior(spec.n_classes);
    for (int k = 0; k < spec.n_classes; ++k) {
        densities.emplace_back(GaussianComponent{spec.cluster_means[static_cast<std::size_t>(k)],
                                                 spec.cluster_covs[static_cast<std::size_t>(k)], 1.0});
        log_prior[k] = std::log(spec.class_priors[k]);
    }

    Rng rng = Rng(spec.seed).fork(kBayesStream);
    long correct = 0;
    for (long i = 0; i < draws; ++i) {
        const int cls = draw_class(spec.class_priors, rng);
        const Eigen::VectorXd v = sampler.draw(cls, rng);
        int best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < spec.n_classes; ++k) {
            const double s = log_prior[k] + densities[static_cast<std::size_t>(k)].log_density(v);
            if (s > best_score) {
                best_score = s;
                best = k;
            }
        }
        if (best == cls) ++correct;
    }

    BayesAccuracy result;
    result.draws = draws;
    result.accuracy = static_cast<double>(correct) / static_cast<double>(draws);
    result.std_error = std::sqrt(result.accuracy * (1.0 - result.accuracy) / static_cast<double>(draws));
    return result;
}

SweepResult boundary_sweep(const std::vector<Eigen::VectorXd>& test_logits,
                           const std::vector<int>& gold, const std::vector<double>& grid) {
    if (test_logits.size() != gold.size())
        throw InvalidShape("logits and gold labels differ in length");
    if (grid.empty()) throw InvalidConfig("threshold grid is empty");
    for (double t : grid)
        if (!(t > 0.0 && t < 1.0)) throw InvalidConfig("thresholds must lie in (0, 1)");
    for (const auto& v : test_logits)
        if (v.size() != 2) throw BinaryOnly("boundary sweep is defined for binary tasks only");
    for (int label : gold)
        if (label < 1 || label > 2) throw InvalidLabel("gold label outside 1..2");

    std::vector<double> p_positive(test_logits.size());
    for (std::size_t i = 0; i < test_logits.size(); ++i)
        p_positive[i] = to_representation(test_logits[i], Mode::Prob).values[1];

    SweepResult result;
    result.thresholds = grid;
    result.accuracies.reserve(grid.size());
    for (double t : grid) {
        long correct = 0;
        for (std::size_t i = 0; i < p_positive.size(); ++i) {
            const int pred = p_positive[i] >= t ? 2 : 1;
            if (pred == gold[i]) ++correct;
        }
        result.accuracies.push_back(gold.empty() ? 0.0
                                                 : static_cast<double>(correct) /
                                                       static_cast<double>(gold.size()));
    }
    return result;
}

} // namespace protocal
