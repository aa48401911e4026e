#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "protocal/errors.hpp"

namespace protocal {

struct GaussianComponent {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance; // symmetric; positive definite after regularization
    double weight = 0.0;
};

// One EM fit: N components plus the trajectory of the mean per-sample
// log-likelihood, one entry per E-step evaluation (index 0 is the k-means
// initialization). converged <=> the last two entries differ by < tol.
struct MixtureEstimate {
    std::vector<GaussianComponent> components;
    std::uint64_t seed = 0;
    double log_likelihood = 0.0;
    std::vector<double> trajectory;
    bool converged = false;
    int iterations = 0;
    bool degenerate = false; // empty cluster, underflow row, or dead component seen
};

struct EmConfig {
    int max_iter = 100;
    double tol = 1e-3;          // threshold on |delta mean log-likelihood|
    double reg = 1e-6;          // covariance eigenvalue floor; mandatory on log-prob data
    double resp_floor = 1e-300; // responsibilities below this are snapped to zero
    int kmeans_max_iter = 50;
};

void validate(const EmConfig& config);

// Cholesky view of one component for repeated density evaluations.
// Throws SingularCovariance when the factorization fails.
class ComponentDensity {
public:
    explicit ComponentDensity(const GaussianComponent& component);
    double log_density(const Eigen::VectorXd& x) const;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd chol_lower_;
    double log_norm_ = 0.0; // -(N/2) log 2pi - (1/2) log |Sigma|
};

// log N(x | mean, covariance) through a Cholesky factorization.
double gaussian_log_density(const Eigen::VectorXd& x, const GaussianComponent& component);

// k-means++ seeding plus Lloyd refinement; one row of `data` per sample.
// Deterministic given (data order, seed). Empty clusters are re-seeded at the
// point farthest from its assigned centroid.
MixtureEstimate kmeans_init(const Eigen::MatrixXd& data, int n_components, std::uint64_t seed,
                            const EmConfig& config = {});

struct EStepResult {
    Eigen::MatrixXd responsibilities; // |data| x N, rows sum to 1
    double mean_log_likelihood = 0.0;
    bool degenerate = false;
};

EStepResult e_step(const Eigen::MatrixXd& data, const MixtureEstimate& estimate,
                   const EmConfig& config = {});

// Weighted MLE updates. Components with vanishing total responsibility are
// re-seeded at the point with the lowest max-responsibility and flagged.
MixtureEstimate m_step(const Eigen::MatrixXd& data, const Eigen::MatrixXd& responsibilities,
                       const EmConfig& config = {});

MixtureEstimate fit_em(const Eigen::MatrixXd& data, int n_components, std::uint64_t seed,
                       const EmConfig& config = {});

} // namespace protocal
