#include "protocal/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "protocal/rng.hpp"

namespace protocal {

void validate(const EmConfig& config) {
    if (config.max_iter < 1) throw InvalidConfig("max_iter must be >= 1");
    if (!(config.tol > 0.0)) throw InvalidConfig("tol must be > 0");
    if (!(config.reg >= 0.0)) throw InvalidConfig("reg must be >= 0");
    if (config.kmeans_max_iter < 1) throw InvalidConfig("kmeans_max_iter must be >= 1");
}

ComponentDensity::ComponentDensity(const GaussianComponent& component) {
    const auto dim = component.mean.size();
    if (component.covariance.rows() != dim || component.covariance.cols() != dim)
        throw InvalidShape("covariance dimensions do not match the mean");

    Eigen::LLT<Eigen::MatrixXd> llt(component.covariance.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success)
        throw SingularCovariance("covariance is not positive definite");
    mean_ = component.mean;
    chol_lower_ = llt.matrixL();

    double log_det = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i) {
        const double d = chol_lower_(i, i);
        if (!(d > 0.0) || !std::isfinite(d))
            throw SingularCovariance("covariance is not positive definite");
        log_det += 2.0 * std::log(d);
    }
    log_norm_ = -0.5 * (static_cast<double>(dim) * std::log(2.0 * std::numbers::pi) + log_det);
}

double ComponentDensity::log_density(const Eigen::VectorXd& x) const {
    if (x.size() != mean_.size()) throw InvalidShape("point dimension does not match the component");
    // quadratic form via forward substitution: ||L^-1 (x - mean)||^2
    Eigen::VectorXd y = chol_lower_.triangularView<Eigen::Lower>().solve(x - mean_);
    return log_norm_ - 0.5 * y.squaredNorm();
}

double gaussian_log_density(const Eigen::VectorXd& x, const GaussianComponent& component) {
    return ComponentDensity(component).log_density(x);
}

namespace {

// Floor the eigenvalues of a scatter matrix at reg. Over the constrained
// family {Sigma >= reg*I} this is the exact M-step maximizer, which keeps EM
// monotone; an additive ridge is not the maximizer and can step backwards by
// ~reg on near-singular directions (log-prob data always has one).
Eigen::MatrixXd regularize_covariance(const Eigen::MatrixXd& scatter, double reg) {
    if (reg <= 0.0) return scatter;
    const auto dim = scatter.rows();
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(dim, dim);
    if (scatter.isZero(0.0)) return reg * identity; // one-point clusters
    Eigen::LLT<Eigen::MatrixXd> probe(scatter - reg * identity);
    if (probe.info() == Eigen::Success) return scatter; // already dominates the floor
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scatter);
    const Eigen::VectorXd floored = es.eigenvalues().cwiseMax(reg);
    Eigen::MatrixXd result =
        es.eigenvectors() * floored.asDiagonal() * es.eigenvectors().transpose();
    return (result + result.transpose()) / 2.0;
}

// nearest centroid, lowest index on ties
int nearest(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& point, double* dist2_out) {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int k = 0; k < centroids.rows(); ++k) {
        const double d2 = (centroids.row(k) - point).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = k;
        }
    }
    if (dist2_out) *dist2_out = best_d2;
    return best;
}

} // namespace

MixtureEstimate kmeans_init(const Eigen::MatrixXd& data, int n_components, std::uint64_t seed,
                            const EmConfig& config) {
    validate(config);
    const int n_samples = static_cast<int>(data.rows());
    const int dim = static_cast<int>(data.cols());
    if (n_components < 1) throw InvalidConfig("need at least one component");
    if (n_samples < n_components)
        throw InsufficientData("k-means needs at least " + std::to_string(n_components) +
                               " samples, got " + std::to_string(n_samples));
    if (!data.allFinite()) throw InvalidInput("data contains non-finite values");

    Rng rng(seed);
    bool degenerate = false;

    // k-means++ seeding
    Eigen::MatrixXd centroids(n_components, dim);
    std::vector<char> is_centroid(static_cast<std::size_t>(n_samples), 0);
    {
        const int first = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_samples)));
        centroids.row(0) = data.row(first);
        is_centroid[static_cast<std::size_t>(first)] = 1;
    }
    Eigen::VectorXd min_d2(n_samples);
    for (int i = 0; i < n_samples; ++i)
        min_d2[i] = (data.row(i) - centroids.row(0)).squaredNorm();

    for (int k = 1; k < n_components; ++k) {
        const double total = min_d2.sum();
        int chosen = -1;
        if (total > 0.0) {
            const double r = rng.next_double() * total;
            double acc = 0.0;
            for (int i = 0; i < n_samples; ++i) {
                acc += min_d2[i];
                if (acc > r) {
                    chosen = i;
                    break;
                }
            }
            if (chosen < 0) chosen = n_samples - 1; // rounding spill
        } else {
            // all remaining points coincide with existing centroids; fall back
            // to the first non-centroid index so seeding stays total
            degenerate = true;
            for (int i = 0; i < n_samples; ++i) {
                if (!is_centroid[static_cast<std::size_t>(i)]) {
                    chosen = i;
                    break;
                }
            }
            if (chosen < 0) chosen = 0;
        }
        centroids.row(k) = data.row(chosen);
        is_centroid[static_cast<std::size_t>(chosen)] = 1;
        for (int i = 0; i < n_samples; ++i)
            min_d2[i] = std::min(min_d2[i], (data.row(i) - centroids.row(k)).squaredNorm());
    }

    // Lloyd refinement
    std::vector<int> assign(static_cast<std::size_t>(n_samples), -1);
    std::vector<int> prev_assign;
    for (int iter = 0; iter < config.kmeans_max_iter; ++iter) {
        prev_assign = assign;
        for (int i = 0; i < n_samples; ++i) assign[static_cast<std::size_t>(i)] = nearest(centroids, data.row(i), nullptr);
        if (assign == prev_assign) break;

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_components, dim);
        std::vector<int> counts(static_cast<std::size_t>(n_components), 0);
        for (int i = 0; i < n_samples; ++i) {
            sums.row(assign[static_cast<std::size_t>(i)]) += data.row(i);
            ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
        }
        std::vector<char> taken(static_cast<std::size_t>(n_samples), 0);
        for (int k = 0; k < n_components; ++k) {
            if (counts[static_cast<std::size_t>(k)] > 0) {
                centroids.row(k) = sums.row(k) / counts[static_cast<std::size_t>(k)];
            } else {
                // re-seed at the point farthest from its assigned centroid
                degenerate = true;
                int far = -1;
                double far_d2 = -1.0;
                for (int i = 0; i < n_samples; ++i) {
                    if (taken[static_cast<std::size_t>(i)]) continue;
                    const double d2 =
                        (data.row(i) - centroids.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
                    if (d2 > far_d2) {
                        far_d2 = d2;
                        far = i;
                    }
                }
                if (far >= 0) {
                    centroids.row(k) = data.row(far);
                    taken[static_cast<std::size_t>(far)] = 1;
                }
            }
        }
    }
    // final assignment so clusters and centroids are consistent
    for (int i = 0; i < n_samples; ++i) assign[static_cast<std::size_t>(i)] = nearest(centroids, data.row(i), nullptr);

    MixtureEstimate estimate;
    estimate.seed = seed;
    estimate.components.resize(static_cast<std::size_t>(n_components));
    std::vector<int> counts(static_cast<std::size_t>(n_components), 0);
    for (int i = 0; i < n_samples; ++i) ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];

    // empty clusters keep one virtual point so every weight stays positive
    double weight_total = 0.0;
    for (int k = 0; k < n_components; ++k) {
        if (counts[static_cast<std::size_t>(k)] == 0) degenerate = true;
        weight_total += std::max(counts[static_cast<std::size_t>(k)], 1);
    }

    for (int k = 0; k < n_components; ++k) {
        auto& c = estimate.components[static_cast<std::size_t>(k)];
        const int nk = counts[static_cast<std::size_t>(k)];
        c.mean = centroids.row(k).transpose();
        c.weight = std::max(nk, 1) / weight_total;
        Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(dim, dim);
        if (nk > 0) {
            for (int i = 0; i < n_samples; ++i) {
                if (assign[static_cast<std::size_t>(i)] != k) continue;
                Eigen::VectorXd d = data.row(i).transpose() - c.mean;
                scatter.noalias() += d * d.transpose();
            }
            scatter /= nk;
        }
        c.covariance = regularize_covariance(scatter, config.reg);
    }
    estimate.degenerate = degenerate;
    return estimate;
}

EStepResult e_step(const Eigen::MatrixXd& data, const MixtureEstimate& estimate,
                   const EmConfig& config) {
    validate(config);
    const int n_samples = static_cast<int>(data.rows());
    const int n_components = static_cast<int>(estimate.components.size());
    if (n_components == 0) throw InvalidEstimate("estimate has no components");

    std::vector<ComponentDensity> densities;
    densities.reserve(static_cast<std::size_t>(n_components));
    Eigen::VectorXd log_weight(n_components);
    for (int k = 0; k < n_components; ++k) {
        densities.emplace_back(estimate.components[static_cast<std::size_t>(k)]);
        log_weight[k] = std::log(estimate.components[static_cast<std::size_t>(k)].weight);
    }

    EStepResult result;
    result.responsibilities.resize(n_samples, n_components);
    double ll_sum = 0.0;
    int ll_count = 0;

    Eigen::VectorXd joint(n_components);
    for (int i = 0; i < n_samples; ++i) {
        for (int k = 0; k < n_components; ++k)
            joint[k] = log_weight[k] + densities[static_cast<std::size_t>(k)].log_density(data.row(i).transpose());

        const double m = joint.maxCoeff();
        if (!std::isfinite(m)) {
            result.responsibilities.row(i).setConstant(1.0 / n_components);
            result.degenerate = true;
            continue;
        }
        const double lse = m + std::log((joint.array() - m).exp().sum());
        ll_sum += lse;
        ++ll_count;
        Eigen::ArrayXd r = (joint.array() - lse).exp();
        r = (r < config.resp_floor).select(0.0, r);
        const double row_sum = r.sum();
        if (row_sum > 0.0) {
            result.responsibilities.row(i) = (r / row_sum).transpose();
        } else {
            result.responsibilities.row(i).setConstant(1.0 / n_components);
            result.degenerate = true;
        }
    }
    result.mean_log_likelihood =
        ll_count > 0 ? ll_sum / ll_count : -std::numeric_limits<double>::infinity();
    if (ll_count < n_samples) result.degenerate = true;
    return result;
}

MixtureEstimate m_step(const Eigen::MatrixXd& data, const Eigen::MatrixXd& responsibilities,
                       const EmConfig& config) {
    validate(config);
    const int n_samples = static_cast<int>(data.rows());
    const int dim = static_cast<int>(data.cols());
    const int n_components = static_cast<int>(responsibilities.cols());
    if (responsibilities.rows() != n_samples)
        throw InvalidShape("responsibility rows do not match the data");

    MixtureEstimate estimate;
    estimate.components.resize(static_cast<std::size_t>(n_components));

    const Eigen::VectorXd totals = responsibilities.colwise().sum();
    std::vector<int> dead;
    for (int k = 0; k < n_components; ++k) {
        auto& c = estimate.components[static_cast<std::size_t>(k)];
        const double nk = totals[k];
        if (nk < 1e-12) {
            dead.push_back(k);
            continue;
        }
        c.weight = nk / n_samples;
        c.mean = (responsibilities.col(k).transpose() * data).transpose() / nk;
        Eigen::MatrixXd centered = data.rowwise() - c.mean.transpose();
        Eigen::MatrixXd weighted = centered.array().colwise() * responsibilities.col(k).array();
        c.covariance = regularize_covariance((centered.transpose() * weighted) / nk, config.reg);
    }

    if (!dead.empty()) {
        // re-seed dead components at the points the current mixture explains
        // worst (lowest max-responsibility), one point per component
        estimate.degenerate = true;
        const Eigen::VectorXd row_max = responsibilities.rowwise().maxCoeff();
        std::vector<char> taken(static_cast<std::size_t>(n_samples), 0);
        for (int k : dead) {
            int worst = 0;
            double worst_val = std::numeric_limits<double>::infinity();
            for (int i = 0; i < n_samples; ++i) {
                if (taken[static_cast<std::size_t>(i)]) continue;
                if (row_max[i] < worst_val) {
                    worst_val = row_max[i];
                    worst = i;
                }
            }
            taken[static_cast<std::size_t>(worst)] = 1;
            auto& c = estimate.components[static_cast<std::size_t>(k)];
            c.mean = data.row(worst).transpose();
            c.covariance = config.reg * Eigen::MatrixXd::Identity(dim, dim);
            c.weight = 1.0 / n_samples;
        }
        double total = 0.0;
        for (const auto& c : estimate.components) total += c.weight;
        for (auto& c : estimate.components) c.weight /= total;
    }
    return estimate;
}

MixtureEstimate fit_em(const Eigen::MatrixXd& data, int n_components, std::uint64_t seed,
                       const EmConfig& config) {
    validate(config);
    MixtureEstimate estimate = kmeans_init(data, n_components, seed, config);

    EStepResult es = e_step(data, estimate, config);
    estimate.degenerate |= es.degenerate;
    estimate.trajectory.clear();
    estimate.trajectory.push_back(es.mean_log_likelihood);

    int iterations = 0;
    bool converged = false;
    while (iterations < config.max_iter) {
        MixtureEstimate updated = m_step(data, es.responsibilities, config);
        estimate.components = std::move(updated.components);
        estimate.degenerate |= updated.degenerate;
        ++iterations;

        es = e_step(data, estimate, config);
        estimate.degenerate |= es.degenerate;
        estimate.trajectory.push_back(es.mean_log_likelihood);

        const auto t = estimate.trajectory.size();
        if (std::abs(estimate.trajectory[t - 1] - estimate.trajectory[t - 2]) < config.tol) {
            converged = true;
            break;
        }
    }

    estimate.seed = seed;
    estimate.iterations = iterations;
    estimate.converged = converged;
    estimate.log_likelihood = estimate.trajectory.back();
    return estimate;
}

} // namespace protocal
