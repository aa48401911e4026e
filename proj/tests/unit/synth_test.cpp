#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "protocal/calibrator.hpp"
#include "protocal/synth.hpp"

using namespace protocal;

namespace {

ScenarioSpec isotropic_binary(const Eigen::Vector2d& m1, const Eigen::Vector2d& m2, double sigma,
                              std::uint64_t seed) {
    ScenarioSpec spec;
    spec.n_classes = 2;
    spec.cluster_means = {m1, m2};
    spec.cluster_covs = {sigma * sigma * Eigen::Matrix2d::Identity(),
                         sigma * sigma * Eigen::Matrix2d::Identity()};
    spec.class_priors = Eigen::Vector2d(0.5, 0.5);
    spec.n_estimate = 100;
    spec.n_test = 400;
    spec.seed = seed;
    return spec;
}

} // namespace

TEST_CASE("degenerate priors force a single class") {
    auto spec = biased_binary_scenario();
    spec.class_priors = Eigen::Vector2d(1.0, 0.0);
    spec.estimate_priors = spec.class_priors;
    spec.n_estimate = 50;
    spec.n_test = 100;
    const auto sample = sample_scenario(spec);
    CHECK(std::all_of(sample.test_gold.begin(), sample.test_gold.end(),
                      [](int g) { return g == 1; }));
    CHECK(std::all_of(sample.estimate_gold.begin(), sample.estimate_gold.end(),
                      [](int g) { return g == 1; }));
}

TEST_CASE("swapping the cluster means swaps the clusters, not the label stream") {
    auto spec = isotropic_binary({1.0, -1.0}, {-1.0, 1.0}, 0.4, 99);
    spec.project_log_softmax = false; // keep the draw geometry linear
    const auto base = sample_scenario(spec);

    std::swap(spec.cluster_means[0], spec.cluster_means[1]);
    const auto swapped = sample_scenario(spec);

    REQUIRE(base.test_gold == swapped.test_gold); // same seed, same label draws
    const Eigen::Vector2d delta = Eigen::Vector2d(-1.0, 1.0) - Eigen::Vector2d(1.0, -1.0);
    for (std::size_t i = 0; i < base.test_logits.size(); ++i) {
        const Eigen::Vector2d expected =
            base.test_logits[i] + (base.test_gold[i] == 1 ? delta : -delta);
        CHECK((swapped.test_logits[i] - expected).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("sampling is bit-reproducible for a fixed seed") {
    const auto spec = biased_binary_scenario();
    const auto a = sample_scenario(spec);
    const auto b = sample_scenario(spec);
    REQUIRE(a.test_logits.size() == b.test_logits.size());
    CHECK(a.test_gold == b.test_gold);
    CHECK(a.estimate_gold == b.estimate_gold);
    for (std::size_t i = 0; i < a.test_logits.size(); ++i)
        CHECK(a.test_logits[i] == b.test_logits[i]);
    for (std::size_t i = 0; i < a.estimate_logits.size(); ++i)
        CHECK(a.estimate_logits[i] == b.estimate_logits[i]);
}

TEST_CASE("projected samples live on the log-probability manifold") {
    const auto sample = sample_scenario(biased_binary_scenario());
    for (const auto& x : sample.test_logits) {
        CHECK((x.array() <= 0.0).all());
        CHECK(x.array().exp().sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("the biased scenario defeats the conventional rule on negatives") {
    const auto sample = sample_scenario(biased_binary_scenario());
    long negatives = 0, misclassified = 0;
    for (std::size_t i = 0; i < sample.test_gold.size(); ++i) {
        if (sample.test_gold[i] != 1) continue;
        ++negatives;
        if (predict_conventional(sample.test_logits[i]) != 1) ++misclassified;
    }
    REQUIRE(negatives > 0);
    CHECK(static_cast<double>(misclassified) / static_cast<double>(negatives) > 0.95);
}

TEST_CASE("bayes oracle fixture for the default biased scenario") {
    const auto bayes = bayes_optimal_accuracy(biased_binary_scenario(), 200000);
    CHECK(bayes.std_error <= 0.002);
    // frozen Monte-Carlo value (deterministic given the preset seed)
    CHECK(bayes.accuracy == doctest::Approx(0.99746).epsilon(1e-9));
    // analytic cross-check: equal isotropic covariances give Phi(|dmu| / 2 sigma)
    const double dmu = std::hypot(std::log(0.3) - std::log(0.1), std::log(0.9) - std::log(0.7));
    const double analytic = 0.5 * (1.0 + std::erf(dmu / (2.0 * 0.2) / std::sqrt(2.0)));
    CHECK(std::abs(bayes.accuracy - analytic) <= 4.0 * bayes.std_error);
}

TEST_CASE("bayes oracle on indistinguishable and near-separable cases") {
    auto identical = isotropic_binary({0.0, 0.0}, {0.0, 0.0}, 0.5, 7);
    const auto coin = bayes_optimal_accuracy(identical, 100000);
    CHECK(std::abs(coin.accuracy - 0.5) < 4.0 * coin.std_error);
    CHECK(coin.std_error < 0.002);

    auto separated = isotropic_binary({10.0, -10.0}, {-10.0, 10.0}, 1.0, 7); // ~28 sigma apart
    const auto sure = bayes_optimal_accuracy(separated, 100000);
    CHECK(sure.accuracy >= 0.999);
}

TEST_CASE("boundary sweep reaches a perfect plateau on separable data") {
    const auto spec = isotropic_binary({2.0, -2.0}, {-2.0, 2.0}, 0.3, 13);
    const auto sample = sample_scenario(spec);
    const auto sweep =
        boundary_sweep(sample.test_logits, sample.test_gold, {0.2, 0.35, 0.5, 0.65, 0.8});
    int perfect = 0;
    for (double a : sweep.accuracies)
        if (a == 1.0) ++perfect;
    CHECK(perfect >= 3);
}

TEST_CASE("with all-positive gold the sweep is non-increasing in t") {
    auto spec = biased_binary_scenario();
    spec.class_priors = Eigen::Vector2d(0.0, 1.0);
    spec.n_test = 300;
    const auto sample = sample_scenario(spec);
    std::vector<double> grid;
    for (int i = 1; i <= 19; ++i) grid.push_back(i / 20.0);
    const auto sweep = boundary_sweep(sample.test_logits, sample.test_gold, grid);
    for (std::size_t i = 1; i < sweep.accuracies.size(); ++i)
        CHECK(sweep.accuracies[i] <= sweep.accuracies[i - 1]);
}

TEST_CASE("sweep at t=0.5 equals the conventional accuracy exactly") {
    const auto sample = sample_scenario(biased_binary_scenario());
    long correct = 0;
    for (std::size_t i = 0; i < sample.test_gold.size(); ++i)
        if (predict_conventional(sample.test_logits[i]) == sample.test_gold[i]) ++correct;
    const double conventional =
        static_cast<double>(correct) / static_cast<double>(sample.test_gold.size());

    const auto sweep = boundary_sweep(sample.test_logits, sample.test_gold, {0.25, 0.5, 0.75});
    CHECK(sweep.accuracies[1] == conventional);
}

TEST_CASE("the biased scenario has a robust region far from t=0.5") {
    const auto sample = sample_scenario(biased_binary_scenario());
    std::vector<double> grid;
    for (int i = 1; i <= 99; ++i) grid.push_back(i / 100.0);
    const auto sweep = boundary_sweep(sample.test_logits, sample.test_gold, grid);
    const double at_half = sweep.accuracies[49];
    const double best = *std::max_element(sweep.accuracies.begin(), sweep.accuracies.end());
    CHECK(best - at_half >= 0.15);
}

TEST_CASE("scenario and sweep inputs are validated") {
    auto spec = biased_binary_scenario();
    spec.class_priors = Eigen::Vector2d(0.6, 0.6);
    CHECK_THROWS_AS((void)sample_scenario(spec), InvalidScenario);

    spec = biased_binary_scenario();
    spec.cluster_covs[0] = -Eigen::Matrix2d::Identity();
    CHECK_THROWS_AS((void)sample_scenario(spec), InvalidScenario);

    spec = biased_binary_scenario();
    spec.cluster_means.pop_back();
    CHECK_THROWS_AS((void)sample_scenario(spec), InvalidScenario);

    const auto sample = sample_scenario(biased_binary_scenario());
    CHECK_THROWS_AS((void)boundary_sweep(sample.test_logits, sample.test_gold, {}), InvalidConfig);
    CHECK_THROWS_AS((void)boundary_sweep(sample.test_logits, sample.test_gold, {0.0}),
                    InvalidConfig);

    std::vector<Eigen::VectorXd> ternary{Eigen::Vector3d(0.0, 1.0, 2.0)};
    CHECK_THROWS_AS((void)boundary_sweep(ternary, {1}, {0.5}), BinaryOnly);
}
