#include "protocal/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace protocal {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kClassifierVersion = 1;

json vector_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vector_from_json(const json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
    const auto r = static_cast<Eigen::Index>(rows.size());
    if (r == 0) return {};
    const auto c = static_cast<Eigen::Index>(rows[0].size());
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != c)
            throw ParseError("ragged matrix in JSON document");
        m.row(i) = vector_from_json(rows[static_cast<std::size_t>(i)]).transpose();
    }
    return m;
}

} // namespace

std::vector<PredictionRecord> read_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dump: " + path);

    std::vector<PredictionRecord> records;
    std::string line;
    long line_no = 0;
    Eigen::Index dim = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        try {
            PredictionRecord rec;
            rec.id = j.contains("id") ? j.at("id").get<std::string>()
                                      : "line-" + std::to_string(line_no);
            rec.logits = vector_from_json(j.at("logits"));
            if (j.contains("label") && !j.at("label").is_null())
                rec.label = j.at("label").get<int>();

            if (rec.logits.size() < 2)
                throw ParseError("logits need at least 2 entries");
            if (!rec.logits.allFinite()) throw ParseError("logits contain non-finite values");
            if (dim < 0) dim = rec.logits.size();
            if (rec.logits.size() != dim)
                throw ParseError("logits length " + std::to_string(rec.logits.size()) +
                                 " does not match earlier records (" + std::to_string(dim) + ")");
            if (rec.label && (*rec.label < 1 || *rec.label > dim))
                throw ParseError("label " + std::to_string(*rec.label) + " outside 1.." +
                                 std::to_string(dim));
            records.push_back(std::move(rec));
        } catch (const ParseError& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

void write_dump(const std::string& path, const std::vector<PredictionRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write dump: " + path);
    for (const auto& rec : records) {
        ordered_json j;
        j["id"] = rec.id;
        j["logits"] = vector_to_json(rec.logits);
        if (rec.label) j["label"] = *rec.label;
        out << j.dump() << '\n';
    }
}

nlohmann::ordered_json classifier_to_json(const CalibratedClassifier& classifier) {
    ordered_json j;
    j["format"] = "protocal.classifier";
    j["version"] = kClassifierVersion;
    j["mode"] = to_string(classifier.mode);
    j["n_classes"] = classifier.n_classes();
    j["selection"] = to_string(classifier.config.strategy);
    j["seed"] = classifier.config.seed;
    j["restarts"] = classifier.config.restarts;
    j["em"] = {{"max_iter", classifier.config.em.max_iter},
               {"tol", classifier.config.em.tol},
               {"reg", classifier.config.em.reg}};

    ordered_json components = json::array();
    for (const auto& c : classifier.estimate.components) {
        ordered_json cj;
        cj["weight"] = c.weight;
        cj["mean"] = vector_to_json(c.mean);
        cj["covariance"] = matrix_to_json(c.covariance);
        components.push_back(std::move(cj));
    }
    j["components"] = std::move(components);
    j["assignment"] = {{"mapping", classifier.assignment.mapping},
                       {"score", classifier.assignment.score}};
    j["fit"] = {{"seed", classifier.estimate.seed},
                {"log_likelihood", classifier.estimate.log_likelihood},
                {"iterations", classifier.estimate.iterations},
                {"converged", classifier.estimate.converged},
                {"degenerate", classifier.estimate.degenerate},
                {"trajectory", classifier.estimate.trajectory}};
    return j;
}

CalibratedClassifier classifier_from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != "protocal.classifier")
            throw ParseError("not a classifier document");
        if (j.at("version").get<int>() != kClassifierVersion)
            throw ParseError("unsupported classifier version " +
                             std::to_string(j.at("version").get<int>()));

        CalibratedClassifier classifier;
        classifier.mode = mode_from_string(j.at("mode").get<std::string>());
        classifier.config.mode = classifier.mode;
        classifier.config.strategy = selection_from_string(j.at("selection").get<std::string>());
        classifier.config.seed = j.at("seed").get<std::uint64_t>();
        classifier.config.restarts = j.at("restarts").get<int>();
        classifier.config.em.max_iter = j.at("em").at("max_iter").get<int>();
        classifier.config.em.tol = j.at("em").at("tol").get<double>();
        classifier.config.em.reg = j.at("em").at("reg").get<double>();

        const int n = j.at("n_classes").get<int>();
        for (const auto& cj : j.at("components")) {
            GaussianComponent c;
            c.weight = cj.at("weight").get<double>();
            c.mean = vector_from_json(cj.at("mean"));
            c.covariance = matrix_from_json(cj.at("covariance"));
            if (c.mean.size() != n || c.covariance.rows() != n || c.covariance.cols() != n)
                throw ParseError("component dimensions do not match n_classes");
            if ((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12)
                throw ParseError("component covariance is not symmetric");
            classifier.estimate.components.push_back(std::move(c));
        }
        if (static_cast<int>(classifier.estimate.components.size()) != n)
            throw ParseError("component count does not match n_classes");

        classifier.assignment.mapping = j.at("assignment").at("mapping").get<std::vector<int>>();
        classifier.assignment.score = j.at("assignment").at("score").get<double>();
        classifier.estimate.seed = j.at("fit").at("seed").get<std::uint64_t>();
        classifier.estimate.log_likelihood = j.at("fit").at("log_likelihood").get<double>();
        classifier.estimate.iterations = j.at("fit").at("iterations").get<int>();
        classifier.estimate.converged = j.at("fit").at("converged").get<bool>();
        classifier.estimate.degenerate = j.at("fit").at("degenerate").get<bool>();
        classifier.estimate.trajectory = j.at("fit").at("trajectory").get<std::vector<double>>();
        return classifier;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed classifier document: ") + e.what());
    }
}

void save_classifier(const std::string& path, const CalibratedClassifier& classifier) {
    write_text_file(path, classifier_to_json(classifier).dump(2) + "\n");
}

CalibratedClassifier load_classifier(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open classifier: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return classifier_from_json(j);
}

nlohmann::ordered_json metrics_to_json(const Metrics& metrics) {
    ordered_json j;
    j["n"] = metrics.n;
    j["calibrated_accuracy"] = metrics.calibrated_accuracy;
    j["conventional_accuracy"] = metrics.conventional_accuracy;
    ordered_json per_class = json::array();
    for (double a : metrics.per_class_accuracy) {
        if (std::isnan(a))
            per_class.push_back(nullptr);
        else
            per_class.push_back(a);
    }
    j["per_class_accuracy"] = std::move(per_class);
    j["confusion"] = metrics.confusion;
    return j;
}

nlohmann::ordered_json scenario_to_json(const ScenarioSpec& spec) {
    ordered_json j;
    j["classes"] = spec.n_classes;
    json means = json::array();
    for (const auto& m : spec.cluster_means) means.push_back(vector_to_json(m));
    j["cluster_means"] = std::move(means);
    json covs = json::array();
    for (const auto& c : spec.cluster_covs) covs.push_back(matrix_to_json(c));
    j["cluster_covs"] = std::move(covs);
    j["class_priors"] = vector_to_json(spec.class_priors);
    if (spec.estimate_priors.size()) j["estimate_priors"] = vector_to_json(spec.estimate_priors);
    j["n_estimate"] = spec.n_estimate;
    j["n_test"] = spec.n_test;
    j["seed"] = spec.seed;
    j["project_log_softmax"] = spec.project_log_softmax;
    return j;
}

ScenarioSpec scenario_from_json(const json& j) {
    try {
        ScenarioSpec spec;
        spec.n_classes = j.at("classes").get<int>();
        for (const auto& m : j.at("cluster_means")) spec.cluster_means.push_back(vector_from_json(m));
        for (const auto& c : j.at("cluster_covs")) spec.cluster_covs.push_back(matrix_from_json(c));
        spec.class_priors = vector_from_json(j.at("class_priors"));
        if (j.contains("estimate_priors")) spec.estimate_priors = vector_from_json(j.at("estimate_priors"));
        spec.n_estimate = j.at("n_estimate").get<int>();
        spec.n_test = j.at("n_test").get<int>();
        spec.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("project_log_softmax"))
            spec.project_log_softmax = j.at("project_log_softmax").get<bool>();
        validate(spec);
        return spec;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed scenario document: ") + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << contents;
}

} // namespace protocal
