#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "protocal/io.hpp"
#include "temp_dir.hpp"

using nlohmann::json;

namespace {

std::string cli_path() {
    const char* path = std::getenv("PROTOCAL_CLI");
    REQUIRE_MESSAGE(path != nullptr, "PROTOCAL_CLI must point at the CLI binary");
    return path;
}

int run(const std::string& args, const std::string& log_path = "/dev/null",
        const std::string& env = "") {
    const std::string prefix = env.empty() ? "" : "env " + env + " ";
    const std::string cmd = prefix + cli_path() + " " + args + " >" + log_path + " 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir : testutil::TempDir {
    TempDir() : testutil::TempDir("protocal-cli") {}
};

} // namespace

TEST_CASE("synth + calibrate + evaluate + sweep round trip") {
    TempDir dir;
    const std::string prefix = dir.file("bias");
    CHECK(run("synth --preset biased-binary --seed 5 --n-estimate 600 --n-test 400 "
              "--bayes-draws 20000 --out-prefix " + prefix) == 0);
    CHECK(run("calibrate --in " + prefix + ".estimate.jsonl --out " + dir.file("clf.json") +
              " --restarts 15 --estimate-size 500 --seed 9") == 0);
    CHECK(run("evaluate --classifier " + dir.file("clf.json") + " --in " + prefix +
              ".test.jsonl --out " + dir.file("metrics.json")) == 0);
    CHECK(run("sweep --in " + prefix + ".test.jsonl --out " + dir.file("curve.csv") +
              " --grid-points 19 --grid-min 0.05 --grid-max 0.95") == 0);

    const json metrics = json::parse(slurp(dir.file("metrics.json")));
    const double calibrated = metrics["aggregate"]["calibrated_mean"].get<double>();
    const double conventional = metrics["aggregate"]["conventional_mean"].get<double>();
    CHECK(calibrated > conventional + 0.15);

    // conventional accuracy equals the sweep row at t=0.5
    double at_half = -1.0;
    std::istringstream csv(slurp(dir.file("curve.csv")));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "threshold,accuracy");
    while (std::getline(csv, line)) {
        const auto comma = line.find(',');
        if (line.substr(0, comma) == "0.5") at_half = std::stod(line.substr(comma + 1));
    }
    CHECK(at_half == conventional);

    const json truth = json::parse(slurp(prefix + ".truth.json"));
    CHECK(truth["bayes"]["accuracy"].get<double>() > 0.9);
}

TEST_CASE("calibrate runs are byte-identical and thread-count independent") {
    TempDir dir;
    const std::string prefix = dir.file("s");
    REQUIRE(run("synth --preset biased-binary --seed 3 --n-estimate 300 --n-test 50 "
                "--bayes-draws 1000 --out-prefix " + prefix) == 0);
    const std::string common = "calibrate --in " + prefix + ".estimate.jsonl --restarts 12 "
                               "--estimate-size 250 --seed 4 --out ";
    REQUIRE(run(common + dir.file("a.json") + " --threads 1") == 0);
    REQUIRE(run(common + dir.file("b.json") + " --threads 2") == 0);
    REQUIRE(run(common + dir.file("c.json") + " --threads 2") == 0);
    CHECK(slurp(dir.file("a.json")) == slurp(dir.file("b.json")));
    CHECK(slurp(dir.file("b.json")) == slurp(dir.file("c.json")));
}

TEST_CASE("malformed dumps fail with exit 3 and a line number") {
    TempDir dir;
    const auto bad = dir.file("bad.jsonl");
    {
        std::ofstream out(bad);
        out << R"({"id": "a", "logits": [0.1, -0.1]})" << "\n";
        out << "oops\n";
    }
    const auto log = dir.file("log.txt");
    CHECK(run("calibrate --in " + bad + " --out " + dir.file("clf.json"), log) == 3);
    CHECK(slurp(log).find(":2") != std::string::npos);
}

TEST_CASE("an oversized estimate request names both counts") {
    TempDir dir;
    const std::string prefix = dir.file("s");
    REQUIRE(run("synth --preset biased-binary --seed 8 --n-estimate 40 --n-test 10 "
                "--bayes-draws 1000 --out-prefix " + prefix) == 0);
    const auto log = dir.file("log.txt");
    CHECK(run("calibrate --in " + prefix + ".estimate.jsonl --out " + dir.file("c.json") +
              " --estimate-size 90", log) == 3);
    const std::string message = slurp(log);
    CHECK(message.find("90") != std::string::npos);
    CHECK(message.find("40") != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
    TempDir dir;
    const std::string prefix = dir.file("s");
    REQUIRE(run("synth --preset biased-binary --seed 2 --n-estimate 30 --n-test 30 "
                "--bayes-draws 1000 --out-prefix " + prefix) == 0);
    CHECK(run("sweep --in " + prefix + ".test.jsonl --out " + dir.file("c.csv") +
              " --grid-points 0") == 2);
    CHECK(run("calibrate --in " + prefix + ".estimate.jsonl --out " + dir.file("c.json") +
              " --mode probability") == 2);
    CHECK(run("synth --preset nonsense --out-prefix " + dir.file("x")) == 2);
    CHECK(run("frobnicate") == 2);
}

TEST_CASE("evaluate requires labels") {
    TempDir dir;
    const auto unlabeled = dir.file("u.jsonl");
    {
        std::ofstream out(unlabeled);
        out << R"({"id": "a", "logits": [0.5, -0.5]})" << "\n";
        out << R"({"id": "b", "logits": [-0.5, 0.5]})" << "\n";
    }
    const std::string prefix = dir.file("s");
    REQUIRE(run("synth --preset biased-binary --seed 2 --n-estimate 60 --n-test 10 "
                "--bayes-draws 1000 --out-prefix " + prefix) == 0);
    REQUIRE(run("calibrate --in " + prefix + ".estimate.jsonl --out " + dir.file("clf.json") +
                " --restarts 5 --estimate-size 60") == 0);
    CHECK(run("evaluate --classifier " + dir.file("clf.json") + " --in " + unlabeled +
              " --out " + dir.file("m.json")) == 3);
}

TEST_CASE("aggregation over identical dumps has zero spread") {
    TempDir dir;
    const std::string prefix = dir.file("s");
    REQUIRE(run("synth --preset biased-binary --seed 6 --n-estimate 80 --n-test 60 "
                "--bayes-draws 1000 --out-prefix " + prefix) == 0);
    REQUIRE(run("calibrate --in " + prefix + ".estimate.jsonl --out " + dir.file("clf.json") +
                " --restarts 5 --estimate-size 80") == 0);
    const std::string test_dump = prefix + ".test.jsonl";
    std::string ins;
    for (int i = 0; i < 5; ++i) ins += " --in " + test_dump;
    REQUIRE(run("evaluate --classifier " + dir.file("clf.json") + ins + " --out " +
                dir.file("m.json")) == 0);
    const json metrics = json::parse(slurp(dir.file("m.json")));
    CHECK(metrics["runs"].size() == 5);
    CHECK(metrics["aggregate"]["calibrated_std"].get<double>() == 0.0);
    CHECK(metrics["aggregate"]["conventional_std"].get<double>() == 0.0);
}

TEST_CASE("PROTOCAL_SEED overrides the default seed but not an explicit flag") {
    TempDir dir;
    const std::string prefix = dir.file("s");
    REQUIRE(run("synth --preset biased-binary --seed 14 --n-estimate 120 --n-test 20 "
                "--bayes-draws 1000 --out-prefix " + prefix) == 0);
    const std::string common = "calibrate --in " + prefix + ".estimate.jsonl --restarts 6 "
                               "--estimate-size 100 --out ";
    REQUIRE(run(common + dir.file("flag.json") + " --seed 7") == 0);
    REQUIRE(run(common + dir.file("env.json"), "/dev/null", "PROTOCAL_SEED=7") == 0);
    REQUIRE(run(common + dir.file("both.json") + " --seed 7", "/dev/null", "PROTOCAL_SEED=3") == 0);
    REQUIRE(run(common + dir.file("other.json"), "/dev/null", "PROTOCAL_SEED=3") == 0);
    CHECK(slurp(dir.file("flag.json")) == slurp(dir.file("env.json")));
    CHECK(slurp(dir.file("flag.json")) == slurp(dir.file("both.json"))); // flag wins
    CHECK(slurp(dir.file("flag.json")) != slurp(dir.file("other.json")));
}

TEST_CASE("multi-seed evaluation recalibrates per seed") {
    TempDir dir;
    const std::string prefix = dir.file("s");
    REQUIRE(run("synth --preset biased-binary --seed 12 --n-estimate 400 --n-test 200 "
                "--bayes-draws 1000 --out-prefix " + prefix) == 0);
    REQUIRE(run("evaluate --pool " + prefix + ".estimate.jsonl --seeds 3 --in " + prefix +
                ".test.jsonl --out " + dir.file("m.json") +
                " --restarts 8 --estimate-size 200 --seed 100") == 0);
    const json metrics = json::parse(slurp(dir.file("m.json")));
    REQUIRE(metrics["runs"].size() == 3);
    CHECK(metrics["runs"][0]["seed"].get<std::uint64_t>() == 100);
    CHECK(metrics["runs"][2]["seed"].get<std::uint64_t>() == 102);
    CHECK(metrics["aggregate"]["calibrated_mean"].get<double>() > 0.8);
}
