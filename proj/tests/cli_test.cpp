#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "settings.hpp"

namespace coge::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new fs::path(fs::temp_directory_path() / "coge_cli_test");
        fs::remove_all(*dir_);
        fs::create_directories(*dir_);
        ASSERT_EQ(invoke({"generate", "--n", "40", "--seed", "3", "--out", path("data.jsonl")}).code, kOk);
        ASSERT_EQ(invoke({"train", "--data", path("data.jsonl"), "--out", path("model.bin"), "--epochs", "20",
                          "--hidden", "8", "--layers", "3", "--min-accuracy", "0"})
                      .code,
                  kOk);
    }
    static void TearDownTestSuite() {
        fs::remove_all(*dir_);
        delete dir_;
    }
    static std::string path(const std::string& name) { return (*dir_ / name).string(); }
    static fs::path* dir_;
};
fs::path* Cli::dir_ = nullptr;

TEST_F(Cli, GenerateIsDeterministic) {
    ASSERT_EQ(invoke({"generate", "--n", "10", "--seed", "1", "--out", path("a.jsonl")}).code, kOk);
    ASSERT_EQ(invoke({"generate", "--n", "10", "--seed", "1", "--out", path("b.jsonl")}).code, kOk);
    EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
    EXPECT_EQ(line_count(slurp(path("a.jsonl"))), 10u);
    ASSERT_EQ(invoke({"generate", "--n", "10", "--seed", "2", "--out", path("c.jsonl")}).code, kOk);
    EXPECT_NE(slurp(path("a.jsonl")), slurp(path("c.jsonl")));
}

TEST_F(Cli, GenerateDefaultsReportClassesAndSplits) {
    const Outcome o = invoke({"generate", "--out", path("full.jsonl")});
    ASSERT_EQ(o.code, kOk) << o.err;
    EXPECT_NE(o.out.find("2000 graphs"), std::string::npos);
    EXPECT_NE(o.out.find("cycle 1000, clique 1000"), std::string::npos);
    EXPECT_NE(o.out.find("train 1600, test 400"), std::string::npos);
}

TEST_F(Cli, TriangleCyclesAreRejected) {
    const Outcome o = invoke({"generate", "--n", "10", "--cycle-min", "3", "--out", path("t.jsonl")});
    EXPECT_EQ(o.code, kUsage);
    EXPECT_NE(o.err.find("3-clique"), std::string::npos) << o.err;
    EXPECT_FALSE(fs::exists(path("t.jsonl")));
}

TEST_F(Cli, ZeroEpochsWritesCheckpointAndFailsTheFloor) {
    const Outcome o = invoke({"train", "--data", path("data.jsonl"), "--out", path("zero.bin"), "--epochs", "0"});
    EXPECT_EQ(o.code, kThresholdFailed);
    EXPECT_TRUE(fs::exists(path("zero.bin")));
    EXPECT_NE(o.err.find("below the floor"), std::string::npos);
}

TEST_F(Cli, TrainingIsByteDeterministic) {
    for (const char* name : {"r1.bin", "r2.bin"}) {
        ASSERT_EQ(invoke({"train", "--data", path("data.jsonl"), "--out", path(name), "--epochs", "3", "--seed", "4",
                          "--min-accuracy", "0"})
                      .code,
                  kOk);
    }
    EXPECT_EQ(slurp(path("r1.bin")), slurp(path("r2.bin")));
    EXPECT_EQ(slurp(path("r1.bin.metrics.csv")), slurp(path("r2.bin.metrics.csv")));
    EXPECT_EQ(line_count(slurp(path("r1.bin.metrics.csv"))), 4u);
}

TEST_F(Cli, ExplainSingleGraphWithZeroStepsIsUniform) {
    const std::string out = path("explain0");
    const Outcome o = invoke({"explain", "--data", path("data.jsonl"), "--model", path("model.bin"), "--out-dir", out,
                              "--graph-id", "5", "--steps", "0"});
    ASSERT_EQ(o.code, kOk) << o.err;
    const nlohmann::json j = nlohmann::json::parse(slurp(fs::path(out) / "coge" / "graph_5.json"));
    const auto w = j["w"].get<std::vector<double>>();
    ASSERT_FALSE(w.empty());
    for (const double x : w) {
        EXPECT_NEAR(x, 1.0 / static_cast<double>(w.size()), 1e-15);
    }
    EXPECT_EQ(j["graph_id"].get<int>(), 5);
}

TEST_F(Cli, ExplainSplitWritesOneFilePerGraphAndSummary) {
    const std::string out = path("explain_split");
    const Outcome o = invoke({"explain", "--data", path("data.jsonl"), "--model", path("model.bin"), "--out-dir", out,
                              "--method", "occlusion", "--split", "test"});
    ASSERT_EQ(o.code, kOk) << o.err;
    int files = 0;
    for (const auto& entry : fs::directory_iterator(fs::path(out) / "occlusion")) {
        files += entry.path().filename().string().rfind("graph_", 0) == 0 ? 1 : 0;
    }
    EXPECT_EQ(files, 8);
    EXPECT_TRUE(fs::exists(fs::path(out) / "occlusion" / "summary.json"));
    EXPECT_TRUE(fs::exists(fs::path(out) / "occlusion" / "summary.csv"));
}

TEST_F(Cli, UnknownMethodIsUsageError) {
    const Outcome o = invoke({"explain", "--data", path("data.jsonl"), "--model", path("model.bin"), "--method",
                              "gradcam"});
    EXPECT_EQ(o.code, kUsage);
}

TEST_F(Cli, UnknownSubcommandOrFlagIsUsageError) {
    EXPECT_EQ(invoke({"frobnicate"}).code, kUsage);
    EXPECT_EQ(invoke({"generate", "--bogus"}).code, kUsage);
    EXPECT_EQ(invoke({}).code, kUsage);
}

TEST_F(Cli, MissingFilesAreFailures) {
    const Outcome o = invoke({"train", "--data", path("nope.jsonl"), "--out", path("x.bin")});
    EXPECT_EQ(o.code, kFailure);
    EXPECT_NE(o.err.find("nope.jsonl"), std::string::npos);
}

TEST_F(Cli, EvaluateWritesTableOneShape) {
    const std::string out = path("eval");
    const Outcome o = invoke({"evaluate", "--data", path("data.jsonl"), "--model", path("model.bin"), "--out-dir", out,
                              "--steps", "3", "--k", "2", "--limit", "6"});
    ASSERT_EQ(o.code, kOk) << o.err;
    const std::string csv = slurp(fs::path(out) / "table1.csv");
    EXPECT_EQ(line_count(csv), 5u);
    for (const char* m : {"\nrandom,", "\nocclusion,", "\nsensitivity,", "\ncoge,"}) {
        EXPECT_NE(csv.find(m), std::string::npos) << m;
    }
    EXPECT_TRUE(fs::exists(fs::path(out) / "table1.json"));
}

TEST_F(Cli, AblateWritesSevenRows) {
    const std::string out = path("ablate");
    const Outcome o = invoke({"ablate", "--data", path("data.jsonl"), "--model", path("model.bin"), "--out-dir", out,
                              "--steps", "2", "--k", "2", "--limit", "4"});
    ASSERT_EQ(o.code, kOk) << o.err;
    const std::string csv = slurp(fs::path(out) / "table2.csv");
    EXPECT_EQ(line_count(csv), 8u);
    EXPECT_NE(csv.find("\nfull_average,"), std::string::npos);
    EXPECT_NE(csv.find("\nfull_ot,"), std::string::npos);
}

TEST_F(Cli, UnmetThresholdsExitNonzeroAndAreListed) {
    const Outcome o = invoke({"evaluate", "--data", path("data.jsonl"), "--model", path("model.bin"), "--out-dir",
                              path("thr"), "--methods", "random", "--limit", "6", "--threshold=random.avg>=1.01",
                              "--threshold=random.avg<=1.0"});
    EXPECT_EQ(o.code, kThresholdFailed);
    EXPECT_NE(o.err.find("random.avg>=1.01"), std::string::npos) << o.err;
    EXPECT_EQ(o.err.find("random.avg<=1.0\n"), std::string::npos) << o.err;
}

TEST_F(Cli, ManifestOverridesFlags) {
    const nlohmann::json manifest = {{"seed", 9}, {"generator", {{"n_graphs", 12}}}};
    std::ofstream(path("m.json")) << manifest.dump();
    const Outcome o = invoke({"generate", "--n", "30", "--seed", "1", "--manifest", path("m.json"), "--out",
                              path("m.jsonl")});
    ASSERT_EQ(o.code, kOk) << o.err;
    EXPECT_EQ(line_count(slurp(path("m.jsonl"))), 12u);
    ASSERT_EQ(invoke({"generate", "--n", "12", "--seed", "9", "--out", path("m2.jsonl")}).code, kOk);
    EXPECT_EQ(slurp(path("m.jsonl")), slurp(path("m2.jsonl")));
}

TEST_F(Cli, ManifestRejectsUnknownKeys) {
    std::ofstream(path("bad.json")) << R"({"generator": {"n_grpahs": 12}})";
    const Outcome o = invoke({"generate", "--manifest", path("bad.json"), "--out", path("bad.jsonl")});
    EXPECT_EQ(o.code, kUsage);
    EXPECT_NE(o.err.find("n_grpahs"), std::string::npos) << o.err;
}

TEST_F(Cli, HelpPrintsDefaults) {
    const Outcome o = invoke({"explain", "--help"});
    EXPECT_EQ(o.code, kOk);
    EXPECT_NE(o.out.find("--k"), std::string::npos);
    EXPECT_NE(o.out.find("10"), std::string::npos);
    EXPECT_NE(o.out.find("0.1"), std::string::npos);
    const Outcome g = invoke({"generate", "--help"});
    EXPECT_NE(g.out.find("2000"), std::string::npos);
}

TEST(Settings, DefaultsFollowThePaper) {
    const Settings s;
    const ExplainConfig e = explain_config(s);
    EXPECT_EQ(e.k, 10);
    EXPECT_DOUBLE_EQ(e.learning_rate, 0.1);
    EXPECT_EQ(s.n_graphs, 2000);
    EXPECT_EQ(train_config(s).num_layers, 5);
    EXPECT_EQ(eval_config(s).split, Split::train);
}

TEST(Settings, ThresholdParsing) {
    const Threshold t = parse_threshold("coge.clique_mean>=0.9");
    EXPECT_EQ(t.method, "coge");
    EXPECT_EQ(t.metric, "clique_mean");
    EXPECT_TRUE(t.at_least);
    EXPECT_DOUBLE_EQ(t.bound, 0.9);
    EXPECT_FALSE(parse_threshold("full_average.avg<=0.5").at_least);
    EXPECT_THROW(parse_threshold("coge.median>=0.9"), UsageError);
    EXPECT_THROW(parse_threshold("coge.avg=0.9"), UsageError);
    EXPECT_THROW(parse_threshold("coge.avg>=high"), UsageError);
}

TEST(Settings, ThresholdChecks) {
    MethodReport r;
    r.method = "coge";
    r.clique.mean = 0.95;
    r.average = 0.8;
    const auto failed = check_thresholds(
        {parse_threshold("coge.clique_mean>=0.9"), parse_threshold("coge.avg>=0.85"), parse_threshold("diff.avg>=1")},
        {r});
    ASSERT_EQ(failed.size(), 1u);
    EXPECT_NE(failed[0].find("coge.avg>=0.85"), std::string::npos);
}

TEST(Settings, VerbosityFromEnvironment) {
    ::setenv("COGE_VERBOSITY", "0", 1);
    EXPECT_EQ(verbosity_from_env(), 0);
    ::setenv("COGE_VERBOSITY", "debug", 1);
    EXPECT_EQ(verbosity_from_env(), 2);
    ::unsetenv("COGE_VERBOSITY");
    EXPECT_EQ(verbosity_from_env(), 1);
}

}  // namespace
}  // namespace coge::cli
