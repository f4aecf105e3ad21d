// SPDX-License-Identifier: Apache-2.0
// End-to-end checks of the gotok binary: outputs, exit codes, determinism.
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "gotok/detection_pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
};

CliRun run(const std::string& args) {
    const std::string cmd = std::string(GOTOK_CLI_PATH) + " " + args + " 2>/dev/null";
    CliRun r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::vector<json> lines(const std::string& text) {
    std::vector<json> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) out.push_back(json::parse(l));
    return out;
}

/// Every regular file below `dir`, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("gotok_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string at(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

TEST_F(Cli, SynthWritesFeaturesDetectionsAndQuestions) {
    ASSERT_EQ(run("synth --out " + at("s") + " --videos 3 --seed 1").code, 0);
    EXPECT_TRUE(fs::exists(at("s/manifest.jsonl")));
    EXPECT_EQ(lines(slurp(at("s/qa.jsonl"))).size(), 3u);
    std::size_t gofm = 0;
    for (const auto& e : fs::directory_iterator(at("s/features"))) gofm += e.path().extension() == ".gofm";
    EXPECT_EQ(gofm, 3u * 8u);
    std::ifstream in(at("s/detections.jsonl"));
    EXPECT_FALSE(gotok::parse_detections(in).empty());
}

TEST_F(Cli, TokenizeNeverExceedsFramesTimesTopk) {
    ASSERT_EQ(run("synth --out " + at("s") + " --videos 1 --seed 2").code, 0);
    // Pad v0 with ten extra detections per slot so selection has to cut.
    std::ofstream(at("s/detections.jsonl"), std::ios::app) << [] {
        std::ostringstream extra;
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int slot = 0; slot < 8; ++slot)
            for (int i = 0; i < 10; ++i) {
                const double x = u(rng) * 300, y = u(rng) * 200;
                json j{{"video_id", "v0"}, {"frame_slot", slot}, {"timestamp_s", 5.0 + 10.0 * slot},
                       {"bbox_px", {x, y, x + 100, y + 80}}, {"image_wh", {640.0, 480.0}},
                       {"label", "cup"}, {"score", 0.5 + 0.04 * i}};
                extra << j.dump() << '\n';
            }
        return extra.str();
    }();
    const CliRun r = run("tokenize --detections " + at("s/detections.jsonl") + " --features " + at("s/features") +
                      " --d-t 16 --out " + at("tok.jsonl"));
    ASSERT_EQ(r.code, 0);
    const auto toks = lines(slurp(at("tok.jsonl")));
    EXPECT_EQ(toks.size(), 40u);
    std::map<int, int> per_slot;
    for (const auto& t : toks) {
        EXPECT_EQ(t["vector"].size(), 16u);
        ++per_slot[t["frame_slot"].get<int>()];
    }
    for (const auto& [slot, n] : per_slot) EXPECT_LE(n, 5) << "slot " << slot;
    EXPECT_TRUE(fs::exists(at("tok.jsonl.manifest.jsonl")));

    const CliRun tight = run("tokenize --detections " + at("s/detections.jsonl") + " --features " + at("s/features") +
                          " --d-t 16 --frames 8 --topk 2");
    ASSERT_EQ(tight.code, 0);
    EXPECT_LE(lines(tight.out).size(), 16u);
}

TEST_F(Cli, BudgetReportsEveryModeInCostOrder) {
    ASSERT_EQ(run("synth --out " + at("s") + " --videos 2 --seed 3").code, 0);
    const CliRun r = run("budget --detections " + at("s/detections.jsonl"));
    ASSERT_EQ(r.code, 0);
    const auto rows = lines(r.out);
    ASSERT_EQ(rows.size(), 2u * 4u);
    for (std::size_t v = 0; v < 2; ++v) {
        const auto& cls = rows[4 * v];
        const auto& ct = rows[4 * v + 1];
        const auto& ctb = rows[4 * v + 2];
        const auto& go = rows[4 * v + 3];
        EXPECT_LT(cls["total_tokens"].get<int>(), ct["total_tokens"].get<int>());
        EXPECT_LT(ct["total_tokens"].get<int>(), ctb["total_tokens"].get<int>());
        EXPECT_EQ(go["mode"], "go_token");
        EXPECT_EQ(go["total_tokens"], go["object_count"]);
    }
}

TEST_F(Cli, PerturbFlipsRequestedShareAndIsDeterministic) {
    ASSERT_EQ(run("synth --out " + at("s") + " --videos 2 --seed 4").code, 0);
    const std::string args = "perturb --detections " + at("s/detections.jsonl") + " --flip 0.5 --seed 9";
    const CliRun a = run(args), b = run(args);
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    const auto before = lines(slurp(at("s/detections.jsonl")));
    const auto after = lines(a.out);
    ASSERT_EQ(before.size(), after.size());
    std::size_t changed = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        changed += before[i]["label"] != after[i]["label"];
        EXPECT_EQ(before[i]["bbox_px"], after[i]["bbox_px"]);
    }
    EXPECT_GT(changed, before.size() / 4);
    EXPECT_LT(changed, before.size() * 3 / 4);
    EXPECT_NE(run("perturb --detections " + at("s/detections.jsonl") + " --flip 0.5 --seed 10").out, a.out);
}

TEST_F(Cli, EvalCommandsOnFixtures) {
    put(at("gt.jsonl"), R"({"id":"a","segments":[[2,8]]})" "\n" R"({"id":"b","segments":[[0,1]]})" "\n");
    put(at("half.jsonl"), R"({"id":"a","segments":[[4,10]]})" "\n" R"({"id":"b","segments":[[0,1]]})" "\n");

    const CliRun same = run("eval-tl --pred " + at("gt.jsonl") + " --gt " + at("gt.jsonl"));
    ASSERT_EQ(same.code, 0);
    const auto s = json::parse(same.out);
    EXPECT_DOUBLE_EQ(s["miou"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(s["p_at_0.5"].get<double>(), 1.0);

    const auto h = json::parse(run("eval-tl --pred " + at("half.jsonl") + " --gt " + at("gt.jsonl")).out);
    EXPECT_DOUBLE_EQ(h["miou"].get<double>(), 0.75);
    EXPECT_DOUBLE_EQ(h["p_at_0.5"].get<double>(), 1.0);

    const auto dc = json::parse(run("eval-dc --pred " + at("half.jsonl") + " --gt " + at("gt.jsonl")).out);
    // a: IoU 0.5 matches at 0.3 and 0.5 only; b: exact.
    EXPECT_NEAR(dc["f1"].get<double>(), (2.0 / 3.0 + 1.0) / 2.0, 1e-12);
    EXPECT_EQ(dc["n_items"], 2);
}

TEST_F(Cli, GradcheckPasses) {
    const CliRun r = run("gradcheck --seed 0");
    ASSERT_EQ(r.code, 0);
    const auto rows = lines(r.out);
    EXPECT_GT(rows.size(), 5u);
    for (const auto& row : rows) EXPECT_TRUE(row["pass"].get<bool>()) << row.dump();
}

TEST_F(Cli, ExitCodesSeparateValidationFromIo) {
    EXPECT_EQ(run("").code, 1);                                  // no subcommand
    EXPECT_EQ(run("synth").code, 1);                             // missing --out
    EXPECT_EQ(run("synth --out " + at("s") + " --n-p 0").code, 1);
    EXPECT_EQ(run("budget --detections " + at("missing.jsonl")).code, 2);
    put(at("bad.jsonl"), "{\"video_id\":\"v\"}\n");
    EXPECT_EQ(run("budget --detections " + at("bad.jsonl")).code, 1);
    EXPECT_EQ(run("eval-tl --pred " + at("missing.jsonl") + " --gt " + at("missing.jsonl")).code, 2);
    EXPECT_EQ(run("train-toy --out " + at("t") + " --mode sideways").code, 1);
    EXPECT_EQ(run("train-toy --out " + at("t") + " --flip 0,1.5").code, 1);
    EXPECT_EQ(run("--version").code, 0);
}

TEST_F(Cli, SynthAndTrainToyAreByteIdenticalAcrossRuns) {
    const std::string synth = " --videos 2 --seed 5 --n-p 4 --d-v 8";
    ASSERT_EQ(run("synth --out " + at("a") + synth).code, 0);
    ASSERT_EQ(run("synth --out " + at("b") + synth + " --workers 2").code, 0);
    EXPECT_EQ(tree(at("a")), tree(at("b")));

    const std::string train = " --train 6 --test 3 --epochs 1 --n-p 4 --d-v 8 --d-t 16 --seed 2 --flip 0,0.5";
    const CliRun x = run("train-toy --out " + at("x") + train);
    ASSERT_EQ(x.code, 0);
    ASSERT_EQ(run("train-toy --out " + at("y") + train).code, 0);
    EXPECT_EQ(tree(at("x")), tree(at("y")));
    const auto m = json::parse(slurp(at("x/metrics.json")));
    EXPECT_EQ(m["test"].size(), 2u);
    EXPECT_TRUE(fs::exists(at("x/checkpoint.bin")));
}

}  // namespace
