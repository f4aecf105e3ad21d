// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per primary criterion, exit status 1 if
// any fails. Tolerances and budgets are pinned below.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gotok/gotok.hpp"
#include "metric_fixtures.hpp"

namespace fs = std::filesystem;
using namespace gotok;
using namespace gotok::toy;

namespace {

constexpr double kPoolTolerance = 1e-12;
constexpr double kPoolSeconds = 10.0;
constexpr double kGradSeconds = 60.0;
constexpr double kBudgetMinPerObject = 30.0;
constexpr double kBudgetMaxPerObject = 55.0;
constexpr double kReferenceTotal34 = 1425.0;
constexpr double kReferenceTotalSlack = 0.25;
constexpr double kF1Tolerance = 1e-12;
constexpr double kMiou229Tolerance = 1e-12;
constexpr int kBoundFiles = 200;
constexpr double kGoMedianMin = 0.9;
constexpr double kNoneMedianMax = 0.4;
constexpr double kTrendSeconds = 20.0 * 60.0;
constexpr double kLoraTolerance = 1e-12;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failures += !o.pass;
}

void check(const std::string& name, const std::function<Outcome()>& fn) {
    try {
        report(name, fn());
    } catch (const std::exception& e) {
        report(name, {false, std::string("exception: ") + e.what()});
    }
}

std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

// ---------------------------------------------------------------------------

RowVector pool_oracle(const Matrix& positioned, int n_p, const BBox& b) {
    RowVector acc = RowVector::Zero(positioned.cols());
    int n = 0;
    for (int r = 0; r < n_p; ++r)
        for (int c = 0; c < n_p; ++c) {
            const double w = std::min(b.x2, (c + 1.0) / n_p) - std::max(b.x1, static_cast<double>(c) / n_p);
            const double h = std::min(b.y2, (r + 1.0) / n_p) - std::max(b.y1, static_cast<double>(r) / n_p);
            if (w > 0 && h > 0) {
                acc += positioned.row(r * n_p + c);
                ++n;
            }
        }
    return acc / n;
}

Outcome roi_pool_oracle() {
    const auto t0 = Clock::now();
    Rng rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int grids[] = {4, 8, 14};
    double worst = 0.0;
    int pairs = 0;
    while (pairs < 1000) {
        const int n_p = grids[pairs % 3];
        const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
        const BBox box{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
        if (box.degenerate()) continue;
        const Matrix m = random_matrix(n_p * n_p, 16, rng);
        worst = std::max(worst, (roi_patch_pool(m, n_p, box) - pool_oracle(m, n_p, box)).cwiseAbs().maxCoeff());
        ++pairs;
    }
    const double t = seconds_since(t0);
    return {worst <= kPoolTolerance && t < kPoolSeconds,
            "1000 pairs, max |diff| " + fmt(worst) + " (tol " + fmt(kPoolTolerance) + "), " + fmt(t) + " s"};
}

Outcome gradient_audit() {
    const auto t0 = Clock::now();
    const auto entries = run_gradient_audit(0);
    double worst = 0.0;
    std::string worst_name;
    bool tokenizer = false;
    for (const auto& e : entries) {
        tokenizer = tokenizer || e.name == "go_tokenizer";
        if (e.result.max_rel_error >= worst) worst = e.result.max_rel_error, worst_name = e.name;
    }
    const double t = seconds_since(t0);
    return {worst < kGradTolerance && tokenizer && t < kGradSeconds,
            std::to_string(entries.size()) + " checks (h " + fmt(kGradStep) + "), max rel error " + fmt(worst) + " in " +
                worst_name + ", " + fmt(t) + " s"};
}

Detection random_detection(Rng& rng, const std::string& video, int slot) {
    static const std::vector<std::string> labels{"man", "woman", "dog", "car", "cup", "window", "traffic light", "chair"};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Detection d;
    d.video_id = video;
    d.frame_slot = slot;
    d.timestamp_s = std::round(u(rng) * 1800.0) / 10.0;
    d.label = labels[rng() % labels.size()];
    d.score = u(rng);
    d.image_w = 640.0;
    d.image_h = 480.0;
    const double a = u(rng), b = u(rng), c = u(rng), e = u(rng);
    d.set_bbox({std::min(a, b), std::min(c, e), std::max(a, b), std::max(c, e)});
    return d;
}

Outcome token_budget() {
    Rng rng(34);
    std::vector<Detection> dets;
    for (int i = 0; i < 34; ++i) dets.push_back(random_detection(rng, "v", i % 8));
    const auto c = budget_report(dets, GoTextFormat::Class);
    const auto ct = budget_report(dets, GoTextFormat::ClassTime);
    const auto ctb = budget_report(dets, GoTextFormat::ClassTimeBbox);
    const auto go = budget_report(dets, std::nullopt);
    const double total = static_cast<double>(ctb.total_tokens);
    const bool ok = c.per_object_tokens < ct.per_object_tokens && ct.per_object_tokens < ctb.per_object_tokens &&
                    ctb.per_object_tokens >= kBudgetMinPerObject && ctb.per_object_tokens <= kBudgetMaxPerObject &&
                    go.per_object_tokens == 1.0 && go.total_tokens == dets.size() &&
                    std::abs(total - kReferenceTotal34) <= kReferenceTotalSlack * kReferenceTotal34;
    return {ok, "per object " + fmt(c.per_object_tokens) + " < " + fmt(ct.per_object_tokens) + " < " +
                    fmt(ctb.per_object_tokens) + ", go " + fmt(go.per_object_tokens) + ", 34-object total " +
                    fmt(total) + " vs " + fmt(kReferenceTotal34) + " +/-" + fmt(kReferenceTotalSlack * 100) + "%"};
}

Outcome metric_fixtures() {
    int iou_bad = 0;
    std::vector<SegmentPair> pairs;
    double expected_sum = 0.0;
    int expected_hits = 0;
    for (const auto& c : fixtures::iou_cases()) {
        iou_bad += segment_iou(c.a, c.b) != c.iou || segment_iou(c.b, c.a) != c.iou;
        pairs.push_back({c.a, c.b});
        expected_sum += c.iou;
        expected_hits += c.iou >= 0.5;
    }
    const bool miou_ok = miou(pairs) == expected_sum / static_cast<double>(pairs.size()) &&
                         p_at(pairs, 0.5) == expected_hits / static_cast<double>(pairs.size()) &&
                         segment_iou({2, 8}, {4, 10}) == 0.5 &&
                         std::abs(miou(fixtures::pairs_229()) - fixtures::pairs_229_oracle_mean()) <= kMiou229Tolerance;
    int f1_bad = 0;
    for (const auto& c : fixtures::f1_cases()) {
        const double greedy = dense_caption_f1(c.pred, c.gt);
        f1_bad += std::abs(greedy - fixtures::exhaustive_f1(c.pred, c.gt)) > kF1Tolerance ||
                  std::abs(greedy - c.f1) > kF1Tolerance;
    }
    return {iou_bad == 0 && miou_ok && f1_bad == 0,
            std::to_string(fixtures::iou_cases().size()) + " IoU cases (" + std::to_string(iou_bad) +
                " off), miou/p_at " + (miou_ok ? "exact" : "off") + ", " + std::to_string(fixtures::f1_cases().size()) +
                " F1 fixtures vs exhaustive oracle (" + std::to_string(f1_bad) + " off)"};
}

Outcome pipeline_bound() {
    Rng rng(40);
    const SamplingConfig cfg{8, 5, 0.0};
    std::size_t worst = 0;
    for (int file = 0; file < kBoundFiles; ++file) {
        std::vector<Detection> dets;
        const int videos = 1 + static_cast<int>(rng() % 3);
        for (int v = 0; v < videos; ++v) {
            const int n = static_cast<int>(rng() % 120);
            for (int i = 0; i < n; ++i)
                dets.push_back(random_detection(rng, "v" + std::to_string(v), static_cast<int>(rng() % 8)));
        }
        std::stringstream io;
        write_detections(dets, io);
        std::map<std::string, std::vector<Detection>> by_video;
        for (const auto& d : select_detections(parse_detections(io), cfg)) by_video[d.video_id].push_back(d);
        for (const auto& [vid, list] : by_video) worst = std::max(worst, to_grounded_objects(list).size());
    }
    return {worst <= 40, std::to_string(kBoundFiles) + " random files, F=8 k=5, most tokens per video " +
                             std::to_string(worst) + " (bound 40)"};
}

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[1];
}

Outcome trend() {
    const auto t0 = Clock::now();
    const std::vector<double> flips{0.0, 0.1, 0.2, 0.5};
    std::vector<double> go, none;
    int monotone = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        ExperimentConfig cfg;
        cfg.data.seed = cfg.train.seed = cfg.flip_seed = seed;
        cfg.train.mode = GroundingMode::Go;
        go.push_back(run_experiment(cfg).test_accuracy.front());
        cfg.train.mode = GroundingMode::None;
        none.push_back(run_experiment(cfg).test_accuracy.front());
        cfg.train.mode = GroundingMode::Text;
        cfg.flip_ratios = flips;
        const auto acc = run_experiment(cfg).test_accuracy;
        monotone += std::is_sorted(acc.rbegin(), acc.rend());
        std::cout << "  seed " << seed << ": go " << go.back() << ", none " << none.back() << ", text by flip";
        for (double a : acc) std::cout << " " << a;
        std::cout << std::endl;
    }
    const double t = seconds_since(t0);
    const double go_med = median3(go), none_med = median3(none);
    return {go_med >= kGoMedianMin && none_med <= kNoneMedianMax && monotone >= 2 && t <= kTrendSeconds,
            "median go " + fmt(go_med) + " (>= " + fmt(kGoMedianMin) + "), median none " + fmt(none_med) + " (<= " +
                fmt(kNoneMedianMax) + "), text nonincreasing over flips in " + std::to_string(monotone) +
                "/3 seeds (need 2), " + fmt(t) + " s"};
}

int shell(const std::string& args) {
    const int status = std::system((std::string(GOTOK_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> tree(const fs::path& p) {
    std::map<std::string, std::string> out;
    auto read = [](const fs::path& f) {
        std::ifstream in(f, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    };
    if (fs::is_regular_file(p)) {
        out["output"] = read(p);
        const fs::path side = p.string() + ".manifest.jsonl";
        if (fs::exists(side)) out["manifest"] = read(side);
        return out;
    }
    for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file()) out[fs::relative(e.path(), p).string()] = read(e.path());
    return out;
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("gotok_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    const auto at = [&](const std::string& n) { return (root / n).string(); };
    struct Case {
        std::string name;
        std::function<std::string(const std::string&)> args;  // output path -> argument string
    };
    const std::vector<Case> cases{
        {"synth", [](const std::string& out) { return "synth --videos 4 --seed 7 --out " + out; }},
        {"perturb",
         [&](const std::string& out) {
             return "perturb --detections " + at("synth_a/detections.jsonl") + " --flip 0.3 --shift 0.02 --seed 7 --out " +
                    out;
         }},
        {"train-toy",
         [](const std::string& out) {
             return "train-toy --train 20 --test 10 --epochs 2 --mode go --flip 0,0.5 --seed 7 --out " + out;
         }},
    };
    std::string detail;
    bool ok = true;
    for (const auto& c : cases) {
        const std::string a = at(c.name + "_a"), b = at(c.name + "_b");
        const int ca = shell(c.args(a)), cb = shell(c.args(b));
        const bool same = ca == 0 && cb == 0 && tree(a) == tree(b) && !tree(a).empty();
        ok = ok && same;
        detail += (detail.empty() ? "" : ", ") + c.name + (same ? " identical" : " differs");
    }
    fs::remove_all(root);
    return {ok, detail};
}

Outcome lora_zero_init() {
    const SyntheticDataset ds(SyntheticConfig{});
    const auto sample = ds.make_sample(0);
    GoVideoConfig with, without;
    without.lm.use_lora = false;
    const GoVideoModel a(with, ds.vocab(), 3), b(without, ds.vocab(), 3);
    double worst = 0.0;
    for (auto mode : {GroundingMode::None, GroundingMode::Go, GroundingMode::Text}) {
        Graph g1, g2;
        const Matrix la = a.forward(g1, as_example(sample), mode).logits.value();
        const Matrix lb = b.forward(g2, as_example(sample), mode).logits.value();
        worst = std::max(worst, (la - lb).cwiseAbs().maxCoeff());
    }
    return {worst <= kLoraTolerance, "max |logit diff| over three modes " + fmt(worst) + " (tol " + fmt(kLoraTolerance) + ")"};
}

}  // namespace

int main() {
    check("roi_pool_oracle", roi_pool_oracle);
    check("gradient_audit", gradient_audit);
    check("token_budget", token_budget);
    check("metric_fixtures", metric_fixtures);
    check("pipeline_bound", pipeline_bound);
    check("determinism", determinism);
    check("lora_zero_init", lora_zero_init);
    check("trend_reproduction", trend);
    std::cout << (failures == 0 ? "all primary criteria pass" : std::to_string(failures) + " primary criteria fail")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
