// SPDX-License-Identifier: Apache-2.0
//
// gotok: command-line front end of the grounded-object tokenizer toolkit.
// Exit status: 0 success, 1 validation, 2 I/O, 3 numeric failure.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gotok/gotok.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace gotok;
using namespace gotok::toy;

namespace {

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

/// Writes `bytes` to `out` ("-" is stdout) and the manifest next to it: to
/// `<out>.manifest.jsonl` for files, to stderr for stdout.
void emit(const std::string& out, const std::string& bytes, const RunManifest& manifest) {
    if (out == "-") {
        std::cout << bytes << std::flush;
        std::cerr << manifest.line();
        if (!std::cout) throw IoError("failed writing to stdout");
        return;
    }
    write_file_atomic(out, bytes);
    write_file_atomic(out + ".manifest.jsonl", manifest.line());
}

std::vector<Detection> load_detections(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open detections file '" + path + "'");
    return parse_detections(in);
}

std::vector<SegmentRecord> load_segments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open segment file '" + path + "'");
    return parse_segment_records(in);
}

/// Every *.gofm below `dir`, keyed by (video id, frame slot).
std::map<std::pair<std::string, int>, FrameFeatureMap> load_feature_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("feature directory '" + dir + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".gofm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::map<std::pair<std::string, int>, FrameFeatureMap> maps;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw IoError("cannot open '" + f.string() + "'");
        FrameFeatureMap m = read_gofm(in);
        auto key = std::make_pair(m.video_id(), static_cast<int>(m.frame_slot()));
        if (!maps.emplace(key, std::move(m)).second)
            throw ValidationError("duplicate feature map for video '" + key.first + "' slot " + std::to_string(key.second));
    }
    return maps;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw ValidationError("not a number in list: '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError("empty list '" + text + "'");
    return out;
}

json sampling_json(const SamplingConfig& s) { return {{"F", s.frames}, {"k", s.topk}, {"delta", s.delta}}; }

// ---------------------------------------------------------------------------
// Shared option groups
// ---------------------------------------------------------------------------

void add_sampling(CLI::App* app, SamplingConfig& s) {
    app->add_option("--frames", s.frames, "frames sampled per video (F)")->capture_default_str();
    app->add_option("--topk", s.topk, "detections kept per frame (k)")->capture_default_str();
    app->add_option("--delta", s.delta, "confidence threshold")->capture_default_str();
}

struct TrainOptions {
    ExperimentConfig exp;
    std::string mode = "go";
    std::string optimizer = "momentum";
    std::string schedule = "cosine";
    std::string format = "class_time";
    std::string flips = "0";
    std::uint64_t seed = 0;
    int d_t = 128;
};

void add_train_options(CLI::App* app, TrainOptions& o) {
    auto& e = o.exp;
    app->add_option("--mode", o.mode, "go | text | none")->capture_default_str();
    app->add_option("--epochs", e.train.epochs)->capture_default_str();
    app->add_option("--lr", e.train.lr)->capture_default_str();
    app->add_option("--batch", e.train.batch_size)->capture_default_str();
    app->add_option("--momentum", e.train.momentum)->capture_default_str();
    app->add_option("--clip", e.train.clip_norm, "global gradient-norm clip, 0 disables")->capture_default_str();
    app->add_option("--optimizer", o.optimizer, "momentum | adam")->capture_default_str();
    app->add_option("--schedule", o.schedule, "constant | cosine")->capture_default_str();
    app->add_option("--train", e.n_train, "training videos")->capture_default_str();
    app->add_option("--test", e.n_test, "test videos")->capture_default_str();
    app->add_option("--max-questions", e.max_questions, "questions packed per training video")->capture_default_str();
    app->add_option("--n-p", e.data.n_p)->capture_default_str();
    app->add_option("--d-v", e.data.d_v)->capture_default_str();
    app->add_option("--d-t", o.d_t)->capture_default_str();
    app->add_option("--categories", e.data.n_categories)->capture_default_str();
    app->add_option("--text-format", o.format, "class | class_time | class_time_bbox")->capture_default_str();
    app->add_option("--flip", o.flips, "comma-separated flip ratios applied to test detections")->capture_default_str();
    app->add_option("--topk", e.model.sampling.topk)->capture_default_str();
    app->add_option("--delta", e.model.sampling.delta)->capture_default_str();
    app->add_option("--frames", e.data.frames, "frames per video (F)")->capture_default_str();
    app->add_option("--seed", o.seed, "seeds data, initialization, order and flips")->capture_default_str();
    app->add_option("--workers", e.train.workers)->capture_default_str();
}

/// Fills the derived fields after parsing.
void finalize(TrainOptions& o) {
    auto& e = o.exp;
    e.train.mode = parse_grounding_mode(o.mode);
    if (o.optimizer == "momentum") e.train.optimizer = Optimizer::Momentum;
    else if (o.optimizer == "adam") e.train.optimizer = Optimizer::Adam;
    else throw ValidationError("unknown optimizer '" + o.optimizer + "' (momentum | adam)");
    if (o.schedule == "constant") e.train.schedule = LrSchedule::Constant;
    else if (o.schedule == "cosine") e.train.schedule = LrSchedule::Cosine;
    else throw ValidationError("unknown schedule '" + o.schedule + "' (constant | cosine)");
    e.model.text_format = parse_text_format(o.format);
    e.model.tokenizer.n_p = e.data.n_p;
    e.model.tokenizer.d_v = e.data.d_v;
    e.model.tokenizer.d_t = o.d_t;
    e.model.sampling.frames = e.data.frames;
    e.flip_ratios = parse_list(o.flips);
    e.data.seed = o.seed;
    e.train.seed = o.seed;
    e.flip_seed = o.seed;
    e.validate();
    e.model.sampling.validate();
}

json train_json(const TrainOptions& o) {
    const auto& e = o.exp;
    json j;
    j["F"] = e.data.frames;
    j["k"] = e.model.sampling.topk;
    j["delta"] = e.model.sampling.delta;
    j["n_p"] = e.data.n_p;
    j["d_v"] = e.data.d_v;
    j["d_t"] = o.d_t;
    j["seeds"] = {o.seed};
    j["mode"] = o.mode;
    j["categories"] = e.data.n_categories;
    j["train_videos"] = e.n_train;
    j["test_videos"] = e.n_test;
    j["max_questions"] = e.max_questions;
    j["epochs"] = e.train.epochs;
    j["lr"] = e.train.lr;
    j["batch_size"] = e.train.batch_size;
    j["momentum"] = e.train.momentum;
    j["clip_norm"] = e.train.clip_norm;
    j["optimizer"] = o.optimizer;
    j["schedule"] = o.schedule;
    j["text_format"] = o.format;
    j["flip_ratios"] = e.flip_ratios;
    j["lora_rank"] = e.model.lm.lora.rank;
    j["lora_alpha"] = e.model.lm.lora.alpha;
    j["workers"] = e.train.workers;
    return j;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct SynthOptions {
    SyntheticConfig cfg;
    std::string out;
    std::string split = "v";
    int workers = 1;
};

void cmd_synth(const SynthOptions& o) {
    o.cfg.validate();
    const SyntheticDataset ds(o.cfg);
    std::vector<SyntheticSample> samples(static_cast<std::size_t>(o.cfg.n_videos));
    toy::detail::parallel_for(o.cfg.n_videos, o.workers, [&](int i) {
        samples[static_cast<std::size_t>(i)] = ds.make_sample(i, o.split);
    });

    const fs::path root(o.out);
    std::ostringstream dets, qa;
    for (const auto& s : samples) {
        for (const auto& f : s.frames) {
            const fs::path file = root / "features" / (s.video_id + "_" + std::to_string(f.frame_slot()) + ".gofm");
            write_file_atomic(file, [&](std::ostream& out) { write_gofm(f, out); });
        }
        write_detections(s.detections, dets);
        const auto raw = sample_frames(o.cfg.total_frames, o.cfg.frames);
        const auto time = [&](int slot) { return raw[static_cast<std::size_t>(slot)] / o.cfg.fps; };
        json q;
        q["video_id"] = s.video_id;
        q["question"] = "when does " + ds.labels()[static_cast<std::size_t>(s.qa.category)] + " appear ?";
        q["label"] = ds.labels()[static_cast<std::size_t>(s.qa.category)];
        q["first_slot"] = s.qa.first_slot;
        q["last_slot"] = s.qa.last_slot;
        q["segment"] = {time(s.qa.first_slot), time(s.qa.last_slot)};
        qa << q.dump() << '\n';
    }
    write_file_atomic(root / "detections.jsonl", dets.str());
    write_file_atomic(root / "qa.jsonl", qa.str());

    RunManifest m;
    m.command = "synth";
    m.config = {{"F", o.cfg.frames}, {"n_p", o.cfg.n_p}, {"d_v", o.cfg.d_v}, {"seeds", {o.cfg.seed}},
                {"videos", o.cfg.n_videos}, {"split", o.split}, {"categories", o.cfg.n_categories},
                {"objects_per_frame_mean", o.cfg.objects_per_frame_mean}, {"k", o.cfg.max_objects_per_frame},
                {"noise_sigma", o.cfg.noise_sigma}, {"total_frames", o.cfg.total_frames}};
    write_file_atomic(root / "manifest.jsonl", m.line());
    std::cout << "wrote " << samples.size() << " videos to " << root.string() << "\n";
}

struct TokenizeOptions {
    std::string detections, features, params, out = "-";
    SamplingConfig sampling;
    int d_t = 128;
    std::uint64_t seed = 0;
};

void cmd_tokenize(const TokenizeOptions& o) {
    o.sampling.validate();
    const auto dets = select_detections(load_detections(o.detections), o.sampling);
    const auto maps = load_feature_dir(o.features);
    if (maps.empty()) throw ValidationError("no .gofm files under '" + o.features + "'");

    std::optional<GoTokenizerParams> params;
    if (!o.params.empty()) {
        std::ifstream in(o.params, std::ios::binary);
        if (!in) throw IoError("cannot open parameter file '" + o.params + "'");
        params = read_gotp(in);
    } else {
        const auto& first = maps.begin()->second;
        params = GoTokenizerParams::initialized({first.n_p(), first.d_v(), o.d_t, o.sampling.frames}, o.seed);
    }

    std::vector<std::string> videos;
    std::map<std::string, std::vector<Detection>> by_video;
    for (const auto& d : dets) {
        if (!by_video.contains(d.video_id)) videos.push_back(d.video_id);
        by_video[d.video_id].push_back(d);
    }
    const std::size_t bound = static_cast<std::size_t>(o.sampling.frames) * static_cast<std::size_t>(o.sampling.topk);
    std::ostringstream out;
    std::size_t total = 0;
    for (const auto& vid : videos) {
        const auto objects = to_grounded_objects(by_video[vid]);
        if (objects.size() > bound)
            throw Error("video '" + vid + "' produced " + std::to_string(objects.size()) + " tokens, above F*k");
        for (const auto& obj : objects) {
            auto it = maps.find({vid, obj.frame_slot});
            if (it == maps.end())
                throw ValidationError("no feature map for video '" + vid + "' slot " + std::to_string(obj.frame_slot));
            const Matrix positioned = add_positional(it->second, *params);
            const auto tok = emit_object_token(roi_patch_pool(positioned, params->config.n_p, obj.bbox),
                                               obj.frame_slot, *params, obj.source);
            json j;
            j["video_id"] = vid;
            j["frame_slot"] = tok.frame_slot;
            j["detection_id"] = tok.source.detection_id;
            j["score"] = tok.source.score;
            j["vector"] = std::vector<double>(tok.vector.data(), tok.vector.data() + tok.vector.size());
            out << j.dump() << '\n';
        }
        total += objects.size();
    }

    RunManifest m;
    m.command = "tokenize";
    m.config = sampling_json(o.sampling);
    m.config["n_p"] = params->config.n_p;
    m.config["d_v"] = params->config.d_v;
    m.config["d_t"] = params->config.d_t;
    m.config["seeds"] = {o.seed};
    m.add_input(o.detections);
    m.config["feature_maps"] = maps.size();
    if (!o.params.empty()) m.add_input(o.params);
    emit(o.out, out.str(), m);
    std::cerr << "tokenized " << total << " objects in " << videos.size() << " videos\n";
}

struct BudgetOptions {
    std::string detections, out = "-";
    SamplingConfig sampling;
    bool select = false;
};

void cmd_budget(const BudgetOptions& o) {
    auto dets = load_detections(o.detections);
    if (o.select) dets = select_detections(dets, o.sampling);
    std::vector<std::string> videos;
    std::map<std::string, std::vector<Detection>> by_video;
    for (const auto& d : dets) {
        if (!by_video.contains(d.video_id)) videos.push_back(d.video_id);
        by_video[d.video_id].push_back(d);
    }
    std::ostringstream out;
    const std::optional<GoTextFormat> modes[] = {GoTextFormat::Class, GoTextFormat::ClassTime,
                                                 GoTextFormat::ClassTimeBbox, std::nullopt};
    for (const auto& vid : videos)
        for (const auto& mode : modes) {
            json j;
            j["video_id"] = vid;
            const auto report = to_json(budget_report(by_video[vid], mode));
            for (const auto& [k, v] : report.items()) j[k] = v;
            out << j.dump() << '\n';
        }
    RunManifest m;
    m.command = "budget";
    m.config = sampling_json(o.sampling);
    m.config["select"] = o.select;
    m.config["counter"] = "bundled";
    m.add_input(o.detections);
    emit(o.out, out.str(), m);
}

struct PerturbOptions {
    std::string detections, labels, out = "-";
    double flip = 0.0;
    double shift = 0.0;
    std::uint64_t seed = 0;
};

void cmd_perturb(const PerturbOptions& o) {
    auto dets = load_detections(o.detections);
    std::vector<std::string> labels;
    if (!o.labels.empty()) {
        std::stringstream ss(o.labels);
        for (std::string l; std::getline(ss, l, ',');)
            if (!l.empty()) labels.push_back(l);
    } else {
        std::set<std::string> seen;
        for (const auto& d : dets) seen.insert(d.label);
        labels.assign(seen.begin(), seen.end());
    }
    if (o.flip > 0.0) dets = flip_classes(std::move(dets), o.flip, Vocabulary(labels), o.seed);
    if (o.shift > 0.0) dets = shift_all(std::move(dets), o.shift, o.seed);
    std::ostringstream out;
    write_detections(dets, out);

    RunManifest m;
    m.command = "perturb";
    m.config = {{"flip", o.flip}, {"shift", o.shift}, {"seeds", {o.seed}}, {"labels", labels}};
    m.add_input(o.detections);
    emit(o.out, out.str(), m);
}

struct EvalOptions {
    std::string pred, gt, out = "-";
};

void cmd_eval(const EvalOptions& o, bool dense) {
    const auto pred = load_segments(o.pred);
    const auto gt = load_segments(o.gt);
    const EvalReport r = dense ? evaluate_dense_captioning(pred, gt) : evaluate_localization(pred, gt);
    RunManifest m;
    m.command = dense ? "eval-dc" : "eval-tl";
    m.add_input(o.pred);
    m.add_input(o.gt);
    emit(o.out, to_json(r).dump() + "\n", m);
}

void cmd_train(TrainOptions& o, const std::string& out_dir) {
    finalize(o);
    const fs::path root(out_dir);
    std::ostringstream trace;
    std::string checkpoint;
    const auto result = run_experiment(
        o.exp,
        [&](const EpochStats& s) {
            json j{{"epoch", s.epoch}, {"mean_loss", s.mean_loss}, {"train_accuracy", s.train_accuracy}};
            trace << j.dump() << '\n';
            std::cerr << "epoch " << s.epoch << " loss " << s.mean_loss << " train_acc " << s.train_accuracy << "\n";
        },
        [&](const GoVideoModel& model) {
            std::ostringstream ck(std::ios::binary);
            write_checkpoint(model, ck);
            checkpoint = ck.str();
        });

    json metrics;
    metrics["mode"] = o.mode;
    metrics["steps"] = result.train.steps;
    metrics["final_loss"] = result.train.trace.empty() ? 0.0 : result.train.trace.back().mean_loss;
    auto acc = json::array();
    for (std::size_t i = 0; i < result.test_accuracy.size(); ++i)
        acc.push_back({{"flip", o.exp.flip_ratios[i]}, {"exact_match", result.test_accuracy[i]}});
    metrics["test"] = acc;
    metrics["mean_object_tokens"] = result.mean_object_tokens;

    RunManifest m;
    m.command = "train-toy";
    m.config = train_json(o);
    write_file_atomic(root / "trace.jsonl", trace.str());
    write_file_atomic(root / "metrics.json", metrics.dump() + "\n");
    write_file_atomic(root / "checkpoint.bin", checkpoint);
    write_file_atomic(root / "manifest.jsonl", m.line());
    std::cout << metrics.dump() << "\n";
}

void cmd_sweep(TrainOptions& o, const std::string& over, const std::string& values, const std::string& out) {
    if (over != "frames" && over != "topk") throw ValidationError("--over must be frames or topk");
    const auto vals = parse_list(values);
    std::ostringstream table;
    table << over << "\ttest_exact_match\tmean_object_tokens\tfinal_loss\n";
    for (double v : vals) {
        if (v != static_cast<int>(v) || v < 1) throw ValidationError("sweep values must be positive integers");
        TrainOptions run = o;
        if (over == "frames") run.exp.data.frames = static_cast<int>(v);
        else run.exp.model.sampling.topk = static_cast<int>(v);
        finalize(run);
        const auto r = run_experiment(run.exp);
        const double loss = r.train.trace.empty() ? 0.0 : r.train.trace.back().mean_loss;
        table << static_cast<int>(v) << '\t' << r.test_accuracy.front() << '\t' << r.mean_object_tokens << '\t' << loss
              << '\n';
        std::cerr << over << "=" << static_cast<int>(v) << " exact_match " << r.test_accuracy.front() << "\n";
    }
    finalize(o);
    RunManifest m;
    m.command = "sweep";
    m.config = train_json(o);
    m.config["over"] = over;
    m.config["values"] = vals;
    emit(out, table.str(), m);
}

int cmd_gradcheck(std::uint64_t seed, const std::string& out) {
    const auto entries = run_gradient_audit(seed);
    std::ostringstream text;
    bool ok = true;
    for (const auto& e : entries) {
        const bool pass = e.result.passed(kGradTolerance);
        ok = ok && pass;
        json j{{"op", e.name}, {"max_rel_error", e.result.max_rel_error}, {"worst", e.result.worst},
               {"checked", e.result.checked}, {"pass", pass}};
        text << j.dump() << '\n';
    }
    RunManifest m;
    m.command = "gradcheck";
    m.config = {{"seeds", {seed}}, {"h", kGradStep}, {"tolerance", kGradTolerance}};
    emit(out, text.str(), m);
    if (!ok) {
        std::cerr << "gradcheck: relative error above " << kGradTolerance << "\n";
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gotok: grounded-object tokens for video language models"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    SynthOptions synth;
    auto* c_synth = app.add_subcommand("synth", "generate a synthetic dataset (GOFM, detections, QA)");
    c_synth->add_option("--out", synth.out, "output directory")->required();
    c_synth->add_option("--videos", synth.cfg.n_videos)->capture_default_str();
    c_synth->add_option("--split", synth.split, "video id prefix")->capture_default_str();
    c_synth->add_option("--frames", synth.cfg.frames)->capture_default_str();
    c_synth->add_option("--n-p", synth.cfg.n_p)->capture_default_str();
    c_synth->add_option("--d-v", synth.cfg.d_v)->capture_default_str();
    c_synth->add_option("--categories", synth.cfg.n_categories)->capture_default_str();
    c_synth->add_option("--objects-mean", synth.cfg.objects_per_frame_mean)->capture_default_str();
    c_synth->add_option("--noise", synth.cfg.noise_sigma)->capture_default_str();
    c_synth->add_option("--seed", synth.cfg.seed)->capture_default_str();
    c_synth->add_option("--workers", synth.workers)->capture_default_str();

    TokenizeOptions tok;
    auto* c_tok = app.add_subcommand("tokenize", "turn detections plus feature maps into object tokens");
    c_tok->add_option("--detections", tok.detections)->required();
    c_tok->add_option("--features", tok.features, "directory of .gofm files")->required();
    c_tok->add_option("--params", tok.params, "GOTP parameter file; default: seeded initialization");
    c_tok->add_option("--d-t", tok.d_t)->capture_default_str();
    c_tok->add_option("--seed", tok.seed)->capture_default_str();
    c_tok->add_option("--out", tok.out)->capture_default_str();
    add_sampling(c_tok, tok.sampling);

    BudgetOptions bud;
    auto* c_bud = app.add_subcommand("budget", "token cost per video for each text format and GO tokens");
    c_bud->add_option("--detections", bud.detections)->required();
    c_bud->add_flag("--select", bud.select, "apply F/k/delta selection first");
    c_bud->add_option("--out", bud.out)->capture_default_str();
    add_sampling(c_bud, bud.sampling);

    PerturbOptions per;
    auto* c_per = app.add_subcommand("perturb", "flip class labels and/or shift boxes");
    c_per->add_option("--detections", per.detections)->required();
    c_per->add_option("--flip", per.flip, "fraction of labels flipped per video")->capture_default_str();
    c_per->add_option("--shift", per.shift, "box shift as a fraction of W and H")->capture_default_str();
    c_per->add_option("--labels", per.labels, "comma-separated vocabulary; default: labels in the input");
    c_per->add_option("--seed", per.seed)->capture_default_str();
    c_per->add_option("--out", per.out)->capture_default_str();

    EvalOptions etl, edc;
    auto* c_etl = app.add_subcommand("eval-tl", "temporal localization: mIoU and P@0.5");
    auto* c_edc = app.add_subcommand("eval-dc", "dense captioning: event F1");
    for (auto [cmd, opt] : {std::pair{c_etl, &etl}, std::pair{c_edc, &edc}}) {
        cmd->add_option("--pred", opt->pred)->required();
        cmd->add_option("--gt", opt->gt)->required();
        cmd->add_option("--out", opt->out)->capture_default_str();
    }

    TrainOptions tr;
    std::string train_out;
    auto* c_train = app.add_subcommand("train-toy", "train and evaluate the toy model on synthetic data");
    add_train_options(c_train, tr);
    c_train->add_option("--out", train_out, "output directory")->required();

    TrainOptions sw;
    sw.exp.n_train = 100;
    sw.exp.n_test = 50;
    sw.exp.train.epochs = 4;
    std::string sweep_over = "frames", sweep_values = "1,2,3,4,5,6,7,8", sweep_out = "-";
    auto* c_sweep = app.add_subcommand("sweep", "train once per F or k value and tabulate the results");
    add_train_options(c_sweep, sw);
    c_sweep->add_option("--over", sweep_over, "frames | topk")->capture_default_str();
    c_sweep->add_option("--values", sweep_values)->capture_default_str();
    c_sweep->add_option("--out", sweep_out)->capture_default_str();

    std::uint64_t gc_seed = 0;
    std::string gc_out = "-";
    auto* c_gc = app.add_subcommand("gradcheck", "finite-difference audit of every op and the tokenizer");
    c_gc->add_option("--seed", gc_seed)->capture_default_str();
    c_gc->add_option("--out", gc_out)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*c_synth) cmd_synth(synth);
        else if (*c_tok) cmd_tokenize(tok);
        else if (*c_bud) cmd_budget(bud);
        else if (*c_per) cmd_perturb(per);
        else if (*c_etl) cmd_eval(etl, false);
        else if (*c_edc) cmd_eval(edc, true);
        else if (*c_train) cmd_train(tr, train_out);
        else if (*c_sweep) cmd_sweep(sw, sweep_over, sweep_values, sweep_out);
        else if (*c_gc) return cmd_gradcheck(gc_seed, gc_out);
        return 0;
    } catch (const gotok::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
