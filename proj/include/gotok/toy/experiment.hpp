// SPDX-License-Identifier: Apache-2.0
#pragma once

// One train/evaluate run of the toy model on synthetic data, with optional
// class flipping of the evaluation detections.

#include <chrono>
#include <cstdint>
#include <functional>
#include <vector>

#include "gotok/detection_pipeline.hpp"
#include "gotok/toy/go_video.hpp"
#include "gotok/toy/synthetic.hpp"
#include "gotok/toy/trainer.hpp"

namespace gotok::toy {

struct ExperimentConfig {
    SyntheticConfig data;  ///< n_videos is ignored; see n_train / n_test
    int n_train = 500;
    int n_test = 100;
    int max_questions = 8;  ///< questions packed per training video
    GoVideoConfig model;
    TrainConfig train;
    std::vector<double> flip_ratios{0.0};
    std::uint64_t flip_seed = 0;

    void validate() const {
        data.validate();
        train.validate();
        if (n_train < 1 || n_test < 1) throw ValidationError("n_train and n_test must be >= 1");
        if (max_questions < 1) throw ValidationError("max_questions must be >= 1");
        for (double r : flip_ratios)
            if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("flip ratios must lie in [0, 1]");
    }
};

struct ExperimentResult {
    TrainResult train;
    std::vector<double> test_accuracy;  ///< aligned with flip_ratios
    double mean_object_tokens = 0.0;    ///< per test video, go mode count
    double train_seconds = 0.0;
};

/// Test samples of the dataset with the labels of their detections flipped.
inline std::vector<SyntheticSample> flipped_copy(std::vector<SyntheticSample> samples, const SyntheticDataset& ds,
                                                 double ratio, std::uint64_t seed) {
    const Vocabulary vocab(ds.labels());
    for (auto& s : samples) s.detections = flip_classes(std::move(s.detections), ratio, vocab, seed);
    return samples;
}

/// Trains a fresh model (seeded by cfg.train.seed) and scores it on the test
/// split at each flip ratio. `on_trained` sees the final model.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const std::function<void(const EpochStats&)>& on_epoch = {},
                                       const std::function<void(const GoVideoModel&)>& on_trained = {}) {
    cfg.validate();
    const SyntheticDataset ds(cfg.data);
    const auto train_samples = ds.generate(cfg.n_train, "train");
    const auto test_samples = ds.generate(cfg.n_test, "test");
    const ExampleSet train_set(train_samples, ds, cfg.max_questions, cfg.train.seed);

    GoVideoModel model(cfg.model, ds.vocab(), cfg.train.seed);
    ExperimentResult r;
    const auto t0 = std::chrono::steady_clock::now();
    r.train = train(model, train_set.examples(), cfg.train, on_epoch);
    r.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    for (double ratio : cfg.flip_ratios) {
        const auto test = ratio > 0.0 ? flipped_copy(test_samples, ds, ratio, cfg.flip_seed) : test_samples;
        const auto examples = as_examples(test);
        r.test_accuracy.push_back(evaluate_exact_match(model, examples, cfg.train.mode, cfg.train.workers));
    }
    double objects = 0.0;
    for (const auto& s : test_samples) objects += static_cast<double>(model.grounded(s.detections).size());
    r.mean_object_tokens = objects / static_cast<double>(test_samples.size());
    if (on_trained) on_trained(model);
    return r;
}

}  // namespace gotok::toy
