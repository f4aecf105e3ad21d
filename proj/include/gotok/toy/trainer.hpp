// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gotok/autodiff.hpp"
#include "gotok/random.hpp"
#include "gotok/toy/go_video.hpp"

namespace gotok::toy {

enum class Optimizer { Momentum, Adam };
enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
    Optimizer optimizer = Optimizer::Momentum;
    GroundingMode mode = GroundingMode::Go;
    int epochs = 10;
    double lr = 0.05;
    LrSchedule schedule = LrSchedule::Cosine;
    double momentum = 0.9;
    int batch_size = 2;
    double clip_norm = 1.0;     ///< global gradient-norm clip; 0 disables
    double weight_decay = 0.0;  ///< L2 coefficient added to the gradient
    std::uint64_t seed = 0;
    int workers = 1;  ///< threads per batch; results do not depend on it

    void validate() const {
        if (epochs < 0) throw ValidationError("epochs must be >= 0");
        if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("lr must be finite and >= 0");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
        if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
        if (workers < 1) throw ValidationError("workers must be >= 1");
        if (!(clip_norm >= 0.0) || !(weight_decay >= 0.0)) throw ValidationError("clip_norm and weight_decay must be >= 0");
    }
};

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double train_accuracy = 0.0;  ///< per-question exact match on the batches as seen, before each update
};

struct TrainResult {
    std::vector<EpochStats> trace;
    std::vector<double> step_losses;
    int steps = 0;
};

/// Row-wise argmax; ties resolve to the lowest index.
inline std::vector<int> argmax_rows(const Matrix& logits) {
    std::vector<int> out;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        Eigen::Index best = 0;
        logits.row(r).maxCoeff(&best);
        out.push_back(static_cast<int>(best));
    }
    return out;
}

/// True when every row's argmax equals its answer token. With teacher
/// forcing this equals greedy decoding: a later row only matters when the
/// earlier predictions already matched the forced inputs.
inline bool exact_match(const Matrix& logits, std::span<const int> answer) {
    const auto pred = argmax_rows(logits);
    return std::equal(pred.begin(), pred.end(), answer.begin(), answer.end());
}

/// Number of questions whose answer rows all match; rows are laid out as
/// in GoVideoModel::forward.
inline int count_exact_matches(const Matrix& logits, std::span<const QaPair> questions) {
    const auto pred = argmax_rows(logits);
    int hits = 0;
    std::size_t row = 0;
    for (const auto& qa : questions) {
        bool ok = true;
        for (int a : qa.answer_ids) ok = ok && pred.at(row++) == a;
        hits += ok ? 1 : 0;
    }
    return hits;
}

struct ParameterAudit {
    std::size_t total = 0;
    std::size_t trainable = 0;
    std::vector<std::string> trainable_names;

    double share() const { return total == 0 ? 0.0 : static_cast<double>(trainable) / static_cast<double>(total); }
};

inline ParameterAudit audit_parameters(GoVideoModel& model, GroundingMode mode) {
    ParameterAudit a;
    for (const Parameter* p : model.all_parameters()) a.total += static_cast<std::size_t>(p->value.size());
    for (const Parameter* p : model.trainable_parameters(mode)) {
        a.trainable += static_cast<std::size_t>(p->value.size());
        a.trainable_names.push_back(p->name);
    }
    return a;
}

namespace detail {

struct SampleOutcome {
    double loss = 0.0;
    int correct = 0;
    int questions = 0;
    std::vector<Matrix> grads;  ///< aligned with the trainable list; empty = no gradient
};

inline SampleOutcome run_sample(const GoVideoModel& model, const VideoExample& ex, GroundingMode mode,
                                const std::vector<Parameter*>& trainable) {
    Graph g;
    ForwardResult r = model.forward(g, ex, mode);
    SampleOutcome out;
    out.loss = r.loss.value()(0, 0);
    out.correct = count_exact_matches(r.logits.value(), ex.questions);
    out.questions = static_cast<int>(ex.questions.size());
    g.backward(r.loss);
    out.grads.resize(trainable.size());
    for (std::size_t i = 0; i < trainable.size(); ++i)
        if (const Matrix* gr = g.param_grad(*trainable[i])) out.grads[i] = *gr;
    return out;
}

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const int w = std::min(workers, n);
    for (int t = 0; t < w; ++t)
        pool.emplace_back([&, t] {
            for (int i = t; i < n; i += w) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Momentum SGD (or Adam) on the mean answer cross-entropy. The example
/// order of each epoch is a seeded shuffle; batch gradients are summed in
/// batch order, so the result does not depend on the worker count.
inline TrainResult train(GoVideoModel& model, std::span<const VideoExample> data, const TrainConfig& cfg,
                         const std::function<void(const EpochStats&)>& on_epoch = {}) {
    cfg.validate();
    if (data.empty()) throw ValidationError("training set must not be empty");
    const auto trainable = model.trainable_parameters(cfg.mode);
    std::vector<Matrix> velocity, second;
    for (const Parameter* p : trainable) {
        velocity.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        second.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }

    TrainResult result;
    std::vector<std::size_t> order(data.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = stream_for(cfg.seed, "epoch:" + std::to_string(epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        std::size_t correct = 0, asked = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const int n = static_cast<int>(end - start);
            std::vector<detail::SampleOutcome> outcomes(static_cast<std::size_t>(n));
            detail::parallel_for(n, cfg.workers, [&](int i) {
                outcomes[static_cast<std::size_t>(i)] =
                    detail::run_sample(model, data[order[start + static_cast<std::size_t>(i)]], cfg.mode, trainable);
            });

            double batch_loss = 0.0;
            for (const auto& o : outcomes) {
                batch_loss += o.loss;
                correct += static_cast<std::size_t>(o.correct);
                asked += static_cast<std::size_t>(o.questions);
            }
            batch_loss /= n;
            if (!std::isfinite(batch_loss))
                throw NumericError("loss became non-finite at step " + std::to_string(result.steps));
            loss_sum += batch_loss * n;
            result.step_losses.push_back(batch_loss);

            std::vector<Matrix> grads;
            double sq_norm = 0.0;
            for (std::size_t k = 0; k < trainable.size(); ++k) {
                Matrix grad = Matrix::Zero(trainable[k]->value.rows(), trainable[k]->value.cols());
                for (const auto& o : outcomes)
                    if (o.grads[k].size() != 0) grad += o.grads[k];
                grad /= n;
                if (cfg.weight_decay != 0.0) grad += cfg.weight_decay * trainable[k]->value;
                sq_norm += grad.squaredNorm();
                grads.push_back(std::move(grad));
            }
            const double norm = std::sqrt(sq_norm);
            const double clip = cfg.clip_norm > 0.0 && norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
            const int t = result.steps + 1;
            double lr = cfg.lr;
            if (cfg.schedule == LrSchedule::Cosine) {
                const double total = static_cast<double>(cfg.epochs) *
                                     std::ceil(static_cast<double>(data.size()) / cfg.batch_size);
                lr = 0.5 * cfg.lr * (1.0 + std::cos(M_PI * static_cast<double>(result.steps) / total));
            }
            for (std::size_t k = 0; k < trainable.size(); ++k) {
                if (cfg.optimizer == Optimizer::Momentum) {
                    velocity[k] = cfg.momentum * velocity[k] + clip * grads[k];
                    if (lr != 0.0) trainable[k]->value -= lr * velocity[k];
                } else {
                    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
                    velocity[k] = b1 * velocity[k] + (1.0 - b1) * clip * grads[k];
                    second[k] = b2 * second[k] + (1.0 - b2) * (clip * grads[k]).cwiseAbs2();
                    const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
                    if (lr != 0.0)
                        trainable[k]->value.array() -=
                            lr * (velocity[k].array() / c1) / ((second[k].array() / c2).sqrt() + eps);
                }
            }
            ++result.steps;
        }
        EpochStats stats{epoch, loss_sum / static_cast<double>(data.size()),
                         static_cast<double>(correct) / static_cast<double>(asked)};
        result.trace.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    return result;
}

inline std::vector<VideoExample> as_examples(std::span<const SyntheticSample> samples) {
    std::vector<VideoExample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(as_example(s));
    return out;
}

/// One packed example per sample: its own question plus questions about
/// its other planted categories, all behind one shared prefix. Owns the
/// question sets the examples point to.
class ExampleSet {
public:
    ExampleSet(std::span<const SyntheticSample> samples, const SyntheticDataset& ds, int max_questions,
               std::uint64_t seed) {
        qa_.reserve(samples.size());
        for (const auto& s : samples) qa_.push_back(question_set(s, ds.vocab(), ds.labels(), max_questions, seed));
        for (std::size_t i = 0; i < samples.size(); ++i)
            examples_.push_back({samples[i].frames, samples[i].detections, qa_[i]});
    }
    ExampleSet(const ExampleSet&) = delete;
    ExampleSet& operator=(const ExampleSet&) = delete;
    ExampleSet(ExampleSet&&) = default;
    ExampleSet& operator=(ExampleSet&&) = default;

    std::span<const VideoExample> examples() const noexcept { return examples_; }
    std::size_t size() const noexcept { return examples_.size(); }

private:
    std::vector<std::vector<QaPair>> qa_;
    std::vector<VideoExample> examples_;
};

/// Fraction of questions whose decoded answer pair equals the ground truth.
inline double evaluate_exact_match(const GoVideoModel& model, std::span<const VideoExample> data, GroundingMode mode,
                                   int workers = 1) {
    std::vector<int> hits(data.size(), 0);
    std::size_t asked = 0;
    for (const auto& ex : data) asked += ex.questions.size();
    if (asked == 0) return 0.0;
    detail::parallel_for(static_cast<int>(data.size()), workers, [&](int i) {
        Graph g;
        const auto& ex = data[static_cast<std::size_t>(i)];
        hits[static_cast<std::size_t>(i)] = count_exact_matches(model.forward(g, ex, mode).logits.value(), ex.questions);
    });
    return static_cast<double>(std::accumulate(hits.begin(), hits.end(), 0)) / static_cast<double>(asked);
}

}  // namespace gotok::toy
