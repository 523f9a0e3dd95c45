#include "texnet/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "texnet/error.hpp"
#include "texnet/metrics.hpp"

namespace texnet {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ValueError("train config: batch_size must be >= 1");
    if (patience_epochs < 1) throw ValueError("train config: patience_epochs must be >= 1");
    if (min_improvement < 0.0f) throw ValueError("train config: min_improvement must be >= 0");
    if (max_epochs < 1) throw ValueError("train config: max_epochs must be >= 1");
    if (learning_rate <= 0.0f) throw ValueError("train config: learning_rate must be > 0");
    if (freeze_prefix_layers < 0 || freeze_prefix_layers > kNumLayers) {
        throw ValueError("train config: freeze_prefix_layers out of range");
    }
}

void AdamState::init(const std::vector<Tensor>& params) {
    m.clear();
    v.clear();
    t.assign(params.size(), 0);
    for (const auto& p : params) {
        m.emplace_back(p.size(), 0.0f);
        v.emplace_back(p.size(), 0.0f);
    }
}

void adam_step(std::vector<Tensor>& params, AdamState& state, const TrainConfig& config) {
    if (state.empty()) state.init(params);
    if (state.m.size() != params.size()) throw ShapeError("adam state does not match parameters");
    for (std::size_t i = static_cast<std::size_t>(2 * config.freeze_prefix_layers);
         i < params.size(); ++i) {
        Tensor& p = params[i];
        if (p.grad.size() != p.data.size()) {
            throw ShapeError("adam_step: parameter " + std::to_string(i) + " has no gradient");
        }
        auto& m = state.m[i];
        auto& v = state.v[i];
        const std::int64_t t = ++state.t[i];
        const float b1 = config.beta1, b2 = config.beta2;
        const float c1 = 1.0f - static_cast<float>(std::pow(static_cast<double>(b1), t));
        const float c2 = 1.0f - static_cast<float>(std::pow(static_cast<double>(b2), t));
        const float lr = config.learning_rate;
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            const float g = p.grad[j];
            m[j] = b1 * m[j] + (1.0f - b1) * g;
            v[j] = b2 * v[j] + (1.0f - b2) * g * g;
            const float mhat = m[j] / c1;
            const float vhat = v[j] / c2;
            p.data[j] -= lr * mhat / (std::sqrt(vhat) + config.epsilon);
        }
    }
}

bool EarlyStopper::observe(double score) {
    const double threshold = relative_ ? best_ * (1.0 + min_improvement_)
                                       : best_ + min_improvement_;
    const bool qualifies = score >= threshold || best_epoch_ < 0;
    last_new_best_ = score > best_;
    if (last_new_best_) {
        best_ = score;
        best_epoch_ = epoch_;
    } else if (best_epoch_ < 0) {
        best_ = score;
        best_epoch_ = epoch_;
        last_new_best_ = true;
    }
    stale_ = qualifies ? 0 : stale_ + 1;
    ++epoch_;
    return stale_ >= patience_;
}

std::string TrainHistory::to_csv() const {
    std::ostringstream out;
    out << "epoch,train_loss,val_favg,is_best\n";
    char buf[64];
    for (const auto& e : epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%d\n", e.epoch, e.train_loss, e.val_favg,
                      e.is_best ? 1 : 0);
        out << buf;
    }
    return out.str();
}

std::vector<int> model_predictions(const Model& model, const PatchSet& data) {
    return model.predict(data.pixels, data.count());
}

double evaluate_favg(const Model& model, const PatchSet& data) {
    if (data.count() == 0) throw ValueError("evaluate_favg: empty dataset");
    const auto preds = model_predictions(model, data);
    std::vector<int> actuals(data.labels.begin(), data.labels.end());
    return f_avg(confusion(preds, actuals, model.spec().num_classes));
}

double train_one_epoch(Model& model, const PatchSet& train, const std::vector<float>& targets,
                       AdamState& adam, const TrainConfig& config, RngStream& shuffle_rng,
                       RngStream& dropout_rng) {
    const std::size_t n = train.count();
    const std::size_t k = static_cast<std::size_t>(model.spec().num_classes);
    if (n == 0) throw ValueError("train_one_epoch: empty training set");
    if (targets.size() != n * k) throw ShapeError("train_one_epoch: target matrix size mismatch");
    if (model.params()[0].grad.empty()) model.alloc_grads();
    if (adam.empty()) adam.init(model.params());

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    std::vector<float> target_row(k);
    Workspace ws;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
        const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
        model.zero_grads();
        double batch_loss = 0.0;
        for (std::size_t b = start; b < end; ++b) {
            const std::size_t s = order[b];
            model.forward_one(train.patch(s), true, &dropout_rng, ws);
            std::copy(targets.begin() + s * k, targets.begin() + (s + 1) * k, target_row.begin());
            batch_loss += model.backward(ws, target_row);
        }
        if (!std::isfinite(batch_loss)) {
            throw ValueError("training aborted: non-finite loss in batch starting at sample " +
                             std::to_string(start));
        }
        const float inv = 1.0f / static_cast<float>(end - start);
        for (auto& p : model.params()) {
            for (auto& g : p.grad) g *= inv;
        }
        adam_step(model.params(), adam, config);
        loss_sum += batch_loss;
    }
    return loss_sum / static_cast<double>(n);
}

FitResult fit_targets(Model model, const PatchSet& train, const std::vector<float>& targets,
                      const PatchSet& val, const TrainConfig& config, const SnapshotPolicy& policy) {
    config.validate();
    const std::size_t n = train.count();
    const std::size_t k = static_cast<std::size_t>(model.spec().num_classes);
    if (n == 0 || val.count() == 0) throw ValueError("fit: empty train or validation set");
    if (targets.size() != n * k) throw ShapeError("fit: target matrix size mismatch");
    for (auto label : train.labels) {
        if (label >= model.spec().num_classes) {
            throw ValueError("fit: training label out of range for the model");
        }
    }

    model.alloc_grads();
    AdamState adam;
    adam.init(model.params());
    RngStream shuffle_rng(config.seed, 101);
    RngStream dropout_rng(config.seed, 102);
    EarlyStopper stopper(config.patience_epochs, config.min_improvement,
                         config.relative_improvement);

    FitResult result;
    result.best = model;
    std::deque<Checkpoint> snaps;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        double epoch_loss = 0.0;
        try {
            epoch_loss = train_one_epoch(model, train, targets, adam, config, shuffle_rng,
                                         dropout_rng);
        } catch (const ValueError& e) {
            throw ValueError("fit: epoch " + std::to_string(epoch) + ": " + e.what());
        }

        const double val_score = evaluate_favg(model, val);
        const bool stop = stopper.observe(val_score);
        const bool is_best = stopper.last_was_new_best();
        if (is_best) {
            result.best = model;
            if (policy.enabled) {
                snaps.push_back(snapshot(model, CheckpointMeta{config.seed, epoch,
                                                               static_cast<float>(val_score),
                                                               "snapshot"}));
                while (static_cast<int>(snaps.size()) > policy.keep_last_bests) snaps.pop_front();
            }
        }
        result.history.epochs.push_back({epoch, epoch_loss, val_score, is_best});
        if (stop) break;
    }

    result.history.best_epoch = stopper.best_epoch() + 1;
    result.history.best_val_favg = stopper.best_score();
    result.snapshots.assign(snaps.begin(), snaps.end());
    return result;
}

FitResult fit(Model model, const PatchSet& train, const PatchSet& val, const TrainConfig& config,
              const SnapshotPolicy& policy) {
    const std::size_t k = static_cast<std::size_t>(model.spec().num_classes);
    std::vector<float> targets(train.count() * k, 0.0f);
    for (std::size_t i = 0; i < train.count(); ++i) {
        if (train.labels[i] >= k) throw ValueError("fit: label out of range");
        targets[i * k + train.labels[i]] = 1.0f;
    }
    return fit_targets(std::move(model), train, targets, val, config, policy);
}

}  // namespace texnet
