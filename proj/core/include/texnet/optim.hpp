#pragma once
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "texnet/data.hpp"
#include "texnet/model.hpp"
#include "texnet/tensor.hpp"

namespace texnet {

struct TrainConfig {
    float learning_rate = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
    int batch_size = 128;
    int patience_epochs = 200;
    float min_improvement = 0.005f;  // absolute, in F_avg units
    bool relative_improvement = false;
    int max_epochs = 2000;
    int freeze_prefix_layers = 0;  // first N layers excluded from updates
    std::uint64_t seed = 0;

    void validate() const;
};

// Per-tensor Adam moments; timestep advances only when the tensor is stepped.
struct AdamState {
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
    std::vector<std::int64_t> t;

    void init(const std::vector<Tensor>& params);
    bool empty() const { return m.empty(); }
};

// Standard bias-corrected Adam update over params' grad buffers. Tensors
// with index < 2*config.freeze_prefix_layers are skipped.
void adam_step(std::vector<Tensor>& params, AdamState& state, const TrainConfig& config);

// The stopping rule: stop once `patience` consecutive epochs each fail to
// improve the best-so-far score by at least `min_improvement`.
class EarlyStopper {
public:
    EarlyStopper(int patience, float min_improvement, bool relative = false)
        : patience_(patience), min_improvement_(min_improvement), relative_(relative) {}

    // Feed one epoch's validation score. Returns true when training should
    // stop after this epoch.
    bool observe(double score);

    double best_score() const { return best_; }
    int best_epoch() const { return best_epoch_; }  // 0-based, ties -> earliest
    int epochs_seen() const { return epoch_; }
    bool last_was_new_best() const { return last_new_best_; }

private:
    int patience_;
    float min_improvement_;
    bool relative_;
    double best_ = -std::numeric_limits<double>::infinity();
    int best_epoch_ = -1;
    int epoch_ = 0;
    int stale_ = 0;
    bool last_new_best_ = false;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_favg = 0.0;
    bool is_best = false;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;  // 1-based
    double best_val_favg = 0.0;
    std::string to_csv() const;  // epoch,train_loss,val_favg,is_best
};

struct SnapshotPolicy {
    bool enabled = true;
    int keep_last_bests = 3;
};

struct FitResult {
    Model best;
    TrainHistory history;
    std::vector<Checkpoint> snapshots;  // most recent new-best checkpoints
};

// Mini-batch Adam training with per-epoch validation F_avg and early
// stopping; returns the best-validation model. Snapshots are taken at every
// new-best epoch, keeping the `keep_last_bests` most recent.
FitResult fit(Model model, const PatchSet& train, const PatchSet& val, const TrainConfig& config,
              const SnapshotPolicy& policy = {});

// Same loop with explicit per-sample target distributions (row-major
// count x num_classes); fit() is this with one-hot rows.
FitResult fit_targets(Model model, const PatchSet& train, const std::vector<float>& targets,
                      const PatchSet& val, const TrainConfig& config,
                      const SnapshotPolicy& policy = {});

// One full shuffled pass over `train` with per-batch Adam updates. Returns
// the mean sample loss. Building block of fit() and the multi-task loop.
double train_one_epoch(Model& model, const PatchSet& train, const std::vector<float>& targets,
                       AdamState& adam, const TrainConfig& config, RngStream& shuffle_rng,
                       RngStream& dropout_rng);

// Inference-mode validation score of a model on a tagged or plain PatchSet.
double evaluate_favg(const Model& model, const PatchSet& data);
std::vector<int> model_predictions(const Model& model, const PatchSet& data);

}  // namespace texnet
