#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "texnet/model.hpp"
#include "texnet/optim.hpp"

namespace texnet {

// The final classifier layer is never transferred, so n ranges over 0..7
// (5 conv + the first 2 dense layers).
inline constexpr int kMaxTransferDepth = kNumLayers - 1;

// Copies layers 1..n verbatim from the source checkpoint into a freshly
// initialized model whose classifier is sized to target_classes. All layers
// stay trainable. n = 0 degenerates to build_model (scratch baseline).
// When target_spec is given it must agree with the source on every copied
// layer shape; a mismatch is a hard error naming the first differing layer.
Model transfer_layers(const Checkpoint& source, int n, int target_classes, RngStream& rng,
                      const ArchitectureSpec* target_spec = nullptr);

struct SweepCell {
    std::string source;
    int n = 0;
    std::uint64_t seed = 0;
    double val_favg = 0.0;
    double test_favg = 0.0;
};

struct SweepReport {
    std::vector<SweepCell> cells;
    double scratch_val = 0.0;
    double scratch_test = 0.0;
    std::string to_csv() const;       // source,n,seed,val_favg,test_favg
    std::string means_to_csv() const; // source,n,mean_val_favg,mean_test_favg
    double mean_test(const std::string& source, int n) const;
};

struct DepthSweepPlan {
    std::vector<int> depths;  // each in 1..7
    int repetitions = 3;
    TrainConfig finetune;
    bool freeze_transferred = false;  // off by default; fine-tune everything
};

// Runs `repetitions` fine-tunes per (source, depth) with seeds derived as
// base seed + repetition index, plus one shared scratch baseline.
SweepReport depth_sweep(const std::vector<std::pair<std::string, Checkpoint>>& sources,
                        const PatchSet& target_train, const PatchSet& target_val,
                        const PatchSet& target_test, const DepthSweepPlan& plan,
                        std::vector<FitResult>* artifacts = nullptr);

}  // namespace texnet
