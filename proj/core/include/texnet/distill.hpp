#pragma once
#include <string>
#include <vector>

#include "texnet/ensemble.hpp"
#include "texnet/model.hpp"
#include "texnet/optim.hpp"

namespace texnet {

// Per-sample teacher probability rows aligned with a training split.
struct SoftTargetSet {
    int num_classes = 0;
    std::vector<float> rows;  // count * num_classes, each row sums to 1
    std::string teacher_id;
    float temperature = 1.0f;

    std::size_t count() const { return num_classes ? rows.size() / num_classes : 0; }
    void validate() const;
};

// Teacher ensemble probabilities per training sample. For T != 1 each
// member's logits are divided by T before its softmax; the T = 1 path uses
// the members' probabilities directly.
SoftTargetSet make_soft_targets(const ModelPool& pool, const Ensemble& teacher,
                                const PatchSet& train, float temperature = 1.0f);

// Student trained with cross-entropy against the soft targets (pure soft
// loss); early stopping still uses hard-label validation F_avg.
FitResult distill_train(Model student, const SoftTargetSet& soft, const PatchSet& train,
                        const PatchSet& val, const TrainConfig& config,
                        const SnapshotPolicy& policy = {});

// Fraction of samples on which two prediction vectors share the argmax.
double agreement(const std::vector<int>& a, const std::vector<int>& b);
double agreement(const Model& a, const Model& b, const PatchSet& data);

void save_soft_targets(const SoftTargetSet& soft, const std::string& path);
SoftTargetSet load_soft_targets(const std::string& path);

}  // namespace texnet
