#pragma once
#include <string>
#include <vector>

#include "texnet/model.hpp"
#include "texnet/optim.hpp"

namespace texnet {

struct MtlTask {
    std::string name;
    PatchSet train;
    PatchSet val;
};

// One shared trunk (conv1..conv5, dense1, dense2) plus a final dense layer
// per task sized to that task's class count. Task 0 is the target.
struct MtlModel {
    ArchitectureSpec base_spec;        // num_classes field is per-head
    std::vector<Tensor> trunk;         // 14 tensors, layers 1..7
    std::vector<std::vector<Tensor>> heads;  // per task: {weight, bias}
    std::vector<std::string> task_names;
    std::vector<int> task_classes;
};

// Epoch -> task assignment: odd epochs (1-based) train the target, even
// epochs cycle the sources in registry order. Returns -1 for the target,
// otherwise the source index.
int mtl_task_for_epoch(int epoch, int num_sources);

struct MtlEpochRecord {
    int epoch = 0;
    std::string task;
    double train_loss = 0.0;
    double target_val_favg = -1.0;  // only set on target epochs
};

struct MtlResult {
    MtlModel best;         // state at the best target-validation epoch
    MtlModel final_state;  // state after the last trained epoch
    std::vector<MtlEpochRecord> schedule;
    double best_target_val = 0.0;
    std::string schedule_csv() const;
};

// Alternating-epoch training; each epoch is a full pass over one task,
// updating the trunk and that task's head only. Early stopping watches the
// target task's validation F_avg across target epochs. spec.num_classes is
// ignored; each head is sized to its task.
MtlResult mtl_train(const ArchitectureSpec& spec, const MtlTask& target,
                    const std::vector<MtlTask>& sources, const TrainConfig& config);

// Trunk + one head as a standalone model; its forward equals the MTL
// task view bit-exactly.
Model extract_task_model(const MtlModel& mtl, int task_index);

// Standard fine-tune of the extracted target model on the target task.
FitResult mtl_finetune(const MtlModel& mtl, const PatchSet& target_train,
                       const PatchSet& target_val, const TrainConfig& config);

}  // namespace texnet
