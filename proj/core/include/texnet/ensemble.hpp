#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "texnet/model.hpp"
#include "texnet/optim.hpp"

namespace texnet {

struct PoolMember {
    int id = 0;
    std::string name;
    std::string lineage;
    Checkpoint ckpt;
    std::vector<float> val_probs;  // validation-set probability matrix, row-major
    double val_favg = 0.0;
};

struct ModelPool {
    int num_classes = 0;
    std::vector<int> val_labels;
    std::vector<PoolMember> members;

    std::size_t size() const { return members.size(); }
    const PoolMember& by_id(int id) const;
};

// Fine-tuned finals + retained snapshots from each run, plus scratch-trained
// models; probability matrices are cached once against the validation set.
struct TrainingArtifact {
    std::string name;
    Checkpoint final;
    std::vector<Checkpoint> snapshots;
};

ModelPool build_pool(const std::vector<TrainingArtifact>& runs,
                     const std::vector<Checkpoint>& scratch, const PatchSet& val);

// A multiset of member ids per sub-ensemble; prediction is the mean of
// sub-ensemble means, each sub-ensemble mean taken over its multiset.
struct Ensemble {
    std::vector<std::vector<int>> groups;

    bool empty() const;
    std::size_t total_members() const;
    std::string to_manifest() const;  // member id, multiplicity, group index
};

struct SelectionStep {
    int step = 0;       // 0 = initialization
    int member_id = -1;
    double val_favg = 0.0;
};

struct SelectionConfig {
    int n_init = 2;
    int m_subsets = 5;
    int repeats = 10;
    int max_ensemble_size = 50;
    std::uint64_t seed = 0;

    void validate() const;
};

// Greedy forward selection with replacement over a pool subset: rank by
// validation F_avg, seed the ensemble with the best n_init, then repeatedly
// add the member (any subset member) that most improves validation F_avg,
// stopping when no strict improvement remains or the size cap is reached.
std::vector<int> forward_select(const ModelPool& pool, const std::vector<int>& subset_ids,
                                int n_init, int max_size,
                                std::vector<SelectionStep>* log = nullptr);

struct SelectionResult {
    Ensemble ensemble;
    double val_favg = 0.0;
    std::vector<SelectionStep> log;
};

// M random half-size subsets -> M forward selections -> mean-of-means
// aggregate; repeated `repeats` times keeping the best by validation F_avg.
SelectionResult select_ensemble(const ModelPool& pool, const SelectionConfig& config);

struct GridCell {
    int n = 0, m = 0;
    double val_favg = 0.0;
};

struct GridResult {
    SelectionResult best;
    int best_n = 0, best_m = 0;
    std::vector<GridCell> cells;
    std::string to_csv() const;
};

GridResult grid_select(const ModelPool& pool, const SelectionConfig& base, int n_max, int m_max);

// Validation-set prediction matrix of an ensemble from the cached member
// matrices (pure arithmetic, no forward passes).
std::vector<float> ensemble_val_probs(const ModelPool& pool, const Ensemble& ensemble);
double ensemble_val_favg(const ModelPool& pool, const Ensemble& ensemble);

// Fresh forward passes of the member models on arbitrary data.
std::vector<float> ensemble_predict(const ModelPool& pool, const Ensemble& ensemble,
                                    const PatchSet& data);
std::vector<int> ensemble_predictions(const ModelPool& pool, const Ensemble& ensemble,
                                      const PatchSet& data);
double ensemble_favg(const ModelPool& pool, const Ensemble& ensemble, const PatchSet& data);

// Plain-averaged ensemble of `count` models, each trained on a bootstrap
// resample (with replacement, original size) of the training split.
struct BaggingResult {
    ModelPool pool;
    Ensemble ensemble;
};
BaggingResult bagging_baseline(const PatchSet& train, const PatchSet& val, int count,
                               const ArchitectureSpec& spec, const TrainConfig& config);

double favg_of_probs(const std::vector<float>& probs, const std::vector<int>& labels, int k);

}  // namespace texnet
