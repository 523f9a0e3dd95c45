#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "texnet/data.hpp"
#include "texnet/model.hpp"
#include "texnet/optim.hpp"

namespace texnet {

// One synthetic task (preset or custom class list) plus split sizes.
struct TaskManifest {
    std::string name;
    std::string preset;  // easy4 | hard7 | source0..source2 | custom
    int train_per_class = 300;
    int val_per_class = 150;
    int test_per_class = 150;
    bool augment = false;
    bool balance = true;
    std::uint64_t seed_offset = 0;
    std::vector<ClassTextureSpec> custom_classes;
};

struct IngestEntry {
    std::string image;
    std::string mask;
    int label = 0;
};

struct DataManifest {
    TaskManifest target;
    std::vector<TaskManifest> sources;
    std::vector<IngestEntry> ingest;  // when non-empty, replaces the synthetic target
    int ingest_num_classes = 0;
    std::vector<std::string> ingest_class_names;
    int window_lo = -1000;
    int window_hi = 200;
    double min_overlap = 0.8;
};

struct StageOverride {
    int max_epochs = -1;   // -1 = inherit from the base train config
    int patience = -1;
};

struct TransferManifest {
    std::vector<int> depths{1, 2, 3, 4, 5, 6, 7};
    int repetitions = 3;
    StageOverride stage;
};

struct EnsembleManifest {
    int n_init = 2;
    int m_subsets = 5;
    int repeats = 10;
    int n_scratch = 3;
    int max_size = 50;
    bool grid = false;
    int grid_n_max = 5;
    int grid_m_max = 5;
    StageOverride scratch_stage;
};

struct DistillManifest {
    float temperature = 1.0f;
    std::string student_init = "random";
    StageOverride stage;
};

struct MtlManifest {
    bool enabled = true;
    StageOverride stage;
};

struct ExperimentManifest {
    std::uint64_t seed = 0;
    std::string out_dir;
    int threads = 0;  // 0 = library default
    DataManifest data;
    ArchitectureSpec arch;
    TrainConfig train;
    StageOverride pretrain;
    TransferManifest transfer;
    EnsembleManifest ensemble;
    DistillManifest distill;
    MtlManifest mtl;
    std::string raw_json;  // verbatim manifest text, copied into the run dir
};

// Strict parser: unknown keys anywhere are rejected with their JSON path.
ExperimentManifest parse_manifest(const std::string& json_text);
ExperimentManifest load_manifest(const std::string& path);

TrainConfig apply_stage(const TrainConfig& base, const StageOverride& o);

}  // namespace texnet
