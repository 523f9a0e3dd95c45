#pragma once
#include <filesystem>
#include <string>

#include "texnet/distill.hpp"
#include "texnet/ensemble.hpp"
#include "texnet/manifest.hpp"
#include "texnet/mtl.hpp"
#include "texnet/transfer.hpp"

namespace texnet {

// Exclusive ownership of a run directory for the lifetime of one process.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path lock_path_;
};

// Stage entry points. Every stage reads its inputs from and writes its
// artifacts into the manifest's output directory, so stages compose across
// processes. Paths below are relative to that directory.
//
//   data/target.pset, data/source_<name>.pset
//   models/*.txc, soft_targets.soft
//   history CSVs, sweep.csv, sweep_means.csv, selection_log.csv,
//   ensemble.txt, mtl_schedule.csv, metrics_<method>.csv, report.csv
struct Pipeline {
    explicit Pipeline(ExperimentManifest manifest);

    void synth_data();
    void ingest();
    void train_scratch();
    void pretrain();
    void transfer_sweep();
    void ensemble_select();
    void distill_student();
    void mtl_run();
    void report() const;
    void run_all();

    const std::filesystem::path& out() const { return out_; }
    const ExperimentManifest& manifest() const { return manifest_; }

    PatchSet load_target() const;
    PatchSet load_source(const std::string& name) const;

private:
    ExperimentManifest manifest_;
    std::filesystem::path out_;

    PatchSet build_task_patchset(const TaskManifest& task, std::uint64_t seed) const;
    void write_metrics(const std::string& method, double val, double test) const;
};

// Standalone evaluation: `model_path` is either a TXC1 checkpoint or an
// ensemble manifest (member checkpoint paths resolved relative to it).
// Returns F_avg; writes confusion CSV/text next to `out_prefix` when given.
double evaluate_artifact(const std::string& model_path, const PatchSet& data,
                         const std::string& out_prefix = "");

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// Process-wide BLAS thread count (determinism requires it fixed per run).
void set_compute_threads(int threads);

}  // namespace texnet
