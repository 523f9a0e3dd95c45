#include "texnet/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "texnet/error.hpp"
#include "texnet/metrics.hpp"

extern "C" void openblas_set_num_threads(int);

namespace texnet {

namespace fs = std::filesystem;

void set_compute_threads(int threads) {
    if (threads < 0) throw ValueError("threads must be >= 0");
    if (threads > 0) openblas_set_num_threads(threads);
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << content;
    if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

RunLock::RunLock(const fs::path& dir) {
    fs::create_directories(dir);
    lock_path_ = dir / ".lock";
    std::FILE* f = std::fopen(lock_path_.c_str(), "wx");
    if (!f) {
        throw IoError("run directory is locked by another process (" + lock_path_.string() +
                      " exists; remove it if that process is gone)");
    }
    std::fclose(f);
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(lock_path_, ec);
}

namespace {

std::string fmt9(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

PatchSet split_of(const PatchSet& set, SplitTag tag, const char* what) {
    PatchSet out = set.subset_by_split(tag);
    if (out.count() == 0) throw ValueError(std::string("dataset has an empty ") + what + " split");
    return out;
}

struct PoolIndexEntry {
    std::string name;
    std::string kind;  // final | snap
    std::string path;  // relative to the run directory
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path, const std::string& header) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || (!line.empty() && line.back() == '\r' ? line.substr(0, line.size() - 1) : line) != header) {
        throw FormatError(path.string() + ": expected header '" + header + "'");
    }
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

}  // namespace

Pipeline::Pipeline(ExperimentManifest manifest) : manifest_(std::move(manifest)) {
    if (manifest_.out_dir.empty()) throw ValueError("manifest has no output directory");
    manifest_.train.validate();
    out_ = fs::path(manifest_.out_dir);
    fs::create_directories(out_ / "data");
    fs::create_directories(out_ / "models" / "pool");
    set_compute_threads(manifest_.threads);
}

PatchSet Pipeline::build_task_patchset(const TaskManifest& task, std::uint64_t seed) const {
    TextureTaskSpec spec;
    if (task.preset == "custom") {
        spec.name = task.name;
        spec.num_classes = static_cast<int>(task.custom_classes.size());
        spec.train_per_class = task.train_per_class;
        spec.val_per_class = task.val_per_class;
        spec.test_per_class = task.test_per_class;
        spec.classes = task.custom_classes;
        spec.seed = seed;
    } else {
        spec = texture_preset(task.preset, task.train_per_class, task.val_per_class,
                              task.test_per_class, seed);
        spec.name = task.name;
    }
    PatchSet set = synth_texture_task(spec);
    if (task.balance) {
        RngStream rng(seed, 9);
        set = balance_classes(set, rng);
    }
    if (task.augment) set = augment_d4(set);
    return set;
}

void Pipeline::synth_data() {
    const auto& d = manifest_.data;
    PatchSet target = build_task_patchset(d.target, manifest_.seed + d.target.seed_offset);
    write_patchset(target, (out_ / "data" / "target.pset").string());
    for (const auto& src : d.sources) {
        PatchSet set = build_task_patchset(src, manifest_.seed + src.seed_offset);
        write_patchset(set, (out_ / "data" / ("source_" + src.name + ".pset")).string());
    }
}

void Pipeline::ingest() {
    const auto& d = manifest_.data;
    if (d.ingest.empty()) throw ValueError("ingest stage requires data.ingest entries");
    PatchSet set;
    set.num_classes = d.ingest_num_classes;
    for (const auto& entry : d.ingest) {
        if (entry.label < 0) throw ValueError("ingest label must be >= 0: " + entry.image);
        set.num_classes = std::max(set.num_classes, entry.label + 1);
    }
    set.class_names = d.ingest_class_names;
    set.provenance = "ingest";
    for (const auto& entry : d.ingest) {
        const IntImage raw = read_pgm(entry.image);
        const IntImage mraw = read_pgm(entry.mask);
        if (mraw.h != raw.h || mraw.w != raw.w) {
            throw ShapeError("mask size differs from image: " + entry.mask);
        }
        MaskImage mask;
        mask.h = mraw.h;
        mask.w = mraw.w;
        mask.v.resize(mraw.v.size());
        for (std::size_t i = 0; i < mraw.v.size(); ++i) mask.v[i] = mraw.v[i] != 0;
        const GrayImage img = window_normalize(raw, d.window_lo, d.window_hi);
        for (const auto& patch : extract_patches(img, mask, kPatchSize, d.min_overlap)) {
            set.append(patch.data(), static_cast<std::uint16_t>(entry.label), SplitTag::Train);
        }
    }
    set.split.clear();  // make_splits retags everything
    RngStream split_rng(manifest_.seed, 4);
    set = make_splits(set, d.target.val_per_class, d.target.test_per_class, split_rng);
    if (d.target.balance) {
        RngStream brng(manifest_.seed, 9);
        set = balance_classes(set, brng);
    }
    if (d.target.augment) set = augment_d4(set);
    write_patchset(set, (out_ / "data" / "target.pset").string());
}

PatchSet Pipeline::load_target() const {
    return read_patchset((out_ / "data" / "target.pset").string());
}

PatchSet Pipeline::load_source(const std::string& name) const {
    return read_patchset((out_ / "data" / ("source_" + name + ".pset")).string());
}

void Pipeline::write_metrics(const std::string& method, double val, double test) const {
    write_text_file(out_ / ("metrics_" + method + ".csv"),
                    "method,val_favg,test_favg\n" + method + "," + fmt9(val) + "," + fmt9(test) + "\n");
}

void Pipeline::train_scratch() {
    const PatchSet target = load_target();
    const PatchSet train = split_of(target, SplitTag::Train, "train");
    const PatchSet val = split_of(target, SplitTag::Val, "val");
    const PatchSet test = split_of(target, SplitTag::Test, "test");

    ArchitectureSpec spec = manifest_.arch;
    spec.num_classes = target.num_classes;
    TrainConfig cfg = manifest_.train;
    RngStream rng(cfg.seed, 1);
    FitResult res = fit(build_model(spec, rng), train, val, cfg);

    Checkpoint ckpt = snapshot(res.best, {cfg.seed, res.history.best_epoch,
                                          static_cast<float>(res.history.best_val_favg), "scratch"});
    save_checkpoint(ckpt, (out_ / "models" / "scratch.txc").string());
    write_text_file(out_ / "history_scratch.csv", res.history.to_csv());
    write_metrics("scratch", res.history.best_val_favg, evaluate_favg(res.best, test));
}

void Pipeline::pretrain() {
    if (manifest_.data.sources.empty()) throw ValueError("pretrain stage requires data.sources");
    const TrainConfig base = apply_stage(manifest_.train, manifest_.pretrain);
    int idx = 0;
    for (const auto& src : manifest_.data.sources) {
        const PatchSet set = load_source(src.name);
        const PatchSet train = split_of(set, SplitTag::Train, "train");
        const PatchSet val = split_of(set, SplitTag::Val, "val");

        ArchitectureSpec spec = manifest_.arch;
        spec.num_classes = set.num_classes;
        TrainConfig cfg = base;
        cfg.seed = manifest_.seed + 1000 + static_cast<std::uint64_t>(idx);
        RngStream rng(cfg.seed, 1);
        FitResult res = fit(build_model(spec, rng), train, val, cfg);

        Checkpoint ckpt = snapshot(res.best, {cfg.seed, res.history.best_epoch,
                                              static_cast<float>(res.history.best_val_favg),
                                              "pretrained:" + src.name});
        save_checkpoint(ckpt, (out_ / "models" / ("pretrained_" + src.name + ".txc")).string());
        write_text_file(out_ / ("history_pretrain_" + src.name + ".csv"), res.history.to_csv());
        ++idx;
    }
}

void Pipeline::transfer_sweep() {
    const PatchSet target = load_target();
    const PatchSet train = split_of(target, SplitTag::Train, "train");
    const PatchSet val = split_of(target, SplitTag::Val, "val");
    const PatchSet test = split_of(target, SplitTag::Test, "test");

    std::vector<std::pair<std::string, Checkpoint>> sources;
    for (const auto& src : manifest_.data.sources) {
        sources.emplace_back(src.name, load_checkpoint(
            (out_ / "models" / ("pretrained_" + src.name + ".txc")).string()));
    }

    DepthSweepPlan plan;
    plan.depths = manifest_.transfer.depths;
    plan.repetitions = manifest_.transfer.repetitions;
    plan.finetune = apply_stage(manifest_.train, manifest_.transfer.stage);
    plan.finetune.seed = manifest_.seed;

    std::vector<FitResult> artifacts;
    const SweepReport report = depth_sweep(sources, train, val, test, plan, &artifacts);
    write_text_file(out_ / "sweep.csv", report.to_csv());
    write_text_file(out_ / "sweep_means.csv", report.means_to_csv());

    // Persist every fine-tune (best weights + retained snapshots) so ensemble
    // selection can rebuild the candidate pool in a later process.
    std::vector<std::string> names;
    std::vector<std::uint64_t> seeds;
    names.push_back("scratch_base");
    seeds.push_back(manifest_.seed);
    for (const auto& [name, ckpt] : sources) {
        (void)ckpt;
        for (int n : plan.depths) {
            for (int rep = 0; rep < plan.repetitions; ++rep) {
                names.push_back("transfer_" + name + "_n" + std::to_string(n) + "_r" +
                                std::to_string(rep));
                seeds.push_back(manifest_.seed + static_cast<std::uint64_t>(rep));
            }
        }
    }
    if (names.size() != artifacts.size()) {
        throw Error("sweep artifact count mismatch: expected " + std::to_string(names.size()) +
                    ", got " + std::to_string(artifacts.size()));
    }
    std::ostringstream index;
    index << "name,kind,path\n";
    for (std::size_t i = 0; i < artifacts.size(); ++i) {
        const FitResult& res = artifacts[i];
        const std::string lineage = i == 0 ? "scratch" : "finetuned";
        const Checkpoint final_ckpt =
            snapshot(res.best, {seeds[i], res.history.best_epoch,
                                static_cast<float>(res.history.best_val_favg), lineage});
        const std::string final_rel = "models/pool/" + names[i] + "_final.txc";
        save_checkpoint(final_ckpt, (out_ / final_rel).string());
        index << names[i] << ",final," << final_rel << "\n";
        for (std::size_t s = 0; s < res.snapshots.size(); ++s) {
            const std::string snap_rel =
                "models/pool/" + names[i] + "_snap" + std::to_string(s) + ".txc";
            save_checkpoint(res.snapshots[s], (out_ / snap_rel).string());
            index << names[i] << ",snap," << snap_rel << "\n";
        }
    }
    write_text_file(out_ / "pool_index.csv", index.str());
}

void Pipeline::ensemble_select() {
    const PatchSet target = load_target();
    const PatchSet train = split_of(target, SplitTag::Train, "train");
    const PatchSet val = split_of(target, SplitTag::Val, "val");
    const PatchSet test = split_of(target, SplitTag::Test, "test");

    // Rebuild the candidate pool from the sweep artifacts on disk.
    std::vector<TrainingArtifact> runs;
    std::vector<std::string> member_paths;  // aligned with build_pool member order
    for (const auto& row : read_csv_rows(out_ / "pool_index.csv", "name,kind,path")) {
        if (row.size() != 3) throw FormatError("pool_index.csv: malformed row");
        const std::string& name = row[0];
        const std::string& kind = row[1];
        const std::string& path = row[2];
        if (runs.empty() || runs.back().name != name) {
            if (kind != "final") throw FormatError("pool_index.csv: run '" + name + "' must start with its final checkpoint");
            runs.push_back({name, load_checkpoint((out_ / path).string()), {}});
        } else if (kind == "snap") {
            runs.back().snapshots.push_back(load_checkpoint((out_ / path).string()));
        } else {
            throw FormatError("pool_index.csv: duplicate final for run '" + name + "'");
        }
        // The index is written final-then-snaps per run, matching the id
        // order build_pool assigns, so paths align with member ids.
        member_paths.push_back(path);
    }

    // Extra scratch-trained members widen the pool beyond the sweep runs.
    std::vector<Checkpoint> scratch;
    ArchitectureSpec spec = manifest_.arch;
    spec.num_classes = target.num_classes;
    const TrainConfig scratch_base = apply_stage(manifest_.train, manifest_.ensemble.scratch_stage);
    for (int i = 0; i < manifest_.ensemble.n_scratch; ++i) {
        TrainConfig cfg = scratch_base;
        cfg.seed = manifest_.seed + 2000 + static_cast<std::uint64_t>(i);
        RngStream rng(cfg.seed, 1);
        FitResult res = fit(build_model(spec, rng), train, val, cfg, SnapshotPolicy{false, 0});
        Checkpoint ckpt = snapshot(res.best, {cfg.seed, res.history.best_epoch,
                                              static_cast<float>(res.history.best_val_favg),
                                              "scratch"});
        const std::string rel = "models/pool/ens_scratch" + std::to_string(i) + ".txc";
        save_checkpoint(ckpt, (out_ / rel).string());
        member_paths.push_back(rel);
        scratch.push_back(std::move(ckpt));
    }

    const ModelPool pool = build_pool(runs, scratch, val);
    if (member_paths.size() != pool.size()) {
        throw Error("pool path bookkeeping mismatch");
    }

    SelectionConfig cfg;
    cfg.n_init = manifest_.ensemble.n_init;
    cfg.m_subsets = manifest_.ensemble.m_subsets;
    cfg.repeats = manifest_.ensemble.repeats;
    cfg.max_ensemble_size = manifest_.ensemble.max_size;
    cfg.seed = manifest_.seed;

    SelectionResult result;
    if (manifest_.ensemble.grid) {
        GridResult grid = grid_select(pool, cfg, manifest_.ensemble.grid_n_max,
                                      manifest_.ensemble.grid_m_max);
        write_text_file(out_ / "grid.csv", grid.to_csv());
        result = std::move(grid.best);
    } else {
        result = select_ensemble(pool, cfg);
    }

    std::ostringstream log;
    log << "step,member_id,val_favg\n";
    for (const auto& s : result.log) {
        log << s.step << "," << s.member_id << "," << fmt9(s.val_favg) << "\n";
    }
    write_text_file(out_ / "selection_log.csv", log.str());

    // The ensemble file references checkpoints by path so any process (or the
    // standalone eval command) can reconstitute the committee.
    std::ostringstream manifest_out;
    manifest_out << "checkpoint,multiplicity,group\n";
    for (std::size_t g = 0; g < result.ensemble.groups.size(); ++g) {
        std::vector<int> sorted = result.ensemble.groups[g];
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            manifest_out << member_paths.at(static_cast<std::size_t>(sorted[i])) << "," << (j - i)
                         << "," << g << "\n";
            i = j;
        }
    }
    write_text_file(out_ / "ensemble.txt", manifest_out.str());
    write_metrics("ensemble", result.val_favg, ensemble_favg(pool, result.ensemble, test));
}

namespace {

// Reconstitute a pool + ensemble from an ensemble manifest file. Checkpoint
// paths are resolved relative to `base`.
struct LoadedEnsemble {
    ModelPool pool;
    Ensemble ensemble;
};

LoadedEnsemble load_ensemble_file(const fs::path& file, const fs::path& base, const PatchSet& val) {
    std::vector<TrainingArtifact> runs;
    std::map<std::string, int> id_of;
    std::map<std::size_t, std::vector<int>> groups;
    for (const auto& row : read_csv_rows(file, "checkpoint,multiplicity,group")) {
        if (row.size() != 3) throw FormatError(file.string() + ": malformed row");
        const std::string& path = row[0];
        const int mult = std::stoi(row[1]);
        const std::size_t group = std::stoul(row[2]);
        if (mult < 1) throw FormatError(file.string() + ": multiplicity must be >= 1");
        auto it = id_of.find(path);
        if (it == id_of.end()) {
            it = id_of.emplace(path, static_cast<int>(runs.size())).first;
            runs.push_back({path, load_checkpoint((base / path).string()), {}});
        }
        for (int m = 0; m < mult; ++m) groups[group].push_back(it->second);
    }
    if (runs.empty()) throw FormatError(file.string() + ": no ensemble members");
    LoadedEnsemble out{build_pool(runs, {}, val), {}};
    for (auto& [g, ids] : groups) out.ensemble.groups.push_back(std::move(ids));
    return out;
}

}  // namespace

void Pipeline::distill_student() {
    const PatchSet target = load_target();
    const PatchSet train = split_of(target, SplitTag::Train, "train");
    const PatchSet val = split_of(target, SplitTag::Val, "val");
    const PatchSet test = split_of(target, SplitTag::Test, "test");

    LoadedEnsemble teacher = load_ensemble_file(out_ / "ensemble.txt", out_, val);
    SoftTargetSet soft =
        make_soft_targets(teacher.pool, teacher.ensemble, train, manifest_.distill.temperature);
    soft.teacher_id = "ensemble";
    save_soft_targets(soft, (out_ / "soft_targets.soft").string());

    TrainConfig cfg = apply_stage(manifest_.train, manifest_.distill.stage);
    cfg.seed = manifest_.seed;
    Model student;
    if (manifest_.distill.student_init == "best_single") {
        const PoolMember* best = nullptr;
        for (const auto& m : teacher.pool.members) {
            if (!best || m.val_favg > best->val_favg) best = &m;
        }
        student = to_model(best->ckpt);
    } else if (manifest_.distill.student_init == "random") {
        ArchitectureSpec spec = manifest_.arch;
        spec.num_classes = target.num_classes;
        RngStream rng(cfg.seed, 3);
        student = build_model(spec, rng);
    } else {
        throw ValueError("distill.student_init must be 'random' or 'best_single'");
    }

    FitResult res = distill_train(std::move(student), soft, train, val, cfg);
    Checkpoint ckpt = snapshot(res.best, {cfg.seed, res.history.best_epoch,
                                          static_cast<float>(res.history.best_val_favg),
                                          "distilled"});
    save_checkpoint(ckpt, (out_ / "models" / "distilled.txc").string());
    write_text_file(out_ / "history_distill.csv", res.history.to_csv());
    write_metrics("distill", res.history.best_val_favg, evaluate_favg(res.best, test));
}

void Pipeline::mtl_run() {
    if (manifest_.data.sources.empty()) throw ValueError("mtl stage requires data.sources");
    const PatchSet target = load_target();
    MtlTask target_task{"target", split_of(target, SplitTag::Train, "train"),
                        split_of(target, SplitTag::Val, "val")};
    const PatchSet test = split_of(target, SplitTag::Test, "test");

    std::vector<MtlTask> sources;
    for (const auto& src : manifest_.data.sources) {
        const PatchSet set = load_source(src.name);
        sources.push_back({src.name, split_of(set, SplitTag::Train, "train"),
                           split_of(set, SplitTag::Val, "val")});
    }

    ArchitectureSpec spec = manifest_.arch;
    spec.num_classes = target.num_classes;
    TrainConfig cfg = apply_stage(manifest_.train, manifest_.mtl.stage);
    cfg.seed = manifest_.seed;

    MtlResult mtl = mtl_train(spec, target_task, sources, cfg);
    write_text_file(out_ / "mtl_schedule.csv", mtl.schedule_csv());

    const Model shared = extract_task_model(mtl.best, 0);
    save_checkpoint(snapshot(shared, {cfg.seed, 0, static_cast<float>(mtl.best_target_val), "mtl"}),
                    (out_ / "models" / "mtl.txc").string());

    FitResult fin = mtl_finetune(mtl.best, target_task.train, target_task.val, cfg);
    save_checkpoint(snapshot(fin.best, {cfg.seed, fin.history.best_epoch,
                                        static_cast<float>(fin.history.best_val_favg),
                                        "finetuned"}),
                    (out_ / "models" / "mtl_finetuned.txc").string());
    write_text_file(out_ / "history_mtl_finetune.csv", fin.history.to_csv());
    write_metrics("mtl", fin.history.best_val_favg, evaluate_favg(fin.best, test));
}

void Pipeline::report() const {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(out_)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("metrics_", 0) == 0 && name.size() > 4 &&
            name.substr(name.size() - 4) == ".csv") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValueError("report: no metrics_*.csv files in " + out_.string());
    std::ostringstream rep;
    rep << "method,val_favg,test_favg\n";
    for (const auto& f : files) {
        for (const auto& row : read_csv_rows(f, "method,val_favg,test_favg")) {
            if (row.size() != 3) throw FormatError(f.string() + ": malformed row");
            rep << row[0] << "," << row[1] << "," << row[2] << "\n";
        }
    }
    write_text_file(out_ / "report.csv", rep.str());
}

void Pipeline::run_all() {
    write_text_file(out_ / "manifest.json", manifest_.raw_json);
    if (!manifest_.data.ingest.empty()) {
        ingest();
    } else {
        synth_data();
    }
    train_scratch();
    if (!manifest_.data.sources.empty()) {
        pretrain();
        transfer_sweep();
        ensemble_select();
        distill_student();
        if (manifest_.mtl.enabled) mtl_run();
    }
    report();
}

double evaluate_artifact(const std::string& model_path, const PatchSet& data,
                         const std::string& out_prefix) {
    if (data.count() == 0) throw ValueError("evaluate: empty dataset");
    std::string head(4, '\0');
    {
        std::ifstream f(model_path, std::ios::binary);
        if (!f) throw IoError("cannot open: " + model_path);
        f.read(head.data(), 4);
    }

    std::vector<int> preds;
    int k = 0;
    if (head == "TXC1") {
        const Model model = to_model(load_checkpoint(model_path));
        k = model.spec().num_classes;
        preds = model_predictions(model, data);
    } else {
        // Ensemble manifest: fabricate a pool against this dataset so the
        // cached matrices line up with it, then take the committee argmax.
        LoadedEnsemble loaded =
            load_ensemble_file(model_path, fs::path(model_path).parent_path(), data);
        k = loaded.pool.num_classes;
        preds = ensemble_predictions(loaded.pool, loaded.ensemble, data);
    }

    std::vector<int> actuals(data.labels.begin(), data.labels.end());
    const ConfusionMatrix cm = confusion(preds, actuals, k);
    const double score = f_avg(cm);
    if (!out_prefix.empty()) {
        write_text_file(out_prefix + "_confusion.csv", confusion_to_csv(cm));
        std::ostringstream txt;
        txt << confusion_to_text(cm, data.class_names);
        txt << "f_avg," << fmt9(score) << "\n";
        write_text_file(out_prefix + "_metrics.csv", "f_avg\n" + fmt9(score) + "\n");
        write_text_file(out_prefix + "_confusion.txt", txt.str());
    }
    return score;
}

}  // namespace texnet
