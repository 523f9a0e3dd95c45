#include "texnet/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "texnet/error.hpp"
#include "texnet/metrics.hpp"

namespace texnet {

void SelectionConfig::validate() const {
    if (n_init < 1) throw ValueError("selection: n_init must be >= 1");
    if (m_subsets < 1) throw ValueError("selection: m_subsets must be >= 1");
    if (repeats < 1) throw ValueError("selection: repeats must be >= 1");
    if (max_ensemble_size < 1) throw ValueError("selection: max_ensemble_size must be >= 1");
}

const PoolMember& ModelPool::by_id(int id) const {
    for (const auto& m : members) {
        if (m.id == id) return m;
    }
    throw ValueError("pool has no member with id " + std::to_string(id));
}

double favg_of_probs(const std::vector<float>& probs, const std::vector<int>& labels, int k) {
    const std::size_t n = labels.size();
    if (probs.size() != n * static_cast<std::size_t>(k)) {
        throw ShapeError("favg_of_probs: matrix size mismatch");
    }
    std::vector<int> preds(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float* row = probs.data() + i * k;
        preds[i] = static_cast<int>(std::max_element(row, row + k) - row);
    }
    return f_avg(confusion(preds, labels, k));
}

namespace {

std::vector<float> cache_val_probs(const Model& model, const PatchSet& val) {
    const std::size_t k = static_cast<std::size_t>(model.spec().num_classes);
    std::vector<float> probs(val.count() * k);
    Workspace ws;
    for (std::size_t i = 0; i < val.count(); ++i) {
        model.forward_one(val.patch(i), false, nullptr, ws);
        std::copy(ws.probs.begin(), ws.probs.end(), probs.begin() + i * k);
    }
    return probs;
}

void add_member(ModelPool& pool, const Checkpoint& ckpt, const std::string& name,
                const PatchSet& val) {
    if (ckpt.spec.num_classes != pool.num_classes) {
        throw ValueError("pool member '" + name + "' has " +
                         std::to_string(ckpt.spec.num_classes) + " classes, pool expects " +
                         std::to_string(pool.num_classes));
    }
    PoolMember m;
    m.id = static_cast<int>(pool.members.size());
    m.name = name;
    m.lineage = ckpt.meta.lineage;
    m.ckpt = ckpt;
    m.val_probs = cache_val_probs(to_model(ckpt), val);
    m.val_favg = favg_of_probs(m.val_probs, pool.val_labels, pool.num_classes);
    pool.members.push_back(std::move(m));
}

}  // namespace

ModelPool build_pool(const std::vector<TrainingArtifact>& runs,
                     const std::vector<Checkpoint>& scratch, const PatchSet& val) {
    if (val.count() == 0) throw ValueError("build_pool: empty validation set");
    ModelPool pool;
    pool.num_classes = val.num_classes;
    pool.val_labels.assign(val.labels.begin(), val.labels.end());
    for (const auto& run : runs) {
        add_member(pool, run.final, run.name + ":final", val);
        for (std::size_t s = 0; s < run.snapshots.size(); ++s) {
            add_member(pool, run.snapshots[s], run.name + ":snap" + std::to_string(s), val);
        }
    }
    for (std::size_t i = 0; i < scratch.size(); ++i) {
        add_member(pool, scratch[i], "scratch" + std::to_string(i), val);
    }
    return pool;
}

bool Ensemble::empty() const {
    for (const auto& g : groups) {
        if (!g.empty()) return false;
    }
    return true;
}

std::size_t Ensemble::total_members() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
}

std::string Ensemble::to_manifest() const {
    std::ostringstream out;
    out << "member_id,multiplicity,group\n";
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<int> sorted = groups[g];
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            out << sorted[i] << "," << (j - i) << "," << g << "\n";
            i = j;
        }
    }
    return out.str();
}

namespace {

// Mean probability matrix of one multiset, maintained incrementally as a sum.
struct RunningMean {
    std::vector<double> sum;
    std::size_t count = 0;

    void add(const std::vector<float>& probs) {
        if (sum.empty()) sum.assign(probs.size(), 0.0);
        for (std::size_t i = 0; i < probs.size(); ++i) sum[i] += probs[i];
        ++count;
    }
    double favg_with(const std::vector<float>* extra, const std::vector<int>& labels, int k) const {
        const std::size_t n = labels.size();
        std::vector<int> preds(n);
        const double denom = static_cast<double>(count + (extra ? 1 : 0));
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = sum.data() + i * k;
            int best = 0;
            double best_v = -1.0;
            for (int c = 0; c < k; ++c) {
                double v = row[c] + (extra ? (*extra)[i * k + c] : 0.0);
                v /= denom;
                if (v > best_v) {
                    best_v = v;
                    best = c;
                }
            }
            preds[i] = best;
        }
        return f_avg(confusion(preds, labels, k));
    }
};

}  // namespace

std::vector<int> forward_select(const ModelPool& pool, const std::vector<int>& subset_ids,
                                int n_init, int max_size, std::vector<SelectionStep>* log) {
    if (subset_ids.empty()) throw ValueError("forward_select: empty subset");
    if (n_init > static_cast<int>(subset_ids.size())) {
        throw ValueError("forward_select: n_init exceeds subset size");
    }
    // Rank by validation F_avg, ties broken by smallest member id.
    std::vector<int> ranked = subset_ids;
    std::sort(ranked.begin(), ranked.end(), [&pool](int a, int b) {
        const double fa = pool.by_id(a).val_favg, fb = pool.by_id(b).val_favg;
        if (fa != fb) return fa > fb;
        return a < b;
    });

    std::vector<int> ensemble(ranked.begin(), ranked.begin() + n_init);
    RunningMean mean;
    for (int id : ensemble) mean.add(pool.by_id(id).val_probs);
    double current = mean.favg_with(nullptr, pool.val_labels, pool.num_classes);
    if (log) log->push_back({0, -1, current});

    std::vector<int> candidates = subset_ids;
    std::sort(candidates.begin(), candidates.end());
    int step = 0;
    while (static_cast<int>(ensemble.size()) < max_size) {
        int best_id = -1;
        double best_score = current;
        for (int id : candidates) {  // replacement: every member stays a candidate
            const double score =
                mean.favg_with(&pool.by_id(id).val_probs, pool.val_labels, pool.num_classes);
            if (score > best_score) {  // strict improvement; ties keep the smaller id
                best_score = score;
                best_id = id;
            }
        }
        if (best_id < 0) break;
        ensemble.push_back(best_id);
        mean.add(pool.by_id(best_id).val_probs);
        current = best_score;
        if (log) log->push_back({++step, best_id, current});
    }
    return ensemble;
}

std::vector<float> ensemble_val_probs(const ModelPool& pool, const Ensemble& ensemble) {
    if (ensemble.empty()) throw ValueError("ensemble is empty");
    const std::size_t n = pool.val_labels.size();
    const std::size_t k = static_cast<std::size_t>(pool.num_classes);
    std::vector<double> acc(n * k, 0.0);
    std::size_t groups = 0;
    for (const auto& g : ensemble.groups) {
        if (g.empty()) continue;
        std::vector<double> gsum(n * k, 0.0);
        for (int id : g) {
            const auto& probs = pool.by_id(id).val_probs;
            for (std::size_t i = 0; i < n * k; ++i) gsum[i] += probs[i];
        }
        for (std::size_t i = 0; i < n * k; ++i) acc[i] += gsum[i] / static_cast<double>(g.size());
        ++groups;
    }
    std::vector<float> out(n * k);
    for (std::size_t i = 0; i < n * k; ++i) {
        out[i] = static_cast<float>(acc[i] / static_cast<double>(groups));
    }
    return out;
}

double ensemble_val_favg(const ModelPool& pool, const Ensemble& ensemble) {
    return favg_of_probs(ensemble_val_probs(pool, ensemble), pool.val_labels, pool.num_classes);
}

SelectionResult select_ensemble(const ModelPool& pool, const SelectionConfig& config) {
    config.validate();
    if (pool.size() < 2) throw ValueError("select_ensemble: pool must have >= 2 members");
    const std::size_t subset_size = std::max<std::size_t>(1, pool.size() / 2);

    SelectionResult best;
    best.val_favg = -1.0;
    RngStream rng(config.seed, 7);
    for (int rep = 0; rep < config.repeats; ++rep) {
        Ensemble agg;
        std::vector<SelectionStep> log;
        for (int m = 0; m < config.m_subsets; ++m) {
            const auto picks = rng.sample_without_replacement(pool.size(), subset_size);
            std::vector<int> subset_ids;
            for (std::size_t p : picks) subset_ids.push_back(pool.members[p].id);
            const int n_init = std::min<int>(config.n_init, static_cast<int>(subset_ids.size()));
            agg.groups.push_back(
                forward_select(pool, subset_ids, n_init, config.max_ensemble_size, &log));
        }
        const double score = ensemble_val_favg(pool, agg);
        if (score > best.val_favg) {
            best.ensemble = std::move(agg);
            best.val_favg = score;
            best.log = std::move(log);
        }
    }
    return best;
}

std::string GridResult::to_csv() const {
    std::ostringstream out;
    out << "n,m,val_favg\n";
    char buf[64];
    for (const auto& c : cells) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.9g\n", c.n, c.m, c.val_favg);
        out << buf;
    }
    return out.str();
}

GridResult grid_select(const ModelPool& pool, const SelectionConfig& base, int n_max, int m_max) {
    GridResult result;
    result.best.val_favg = -1.0;
    for (int n = 1; n <= n_max; ++n) {
        for (int m = 1; m <= m_max; ++m) {
            SelectionConfig cfg = base;
            cfg.n_init = n;
            cfg.m_subsets = m;
            SelectionResult r = select_ensemble(pool, cfg);
            result.cells.push_back({n, m, r.val_favg});
            if (r.val_favg > result.best.val_favg) {
                result.best = std::move(r);
                result.best_n = n;
                result.best_m = m;
            }
        }
    }
    return result;
}

std::vector<float> ensemble_predict(const ModelPool& pool, const Ensemble& ensemble,
                                    const PatchSet& data) {
    if (ensemble.empty()) throw ValueError("ensemble is empty");
    const std::size_t n = data.count();
    const std::size_t k = static_cast<std::size_t>(pool.num_classes);
    std::vector<double> acc(n * k, 0.0);
    std::size_t groups = 0;
    Workspace ws;
    for (const auto& g : ensemble.groups) {
        if (g.empty()) continue;
        // Collapse the multiset into weights so each distinct model runs once.
        std::vector<int> sorted = g;
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> gsum(n * k, 0.0);
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            const double mult = static_cast<double>(j - i);
            const Model model = to_model(pool.by_id(sorted[i]).ckpt);
            for (std::size_t s = 0; s < n; ++s) {
                model.forward_one(data.patch(s), false, nullptr, ws);
                for (std::size_t c = 0; c < k; ++c) gsum[s * k + c] += mult * ws.probs[c];
            }
            i = j;
        }
        for (std::size_t i = 0; i < n * k; ++i) acc[i] += gsum[i] / static_cast<double>(g.size());
        ++groups;
    }
    std::vector<float> out(n * k);
    for (std::size_t i = 0; i < n * k; ++i) {
        out[i] = static_cast<float>(acc[i] / static_cast<double>(groups));
    }
    return out;
}

std::vector<int> ensemble_predictions(const ModelPool& pool, const Ensemble& ensemble,
                                      const PatchSet& data) {
    const auto probs = ensemble_predict(pool, ensemble, data);
    const std::size_t k = static_cast<std::size_t>(pool.num_classes);
    std::vector<int> preds(data.count());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const float* row = probs.data() + i * k;
        preds[i] = static_cast<int>(std::max_element(row, row + k) - row);
    }
    return preds;
}

double ensemble_favg(const ModelPool& pool, const Ensemble& ensemble, const PatchSet& data) {
    const auto preds = ensemble_predictions(pool, ensemble, data);
    std::vector<int> actuals(data.labels.begin(), data.labels.end());
    return f_avg(confusion(preds, actuals, pool.num_classes));
}

BaggingResult bagging_baseline(const PatchSet& train, const PatchSet& val, int count,
                               const ArchitectureSpec& spec, const TrainConfig& config) {
    if (count < 1) throw ValueError("bagging: count must be >= 1");
    std::vector<Checkpoint> members;
    RngStream boot_rng(config.seed, 11);
    for (int i = 0; i < count; ++i) {
        PatchSet resample;
        resample.height = train.height;
        resample.width = train.width;
        resample.num_classes = train.num_classes;
        resample.class_names = train.class_names;
        for (std::size_t s = 0; s < train.count(); ++s) {  // bootstrap: same size, replacement
            const std::size_t pick = boot_rng.bounded(train.count());
            resample.append(train.patch(pick), train.labels[pick], SplitTag::Train);
        }
        TrainConfig cfg = config;
        cfg.seed = config.seed + static_cast<std::uint64_t>(i);
        RngStream init_rng(cfg.seed, 1);
        FitResult res = fit(build_model(spec, init_rng), resample, val, cfg,
                            SnapshotPolicy{false, 0});
        Checkpoint ckpt = snapshot(res.best, CheckpointMeta{cfg.seed, res.history.best_epoch,
                                                            static_cast<float>(res.history.best_val_favg),
                                                            "scratch"});
        members.push_back(std::move(ckpt));
    }
    BaggingResult out;
    out.pool = build_pool({}, members, val);
    Ensemble e;
    e.groups.emplace_back();
    for (const auto& m : out.pool.members) e.groups[0].push_back(m.id);
    out.ensemble = std::move(e);
    return out;
}

}  // namespace texnet
