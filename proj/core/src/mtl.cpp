#include "texnet/mtl.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <utility>

#include "texnet/error.hpp"

namespace texnet {

namespace {

constexpr int kTrunkTensors = 14;  // conv1..conv5 + dense1..dense2, weight+bias each

std::vector<float> one_hot(const PatchSet& set, int num_classes) {
    std::vector<float> targets(set.count() * num_classes, 0.0f);
    for (std::size_t i = 0; i < set.count(); ++i) {
        targets[i * num_classes + set.labels[i]] = 1.0f;
    }
    return targets;
}

Model assemble(const MtlModel& mtl, int task) {
    ArchitectureSpec spec = mtl.base_spec;
    spec.num_classes = mtl.task_classes[task];
    std::vector<Tensor> params(mtl.trunk.begin(), mtl.trunk.end());
    params.push_back(mtl.heads[task][0]);
    params.push_back(mtl.heads[task][1]);
    return Model(spec, std::move(params));
}

void absorb(MtlModel& mtl, int task, const Model& model) {
    for (int i = 0; i < kTrunkTensors; ++i) mtl.trunk[i].data = model.params()[i].data;
    mtl.heads[task][0].data = model.params()[kTrunkTensors].data;
    mtl.heads[task][1].data = model.params()[kTrunkTensors + 1].data;
}

struct TaskState {
    AdamState head_adam;       // moments for the two head tensors
    RngStream shuffle_rng;
    RngStream dropout_rng;
    std::vector<float> targets;
};

}  // namespace

int mtl_task_for_epoch(int epoch, int num_sources) {
    if (epoch < 1 || num_sources < 1) throw ValueError("mtl_task_for_epoch: bad arguments");
    if (epoch % 2 == 1) return -1;
    return (epoch / 2 - 1) % num_sources;
}

std::string MtlResult::schedule_csv() const {
    std::ostringstream out;
    out << "epoch,task,train_loss,target_val_favg\n";
    char buf[128];
    for (const auto& r : schedule) {
        if (r.target_val_favg >= 0.0) {
            std::snprintf(buf, sizeof(buf), "%d,%s,%.9g,%.9g\n", r.epoch, r.task.c_str(),
                          r.train_loss, r.target_val_favg);
        } else {
            std::snprintf(buf, sizeof(buf), "%d,%s,%.9g,\n", r.epoch, r.task.c_str(), r.train_loss);
        }
        out << buf;
    }
    return out.str();
}

MtlResult mtl_train(const ArchitectureSpec& spec, const MtlTask& target,
                    const std::vector<MtlTask>& sources, const TrainConfig& config) {
    config.validate();
    if (sources.empty()) throw ValueError("mtl_train: need at least one source task");
    const int num_tasks = 1 + static_cast<int>(sources.size());
    auto task_of = [&](int t) -> const MtlTask& { return t == 0 ? target : sources[t - 1]; };
    for (int t = 0; t < num_tasks; ++t) {
        if (task_of(t).train.count() == 0) {
            throw ValueError("mtl_train: task '" + task_of(t).name + "' has an empty training split");
        }
    }

    // Shared trunk from a target-shaped model; source heads are initialized
    // from the same init stream, in registry order.
    MtlModel mtl;
    mtl.base_spec = spec;
    RngStream init_rng(config.seed, 1);
    {
        ArchitectureSpec target_spec = spec;
        target_spec.num_classes = target.train.num_classes;
        Model seed_model = build_model(target_spec, init_rng);
        mtl.trunk.assign(seed_model.params().begin(), seed_model.params().begin() + kTrunkTensors);
        mtl.heads.push_back({seed_model.params()[kTrunkTensors],
                             seed_model.params()[kTrunkTensors + 1]});
        mtl.task_names.push_back(target.name);
        mtl.task_classes.push_back(target.train.num_classes);
    }
    for (const auto& src : sources) {
        const std::size_t fan_in = mtl.trunk[kTrunkTensors - 2].dim(0);  // dense2 width
        const std::size_t width = static_cast<std::size_t>(src.train.num_classes);
        Tensor w({width, fan_in}), b({width});
        const float limit = std::sqrt(6.0f / static_cast<float>(fan_in));
        for (auto& v : w.data) v = init_rng.uniform(-limit, limit);
        mtl.heads.push_back({std::move(w), std::move(b)});
        mtl.task_names.push_back(src.name);
        mtl.task_classes.push_back(src.train.num_classes);
    }

    AdamState trunk_adam;
    std::vector<TaskState> states;
    for (int t = 0; t < num_tasks; ++t) {
        states.push_back(TaskState{AdamState{},
                                   RngStream(config.seed, 200 + static_cast<std::uint64_t>(t)),
                                   RngStream(config.seed, 300 + static_cast<std::uint64_t>(t)),
                                   one_hot(task_of(t).train, task_of(t).train.num_classes)});
    }

    EarlyStopper stopper(config.patience_epochs, config.min_improvement,
                         config.relative_improvement);
    MtlResult result;
    result.best = mtl;
    const int num_sources = static_cast<int>(sources.size());

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const int src = mtl_task_for_epoch(epoch, num_sources);
        const int t = src < 0 ? 0 : src + 1;
        const MtlTask& task = task_of(t);

        Model model = assemble(mtl, t);
        model.alloc_grads();
        // Stitch trunk + head moments so Adam state persists across epochs.
        AdamState adam;
        if (trunk_adam.empty()) trunk_adam.init(std::vector<Tensor>(mtl.trunk.begin(), mtl.trunk.end()));
        if (states[t].head_adam.empty()) states[t].head_adam.init(mtl.heads[t]);
        adam.m = trunk_adam.m;
        adam.v = trunk_adam.v;
        adam.t = trunk_adam.t;
        adam.m.insert(adam.m.end(), states[t].head_adam.m.begin(), states[t].head_adam.m.end());
        adam.v.insert(adam.v.end(), states[t].head_adam.v.begin(), states[t].head_adam.v.end());
        adam.t.insert(adam.t.end(), states[t].head_adam.t.begin(), states[t].head_adam.t.end());

        const double loss = train_one_epoch(model, task.train, states[t].targets, adam, config,
                                            states[t].shuffle_rng, states[t].dropout_rng);

        trunk_adam.m.assign(adam.m.begin(), adam.m.begin() + kTrunkTensors);
        trunk_adam.v.assign(adam.v.begin(), adam.v.begin() + kTrunkTensors);
        trunk_adam.t.assign(adam.t.begin(), adam.t.begin() + kTrunkTensors);
        states[t].head_adam.m.assign(adam.m.begin() + kTrunkTensors, adam.m.end());
        states[t].head_adam.v.assign(adam.v.begin() + kTrunkTensors, adam.v.end());
        states[t].head_adam.t.assign(adam.t.begin() + kTrunkTensors, adam.t.end());
        absorb(mtl, t, model);

        MtlEpochRecord rec{epoch, task.name, loss, -1.0};
        bool stop = false;
        if (t == 0) {
            const double val = evaluate_favg(assemble(mtl, 0), target.val);
            rec.target_val_favg = val;
            stop = stopper.observe(val);
            if (stopper.last_was_new_best()) result.best = mtl;
        }
        result.schedule.push_back(std::move(rec));
        if (stop) break;
    }
    result.final_state = std::move(mtl);
    result.best_target_val = stopper.best_score();
    return result;
}

Model extract_task_model(const MtlModel& mtl, int task_index) {
    if (task_index < 0 || task_index >= static_cast<int>(mtl.heads.size())) {
        throw ValueError("extract_task_model: task index out of range");
    }
    return assemble(mtl, task_index);
}

FitResult mtl_finetune(const MtlModel& mtl, const PatchSet& target_train,
                       const PatchSet& target_val, const TrainConfig& config) {
    Model model = extract_task_model(mtl, 0);
    return fit(std::move(model), target_train, target_val, config);
}

}  // namespace texnet
