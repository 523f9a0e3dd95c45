#include "texnet/transfer.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "texnet/error.hpp"

namespace texnet {

Model transfer_layers(const Checkpoint& source, int n, int target_classes, RngStream& rng,
                      const ArchitectureSpec* target_spec) {
    if (n < 0 || n > kMaxTransferDepth) {
        throw ValueError("transfer depth must be in 0.." + std::to_string(kMaxTransferDepth));
    }
    ArchitectureSpec spec = target_spec ? *target_spec : source.spec;
    spec.num_classes = target_classes;
    Model model = build_model(spec, rng);
    for (int layer = 0; layer < n; ++layer) {
        for (int part = 0; part < 2; ++part) {
            const auto& [name, blob] = source.layers[2 * layer + part];
            Tensor& dst = model.params()[2 * layer + part];
            if (blob.shape != dst.shape) {
                throw ShapeError("transfer_layers: source layer " + name + " has shape " +
                                 blob.shape_str() + ", target expects " + dst.shape_str());
            }
            dst.data = blob.data;
        }
    }
    return model;
}

std::string SweepReport::to_csv() const {
    std::ostringstream out;
    out << "source,n,seed,val_favg,test_favg\n";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "scratch,0,0,%.9g,%.9g\n", scratch_val, scratch_test);
    out << buf;
    for (const auto& c : cells) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%llu,%.9g,%.9g\n", c.source.c_str(), c.n,
                      static_cast<unsigned long long>(c.seed), c.val_favg, c.test_favg);
        out << buf;
    }
    return out.str();
}

std::string SweepReport::means_to_csv() const {
    std::map<std::pair<std::string, int>, std::pair<double, double>> sums;
    std::map<std::pair<std::string, int>, int> counts;
    for (const auto& c : cells) {
        auto key = std::make_pair(c.source, c.n);
        sums[key].first += c.val_favg;
        sums[key].second += c.test_favg;
        ++counts[key];
    }
    std::ostringstream out;
    out << "source,n,mean_val_favg,mean_test_favg\n";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "scratch,0,%.9g,%.9g\n", scratch_val, scratch_test);
    out << buf;
    for (const auto& [key, sum] : sums) {
        const int n = counts[key];
        std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g\n", key.first.c_str(), key.second,
                      sum.first / n, sum.second / n);
        out << buf;
    }
    return out.str();
}

double SweepReport::mean_test(const std::string& source, int n) const {
    double sum = 0.0;
    int count = 0;
    for (const auto& c : cells) {
        if (c.source == source && c.n == n) {
            sum += c.test_favg;
            ++count;
        }
    }
    if (count == 0) throw ValueError("sweep has no cell for (" + source + ", " + std::to_string(n) + ")");
    return sum / count;
}

SweepReport depth_sweep(const std::vector<std::pair<std::string, Checkpoint>>& sources,
                        const PatchSet& target_train, const PatchSet& target_val,
                        const PatchSet& target_test, const DepthSweepPlan& plan,
                        std::vector<FitResult>* artifacts) {
    if (sources.empty()) throw ValueError("depth_sweep: no source checkpoints");
    SweepReport report;

    // Shared scratch baseline at the base seed.
    {
        const int classes = static_cast<int>(target_train.num_classes);
        ArchitectureSpec spec = sources.front().second.spec;
        spec.num_classes = classes;
        RngStream rng(plan.finetune.seed, 1);
        Model scratch = build_model(spec, rng);
        FitResult res = fit(std::move(scratch), target_train, target_val, plan.finetune);
        report.scratch_val = res.history.best_val_favg;
        report.scratch_test = evaluate_favg(res.best, target_test);
        if (artifacts) artifacts->push_back(std::move(res));
    }

    for (const auto& [name, ckpt] : sources) {
        for (int n : plan.depths) {
            if (n < 1 || n > kMaxTransferDepth) {
                throw ValueError("depth_sweep: depth " + std::to_string(n) + " out of range");
            }
            for (int rep = 0; rep < plan.repetitions; ++rep) {
                TrainConfig cfg = plan.finetune;
                cfg.seed = plan.finetune.seed + static_cast<std::uint64_t>(rep);
                cfg.freeze_prefix_layers = plan.freeze_transferred ? n : 0;
                RngStream rng(cfg.seed, 1);
                try {
                    Model m = transfer_layers(ckpt, n, target_train.num_classes, rng);
                    FitResult res = fit(std::move(m), target_train, target_val, cfg);
                    SweepCell cell{name, n, cfg.seed, res.history.best_val_favg,
                                   evaluate_favg(res.best, target_test)};
                    report.cells.push_back(cell);
                    if (artifacts) artifacts->push_back(std::move(res));
                } catch (const Error& e) {
                    throw Error("depth_sweep failed at (source=" + name + ", n=" +
                                std::to_string(n) + ", seed=" + std::to_string(cfg.seed) +
                                "): " + e.what());
                }
            }
        }
    }
    return report;
}

}  // namespace texnet
