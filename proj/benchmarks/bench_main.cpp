// Microbenchmarks for the hot paths: convolution forward/backward, a full
// network forward pass, one training epoch, and ensemble selection
// arithmetic. Run with --benchmark_filter=<regex> to narrow.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "texnet/data.hpp"
#include "texnet/ensemble.hpp"
#include "texnet/model.hpp"
#include "texnet/ops.hpp"
#include "texnet/optim.hpp"
#include "texnet/pipeline.hpp"

using namespace texnet;

namespace {

ArchitectureSpec default_arch(int classes = 7) {
    ArchitectureSpec spec;
    spec.num_classes = classes;
    return spec;
}

std::vector<float> random_pixels(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<float> uni(0.0f, 1.0f);
    std::vector<float> out(n);
    for (auto& v : out) v = uni(gen);
    return out;
}

void BM_Conv2dForward(benchmark::State& state) {
    const int c = (int)state.range(0);
    const int k = (int)state.range(1);
    const int h = 30, w = 30;
    Tensor x({(std::size_t)c, h, w}, random_pixels((std::size_t)c * h * w, 1));
    Tensor wt({(std::size_t)k, (std::size_t)c, 2, 2}, random_pixels((std::size_t)k * c * 4, 2));
    Tensor b({(std::size_t)k}, random_pixels(k, 3));
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d(x, wt, b));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Conv2dForward)->Args({16, 36})->Args({100, 144});

void BM_Conv2dBackward(benchmark::State& state) {
    const int c = (int)state.range(0);
    const int k = (int)state.range(1);
    const int h = 30, w = 30;
    Tensor x({(std::size_t)c, h, w}, random_pixels((std::size_t)c * h * w, 1));
    Tensor wt({(std::size_t)k, (std::size_t)c, 2, 2}, random_pixels((std::size_t)k * c * 4, 2));
    Tensor gout({(std::size_t)k, h - 1, w - 1}, random_pixels((std::size_t)k * (h - 1) * (w - 1), 4));
    Tensor gx(x.shape), gw(wt.shape), gb({(std::size_t)k});
    for (auto _ : state) {
        conv2d_backward(x, wt, gout, &gx, &gw, &gb);
        benchmark::DoNotOptimize(gx.data.data());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Conv2dBackward)->Args({16, 36})->Args({100, 144});

void BM_ModelForwardOne(benchmark::State& state) {
    ArchitectureSpec spec = default_arch();
    spec.k = (int)state.range(0);
    RngStream rng(1, 1);
    const Model model = build_model(spec, rng);
    const auto patch = random_pixels(32 * 32, 9);
    Workspace ws;
    for (auto _ : state) {
        model.forward_one(patch.data(), false, nullptr, ws);
        benchmark::DoNotOptimize(ws.probs.data());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ModelForwardOne)->Arg(1)->Arg(4);

void BM_TrainEpoch(benchmark::State& state) {
    ArchitectureSpec spec = default_arch(4);
    spec.k = 1;
    spec.dense1 = 32;
    spec.dense2 = 16;
    const PatchSet data = synth_texture_task(texture_preset("easy4", 32, 8, 8, 5));
    const PatchSet train = data.subset_by_split(SplitTag::Train);
    std::vector<float> targets(train.count() * 4, 0.0f);
    for (std::size_t i = 0; i < train.count(); ++i) targets[i * 4 + train.labels[i]] = 1.0f;
    TrainConfig cfg;
    cfg.batch_size = 32;
    RngStream init(1, 1), shuffle(1, 2), dropout(1, 3);
    Model model = build_model(spec, init);
    model.alloc_grads();
    AdamState adam;
    adam.init(model.params());
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            train_one_epoch(model, train, targets, adam, cfg, shuffle, dropout));
    }
    state.SetItemsProcessed(state.iterations() * train.count());
}
BENCHMARK(BM_TrainEpoch);

void BM_EnsembleSelection(benchmark::State& state) {
    const int k = 7;
    const std::size_t n = 1000, count = (std::size_t)state.range(0);
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<float> uni(0.01f, 1.0f);
    ModelPool pool;
    pool.num_classes = k;
    pool.val_labels.resize(n);
    for (auto& l : pool.val_labels) l = (int)(gen() % k);
    for (std::size_t i = 0; i < count; ++i) {
        PoolMember m;
        m.id = (int)i;
        m.name = "m" + std::to_string(i);
        m.val_probs.resize(n * k);
        for (std::size_t r = 0; r < n; ++r) {
            float sum = 0.0f;
            for (int c = 0; c < k; ++c) sum += (m.val_probs[r * k + c] = uni(gen));
            for (int c = 0; c < k; ++c) m.val_probs[r * k + c] /= sum;
        }
        m.val_favg = favg_of_probs(m.val_probs, pool.val_labels, k);
        pool.members.push_back(std::move(m));
    }
    SelectionConfig cfg;
    cfg.n_init = 2;
    cfg.m_subsets = 3;
    cfg.repeats = 2;
    cfg.seed = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(select_ensemble(pool, cfg));
    }
}
BENCHMARK(BM_EnsembleSelection)->Arg(8)->Arg(16);

}  // namespace

int main(int argc, char** argv) {
    set_compute_threads(1);
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    return 0;
}
