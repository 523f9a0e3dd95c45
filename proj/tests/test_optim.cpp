#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "texnet/error.hpp"
#include "texnet/optim.hpp"

using namespace texnet;

TEST_CASE("adam first step on a scalar parameter") {
    std::vector<Tensor> params;
    params.emplace_back(std::vector<std::size_t>{1}, std::vector<float>{0.0f});
    params[0].alloc_grad();
    params[0].grad[0] = 1.0f;
    AdamState state;
    state.init(params);
    TrainConfig cfg;
    adam_step(params, state, cfg);
    // Bias-corrected first step is -lr * g/(|g| + eps') which is about -lr.
    CHECK(params[0][0] == doctest::Approx(-0.001f).epsilon(1e-3));

    SUBCASE("zero gradient forever leaves the parameter unchanged") {
        const float frozen = params[0][0];
        for (int i = 0; i < 50; ++i) {
            params[0].grad[0] = 0.0f;
            adam_step(params, state, cfg);
        }
        // The stale first moment decays geometrically (factor beta1), so the
        // total residual drift is bounded by roughly lr / (1 - beta1).
        CHECK(std::abs(params[0][0] - frozen) < 0.015f);
    }
}

TEST_CASE("adam determinism and error paths") {
    auto run = [] {
        std::vector<Tensor> params;
        params.emplace_back(std::vector<std::size_t>{4},
                            std::vector<float>{0.1f, -0.2f, 0.3f, -0.4f});
        params[0].alloc_grad();
        AdamState state;
        state.init(params);
        TrainConfig cfg;
        RngStream rng(77, 0);
        for (int step = 0; step < 25; ++step) {
            for (auto& g : params[0].grad) g = rng.uniform(-1.0f, 1.0f);
            adam_step(params, state, cfg);
        }
        return params[0].data;
    };
    CHECK(run() == run());

    std::vector<Tensor> params;
    params.emplace_back(std::vector<std::size_t>{2});
    AdamState state;
    state.init(params);
    TrainConfig cfg;
    CHECK_THROWS_AS(adam_step(params, state, cfg), ShapeError);  // no grad allocated
}

TEST_CASE("adam skips frozen prefix layers") {
    std::vector<Tensor> params;
    for (int i = 0; i < 4; ++i) {  // two layers: (w,b),(w,b)
        params.emplace_back(std::vector<std::size_t>{2}, std::vector<float>{1.0f, 1.0f});
        params.back().alloc_grad();
        params.back().grad = {1.0f, 1.0f};
    }
    AdamState state;
    state.init(params);
    TrainConfig cfg;
    cfg.freeze_prefix_layers = 1;
    adam_step(params, state, cfg);
    CHECK(params[0].data == std::vector<float>{1.0f, 1.0f});  // layer 1 frozen
    CHECK(params[1].data == std::vector<float>{1.0f, 1.0f});
    CHECK(params[2][0] != 1.0f);  // layer 2 stepped
    CHECK(params[3][0] != 1.0f);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ValueError);
    cfg = {};
    cfg.patience_epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ValueError);
    cfg = {};
    cfg.min_improvement = -0.1f;
    CHECK_THROWS_AS(cfg.validate(), ValueError);
    cfg = {};
    cfg.max_epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ValueError);
}

TEST_CASE("early stopper: frozen score stops exactly patience epochs after the last improvement") {
    EarlyStopper stop(5, 0.005f);
    CHECK_FALSE(stop.observe(0.5));  // first epoch establishes the best
    int epochs = 1;
    bool stopped = false;
    for (int i = 0; i < 20 && !stopped; ++i) {
        stopped = stop.observe(0.5);  // frozen: never improves by >= 0.005
        ++epochs;
    }
    CHECK(stopped);
    CHECK(epochs == 6);  // 1 improvement epoch + 5 stale epochs
    CHECK(stop.best_epoch() == 0);
    CHECK(stop.best_score() == doctest::Approx(0.5));
}

TEST_CASE("early stopper: sub-threshold gains don't reset the counter but can update the best") {
    EarlyStopper stop(3, 0.01f);
    CHECK_FALSE(stop.observe(0.50));
    CHECK_FALSE(stop.observe(0.505));  // better, but below the improvement bar
    CHECK_FALSE(stop.observe(0.506));
    CHECK(stop.observe(0.507));  // third consecutive stale epoch -> stop
    CHECK(stop.best_epoch() == 3);  // best tracks the max regardless
    CHECK(stop.best_score() == doctest::Approx(0.507));
}

TEST_CASE("early stopper matches the reference on random sequences") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const int patience = 1 + static_cast<int>(gen() % 8);
        const float delta = static_cast<float>(gen() % 3) * 0.004f;
        const bool relative = (gen() % 2) == 0;
        const int len = 2 + static_cast<int>(gen() % 120);
        std::vector<double> scores(len);
        double walk = uni(gen);
        for (auto& s : scores) {
            walk += (uni(gen) - 0.45) * 0.05;
            s = std::clamp(walk, 0.0, 1.0);
            if (gen() % 10 == 0) s = uni(gen);  // occasional jumps
        }
        const auto ref = testref::ref_early_stop(scores, patience, delta, relative);
        EarlyStopper stop(patience, delta, relative);
        int used = 0;
        for (double s : scores) {
            ++used;
            if (stop.observe(s)) break;
        }
        CHECK(used == ref.stop_epoch);
        CHECK(stop.best_epoch() == ref.best_index);
    }
}

TEST_CASE("fit on a linearly separable toy task reaches validation F_avg 1.0") {
    ArchitectureSpec spec;
    spec.k = 1;
    spec.dense1 = 8;
    spec.dense2 = 8;
    spec.num_classes = 2;
    TrainConfig cfg;
    cfg.seed = 5;
    cfg.max_epochs = 12;
    cfg.batch_size = 8;
    const PatchSet train = testref::separable_patches(12, 1);
    const PatchSet val = testref::separable_patches(6, 2, SplitTag::Val);
    RngStream rng(cfg.seed, 1);
    FitResult res = fit(build_model(spec, rng), train, val, cfg);
    CHECK(res.history.best_val_favg == doctest::Approx(1.0));
    CHECK(evaluate_favg(res.best, val) == doctest::Approx(1.0));
    // Best-model return: the returned model reproduces the history's best.
    CHECK(res.history.best_epoch >= 1);
    CHECK(res.history.epochs[res.history.best_epoch - 1].val_favg ==
          doctest::Approx(res.history.best_val_favg));
    // History CSV shape.
    const std::string csv = res.history.to_csv();
    CHECK(csv.rfind("epoch,train_loss,val_favg,is_best\n", 0) == 0);
}

TEST_CASE("fit caps at max_epochs=1 and validates inputs") {
    ArchitectureSpec spec;
    spec.k = 1;
    spec.dense1 = 4;
    spec.dense2 = 4;
    spec.num_classes = 2;
    TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.batch_size = 4;
    const PatchSet train = testref::separable_patches(4, 3);
    const PatchSet val = testref::separable_patches(2, 4, SplitTag::Val);
    RngStream rng(1, 1);
    FitResult res = fit(build_model(spec, rng), train, val, cfg);
    CHECK(res.history.epochs.size() == 1);

    PatchSet empty;
    empty.num_classes = 2;
    RngStream rng2(1, 1);
    CHECK_THROWS_AS(fit(build_model(spec, rng2), empty, val, cfg), ValueError);
    PatchSet bad = train;
    for (auto& l : bad.labels) l = 5;  // out of range for a 2-class model
    bad.num_classes = 6;
    RngStream rng3(1, 1);
    CHECK_THROWS_AS(fit(build_model(spec, rng3), bad, val, cfg), ValueError);
}

TEST_CASE("fit is bit-deterministic for a fixed seed") {
    ArchitectureSpec spec;
    spec.k = 1;
    spec.dense1 = 6;
    spec.dense2 = 6;
    spec.num_classes = 2;
    TrainConfig cfg;
    cfg.seed = 99;
    cfg.max_epochs = 3;
    cfg.batch_size = 8;
    const PatchSet train = testref::separable_patches(8, 7);
    const PatchSet val = testref::separable_patches(4, 8, SplitTag::Val);
    auto run = [&] {
        RngStream rng(cfg.seed, 1);
        return fit(build_model(spec, rng), train, val, cfg);
    };
    const FitResult a = run(), b = run();
    REQUIRE(a.history.epochs.size() == b.history.epochs.size());
    for (std::size_t i = 0; i < a.history.epochs.size(); ++i) {
        CHECK(a.history.epochs[i].train_loss == b.history.epochs[i].train_loss);
        CHECK(a.history.epochs[i].val_favg == b.history.epochs[i].val_favg);
    }
    for (std::size_t i = 0; i < a.best.params().size(); ++i) {
        CHECK(a.best.params()[i].data == b.best.params()[i].data);
    }
}

TEST_CASE("snapshots record the most recent validation bests") {
    ArchitectureSpec spec;
    spec.k = 1;
    spec.dense1 = 8;
    spec.dense2 = 8;
    spec.num_classes = 2;
    TrainConfig cfg;
    cfg.seed = 11;
    cfg.max_epochs = 10;
    cfg.batch_size = 8;
    const PatchSet train = testref::separable_patches(12, 9);
    const PatchSet val = testref::separable_patches(6, 10, SplitTag::Val);
    RngStream rng(cfg.seed, 1);
    FitResult res = fit(build_model(spec, rng), train, val, cfg, SnapshotPolicy{true, 3});
    CHECK(res.snapshots.size() >= 1);
    CHECK(res.snapshots.size() <= 3);
    for (const auto& s : res.snapshots) CHECK(s.meta.lineage == "snapshot");
}
