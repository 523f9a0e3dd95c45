#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "helpers.hpp"
#include "texnet/error.hpp"
#include "texnet/mtl.hpp"

using namespace texnet;

namespace {

ArchitectureSpec tiny_spec(int classes = 2) {
    ArchitectureSpec spec;
    spec.k = 1;
    spec.dense1 = 8;
    spec.dense2 = 6;
    spec.num_classes = classes;
    return spec;
}

MtlTask make_task(const std::string& name, std::uint64_t seed) {
    return MtlTask{name, testref::separable_patches(6, seed),
                   testref::separable_patches(3, seed + 1, SplitTag::Val)};
}

TrainConfig quick_config(int epochs, std::uint64_t seed = 13) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.max_epochs = epochs;
    cfg.batch_size = 8;
    return cfg;
}

}  // namespace

TEST_CASE("epoch schedule: odd epochs target, even epochs cycle sources") {
    // With 3 sources the first 8 epochs read [T, S1, T, S2, T, S3, T, S1].
    const std::vector<int> expected{-1, 0, -1, 1, -1, 2, -1, 0};
    for (int e = 1; e <= 8; ++e) CHECK(mtl_task_for_epoch(e, 3) == expected[e - 1]);
    CHECK(mtl_task_for_epoch(10, 3) == 1);  // the cycle continues
    CHECK(mtl_task_for_epoch(1, 1) == -1);
    CHECK(mtl_task_for_epoch(2, 1) == 0);
    CHECK(mtl_task_for_epoch(4, 1) == 0);
    CHECK_THROWS_AS(mtl_task_for_epoch(0, 3), ValueError);
    CHECK_THROWS_AS(mtl_task_for_epoch(1, 0), ValueError);
}

TEST_CASE("logged schedule for 3 sources begins [T,S1,T,S2,T,S3,T,S1]") {
    const MtlTask target = make_task("target", 100);
    const std::vector<MtlTask> sources{make_task("s1", 200), make_task("s2", 300),
                                       make_task("s3", 400)};
    TrainConfig cfg = quick_config(8);
    const MtlResult res = mtl_train(tiny_spec(), target, sources, cfg);
    REQUIRE(res.schedule.size() == 8);
    const std::vector<std::string> expected{"target", "s1", "target", "s2",
                                            "target", "s3", "target", "s1"};
    for (int i = 0; i < 8; ++i) CHECK(res.schedule[i].task == expected[i]);
    for (int i = 0; i < 8; ++i) CHECK(res.schedule[i].epoch == i + 1);
    // Validation is recorded on target epochs only.
    for (int i = 0; i < 8; ++i) {
        if (expected[i] == "target") {
            CHECK(res.schedule[i].target_val_favg >= 0.0);
        } else {
            CHECK(res.schedule[i].target_val_favg == -1.0);
        }
    }
    const std::string csv = res.schedule_csv();
    CHECK(csv.rfind("epoch,task,", 0) == 0);
}

TEST_CASE("the trunk is shared: every task view exposes identical trunk weights") {
    const MtlTask target = make_task("target", 110);
    const std::vector<MtlTask> sources{make_task("s1", 210), make_task("s2", 310)};
    const MtlResult res = mtl_train(tiny_spec(), target, sources, quick_config(5));
    REQUIRE(res.best.trunk.size() == 14);  // 5 conv + 2 dense layers, weight+bias each
    for (int task = 0; task <= 2; ++task) {
        const Model view = extract_task_model(res.best, task);
        for (int i = 0; i < 14; ++i) {
            CHECK(view.params()[i].data == res.best.trunk[i].data);
        }
        // The head is the task's own final layer.
        CHECK(view.params()[14].data == res.best.heads[task][0].data);
        CHECK(view.params()[15].data == res.best.heads[task][1].data);
    }
}

TEST_CASE("training one task never alters another task's head") {
    const MtlTask target = make_task("target", 120);
    const std::vector<MtlTask> sources{make_task("s1", 220), make_task("s2", 320)};
    const ArchitectureSpec spec = tiny_spec();

    // Run A trains epoch 1 (target only); run B adds epoch 2 (s1 only); run C
    // adds epoch 3 (target again). Same seed -> identical initialization and
    // identical shared prefixes, so any divergence is a cross-head write.
    const MtlModel a = mtl_train(spec, target, sources, quick_config(1)).final_state;
    const MtlModel b = mtl_train(spec, target, sources, quick_config(2)).final_state;
    const MtlModel c = mtl_train(spec, target, sources, quick_config(3)).final_state;

    CHECK(a.heads[1][0].data != b.heads[1][0].data);  // s1 trained in epoch 2
    CHECK(a.heads[2][0].data == b.heads[2][0].data);  // s2 untouched by T,S1
    CHECK(b.heads[2][0].data == c.heads[2][0].data);  // s2 untouched by T,S1,T
    CHECK(a.heads[0][0].data == b.heads[0][0].data);  // target head untouched by S1 epoch
    CHECK(a.heads[0][0].data != c.heads[0][0].data);  // target head trained again in epoch 3
    CHECK(a.trunk[0].data != b.trunk[0].data);        // the trunk trains every epoch
}

TEST_CASE("mtl early stopping watches target epochs and returns the best view") {
    const MtlTask target = make_task("target", 130);
    const std::vector<MtlTask> sources{make_task("s1", 230)};
    TrainConfig cfg = quick_config(30);
    cfg.patience_epochs = 3;
    const MtlResult res = mtl_train(tiny_spec(), target, sources, cfg);
    CHECK(res.best_target_val >= 0.0);
    CHECK(res.best_target_val <= 1.0);
    double best_seen = 0.0;
    for (const auto& rec : res.schedule) {
        if (rec.target_val_favg >= 0.0) best_seen = std::max(best_seen, rec.target_val_favg);
    }
    CHECK(res.best_target_val == doctest::Approx(best_seen));

    // Fine-tuning the extracted target model is a plain fit.
    const FitResult fin = mtl_finetune(res.best, target.train, target.val, quick_config(2));
    CHECK(fin.history.epochs.size() <= 2);
    CHECK(evaluate_favg(fin.best, target.val) == doctest::Approx(fin.history.best_val_favg));
}

TEST_CASE("mtl input validation") {
    const MtlTask target = make_task("target", 140);
    CHECK_THROWS_AS(mtl_train(tiny_spec(), target, {}, quick_config(1)), ValueError);
    MtlTask empty{"empty", PatchSet{}, PatchSet{}};
    empty.train.num_classes = 2;
    empty.val.num_classes = 2;
    CHECK_THROWS_AS(mtl_train(tiny_spec(), target, {empty}, quick_config(1)), ValueError);
}

TEST_CASE("extract_task_model forward equals the mtl view bit-exactly") {
    const MtlTask target = make_task("target", 150);
    const std::vector<MtlTask> sources{make_task("s1", 250)};
    const MtlResult res = mtl_train(tiny_spec(), target, sources, quick_config(3));
    const Model view = extract_task_model(res.best, 0);
    const double favg = evaluate_favg(view, target.val);
    CHECK(favg == doctest::Approx(res.best_target_val));
    CHECK_THROWS_AS(extract_task_model(res.best, 7), ValueError);
}
