#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>

#include "doctest.h"
#include "texnet/error.hpp"
#include "texnet/rng.hpp"
#include "texnet/tensor.hpp"

using namespace texnet;

TEST_CASE("same (seed, stream) reproduces the identical sequence") {
    RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    bool same_c = true, same_d = true;
    for (int i = 0; i < 1000; ++i) {
        const auto va = a.next_u64();
        CHECK(va == b.next_u64());
        same_c = same_c && va == c.next_u64();
        same_d = same_d && va == d.next_u64();
    }
    CHECK_FALSE(same_c);  // distinct streams diverge
    CHECK_FALSE(same_d);  // distinct seeds diverge
}

TEST_CASE("uniform01 stays in [0,1) and is roughly uniform") {
    RngStream rng(1, 0);
    double sum = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double v = rng.uniform01();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        sum += v;
    }
    CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("shuffle permutes and sample_without_replacement draws distinct indices") {
    RngStream rng(9, 3);
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    auto sorted = v;
    rng.shuffle(v);
    auto resorted = v;
    std::sort(resorted.begin(), resorted.end());
    CHECK(resorted == sorted);

    const auto picks = rng.sample_without_replacement(100, 10);
    CHECK(picks.size() == 10);
    std::set<std::size_t> unique(picks.begin(), picks.end());
    CHECK(unique.size() == 10);
    for (auto p : picks) CHECK(p < 100);
    CHECK(rng.sample_without_replacement(5, 5).size() == 5);
    CHECK(rng.sample_without_replacement(3, 4).size() == 3);  // clamped to the population
}

TEST_CASE("tensor shape/data coherence and gradient buffers") {
    Tensor t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(Tensor::numel({2, 3, 4}) == 24);
    CHECK(t.rank() == 3);
    CHECK_FALSE(t.has_grad());
    t.alloc_grad();
    CHECK(t.grad.size() == 24);
    t.grad[5] = 3.0f;
    t.zero_grad();
    CHECK(t.grad[5] == 0.0f);
    CHECK(t.shape_str() == "[2x3x4]");
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0f, 2.0f, 3.0f}), ShapeError);
}

TEST_CASE("check_finite names the offending site") {
    Tensor t({2}, {1.0f, 2.0f});
    CHECK_NOTHROW(check_finite(t, "ok"));
    t.data[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_WITH_AS(check_finite(t, "conv-out"), doctest::Contains("conv-out"), ValueError);
    t.data[1] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(check_finite(t, "conv-out"), ValueError);
}
