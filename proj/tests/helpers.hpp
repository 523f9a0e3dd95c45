// Shared test utilities: independent double-precision reference
// implementations used as oracles, plus small data builders. These are
// deliberately written as naive loops, separate from the library code.
#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "texnet/data.hpp"
#include "texnet/metrics.hpp"
#include "texnet/model.hpp"

namespace testref {

// ---- double-precision reference ops ----------------------------------------

using Vec = std::vector<double>;

inline Vec to_d(const std::vector<float>& v) { return Vec(v.begin(), v.end()); }

// x: C x H x W, w: K x C x 2 x 2, b: K -> K x (H-1) x (W-1)
inline Vec ref_conv2d(const Vec& x, const Vec& w, const Vec& b, int c, int h, int wd, int k) {
    const int oh = h - 1, ow = wd - 1;
    Vec out(static_cast<std::size_t>(k) * oh * ow, 0.0);
    for (int kc = 0; kc < k; ++kc)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                double acc = b[kc];
                for (int ci = 0; ci < c; ++ci)
                    for (int di = 0; di < 2; ++di)
                        for (int dj = 0; dj < 2; ++dj)
                            acc += w[((static_cast<std::size_t>(kc) * c + ci) * 2 + di) * 2 + dj] *
                                   x[(static_cast<std::size_t>(ci) * h + i + di) * wd + j + dj];
                out[(static_cast<std::size_t>(kc) * oh + i) * ow + j] = acc;
            }
    return out;
}

inline Vec ref_leaky(const Vec& x, double alpha) {
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0 ? x[i] : alpha * x[i];
    return out;
}

inline Vec ref_gap(const Vec& x, int c, int h, int w) {
    Vec out(c, 0.0);
    for (int ci = 0; ci < c; ++ci) {
        double acc = 0.0;
        for (int i = 0; i < h * w; ++i) acc += x[static_cast<std::size_t>(ci) * h * w + i];
        out[ci] = acc / (h * w);
    }
    return out;
}

inline Vec ref_dense(const Vec& x, const Vec& w, const Vec& b, int m, int n) {
    Vec out(m, 0.0);
    for (int i = 0; i < m; ++i) {
        double acc = b[i];
        for (int j = 0; j < n; ++j) acc += w[static_cast<std::size_t>(i) * n + j] * x[j];
        out[i] = acc;
    }
    return out;
}

inline Vec ref_softmax(const Vec& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    Vec p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) sum += (p[i] = std::exp(z[i] - mx));
    for (double& v : p) v /= sum;
    return p;
}

inline double ref_xent(const Vec& probs, const Vec& target) {
    double loss = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        loss -= target[i] * std::log(std::max(probs[i], 1e-12));
    }
    return loss;
}

// Full-network double forward matching the library's family: five 2x2 conv +
// leaky layers, GAP, dense1+relu, dense2+relu, dense3, softmax xent.
// Dropout is identity (inference semantics). Params in weight/bias pairs.
inline double ref_net_loss(const texnet::ArchitectureSpec& spec, const std::vector<Vec>& params,
                           const Vec& patch, const Vec& target) {
    Vec x = patch;
    int c = spec.input_c, h = spec.input_h, w = spec.input_w;
    for (int layer = 1; layer <= spec.conv_layers; ++layer) {
        const int k = spec.conv_channels(layer);
        x = ref_leaky(ref_conv2d(x, params[2 * (layer - 1)], params[2 * (layer - 1) + 1], c, h, w, k),
                      spec.leaky_alpha);
        c = k;
        --h;
        --w;
    }
    x = ref_gap(x, c, h, w);
    const int base = 2 * spec.conv_layers;
    x = ref_leaky(ref_dense(x, params[base], params[base + 1], spec.dense1, c), 0.0);
    x = ref_leaky(ref_dense(x, params[base + 2], params[base + 3], spec.dense2, spec.dense1), 0.0);
    x = ref_dense(x, params[base + 4], params[base + 5], spec.num_classes, spec.dense2);
    return ref_xent(ref_softmax(x), target);
}

inline std::vector<Vec> params_to_d(const texnet::Model& m) {
    std::vector<Vec> out;
    for (const auto& t : m.params()) out.push_back(to_d(t.data));
    return out;
}

inline double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / denom;
}

// ---- brute-force F_avg ------------------------------------------------------

inline double brute_favg(const std::vector<int>& preds, const std::vector<int>& actual, int k) {
    double total = 0.0;
    for (int c = 0; c < k; ++c) {
        long tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (preds[i] == c && actual[i] == c) ++tp;
            if (preds[i] == c && actual[i] != c) ++fp;
            if (preds[i] != c && actual[i] == c) ++fn;
        }
        const double prec = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double rec = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
        if (prec + rec > 0) total += 2.0 * prec * rec / (prec + rec);
    }
    return total / k;
}

// ---- reference early stopping ----------------------------------------------

struct RefStopResult {
    int stop_epoch;  // number of epochs consumed (== sequence length if no stop)
    int best_index;  // 0-based index of the best score, earliest on ties
};

// Rule: track the running best; an epoch "improves" iff its score is at least
// best + delta (or best * (1 + delta) in relative mode). After `patience`
// consecutive non-improving epochs, stop.
inline RefStopResult ref_early_stop(const std::vector<double>& scores, int patience, double delta,
                                    bool relative = false) {
    double best = 0.0;
    int best_idx = -1, run = 0, used = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        ++used;
        const bool first = best_idx < 0;
        const double bar = relative ? best * (1.0 + delta) : best + delta;
        if (first || scores[i] >= bar) {
            run = 0;
        } else {
            ++run;
        }
        if (first || scores[i] > best) {
            best = scores[i];
            best_idx = static_cast<int>(i);
        }
        if (run >= patience) break;
    }
    return {used, best_idx};
}

// ---- brute-force greedy ensemble selection ----------------------------------

// Naive greedy over probability matrices: start with the n_init best singles
// (by F_avg, ties -> lower index), then repeatedly re-average the whole
// multiset for every candidate and take the strict best (ties -> lower index).
inline std::vector<int> brute_greedy(const std::vector<std::vector<float>>& mats,
                                     const std::vector<int>& labels, int k, int n_init,
                                     int max_size) {
    const std::size_t n = labels.size();
    auto favg_of_multiset = [&](const std::vector<int>& ids) {
        std::vector<double> mean(n * k, 0.0);
        for (int id : ids)
            for (std::size_t i = 0; i < n * k; ++i) mean[i] += mats[id][i];
        std::vector<int> preds(n);
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            for (int c = 1; c < k; ++c)
                if (mean[i * k + c] > mean[i * k + best]) best = c;
            preds[i] = best;
        }
        return brute_favg(preds, labels, k);
    };

    std::vector<int> order(mats.size());
    for (std::size_t i = 0; i < mats.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double fa = favg_of_multiset({a}), fb = favg_of_multiset({b});
        if (fa != fb) return fa > fb;
        return a < b;
    });
    std::vector<int> ens(order.begin(), order.begin() + n_init);
    double current = favg_of_multiset(ens);
    while (static_cast<int>(ens.size()) < max_size) {
        int best_id = -1;
        double best_score = current;
        for (std::size_t id = 0; id < mats.size(); ++id) {
            std::vector<int> trial = ens;
            trial.push_back(static_cast<int>(id));
            const double s = favg_of_multiset(trial);
            if (s > best_score) {
                best_score = s;
                best_id = static_cast<int>(id);
            }
        }
        if (best_id < 0) break;
        ens.push_back(best_id);
        current = best_score;
    }
    return ens;
}

// ---- tiny data builders ------------------------------------------------------

// Linearly separable two-class patches: class 0 bright left half, class 1
// bright right half, plus small noise.
inline texnet::PatchSet separable_patches(int per_class, std::uint64_t seed,
                                          texnet::SplitTag tag = texnet::SplitTag::Train) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<float> noise(0.0f, 0.1f);
    texnet::PatchSet set;
    set.num_classes = 2;
    std::vector<float> patch(32 * 32);
    for (int cls = 0; cls < 2; ++cls) {
        for (int i = 0; i < per_class; ++i) {
            for (int r = 0; r < 32; ++r)
                for (int c = 0; c < 32; ++c) {
                    const bool bright = cls == 0 ? c < 16 : c >= 16;
                    patch[r * 32 + c] = (bright ? 0.8f : 0.1f) + noise(gen);
                }
            set.append(patch.data(), static_cast<std::uint16_t>(cls), tag);
        }
    }
    return set;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testref
