#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "texnet/rng.hpp"

namespace texnet {

inline constexpr int kPatchSize = 32;

enum class SplitTag : std::uint8_t { Train = 0, Val = 1, Test = 2 };

struct IntImage {
    int h = 0, w = 0;
    std::vector<std::int32_t> v;  // row-major
};

struct GrayImage {
    int h = 0, w = 0;
    std::vector<float> v;
};

struct MaskImage {
    int h = 0, w = 0;
    std::vector<std::uint8_t> v;  // nonzero = inside the annotated region
};

// Labeled 32x32 single-channel patches in [0,1], with optional split tags.
struct PatchSet {
    int height = kPatchSize;
    int width = kPatchSize;
    int num_classes = 0;
    std::vector<float> pixels;          // count * height * width
    std::vector<std::uint16_t> labels;  // per patch
    std::vector<std::uint8_t> split;    // per patch, empty if untagged
    std::vector<std::string> class_names;
    std::string provenance;

    std::size_t count() const { return labels.size(); }
    std::size_t patch_len() const { return static_cast<std::size_t>(height) * width; }
    const float* patch(std::size_t i) const { return pixels.data() + i * patch_len(); }
    bool has_split() const { return !split.empty(); }

    void append(const float* px, std::uint16_t label, SplitTag tag);
    PatchSet subset_by_split(SplitTag tag) const;
    std::vector<std::size_t> class_counts(SplitTag tag) const;  // over tagged entries (all if untagged)
    void validate() const;
};

// Clamp to [lo,hi] then map linearly onto [0,1].
GrayImage window_normalize(const IntImage& raw, int lo = -1000, int hi = 200);

// Non-overlapping 32x32 grid tiling anchored at the top-left corner; a tile
// is kept iff its fraction of mask-positive pixels is >= min_overlap.
std::vector<std::vector<float>> extract_patches(const GrayImage& image, const MaskImage& mask,
                                                int size = kPatchSize, double min_overlap = 0.8);

// The eight symmetries of the square. Rotations are counter-clockwise.
enum class D4 : int {
    Identity = 0, Rot90, Rot180, Rot270, FlipH, FlipV, Transpose, AntiTranspose
};
std::vector<float> apply_d4(const float* patch, int n, D4 t);
D4 d4_inverse(D4 t);

// Expands every train-tagged patch to its 8 D4 versions (identity + the 7
// non-identity transforms). Val/test entries pass through untouched.
PatchSet augment_d4(const PatchSet& set);

// Equalizes per-class train counts to the minimum class count by uniform
// subsampling without replacement; duplicates fill classes below an explicit
// larger target. Val/test entries pass through untouched.
PatchSet balance_classes(const PatchSet& set, RngStream& rng, std::size_t target = 0);

// Uniformly draws per-class val/test samples without replacement; the rest
// is tagged train.
PatchSet make_splits(const PatchSet& set, std::size_t per_class_val, std::size_t per_class_test,
                     RngStream& rng);

enum class TextureFamily : int { Grating = 0, Checker, Noise, Blobs };

struct ClassTextureSpec {
    TextureFamily family = TextureFamily::Grating;
    // Family parameters, sampled uniformly per patch:
    //   Grating: p0 = cycles across the patch, p1 = orientation (radians)
    //   Checker: p0 = cell size in pixels,     p1 = orientation jitter
    //   Noise:   p0 = octaves,                 p1 = persistence
    //   Blobs:   p0 = expected blob count,     p1 = blob radius in pixels
    float p0_lo = 0, p0_hi = 0, p1_lo = 0, p1_hi = 0;
};

struct TextureTaskSpec {
    std::string name = "task";
    int num_classes = 0;
    int train_per_class = 0;
    int val_per_class = 0;
    int test_per_class = 0;
    std::vector<ClassTextureSpec> classes;
    std::uint64_t seed = 0;

    void validate() const;
};

// Deterministic procedural texture task; per-patch RNG is derived from
// (seed, patch index) so generation order never matters.
PatchSet synth_texture_task(const TextureTaskSpec& spec);

// Built-in task presets used throughout the pipeline and its benchmarks.
//   easy4   - four well-separated families
//   hard7   - seven classes with overlapping parameter bands
//   source0..source2 - distinct pretraining tasks
TextureTaskSpec texture_preset(const std::string& name, int train_per_class, int val_per_class,
                               int test_per_class, std::uint64_t seed);

void write_patchset(const PatchSet& set, const std::string& path);
PatchSet read_patchset(const std::string& path);

// Binary PGM (P5), 8- or 16-bit.
IntImage read_pgm(const std::string& path);

GrayImage gray_from_rgb(const std::vector<float>& r, const std::vector<float>& g,
                        const std::vector<float>& b, int h, int w);

}  // namespace texnet
