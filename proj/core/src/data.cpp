#include "texnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "texnet/error.hpp"

namespace texnet {

void PatchSet::append(const float* px, std::uint16_t label, SplitTag tag) {
    pixels.insert(pixels.end(), px, px + patch_len());
    labels.push_back(label);
    split.push_back(static_cast<std::uint8_t>(tag));
}

PatchSet PatchSet::subset_by_split(SplitTag tag) const {
    PatchSet out;
    out.height = height;
    out.width = width;
    out.num_classes = num_classes;
    out.class_names = class_names;
    out.provenance = provenance;
    for (std::size_t i = 0; i < count(); ++i) {
        if (!has_split() || split[i] == static_cast<std::uint8_t>(tag)) {
            out.append(patch(i), labels[i], tag);
        }
    }
    return out;
}

std::vector<std::size_t> PatchSet::class_counts(SplitTag tag) const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (std::size_t i = 0; i < count(); ++i) {
        if (!has_split() || split[i] == static_cast<std::uint8_t>(tag)) ++counts[labels[i]];
    }
    return counts;
}

void PatchSet::validate() const {
    if (pixels.size() != count() * patch_len()) {
        throw ShapeError("patchset pixel buffer does not match patch count");
    }
    if (has_split() && split.size() != count()) {
        throw ShapeError("patchset split tags do not match patch count");
    }
    for (std::size_t i = 0; i < count(); ++i) {
        if (labels[i] >= num_classes) {
            throw ValueError("patchset label " + std::to_string(labels[i]) +
                             " out of range for " + std::to_string(num_classes) + " classes");
        }
    }
    for (float p : pixels) {
        if (!(p >= 0.0f && p <= 1.0f)) throw ValueError("patchset pixel outside [0,1]");
    }
}

GrayImage window_normalize(const IntImage& raw, int lo, int hi) {
    if (lo >= hi) throw ValueError("window_normalize: lo must be < hi");
    GrayImage out;
    out.h = raw.h;
    out.w = raw.w;
    out.v.resize(raw.v.size());
    const float range = static_cast<float>(hi - lo);
    for (std::size_t i = 0; i < raw.v.size(); ++i) {
        const std::int32_t c = std::clamp(raw.v[i], lo, hi);
        out.v[i] = static_cast<float>(c - lo) / range;
    }
    return out;
}

std::vector<std::vector<float>> extract_patches(const GrayImage& image, const MaskImage& mask,
                                                int size, double min_overlap) {
    if (image.h != mask.h || image.w != mask.w) {
        throw ShapeError("extract_patches: image " + std::to_string(image.h) + "x" +
                         std::to_string(image.w) + " vs mask " + std::to_string(mask.h) + "x" +
                         std::to_string(mask.w));
    }
    std::vector<std::vector<float>> out;
    const double needed = min_overlap * size * size;
    for (int y = 0; y + size <= image.h; y += size) {
        for (int x = 0; x + size <= image.w; x += size) {
            std::int64_t positive = 0;
            for (int r = 0; r < size; ++r) {
                const std::uint8_t* row = mask.v.data() + (y + r) * mask.w + x;
                for (int c = 0; c < size; ++c) positive += row[c] ? 1 : 0;
            }
            if (static_cast<double>(positive) < needed) continue;
            std::vector<float> patch(static_cast<std::size_t>(size) * size);
            for (int r = 0; r < size; ++r) {
                const float* row = image.v.data() + (y + r) * image.w + x;
                std::copy(row, row + size, patch.begin() + static_cast<std::size_t>(r) * size);
            }
            out.push_back(std::move(patch));
        }
    }
    return out;
}

std::vector<float> apply_d4(const float* p, int n, D4 t) {
    std::vector<float> out(static_cast<std::size_t>(n) * n);
    auto idx = [n](int r, int c) { return static_cast<std::size_t>(r) * n + c; };
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            float v;
            switch (t) {
                case D4::Identity:      v = p[idx(r, c)]; break;
                case D4::Rot90:         v = p[idx(c, n - 1 - r)]; break;  // counter-clockwise
                case D4::Rot180:        v = p[idx(n - 1 - r, n - 1 - c)]; break;
                case D4::Rot270:        v = p[idx(n - 1 - c, r)]; break;
                case D4::FlipH:         v = p[idx(r, n - 1 - c)]; break;
                case D4::FlipV:         v = p[idx(n - 1 - r, c)]; break;
                case D4::Transpose:     v = p[idx(c, r)]; break;
                case D4::AntiTranspose: v = p[idx(n - 1 - c, n - 1 - r)]; break;
                default: throw ValueError("unknown D4 transform");
            }
            out[idx(r, c)] = v;
        }
    }
    return out;
}

D4 d4_inverse(D4 t) {
    switch (t) {
        case D4::Rot90: return D4::Rot270;
        case D4::Rot270: return D4::Rot90;
        default: return t;  // everything else is an involution
    }
}

PatchSet augment_d4(const PatchSet& set) {
    PatchSet out;
    out.height = set.height;
    out.width = set.width;
    out.num_classes = set.num_classes;
    out.class_names = set.class_names;
    out.provenance = set.provenance;
    if (set.height != set.width) throw ShapeError("augment_d4 requires square patches");
    for (std::size_t i = 0; i < set.count(); ++i) {
        const SplitTag tag = set.has_split() ? static_cast<SplitTag>(set.split[i]) : SplitTag::Train;
        if (tag != SplitTag::Train) {
            out.append(set.patch(i), set.labels[i], tag);
            continue;
        }
        for (int t = 0; t < 8; ++t) {
            const auto v = apply_d4(set.patch(i), set.height, static_cast<D4>(t));
            out.append(v.data(), set.labels[i], SplitTag::Train);
        }
    }
    return out;
}

PatchSet balance_classes(const PatchSet& set, RngStream& rng, std::size_t target) {
    std::vector<std::vector<std::size_t>> per_class(set.num_classes);
    std::vector<std::size_t> passthrough;
    for (std::size_t i = 0; i < set.count(); ++i) {
        if (set.has_split() && set.split[i] != static_cast<std::uint8_t>(SplitTag::Train)) {
            passthrough.push_back(i);
        } else {
            per_class[set.labels[i]].push_back(i);
        }
    }
    std::size_t min_count = SIZE_MAX;
    for (int c = 0; c < set.num_classes; ++c) {
        if (per_class[c].empty()) throw ValueError("balance_classes: class " + std::to_string(c) + " is empty");
        min_count = std::min(min_count, per_class[c].size());
    }
    if (target == 0) target = min_count;

    PatchSet out;
    out.height = set.height;
    out.width = set.width;
    out.num_classes = set.num_classes;
    out.class_names = set.class_names;
    out.provenance = set.provenance;
    for (int c = 0; c < set.num_classes; ++c) {
        std::vector<std::size_t> chosen;
        if (per_class[c].size() >= target) {
            auto picks = rng.sample_without_replacement(per_class[c].size(), target);
            std::sort(picks.begin(), picks.end());
            for (std::size_t p : picks) chosen.push_back(per_class[c][p]);
        } else {
            chosen = per_class[c];
            while (chosen.size() < target) {
                chosen.push_back(per_class[c][rng.bounded(per_class[c].size())]);
            }
        }
        for (std::size_t i : chosen) out.append(set.patch(i), set.labels[i], SplitTag::Train);
    }
    for (std::size_t i : passthrough) {
        out.append(set.patch(i), set.labels[i], static_cast<SplitTag>(set.split[i]));
    }
    return out;
}

PatchSet make_splits(const PatchSet& set, std::size_t per_class_val, std::size_t per_class_test,
                     RngStream& rng) {
    std::vector<std::vector<std::size_t>> per_class(set.num_classes);
    for (std::size_t i = 0; i < set.count(); ++i) per_class[set.labels[i]].push_back(i);

    std::vector<std::uint8_t> tags(set.count(), static_cast<std::uint8_t>(SplitTag::Train));
    for (int c = 0; c < set.num_classes; ++c) {
        if (per_class[c].size() <= per_class_val + per_class_test) {
            throw ValueError("make_splits: class " + std::to_string(c) + " has only " +
                             std::to_string(per_class[c].size()) + " patches, needs more than " +
                             std::to_string(per_class_val + per_class_test));
        }
        auto order = rng.sample_without_replacement(per_class[c].size(),
                                                    per_class_val + per_class_test);
        for (std::size_t i = 0; i < order.size(); ++i) {
            tags[per_class[c][order[i]]] = static_cast<std::uint8_t>(
                i < per_class_val ? SplitTag::Val : SplitTag::Test);
        }
    }
    PatchSet out = set;
    out.split = std::move(tags);
    return out;
}

void TextureTaskSpec::validate() const {
    if (num_classes < 2) throw ValueError("texture task needs >= 2 classes");
    if (static_cast<int>(classes.size()) != num_classes) {
        throw ValueError("texture task: class spec count != num_classes");
    }
    if (train_per_class < 1 || val_per_class < 0 || test_per_class < 0) {
        throw ValueError("texture task: invalid per-class counts");
    }
    for (const auto& c : classes) {
        if (!(c.p0_lo <= c.p0_hi) || !(c.p1_lo <= c.p1_hi)) {
            throw ValueError("texture task: parameter range must have lo <= hi");
        }
    }
}

namespace {

constexpr float kPi = 3.14159265358979323846f;

void render_grating(float* px, const ClassTextureSpec& cs, RngStream& rng) {
    const float f = rng.uniform(cs.p0_lo, cs.p0_hi);
    const float theta = rng.uniform(cs.p1_lo, cs.p1_hi);
    const float phase = rng.uniform(0.0f, 2.0f * kPi);
    const float amp = rng.uniform(0.3f, 0.45f);
    const float bias = rng.uniform(0.45f, 0.55f);
    const float cx = std::cos(theta), sy = std::sin(theta);
    for (int y = 0; y < kPatchSize; ++y) {
        for (int x = 0; x < kPatchSize; ++x) {
            const float u = (x * cx + y * sy) / kPatchSize;
            px[y * kPatchSize + x] = bias + amp * std::sin(2.0f * kPi * f * u + phase);
        }
    }
}

void render_checker(float* px, const ClassTextureSpec& cs, RngStream& rng) {
    const float cell = rng.uniform(cs.p0_lo, cs.p0_hi);
    const float theta = rng.uniform(cs.p1_lo, cs.p1_hi);
    const float ox = rng.uniform(0.0f, cell), oy = rng.uniform(0.0f, cell);
    const float hi = rng.uniform(0.75f, 0.9f), lo = rng.uniform(0.1f, 0.25f);
    const float c = std::cos(theta), s = std::sin(theta);
    for (int y = 0; y < kPatchSize; ++y) {
        for (int x = 0; x < kPatchSize; ++x) {
            const float u = x * c + y * s + ox;
            const float v = -x * s + y * c + oy;
            const int parity = (static_cast<int>(std::floor(u / cell)) +
                                static_cast<int>(std::floor(v / cell))) & 1;
            px[y * kPatchSize + x] = parity ? hi : lo;
        }
    }
}

void render_noise(float* px, const ClassTextureSpec& cs, RngStream& rng) {
    const int octaves = std::max(1, static_cast<int>(std::lround(rng.uniform(cs.p0_lo, cs.p0_hi))));
    const float persistence = rng.uniform(cs.p1_lo, cs.p1_hi);
    std::fill(px, px + kPatchSize * kPatchSize, 0.5f);
    float amp = 0.35f;
    for (int o = 0; o < octaves; ++o) {
        const int cells = 2 << o;  // lattice resolution doubles per octave
        std::vector<float> lattice(static_cast<std::size_t>(cells + 1) * (cells + 1));
        for (auto& v : lattice) v = rng.uniform(-1.0f, 1.0f);
        for (int y = 0; y < kPatchSize; ++y) {
            const float fy = static_cast<float>(y) / kPatchSize * cells;
            const int iy = static_cast<int>(fy);
            const float ty = fy - iy;
            for (int x = 0; x < kPatchSize; ++x) {
                const float fx = static_cast<float>(x) / kPatchSize * cells;
                const int ix = static_cast<int>(fx);
                const float tx = fx - ix;
                const float v00 = lattice[iy * (cells + 1) + ix];
                const float v01 = lattice[iy * (cells + 1) + ix + 1];
                const float v10 = lattice[(iy + 1) * (cells + 1) + ix];
                const float v11 = lattice[(iy + 1) * (cells + 1) + ix + 1];
                const float v = (v00 * (1 - tx) + v01 * tx) * (1 - ty) +
                                (v10 * (1 - tx) + v11 * tx) * ty;
                px[y * kPatchSize + x] += amp * v;
            }
        }
        amp *= persistence;
    }
}

void render_blobs(float* px, const ClassTextureSpec& cs, RngStream& rng) {
    const int count = std::max(1, static_cast<int>(std::lround(rng.uniform(cs.p0_lo, cs.p0_hi))));
    const float radius = rng.uniform(cs.p1_lo, cs.p1_hi);
    const float bg = rng.uniform(0.15f, 0.3f);
    std::fill(px, px + kPatchSize * kPatchSize, bg);
    for (int b = 0; b < count; ++b) {
        const float bx = rng.uniform(0.0f, kPatchSize);
        const float by = rng.uniform(0.0f, kPatchSize);
        const float amp = rng.uniform(0.4f, 0.6f);
        const float inv2r2 = 1.0f / (2.0f * radius * radius);
        const int reach = static_cast<int>(std::ceil(3.0f * radius));
        for (int y = std::max(0, (int)by - reach); y < std::min(kPatchSize, (int)by + reach + 1); ++y) {
            for (int x = std::max(0, (int)bx - reach); x < std::min(kPatchSize, (int)bx + reach + 1); ++x) {
                const float d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                px[y * kPatchSize + x] += amp * std::exp(-d2 * inv2r2);
            }
        }
    }
}

}  // namespace

PatchSet synth_texture_task(const TextureTaskSpec& spec) {
    spec.validate();
    const int per_class = spec.train_per_class + spec.val_per_class + spec.test_per_class;
    PatchSet out;
    out.num_classes = spec.num_classes;
    out.provenance = "synthetic:" + spec.name;
    for (int c = 0; c < spec.num_classes; ++c) {
        out.class_names.push_back(spec.name + "_c" + std::to_string(c));
    }
    std::vector<float> px(static_cast<std::size_t>(kPatchSize) * kPatchSize);
    for (int c = 0; c < spec.num_classes; ++c) {
        const ClassTextureSpec& cs = spec.classes[c];
        for (int i = 0; i < per_class; ++i) {
            const std::uint64_t patch_index = static_cast<std::uint64_t>(c) * per_class + i;
            RngStream rng(spec.seed, patch_index + 1);
            switch (cs.family) {
                case TextureFamily::Grating: render_grating(px.data(), cs, rng); break;
                case TextureFamily::Checker: render_checker(px.data(), cs, rng); break;
                case TextureFamily::Noise:   render_noise(px.data(), cs, rng); break;
                case TextureFamily::Blobs:   render_blobs(px.data(), cs, rng); break;
                default: throw ValueError("unknown texture family");
            }
            // contrast/brightness jitter, then clip to [0,1]
            const float gain = rng.uniform(0.85f, 1.15f);
            const float shift = rng.uniform(-0.05f, 0.05f);
            for (auto& v : px) v = std::clamp(0.5f + gain * (v - 0.5f) + shift, 0.0f, 1.0f);
            const SplitTag tag = i < spec.train_per_class ? SplitTag::Train
                                 : i < spec.train_per_class + spec.val_per_class ? SplitTag::Val
                                                                                 : SplitTag::Test;
            out.append(px.data(), static_cast<std::uint16_t>(c), tag);
        }
    }
    return out;
}

TextureTaskSpec texture_preset(const std::string& name, int train_per_class, int val_per_class,
                               int test_per_class, std::uint64_t seed) {
    TextureTaskSpec spec;
    spec.name = name;
    spec.train_per_class = train_per_class;
    spec.val_per_class = val_per_class;
    spec.test_per_class = test_per_class;
    spec.seed = seed;
    using F = TextureFamily;
    if (name == "easy4") {
        spec.classes = {
            {F::Grating, 4.0f, 6.0f, 0.0f, kPi},
            {F::Checker, 4.0f, 6.0f, 0.0f, 0.4f},
            {F::Noise, 3.0f, 4.0f, 0.55f, 0.75f},
            {F::Blobs, 6.0f, 12.0f, 1.5f, 2.5f},
        };
    } else if (name == "hard7") {
        // Overlapping parameter bands within each family pair.
        spec.classes = {
            {F::Grating, 2.5f, 5.0f, 0.0f, kPi},
            {F::Grating, 4.0f, 7.5f, 0.0f, kPi},
            {F::Checker, 3.0f, 5.5f, 0.0f, 0.5f},
            {F::Checker, 4.5f, 8.0f, 0.0f, 0.5f},
            {F::Noise, 2.0f, 4.0f, 0.3f, 0.55f},
            {F::Noise, 2.0f, 4.0f, 0.45f, 0.7f},
            {F::Blobs, 5.0f, 15.0f, 1.5f, 3.0f},
        };
    } else if (name == "source0") {  // gratings by orientation band
        spec.classes = {
            {F::Grating, 3.0f, 7.0f, 0.0f, 0.25f * kPi},
            {F::Grating, 3.0f, 7.0f, 0.25f * kPi, 0.5f * kPi},
            {F::Grating, 3.0f, 7.0f, 0.5f * kPi, 0.75f * kPi},
            {F::Grating, 3.0f, 7.0f, 0.75f * kPi, kPi},
        };
    } else if (name == "source1") {  // checkerboards by scale band
        spec.classes = {
            {F::Checker, 2.0f, 3.5f, 0.0f, 0.5f},
            {F::Checker, 3.5f, 5.0f, 0.0f, 0.5f},
            {F::Checker, 5.0f, 7.0f, 0.0f, 0.5f},
            {F::Checker, 7.0f, 9.0f, 0.0f, 0.5f},
        };
    } else if (name == "source2") {  // value noise by persistence band
        spec.classes = {
            {F::Noise, 3.0f, 4.0f, 0.2f, 0.35f},
            {F::Noise, 3.0f, 4.0f, 0.35f, 0.5f},
            {F::Noise, 3.0f, 4.0f, 0.5f, 0.65f},
            {F::Noise, 3.0f, 4.0f, 0.65f, 0.8f},
        };
    } else {
        throw ValueError("unknown texture preset: " + name);
    }
    spec.num_classes = static_cast<int>(spec.classes.size());
    return spec;
}

namespace {

constexpr char kPsetMagic[4] = {'P', 'S', 'E', 'T'};

template <class T>
void write_le(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_le(std::ifstream& f, const char* what) {
    T v;
    if (!f.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw FormatError(std::string("truncated patchset file while reading ") + what);
    }
    return v;
}

}  // namespace

void write_patchset(const PatchSet& set, const std::string& path) {
    set.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(kPsetMagic, 4);
    write_le<std::uint16_t>(f, 1);
    write_le<std::uint32_t>(f, static_cast<std::uint32_t>(set.count()));
    write_le<std::uint16_t>(f, static_cast<std::uint16_t>(set.height));
    write_le<std::uint16_t>(f, static_cast<std::uint16_t>(set.width));
    write_le<std::uint16_t>(f, static_cast<std::uint16_t>(set.num_classes));
    write_le<std::uint8_t>(f, set.has_split() ? 1 : 0);
    f.write(reinterpret_cast<const char*>(set.labels.data()),
            static_cast<std::streamsize>(set.labels.size() * sizeof(std::uint16_t)));
    if (set.has_split()) {
        f.write(reinterpret_cast<const char*>(set.split.data()),
                static_cast<std::streamsize>(set.split.size()));
    }
    f.write(reinterpret_cast<const char*>(set.pixels.data()),
            static_cast<std::streamsize>(set.pixels.size() * sizeof(float)));
    write_le<std::uint16_t>(f, static_cast<std::uint16_t>(set.class_names.size()));
    for (const auto& name : set.class_names) {
        write_le<std::uint16_t>(f, static_cast<std::uint16_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    if (!f) throw IoError("write failed: " + path);
}

PatchSet read_patchset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kPsetMagic, 4) != 0) {
        throw FormatError("not a PSET file: " + path);
    }
    const auto version = read_le<std::uint16_t>(f, "version");
    if (version != 1) throw FormatError("unsupported patchset version " + std::to_string(version));
    PatchSet set;
    const auto count = read_le<std::uint32_t>(f, "count");
    set.height = read_le<std::uint16_t>(f, "height");
    set.width = read_le<std::uint16_t>(f, "width");
    set.num_classes = read_le<std::uint16_t>(f, "num_classes");
    const auto has_split = read_le<std::uint8_t>(f, "split flag");
    set.labels.resize(count);
    if (count && !f.read(reinterpret_cast<char*>(set.labels.data()), count * sizeof(std::uint16_t))) {
        throw FormatError("truncated patchset labels in " + path);
    }
    if (has_split) {
        set.split.resize(count);
        if (count && !f.read(reinterpret_cast<char*>(set.split.data()), count)) {
            throw FormatError("truncated patchset split tags in " + path);
        }
    }
    set.pixels.resize(static_cast<std::size_t>(count) * set.patch_len());
    if (count && !f.read(reinterpret_cast<char*>(set.pixels.data()),
                         static_cast<std::streamsize>(set.pixels.size() * sizeof(float)))) {
        throw FormatError("truncated patchset pixel data in " + path);
    }
    const auto names = read_le<std::uint16_t>(f, "class name count");
    for (int i = 0; i < names; ++i) {
        const auto len = read_le<std::uint16_t>(f, "class name length");
        std::string name(len, '\0');
        if (len && !f.read(name.data(), len)) throw FormatError("truncated class name in " + path);
        set.class_names.push_back(std::move(name));
    }
    set.validate();
    return set;
}

IntImage read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw FormatError("not a binary PGM (P5): " + path);
    auto next_int = [&f, &path]() {
        for (;;) {
            int c = f.peek();
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(c)) {
                f.get();
            } else {
                break;
            }
        }
        int v;
        if (!(f >> v)) throw FormatError("malformed PGM header: " + path);
        return v;
    };
    const int w = next_int(), h = next_int(), maxval = next_int();
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) {
        throw FormatError("invalid PGM dimensions/maxval: " + path);
    }
    f.get();  // single whitespace after maxval
    IntImage img;
    img.h = h;
    img.w = w;
    img.v.resize(static_cast<std::size_t>(h) * w);
    if (maxval < 256) {
        std::vector<std::uint8_t> buf(img.v.size());
        if (!f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
            throw FormatError("truncated PGM pixel data: " + path);
        }
        for (std::size_t i = 0; i < buf.size(); ++i) img.v[i] = buf[i];
    } else {
        std::vector<std::uint8_t> buf(img.v.size() * 2);
        if (!f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
            throw FormatError("truncated PGM pixel data: " + path);
        }
        for (std::size_t i = 0; i < img.v.size(); ++i) {
            img.v[i] = (static_cast<std::int32_t>(buf[2 * i]) << 8) | buf[2 * i + 1];  // big-endian
        }
    }
    return img;
}

GrayImage gray_from_rgb(const std::vector<float>& r, const std::vector<float>& g,
                        const std::vector<float>& b, int h, int w) {
    const std::size_t n = static_cast<std::size_t>(h) * w;
    if (r.size() != n || g.size() != n || b.size() != n) {
        throw ShapeError("gray_from_rgb: channel size mismatch");
    }
    GrayImage out;
    out.h = h;
    out.w = w;
    out.v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.v[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
    }
    return out;
}

}  // namespace texnet
