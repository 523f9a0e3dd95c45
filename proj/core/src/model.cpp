#include "texnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "texnet/error.hpp"

namespace texnet {

void ArchitectureSpec::validate() const {
    if (k < 1) throw ValueError("architecture: k must be >= 1");
    if (conv_layers != 5) throw ValueError("architecture: conv_layers is fixed at 5");
    if (dense1 < 1 || dense2 < 1) throw ValueError("architecture: dense widths must be >= 1");
    if (num_classes < 2) throw ValueError("architecture: num_classes must be >= 2");
    if (leaky_alpha <= 0.0f || leaky_alpha >= 1.0f) throw ValueError("architecture: leaky_alpha in (0,1)");
    if (dropout_rate < 0.0f || dropout_rate >= 1.0f) throw ValueError("architecture: dropout_rate in [0,1)");
    if (input_h < 7 || input_w < 7 || input_c < 1) {
        throw ValueError("architecture: input too small for five 2x2 convolutions");
    }
}

bool ArchitectureSpec::same_family(const ArchitectureSpec& o) const {
    ArchitectureSpec a = *this, b = o;
    a.num_classes = b.num_classes = 0;
    return a == b;
}

std::string Model::layer_name(int layer) {
    if (layer < 5) return "conv" + std::to_string(layer + 1);
    return "dense" + std::to_string(layer - 4);
}

std::vector<std::vector<std::size_t>> Model::layer_shapes(const ArchitectureSpec& spec) {
    std::vector<std::vector<std::size_t>> shapes;
    std::size_t cin = static_cast<std::size_t>(spec.input_c);
    for (int l = 1; l <= spec.conv_layers; ++l) {
        const std::size_t cout = static_cast<std::size_t>(spec.conv_channels(l));
        shapes.push_back({cout, cin, 2, 2});
        shapes.push_back({cout});
        cin = cout;
    }
    const std::size_t widths[3] = {static_cast<std::size_t>(spec.dense1),
                                   static_cast<std::size_t>(spec.dense2),
                                   static_cast<std::size_t>(spec.num_classes)};
    std::size_t nin = cin;  // global average pooling output
    for (int d = 0; d < 3; ++d) {
        shapes.push_back({widths[d], nin});
        shapes.push_back({widths[d]});
        nin = widths[d];
    }
    return shapes;
}

Model::Model(ArchitectureSpec spec, std::vector<Tensor> params)
    : spec_(spec), params_(std::move(params)) {
    spec_.validate();
    const auto shapes = layer_shapes(spec_);
    if (params_.size() != shapes.size()) {
        throw ShapeError("model expects " + std::to_string(shapes.size()) + " parameter tensors");
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (params_[i].shape != shapes[i]) {
            throw ShapeError("parameter " + std::to_string(i) + " has shape " +
                             params_[i].shape_str() + ", expected " + shape_to_string(shapes[i]));
        }
    }
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

void Model::alloc_grads() {
    for (auto& p : params_) p.alloc_grad();
}

void Model::zero_grads() {
    for (auto& p : params_) p.zero_grad();
}

Model build_model(const ArchitectureSpec& spec, RngStream& rng) {
    spec.validate();
    const auto shapes = Model::layer_shapes(spec);
    std::vector<Tensor> params;
    params.reserve(shapes.size());
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        Tensor t(shapes[i]);
        if (i % 2 == 0) {  // weights: He-uniform over fan-in; biases stay zero
            std::size_t fan_in = 1;
            for (std::size_t d = 1; d < shapes[i].size(); ++d) fan_in *= shapes[i][d];
            const float limit = std::sqrt(6.0f / static_cast<float>(fan_in));
            for (auto& v : t.data) v = rng.uniform(-limit, limit);
        }
        params.push_back(std::move(t));
    }
    return Model(spec, std::move(params));
}

void Model::forward_one(const float* patch, bool training, RngStream* rng, Workspace& ws) const {
    if (training && !rng) throw ValueError("training forward requires an rng");
    ws.conv_in.assign(5, Tensor());
    ws.conv_pre.assign(5, Tensor());
    ws.dense_in.assign(3, Tensor());
    ws.dense_pre.assign(3, Tensor());
    ws.masks.assign(3, DropoutMask{});

    Tensor x({static_cast<std::size_t>(spec_.input_c), static_cast<std::size_t>(spec_.input_h),
              static_cast<std::size_t>(spec_.input_w)},
             std::vector<float>(patch, patch + spec_.input_c * spec_.input_h * spec_.input_w));
    for (int l = 0; l < 5; ++l) {
        ws.conv_in[l] = std::move(x);
        ws.conv_pre[l] = conv2d(ws.conv_in[l], params_[2 * l], params_[2 * l + 1]);
        x = activation(ws.conv_pre[l], Activation::LeakyRelu, spec_.leaky_alpha);
    }
    ws.gap_in_shape = x.shape;
    Tensor h = global_avg_pool(x);
    RngStream dummy(0);
    for (int d = 0; d < 3; ++d) {
        ws.dense_in[d] = dropout(h, spec_.dropout_rate, training, rng ? *rng : dummy, &ws.masks[d]);
        ws.dense_pre[d] = dense(ws.dense_in[d], params_[10 + 2 * d], params_[11 + 2 * d]);
        h = d < 2 ? activation(ws.dense_pre[d], Activation::Relu) : ws.dense_pre[d];
    }
    ws.logits = h.data;
    ws.probs = softmax(ws.logits);
    ws.filled = true;
}

double Model::backward(Workspace& ws, const std::vector<float>& target) {
    if (!ws.filled) throw ValueError("backward called before forward");
    if (params_[0].grad.empty()) alloc_grads();
    const SoftmaxXent sx = softmax_xent(ws.logits, target);

    Tensor g({ws.logits.size()});
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = sx.probs[i] - target[i];

    for (int d = 2; d >= 0; --d) {
        Tensor& w = params_[10 + 2 * d];
        Tensor gx({w.dim(1)});
        Tensor gw_view(w.shape), gb_view({w.dim(0)});
        gw_view.data.swap(w.grad);  // accumulate directly into grad buffers
        gb_view.data.swap(params_[11 + 2 * d].grad);
        dense_backward(ws.dense_in[d], w, g, &gx, &gw_view, &gb_view);
        gw_view.data.swap(w.grad);
        gb_view.data.swap(params_[11 + 2 * d].grad);
        Tensor ga = dropout_backward(gx, ws.masks[d]);
        if (d > 0) {
            g = activation_backward(ws.dense_pre[d - 1], ga, Activation::Relu);
        } else {
            g = std::move(ga);
        }
    }

    Tensor gact = global_avg_pool_backward(ws.gap_in_shape, g);
    for (int l = 4; l >= 0; --l) {
        Tensor gpre = activation_backward(ws.conv_pre[l], gact, Activation::LeakyRelu,
                                          spec_.leaky_alpha);
        Tensor& w = params_[2 * l];
        Tensor gw_view(w.shape), gb_view({w.dim(0)});
        gw_view.data.swap(w.grad);
        gb_view.data.swap(params_[2 * l + 1].grad);
        if (l > 0) {
            Tensor gx(ws.conv_in[l].shape);
            conv2d_backward(ws.conv_in[l], w, gpre, &gx, &gw_view, &gb_view);
            gact = std::move(gx);
        } else {
            conv2d_backward(ws.conv_in[l], w, gpre, nullptr, &gw_view, &gb_view);
        }
        gw_view.data.swap(w.grad);
        gb_view.data.swap(params_[2 * l + 1].grad);
    }
    ws.filled = false;
    return sx.loss;
}

std::pair<Tensor, Tensor> Model::forward(const Tensor& batch, bool training, RngStream* rng) const {
    if (batch.rank() != 4 || batch.dim(1) != static_cast<std::size_t>(spec_.input_c) ||
        batch.dim(2) != static_cast<std::size_t>(spec_.input_h) ||
        batch.dim(3) != static_cast<std::size_t>(spec_.input_w)) {
        throw ShapeError("forward expects Bx" + std::to_string(spec_.input_c) + "x" +
                         std::to_string(spec_.input_h) + "x" + std::to_string(spec_.input_w) +
                         ", got " + batch.shape_str());
    }
    const std::size_t b = batch.dim(0), k = static_cast<std::size_t>(spec_.num_classes);
    const std::size_t stride = batch.size() / std::max<std::size_t>(b, 1);
    Tensor logits({b, k}), probs({b, k});
    Workspace ws;
    for (std::size_t i = 0; i < b; ++i) {
        forward_one(batch.data.data() + i * stride, training, rng, ws);
        std::copy(ws.logits.begin(), ws.logits.end(), logits.data.begin() + i * k);
        std::copy(ws.probs.begin(), ws.probs.end(), probs.data.begin() + i * k);
    }
    check_finite(logits, "forward logits");
    return {std::move(logits), std::move(probs)};
}

std::vector<int> Model::predict(const std::vector<float>& patches, std::size_t count) const {
    const std::size_t n = static_cast<std::size_t>(spec_.input_c) * spec_.input_h * spec_.input_w;
    std::vector<int> out(count);
    Workspace ws;
    for (std::size_t i = 0; i < count; ++i) {
        forward_one(patches.data() + i * n, false, nullptr, ws);
        out[i] = static_cast<int>(std::max_element(ws.probs.begin(), ws.probs.end()) -
                                  ws.probs.begin());
    }
    return out;
}

Checkpoint snapshot(const Model& model, CheckpointMeta meta) {
    Checkpoint c;
    c.spec = model.spec();
    c.meta = std::move(meta);
    for (int l = 0; l < kNumLayers; ++l) {
        c.layers.emplace_back(Model::layer_name(l) + ".weight", model.params()[2 * l]);
        c.layers.emplace_back(Model::layer_name(l) + ".bias", model.params()[2 * l + 1]);
    }
    for (auto& [name, t] : c.layers) t.grad.clear();
    return c;
}

Model to_model(const Checkpoint& ckpt) {
    std::vector<Tensor> params;
    for (const auto& [name, t] : ckpt.layers) params.push_back(t);
    return Model(ckpt.spec, std::move(params));
}

namespace {

std::string fmt_float(float v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

constexpr char kMagic[4] = {'T', 'X', 'C', '1'};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ostringstream hdr;
    hdr << "version=1\n";
    hdr << "k=" << ckpt.spec.k << "\n";
    hdr << "conv_layers=" << ckpt.spec.conv_layers << "\n";
    hdr << "dense1=" << ckpt.spec.dense1 << "\n";
    hdr << "dense2=" << ckpt.spec.dense2 << "\n";
    hdr << "num_classes=" << ckpt.spec.num_classes << "\n";
    hdr << "leaky_alpha=" << fmt_float(ckpt.spec.leaky_alpha) << "\n";
    hdr << "dropout_rate=" << fmt_float(ckpt.spec.dropout_rate) << "\n";
    hdr << "input_h=" << ckpt.spec.input_h << "\n";
    hdr << "input_w=" << ckpt.spec.input_w << "\n";
    hdr << "input_c=" << ckpt.spec.input_c << "\n";
    hdr << "seed=" << ckpt.meta.seed << "\n";
    hdr << "epoch=" << ckpt.meta.epoch << "\n";
    hdr << "val_favg=" << fmt_float(ckpt.meta.val_favg) << "\n";
    hdr << "lineage=" << ckpt.meta.lineage << "\n";
    std::size_t offset = 0;
    for (const auto& [name, t] : ckpt.layers) {
        hdr << "tensor=" << name << ";";
        for (std::size_t i = 0; i < t.shape.size(); ++i) hdr << (i ? "," : "") << t.shape[i];
        hdr << ";" << offset << "\n";
        offset += t.size() * sizeof(float);
    }
    const std::string header = hdr.str();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(kMagic, 4);
    const std::uint32_t hlen = static_cast<std::uint32_t>(header.size());
    f.write(reinterpret_cast<const char*>(&hlen), 4);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& [name, t] : ckpt.layers) {
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
    if (!f) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("not a TXC1 checkpoint: " + path);
    }
    std::uint32_t hlen = 0;
    if (!f.read(reinterpret_cast<char*>(&hlen), 4)) throw FormatError("truncated header length");
    std::string header(hlen, '\0');
    if (!f.read(header.data(), hlen)) throw FormatError("truncated header in " + path);

    Checkpoint ckpt;
    struct Entry {
        std::string name;
        std::vector<std::size_t> shape;
        std::size_t offset;
    };
    std::vector<Entry> entries;
    std::istringstream in(header);
    std::string line;
    int version = -1;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("malformed header line: " + line);
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "version") version = std::stoi(val);
        else if (key == "k") ckpt.spec.k = std::stoi(val);
        else if (key == "conv_layers") ckpt.spec.conv_layers = std::stoi(val);
        else if (key == "dense1") ckpt.spec.dense1 = std::stoi(val);
        else if (key == "dense2") ckpt.spec.dense2 = std::stoi(val);
        else if (key == "num_classes") ckpt.spec.num_classes = std::stoi(val);
        else if (key == "leaky_alpha") ckpt.spec.leaky_alpha = std::stof(val);
        else if (key == "dropout_rate") ckpt.spec.dropout_rate = std::stof(val);
        else if (key == "input_h") ckpt.spec.input_h = std::stoi(val);
        else if (key == "input_w") ckpt.spec.input_w = std::stoi(val);
        else if (key == "input_c") ckpt.spec.input_c = std::stoi(val);
        else if (key == "seed") ckpt.meta.seed = std::stoull(val);
        else if (key == "epoch") ckpt.meta.epoch = std::stoi(val);
        else if (key == "val_favg") ckpt.meta.val_favg = std::stof(val);
        else if (key == "lineage") ckpt.meta.lineage = val;
        else if (key == "tensor") {
            Entry e;
            const auto s1 = val.find(';'), s2 = val.rfind(';');
            if (s1 == std::string::npos || s2 == s1) throw FormatError("malformed tensor line: " + line);
            e.name = val.substr(0, s1);
            std::istringstream dims(val.substr(s1 + 1, s2 - s1 - 1));
            std::string d;
            while (std::getline(dims, d, ',')) e.shape.push_back(std::stoull(d));
            e.offset = std::stoull(val.substr(s2 + 1));
            entries.push_back(std::move(e));
        } else {
            throw FormatError("unknown header key: " + key);
        }
    }
    if (version != 1) throw FormatError("unsupported checkpoint version");

    const auto expected = Model::layer_shapes(ckpt.spec);
    if (entries.size() != expected.size()) {
        throw FormatError("checkpoint declares " + std::to_string(entries.size()) +
                          " tensors, architecture requires " + std::to_string(expected.size()));
    }
    const std::streampos blob_start = f.tellg();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string want = Model::layer_name(static_cast<int>(i / 2)) +
                                 (i % 2 ? ".bias" : ".weight");
        if (entries[i].name != want) {
            throw FormatError("tensor " + std::to_string(i) + " named '" + entries[i].name +
                              "', expected '" + want + "'");
        }
        if (entries[i].shape != expected[i]) {
            throw ShapeError("checkpoint tensor " + entries[i].name + " has shape " +
                             shape_to_string(entries[i].shape) + ", architecture requires " +
                             shape_to_string(expected[i]));
        }
        Tensor t(entries[i].shape);
        f.seekg(blob_start + static_cast<std::streamoff>(entries[i].offset));
        if (!f.read(reinterpret_cast<char*>(t.data.data()),
                    static_cast<std::streamsize>(t.size() * sizeof(float)))) {
            throw FormatError("truncated blob for tensor " + entries[i].name);
        }
        ckpt.layers.emplace_back(entries[i].name, std::move(t));
    }
    ckpt.spec.validate();
    return ckpt;
}

}  // namespace texnet
