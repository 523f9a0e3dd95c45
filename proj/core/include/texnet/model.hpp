#pragma once
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "texnet/ops.hpp"
#include "texnet/rng.hpp"
#include "texnet/tensor.hpp"

namespace texnet {

// Fixed family: five 2x2 conv layers (very leaky ReLU), global average
// pooling, then three dense layers with dropout in front of each. Kernel
// count at conv layer L (1-based) is k*(L+1)^2.
struct ArchitectureSpec {
    int k = 4;
    int conv_layers = 5;  // fixed by the family
    int dense1 = 512;
    int dense2 = 256;
    int num_classes = 7;
    float leaky_alpha = 0.3f;
    float dropout_rate = 0.5f;
    int input_h = 32;
    int input_w = 32;
    int input_c = 1;

    int conv_channels(int layer) const { return k * (layer + 1) * (layer + 1); }  // layer 1-based
    void validate() const;
    bool same_family(const ArchitectureSpec& o) const;  // equal except num_classes
    bool operator==(const ArchitectureSpec& o) const = default;
};

// Total layer count: 5 conv + 3 dense. Parameters live as weight/bias pairs
// in layer order, so params[2*i] is layer i's weights, params[2*i+1] its bias.
inline constexpr int kNumLayers = 8;

struct CheckpointMeta {
    std::uint64_t seed = 0;
    int epoch = 0;
    float val_favg = 0.0f;
    std::string lineage = "scratch";  // scratch | pretrained:<task> | finetuned | snapshot | distilled
};

struct Checkpoint {
    ArchitectureSpec spec;
    std::vector<std::pair<std::string, Tensor>> layers;  // conv1.weight, conv1.bias, ...
    CheckpointMeta meta;
};

class Model;

// Per-sample forward record needed to run backward.
struct Workspace {
    std::vector<Tensor> conv_in;    // input to each conv layer
    std::vector<Tensor> conv_pre;   // conv outputs before activation
    std::vector<std::size_t> gap_in_shape;
    std::vector<Tensor> dense_in;   // input to each dense layer (after dropout)
    std::vector<Tensor> dense_pre;  // dense outputs before activation
    std::vector<DropoutMask> masks;
    std::vector<float> logits;
    std::vector<float> probs;
    bool filled = false;
};

class Model {
public:
    Model() = default;
    Model(ArchitectureSpec spec, std::vector<Tensor> params);

    const ArchitectureSpec& spec() const { return spec_; }
    std::vector<Tensor>& params() { return params_; }
    const std::vector<Tensor>& params() const { return params_; }
    std::size_t parameter_count() const;

    static std::string layer_name(int layer);  // "conv1".."conv5","dense1".."dense3"
    static std::vector<std::vector<std::size_t>> layer_shapes(const ArchitectureSpec& spec);

    // Single-patch forward; patch is input_c*h*w floats. Records activations
    // into ws so backward() can run. rng is consumed only when training.
    void forward_one(const float* patch, bool training, RngStream* rng, Workspace& ws) const;

    // Populates params' grad buffers with dLoss/dParam for the recorded
    // forward and the given target distribution. Returns the loss.
    double backward(Workspace& ws, const std::vector<float>& target);

    // Batched forward. batch: B x input_c x 32 x 32. Returns (logits, probs),
    // each B x num_classes.
    std::pair<Tensor, Tensor> forward(const Tensor& batch, bool training = false,
                                      RngStream* rng = nullptr) const;
    // Inference-mode argmax labels for a batch of flat patches.
    std::vector<int> predict(const std::vector<float>& patches, std::size_t count) const;

    void alloc_grads();
    void zero_grads();

private:
    ArchitectureSpec spec_;
    std::vector<Tensor> params_;
};

// He-uniform (fan-in) weights, zero biases.
Model build_model(const ArchitectureSpec& spec, RngStream& rng);

Checkpoint snapshot(const Model& model, CheckpointMeta meta);
Model to_model(const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace texnet
