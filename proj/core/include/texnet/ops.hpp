#pragma once
#include <cstdint>
#include <vector>

#include "texnet/rng.hpp"
#include "texnet/tensor.hpp"

namespace texnet {

enum class Activation { Relu, LeakyRelu };

// Valid convolution with 2x2 kernels, stride 1, no padding.
//   x: C x H x W,  w: K x C x 2 x 2,  b: K  ->  K x (H-1) x (W-1)
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);

// Gradients for conv2d. `gout` is dL/dout (K x H-1 x W-1). Accumulates into
// gw/gb when non-null; writes dL/dx into gx when non-null.
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gout,
                     Tensor* gx, Tensor* gw, Tensor* gb);

Tensor activation(const Tensor& x, Activation kind, float alpha = 0.3f);
// dL/dx given the activation input `x` and upstream gradient `gout`.
Tensor activation_backward(const Tensor& x, const Tensor& gout, Activation kind,
                           float alpha = 0.3f);

// C x H x W -> C, mean over spatial positions.
Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const std::vector<std::size_t>& in_shape, const Tensor& gout);

// w: M x N, x: N, b: M -> M
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);
void dense_backward(const Tensor& x, const Tensor& w, const Tensor& gout,
                    Tensor* gx, Tensor* gw, Tensor* gb);

struct DropoutMask {
    std::vector<std::uint8_t> keep;  // empty when dropout was a no-op
    float scale = 1.0f;
};

// Inverted dropout: survivors scaled by 1/(1-rate) during training,
// identity at inference. rate must be in [0,1).
Tensor dropout(const Tensor& x, float rate, bool training, RngStream& rng,
               DropoutMask* mask = nullptr);
Tensor dropout_backward(const Tensor& gout, const DropoutMask& mask);

struct SoftmaxXent {
    double loss = 0.0;
    std::vector<float> probs;
};

// Shift-stabilized softmax + cross-entropy against an arbitrary target
// distribution (one-hot or soft). Gradient w.r.t. logits is probs - target.
inline constexpr double kXentLogEps = 1e-12;
SoftmaxXent softmax_xent(const std::vector<float>& logits, const std::vector<float>& target);
std::vector<float> softmax(const std::vector<float>& logits);

}  // namespace texnet
