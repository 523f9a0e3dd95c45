#include "texnet/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>

#include "texnet/error.hpp"

namespace texnet {
namespace {

// im2col for 2x2 kernels, stride 1, valid. Output layout: (C*4) x (OH*OW),
// row r = (c*4 + dy*2 + dx), column = spatial output position.
void im2col_2x2(const float* x, std::size_t c, std::size_t h, std::size_t w, float* cols) {
    const std::size_t oh = h - 1, ow = w - 1;
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float* plane = x + ch * h * w;
        for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
                float* row = cols + (ch * 4 + dy * 2 + dx) * oh * ow;
                for (std::size_t y = 0; y < oh; ++y) {
                    const float* src = plane + (y + dy) * w + dx;
                    std::copy(src, src + ow, row + y * ow);
                }
            }
        }
    }
}

void col2im_add_2x2(const float* cols, std::size_t c, std::size_t h, std::size_t w, float* gx) {
    const std::size_t oh = h - 1, ow = w - 1;
    for (std::size_t ch = 0; ch < c; ++ch) {
        float* plane = gx + ch * h * w;
        for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
                const float* row = cols + (ch * 4 + dy * 2 + dx) * oh * ow;
                for (std::size_t y = 0; y < oh; ++y) {
                    float* dst = plane + (y + dy) * w + dx;
                    const float* src = row + y * ow;
                    for (std::size_t xq = 0; xq < ow; ++xq) dst[xq] += src[xq];
                }
            }
        }
    }
}

thread_local std::vector<float> g_col_scratch;

void check_conv_shapes(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 3) throw ShapeError("conv2d input must be CxHxW, got " + x.shape_str());
    if (w.rank() != 4 || w.dim(2) != 2 || w.dim(3) != 2) {
        throw ShapeError("conv2d kernels must be KxCx2x2, got " + w.shape_str());
    }
    if (x.dim(1) < 2 || x.dim(2) < 2) {
        throw ShapeError("conv2d input spatial size must be >= 2x2, got " + x.shape_str());
    }
    if (w.dim(1) != x.dim(0)) {
        throw ShapeError("conv2d kernel channels " + std::to_string(w.dim(1)) +
                         " != input channels " + std::to_string(x.dim(0)));
    }
    if (b.rank() != 1 || b.dim(0) != w.dim(0)) {
        throw ShapeError("conv2d bias must have length " + std::to_string(w.dim(0)) +
                         ", got " + b.shape_str());
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
    check_conv_shapes(x, w, b);
    const std::size_t c = x.dim(0), h = x.dim(1), ww = x.dim(2);
    const std::size_t k = w.dim(0), oh = h - 1, ow = ww - 1, n = oh * ow;

    g_col_scratch.resize(c * 4 * n);
    im2col_2x2(x.data.data(), c, h, ww, g_col_scratch.data());

    Tensor out({k, oh, ow});
    // out (K x N) = w (K x C*4) * cols (C*4 x N)
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, (int)k, (int)n, (int)(c * 4), 1.0f,
                w.data.data(), (int)(c * 4), g_col_scratch.data(), (int)n, 0.0f,
                out.data.data(), (int)n);
    for (std::size_t kk = 0; kk < k; ++kk) {
        float* row = out.data.data() + kk * n;
        const float bias = b[kk];
        for (std::size_t i = 0; i < n; ++i) row[i] += bias;
    }
    return out;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gout,
                     Tensor* gx, Tensor* gw, Tensor* gb) {
    const std::size_t c = x.dim(0), h = x.dim(1), ww = x.dim(2);
    const std::size_t k = w.dim(0), oh = h - 1, ow = ww - 1, n = oh * ow;
    if (gout.rank() != 3 || gout.dim(0) != k || gout.dim(1) != oh || gout.dim(2) != ow) {
        throw ShapeError("conv2d_backward upstream gradient has shape " + gout.shape_str());
    }

    if (gw || gx) {
        g_col_scratch.resize(c * 4 * n);
        im2col_2x2(x.data.data(), c, h, ww, g_col_scratch.data());
    }
    if (gw) {
        // gw (K x C*4) += gout (K x N) * cols^T (N x C*4)
        cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, (int)k, (int)(c * 4), (int)n, 1.0f,
                    gout.data.data(), (int)n, g_col_scratch.data(), (int)n, 1.0f,
                    gw->data.data(), (int)(c * 4));
    }
    if (gb) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const float* row = gout.data.data() + kk * n;
            float acc = 0.0f;
            for (std::size_t i = 0; i < n; ++i) acc += row[i];
            gb->data[kk] += acc;
        }
    }
    if (gx) {
        // gcols (C*4 x N) = w^T (C*4 x K) * gout (K x N), then scatter-add.
        std::vector<float> gcols(c * 4 * n);
        cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, (int)(c * 4), (int)n, (int)k, 1.0f,
                    w.data.data(), (int)(c * 4), gout.data.data(), (int)n, 0.0f, gcols.data(),
                    (int)n);
        std::fill(gx->data.begin(), gx->data.end(), 0.0f);
        col2im_add_2x2(gcols.data(), c, h, ww, gx->data.data());
    }
}

Tensor activation(const Tensor& x, Activation kind, float alpha) {
    if (kind == Activation::LeakyRelu && (alpha <= 0.0f || alpha >= 1.0f)) {
        throw ValueError("leaky relu alpha must be in (0,1)");
    }
    Tensor out(x.shape);
    if (kind == Activation::Relu) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] >= 0.0f ? x[i] : alpha * x[i];
    }
    return out;
}

Tensor activation_backward(const Tensor& x, const Tensor& gout, Activation kind, float alpha) {
    if (!x.same_shape(gout)) {
        throw ShapeError("activation_backward shapes " + x.shape_str() + " vs " + gout.shape_str());
    }
    Tensor gx(x.shape);
    if (kind == Activation::Relu) {
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0f ? gout[i] : 0.0f;
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] >= 0.0f ? gout[i] : alpha * gout[i];
    }
    return gx;
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.rank() != 3) throw ShapeError("global_avg_pool input must be CxHxW, got " + x.shape_str());
    const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    if (hw == 0) throw ShapeError("global_avg_pool on empty spatial extent");
    Tensor out({c});
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float* plane = x.data.data() + ch * hw;
        double acc = 0.0;
        for (std::size_t i = 0; i < hw; ++i) acc += plane[i];
        out[ch] = static_cast<float>(acc / static_cast<double>(hw));
    }
    return out;
}

Tensor global_avg_pool_backward(const std::vector<std::size_t>& in_shape, const Tensor& gout) {
    if (in_shape.size() != 3 || gout.rank() != 1 || gout.dim(0) != in_shape[0]) {
        throw ShapeError("global_avg_pool_backward shape mismatch");
    }
    const std::size_t c = in_shape[0], hw = in_shape[1] * in_shape[2];
    Tensor gx(in_shape);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float g = gout[ch] / static_cast<float>(hw);
        float* plane = gx.data.data() + ch * hw;
        std::fill(plane, plane + hw, g);
    }
    return gx;
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 1 || w.rank() != 2 || b.rank() != 1) {
        throw ShapeError("dense expects x:N w:MxN b:M");
    }
    const std::size_t m = w.dim(0), n = w.dim(1);
    if (x.dim(0) != n || b.dim(0) != m) {
        throw ShapeError("dense shape mismatch: x " + x.shape_str() + ", w " + w.shape_str() +
                         ", b " + b.shape_str());
    }
    Tensor out({m});
    std::copy(b.data.begin(), b.data.end(), out.data.begin());
    cblas_sgemv(CblasRowMajor, CblasNoTrans, (int)m, (int)n, 1.0f, w.data.data(), (int)n,
                x.data.data(), 1, 1.0f, out.data.data(), 1);
    return out;
}

void dense_backward(const Tensor& x, const Tensor& w, const Tensor& gout,
                    Tensor* gx, Tensor* gw, Tensor* gb) {
    const std::size_t m = w.dim(0), n = w.dim(1);
    if (gout.rank() != 1 || gout.dim(0) != m) {
        throw ShapeError("dense_backward upstream gradient shape " + gout.shape_str());
    }
    if (gw) {
        cblas_sger(CblasRowMajor, (int)m, (int)n, 1.0f, gout.data.data(), 1, x.data.data(), 1,
                   gw->data.data(), (int)n);
    }
    if (gb) {
        for (std::size_t i = 0; i < m; ++i) gb->data[i] += gout[i];
    }
    if (gx) {
        cblas_sgemv(CblasRowMajor, CblasTrans, (int)m, (int)n, 1.0f, w.data.data(), (int)n,
                    gout.data.data(), 1, 0.0f, gx->data.data(), 1);
    }
}

Tensor dropout(const Tensor& x, float rate, bool training, RngStream& rng, DropoutMask* mask) {
    if (rate < 0.0f || rate >= 1.0f) throw ValueError("dropout rate must be in [0,1)");
    if (!training || rate == 0.0f) {
        if (mask) *mask = DropoutMask{};
        return x;
    }
    const float scale = 1.0f / (1.0f - rate);
    Tensor out(x.shape);
    DropoutMask local;
    DropoutMask& m = mask ? *mask : local;
    m.keep.resize(x.size());
    m.scale = scale;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool keep = !rng.bernoulli(rate);
        m.keep[i] = keep ? 1 : 0;
        out[i] = keep ? x[i] * scale : 0.0f;
    }
    return out;
}

Tensor dropout_backward(const Tensor& gout, const DropoutMask& mask) {
    if (mask.keep.empty()) return gout;  // was identity
    if (mask.keep.size() != gout.size()) throw ShapeError("dropout mask size mismatch");
    Tensor gx(gout.shape);
    for (std::size_t i = 0; i < gout.size(); ++i) {
        gx[i] = mask.keep[i] ? gout[i] * mask.scale : 0.0f;
    }
    return gx;
}

std::vector<float> softmax(const std::vector<float>& logits) {
    float mx = logits[0];
    for (float v : logits) mx = std::max(mx, v);
    std::vector<float> probs(logits.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double e = std::exp(static_cast<double>(logits[i] - mx));
        probs[i] = static_cast<float>(e);
        denom += e;
    }
    for (float& p : probs) p = static_cast<float>(p / denom);
    return probs;
}

SoftmaxXent softmax_xent(const std::vector<float>& logits, const std::vector<float>& target) {
    if (logits.empty() || logits.size() != target.size()) {
        throw ShapeError("softmax_xent logits/target length mismatch");
    }
    double sum = 0.0;
    for (float t : target) {
        if (t < 0.0f) throw ValueError("softmax_xent target has negative entry");
        sum += t;
    }
    if (std::abs(sum - 1.0) > 1e-5) {
        throw ValueError("softmax_xent target does not sum to 1 (sum=" + std::to_string(sum) + ")");
    }
    SoftmaxXent r;
    r.probs = softmax(logits);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (target[i] > 0.0f) {
            r.loss -= static_cast<double>(target[i]) *
                      std::log(static_cast<double>(r.probs[i]) + kXentLogEps);
        }
    }
    return r;
}

}  // namespace texnet
