#include "texnet/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "texnet/error.hpp"
#include "texnet/rng.hpp"

namespace texnet {

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)), data(numel(shape), 0.0f) {}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<float> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (numel(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_to_string(shape));
    }
}

std::size_t Tensor::numel(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

void Tensor::alloc_grad() { grad.assign(data.size(), 0.0f); }

void Tensor::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }

std::string Tensor::shape_str() const { return shape_to_string(shape); }

std::string shape_to_string(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

void check_finite(const std::vector<float>& v, const char* where) {
    for (float x : v) {
        if (!std::isfinite(x)) {
            throw ValueError(std::string("non-finite value in ") + where);
        }
    }
}

void check_finite(const Tensor& t, const char* where) { check_finite(t.data, where); }

std::vector<std::size_t> RngStream::sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k && i < n; ++i) {
        std::size_t j = i + bounded(n - i);
        std::swap(idx[i], idx[j]);
        out.push_back(idx[i]);
    }
    return out;
}

}  // namespace texnet
