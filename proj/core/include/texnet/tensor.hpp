#pragma once
#include <cstddef>
#include <string>
#include <vector>

namespace texnet {

// Dense row-major float32 array with an optional gradient buffer of the
// same length. Shapes are plain dimension lists; rank is whatever the
// operator expects.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty unless alloc_grad() was called

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s);
    Tensor(std::vector<std::size_t> s, std::vector<float> d);

    static std::size_t numel(const std::vector<std::size_t>& s);
    std::size_t size() const { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }
    std::size_t rank() const { return shape.size(); }

    void alloc_grad();
    void zero_grad();
    bool has_grad() const { return !grad.empty(); }

    float& operator[](std::size_t i) { return data[i]; }
    float operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    std::string shape_str() const;
};

std::string shape_to_string(const std::vector<std::size_t>& s);

// Throws ValueError naming `where` if any entry is NaN or infinite.
void check_finite(const Tensor& t, const char* where);
void check_finite(const std::vector<float>& v, const char* where);

}  // namespace texnet
