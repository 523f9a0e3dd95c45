#pragma once
#include <stdexcept>
#include <string>

namespace texnet {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension or size disagreement between tensors/layers.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error("shape error: " + msg) {}
};

// Invalid argument value (rates, thresholds, label ranges, ...).
struct ValueError : Error {
    explicit ValueError(const std::string& msg) : Error("value error: " + msg) {}
};

// Broken or unrecognized file content (bad magic, truncation, version).
struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error("format error: " + msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};

}  // namespace texnet
