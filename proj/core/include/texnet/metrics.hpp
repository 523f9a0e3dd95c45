#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace texnet {

// Rows are actual classes, columns predicted classes.
struct ConfusionMatrix {
    int k = 0;
    std::vector<std::int64_t> counts;  // k*k, row-major

    explicit ConfusionMatrix(int classes) : k(classes), counts(static_cast<std::size_t>(classes) * classes, 0) {}
    std::int64_t& at(int actual, int predicted) { return counts[static_cast<std::size_t>(actual) * k + predicted]; }
    std::int64_t at(int actual, int predicted) const { return counts[static_cast<std::size_t>(actual) * k + predicted]; }
    std::int64_t total() const;
};

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& actuals, int k);

// Average F1 over classes: (2/K) * sum_c recall_c*precision_c/(recall_c+precision_c).
// A class with zero precision+recall (or an empty row/column) contributes 0.
double f_avg(const ConfusionMatrix& cm);

std::string confusion_to_csv(const ConfusionMatrix& cm);
std::string confusion_to_text(const ConfusionMatrix& cm, const std::vector<std::string>& class_names = {});

}  // namespace texnet
