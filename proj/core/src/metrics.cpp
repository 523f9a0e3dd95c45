#include "texnet/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "texnet/error.hpp"

namespace texnet {

std::int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& actuals, int k) {
    if (predictions.size() != actuals.size()) {
        throw ShapeError("confusion: predictions and actuals differ in length");
    }
    if (k < 2) throw ValueError("confusion: need at least 2 classes");
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] < 0 || predictions[i] >= k || actuals[i] < 0 || actuals[i] >= k) {
            throw ValueError("confusion: label out of range at sample " + std::to_string(i));
        }
        ++cm.at(actuals[i], predictions[i]);
    }
    return cm;
}

double f_avg(const ConfusionMatrix& cm) {
    if (cm.k < 2) throw ValueError("f_avg: need at least 2 classes");
    if (cm.total() == 0) throw ValueError("f_avg: empty confusion matrix");
    double acc = 0.0;
    for (int c = 0; c < cm.k; ++c) {
        std::int64_t row = 0, col = 0;
        for (int j = 0; j < cm.k; ++j) {
            row += cm.at(c, j);
            col += cm.at(j, c);
        }
        if (row == 0 || col == 0) continue;
        const double recall = static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
        const double precision = static_cast<double>(cm.at(c, c)) / static_cast<double>(col);
        if (recall + precision > 0.0) acc += recall * precision / (recall + precision);
    }
    return 2.0 * acc / cm.k;
}

std::string confusion_to_csv(const ConfusionMatrix& cm) {
    std::ostringstream out;
    for (int a = 0; a < cm.k; ++a) {
        for (int p = 0; p < cm.k; ++p) out << (p ? "," : "") << cm.at(a, p);
        out << "\n";
    }
    return out.str();
}

std::string confusion_to_text(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
    std::ostringstream out;
    out << "actual\\predicted";
    for (int p = 0; p < cm.k; ++p) {
        out << "\t" << (p < (int)class_names.size() ? class_names[p] : "c" + std::to_string(p));
    }
    out << "\n";
    for (int a = 0; a < cm.k; ++a) {
        out << (a < (int)class_names.size() ? class_names[a] : "c" + std::to_string(a));
        for (int p = 0; p < cm.k; ++p) out << "\t" << cm.at(a, p);
        out << "\n";
    }
    return out.str();
}

}  // namespace texnet
