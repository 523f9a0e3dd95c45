#include "texnet/distill.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "texnet/error.hpp"
#include "texnet/ops.hpp"

namespace texnet {

void SoftTargetSet::validate() const {
    if (num_classes < 2) throw ValueError("soft targets: need >= 2 classes");
    if (rows.size() % num_classes != 0) throw ShapeError("soft targets: ragged matrix");
    for (std::size_t i = 0; i < count(); ++i) {
        double sum = 0.0;
        for (int c = 0; c < num_classes; ++c) {
            const float v = rows[i * num_classes + c];
            if (v < 0.0f) throw ValueError("soft targets: negative probability");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-5) {
            throw ValueError("soft targets: row " + std::to_string(i) + " sums to " +
                             std::to_string(sum));
        }
    }
}

SoftTargetSet make_soft_targets(const ModelPool& pool, const Ensemble& teacher,
                                const PatchSet& train, float temperature) {
    if (pool.num_classes != train.num_classes) {
        throw ValueError("make_soft_targets: teacher has " + std::to_string(pool.num_classes) +
                         " classes, dataset has " + std::to_string(train.num_classes));
    }
    if (temperature <= 0.0f) throw ValueError("make_soft_targets: temperature must be > 0");
    const std::size_t n = train.count();
    const std::size_t k = static_cast<std::size_t>(pool.num_classes);

    SoftTargetSet soft;
    soft.num_classes = pool.num_classes;
    soft.temperature = temperature;
    soft.teacher_id = "ensemble[" + std::to_string(teacher.total_members()) + "]";

    if (temperature == 1.0f) {
        soft.rows = ensemble_predict(pool, teacher, train);
        return soft;
    }

    std::vector<double> acc(n * k, 0.0);
    std::size_t groups = 0;
    Workspace ws;
    std::vector<float> scaled(k);
    for (const auto& g : teacher.groups) {
        if (g.empty()) continue;
        std::vector<double> gsum(n * k, 0.0);
        std::vector<int> sorted = g;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            const double mult = static_cast<double>(j - i);
            const Model model = to_model(pool.by_id(sorted[i]).ckpt);
            for (std::size_t s = 0; s < n; ++s) {
                model.forward_one(train.patch(s), false, nullptr, ws);
                for (std::size_t c = 0; c < k; ++c) scaled[c] = ws.logits[c] / temperature;
                const auto probs = softmax(scaled);
                for (std::size_t c = 0; c < k; ++c) gsum[s * k + c] += mult * probs[c];
            }
            i = j;
        }
        for (std::size_t i = 0; i < n * k; ++i) acc[i] += gsum[i] / static_cast<double>(g.size());
        ++groups;
    }
    if (groups == 0) throw ValueError("make_soft_targets: empty teacher ensemble");
    soft.rows.resize(n * k);
    for (std::size_t i = 0; i < n * k; ++i) {
        soft.rows[i] = static_cast<float>(acc[i] / static_cast<double>(groups));
    }
    return soft;
}

FitResult distill_train(Model student, const SoftTargetSet& soft, const PatchSet& train,
                        const PatchSet& val, const TrainConfig& config,
                        const SnapshotPolicy& policy) {
    soft.validate();
    if (student.spec().num_classes != soft.num_classes) {
        throw ValueError("distill_train: student class count != soft target class count");
    }
    if (soft.count() != train.count()) {
        throw ShapeError("distill_train: soft target rows != training samples");
    }
    return fit_targets(std::move(student), train, soft.rows, val, config, policy);
}

double agreement(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw ShapeError("agreement: prediction vectors differ in length");
    if (a.empty()) throw ValueError("agreement: empty prediction vectors");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i] ? 1 : 0;
    return static_cast<double>(same) / static_cast<double>(a.size());
}

double agreement(const Model& a, const Model& b, const PatchSet& data) {
    if (a.spec().num_classes != b.spec().num_classes) {
        throw ValueError("agreement: class counts differ");
    }
    return agreement(a.predict(data.pixels, data.count()), b.predict(data.pixels, data.count()));
}

namespace {
constexpr char kSoftMagic[4] = {'S', 'O', 'F', 'T'};
}

void save_soft_targets(const SoftTargetSet& soft, const std::string& path) {
    soft.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(kSoftMagic, 4);
    const std::uint16_t version = 1;
    const std::uint32_t rows = static_cast<std::uint32_t>(soft.count());
    const std::uint16_t classes = static_cast<std::uint16_t>(soft.num_classes);
    f.write(reinterpret_cast<const char*>(&version), 2);
    f.write(reinterpret_cast<const char*>(&rows), 4);
    f.write(reinterpret_cast<const char*>(&classes), 2);
    f.write(reinterpret_cast<const char*>(soft.rows.data()),
            static_cast<std::streamsize>(soft.rows.size() * sizeof(float)));
    char buf[128];
    std::snprintf(buf, sizeof(buf), "teacher=%s;temperature=%.9g", soft.teacher_id.c_str(),
                  static_cast<double>(soft.temperature));
    const std::uint32_t tlen = static_cast<std::uint32_t>(std::strlen(buf));
    f.write(reinterpret_cast<const char*>(&tlen), 4);
    f.write(buf, tlen);
    if (!f) throw IoError("write failed: " + path);
}

SoftTargetSet load_soft_targets(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kSoftMagic, 4) != 0) {
        throw FormatError("not a SOFT file: " + path);
    }
    std::uint16_t version = 0, classes = 0;
    std::uint32_t rows = 0;
    if (!f.read(reinterpret_cast<char*>(&version), 2) ||
        !f.read(reinterpret_cast<char*>(&rows), 4) ||
        !f.read(reinterpret_cast<char*>(&classes), 2)) {
        throw FormatError("truncated SOFT header: " + path);
    }
    if (version != 1) throw FormatError("unsupported SOFT version");
    SoftTargetSet soft;
    soft.num_classes = classes;
    soft.rows.resize(static_cast<std::size_t>(rows) * classes);
    if (!f.read(reinterpret_cast<char*>(soft.rows.data()),
                static_cast<std::streamsize>(soft.rows.size() * sizeof(float)))) {
        throw FormatError("truncated SOFT matrix: " + path);
    }
    std::uint32_t tlen = 0;
    if (f.read(reinterpret_cast<char*>(&tlen), 4)) {
        std::string trailer(tlen, '\0');
        if (!f.read(trailer.data(), tlen)) throw FormatError("truncated SOFT trailer: " + path);
        const auto semi = trailer.find(';');
        if (trailer.rfind("teacher=", 0) == 0 && semi != std::string::npos) {
            soft.teacher_id = trailer.substr(8, semi - 8);
            const auto t = trailer.find("temperature=", semi);
            if (t != std::string::npos) soft.temperature = std::stof(trailer.substr(t + 12));
        }
    }
    soft.validate();
    return soft;
}

}  // namespace texnet
