#include "texnet/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "texnet/error.hpp"

namespace texnet {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
    if (!obj.is_object()) throw FormatError("manifest: " + path + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            throw FormatError("manifest: unknown key '" + path + "." + key + "'");
        }
    }
}

template <class T>
void get_if(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

ClassTextureSpec parse_class_spec(const json& j, const std::string& path) {
    reject_unknown(j, {"family", "p0", "p1"}, path);
    ClassTextureSpec cs;
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "grating") cs.family = TextureFamily::Grating;
    else if (fam == "checker") cs.family = TextureFamily::Checker;
    else if (fam == "noise") cs.family = TextureFamily::Noise;
    else if (fam == "blobs") cs.family = TextureFamily::Blobs;
    else throw FormatError("manifest: " + path + ".family: unknown family '" + fam + "'");
    const auto& p0 = j.at("p0");
    const auto& p1 = j.at("p1");
    if (!p0.is_array() || p0.size() != 2 || !p1.is_array() || p1.size() != 2) {
        throw FormatError("manifest: " + path + ": p0/p1 must be [lo, hi]");
    }
    cs.p0_lo = p0[0].get<float>();
    cs.p0_hi = p0[1].get<float>();
    cs.p1_lo = p1[0].get<float>();
    cs.p1_hi = p1[1].get<float>();
    return cs;
}

TaskManifest parse_task(const json& j, const std::string& path) {
    reject_unknown(j, {"name", "preset", "train_per_class", "val_per_class", "test_per_class",
                       "augment", "balance", "seed_offset", "classes"},
                   path);
    TaskManifest t;
    get_if(j, "preset", t.preset);
    t.name = t.preset;
    get_if(j, "name", t.name);
    get_if(j, "train_per_class", t.train_per_class);
    get_if(j, "val_per_class", t.val_per_class);
    get_if(j, "test_per_class", t.test_per_class);
    get_if(j, "augment", t.augment);
    get_if(j, "balance", t.balance);
    get_if(j, "seed_offset", t.seed_offset);
    if (j.contains("classes")) {
        t.preset = "custom";
        int i = 0;
        for (const auto& c : j.at("classes")) {
            t.custom_classes.push_back(parse_class_spec(c, path + ".classes[" + std::to_string(i++) + "]"));
        }
    }
    if (t.preset.empty()) throw FormatError("manifest: " + path + " needs a preset or classes");
    return t;
}

StageOverride parse_stage(const json& j, const std::string& path) {
    reject_unknown(j, {"max_epochs", "patience"}, path);
    StageOverride s;
    get_if(j, "max_epochs", s.max_epochs);
    get_if(j, "patience", s.patience);
    return s;
}

}  // namespace

TrainConfig apply_stage(const TrainConfig& base, const StageOverride& o) {
    TrainConfig cfg = base;
    if (o.max_epochs > 0) cfg.max_epochs = o.max_epochs;
    if (o.patience > 0) cfg.patience_epochs = o.patience;
    return cfg;
}

ExperimentManifest parse_manifest(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("manifest: invalid JSON: ") + e.what());
    }
    reject_unknown(root, {"seed", "out", "threads", "data", "architecture", "train", "pretrain",
                          "transfer", "ensemble", "distill", "mtl"},
                   "$");
    ExperimentManifest m;
    m.raw_json = json_text;
    get_if(root, "seed", m.seed);
    get_if(root, "out", m.out_dir);
    get_if(root, "threads", m.threads);

    if (root.contains("data")) {
        const json& d = root.at("data");
        reject_unknown(d, {"target", "sources", "ingest", "ingest_num_classes",
                           "ingest_class_names", "window_lo", "window_hi", "min_overlap"},
                       "$.data");
        if (d.contains("target")) m.data.target = parse_task(d.at("target"), "$.data.target");
        if (d.contains("sources")) {
            int i = 0;
            for (const auto& s : d.at("sources")) {
                m.data.sources.push_back(parse_task(s, "$.data.sources[" + std::to_string(i++) + "]"));
            }
        }
        if (d.contains("ingest")) {
            int i = 0;
            for (const auto& e : d.at("ingest")) {
                const std::string path = "$.data.ingest[" + std::to_string(i++) + "]";
                reject_unknown(e, {"image", "mask", "label"}, path);
                IngestEntry entry;
                entry.image = e.at("image").get<std::string>();
                entry.mask = e.at("mask").get<std::string>();
                entry.label = e.at("label").get<int>();
                m.data.ingest.push_back(std::move(entry));
            }
        }
        get_if(d, "ingest_num_classes", m.data.ingest_num_classes);
        get_if(d, "ingest_class_names", m.data.ingest_class_names);
        get_if(d, "window_lo", m.data.window_lo);
        get_if(d, "window_hi", m.data.window_hi);
        get_if(d, "min_overlap", m.data.min_overlap);
    }

    if (root.contains("architecture")) {
        const json& a = root.at("architecture");
        reject_unknown(a, {"k", "dense1", "dense2", "leaky_alpha", "dropout_rate"}, "$.architecture");
        get_if(a, "k", m.arch.k);
        get_if(a, "dense1", m.arch.dense1);
        get_if(a, "dense2", m.arch.dense2);
        get_if(a, "leaky_alpha", m.arch.leaky_alpha);
        get_if(a, "dropout_rate", m.arch.dropout_rate);
    }

    if (root.contains("train")) {
        const json& t = root.at("train");
        reject_unknown(t, {"learning_rate", "beta1", "beta2", "epsilon", "batch_size",
                           "patience", "min_improvement", "relative_improvement", "max_epochs"},
                       "$.train");
        get_if(t, "learning_rate", m.train.learning_rate);
        get_if(t, "beta1", m.train.beta1);
        get_if(t, "beta2", m.train.beta2);
        get_if(t, "epsilon", m.train.epsilon);
        get_if(t, "batch_size", m.train.batch_size);
        get_if(t, "patience", m.train.patience_epochs);
        get_if(t, "min_improvement", m.train.min_improvement);
        get_if(t, "relative_improvement", m.train.relative_improvement);
        get_if(t, "max_epochs", m.train.max_epochs);
    }
    m.train.seed = m.seed;

    if (root.contains("pretrain")) m.pretrain = parse_stage(root.at("pretrain"), "$.pretrain");

    if (root.contains("transfer")) {
        const json& t = root.at("transfer");
        reject_unknown(t, {"depths", "repetitions", "max_epochs", "patience"}, "$.transfer");
        if (t.contains("depths")) m.transfer.depths = t.at("depths").get<std::vector<int>>();
        get_if(t, "repetitions", m.transfer.repetitions);
        m.transfer.stage = parse_stage(json{{"max_epochs", t.value("max_epochs", -1)},
                                            {"patience", t.value("patience", -1)}},
                                       "$.transfer");
    }

    if (root.contains("ensemble")) {
        const json& e = root.at("ensemble");
        reject_unknown(e, {"n_init", "m_subsets", "repeats", "n_scratch", "max_size", "grid",
                           "grid_n_max", "grid_m_max", "scratch_max_epochs", "scratch_patience"},
                       "$.ensemble");
        get_if(e, "n_init", m.ensemble.n_init);
        get_if(e, "m_subsets", m.ensemble.m_subsets);
        get_if(e, "repeats", m.ensemble.repeats);
        get_if(e, "n_scratch", m.ensemble.n_scratch);
        get_if(e, "max_size", m.ensemble.max_size);
        get_if(e, "grid", m.ensemble.grid);
        get_if(e, "grid_n_max", m.ensemble.grid_n_max);
        get_if(e, "grid_m_max", m.ensemble.grid_m_max);
        get_if(e, "scratch_max_epochs", m.ensemble.scratch_stage.max_epochs);
        get_if(e, "scratch_patience", m.ensemble.scratch_stage.patience);
    }

    if (root.contains("distill")) {
        const json& d = root.at("distill");
        reject_unknown(d, {"temperature", "student_init", "max_epochs", "patience"}, "$.distill");
        get_if(d, "temperature", m.distill.temperature);
        get_if(d, "student_init", m.distill.student_init);
        m.distill.stage = parse_stage(json{{"max_epochs", d.value("max_epochs", -1)},
                                           {"patience", d.value("patience", -1)}},
                                      "$.distill");
    }

    if (root.contains("mtl")) {
        const json& t = root.at("mtl");
        reject_unknown(t, {"enabled", "max_epochs", "patience"}, "$.mtl");
        get_if(t, "enabled", m.mtl.enabled);
        m.mtl.stage = parse_stage(json{{"max_epochs", t.value("max_epochs", -1)},
                                       {"patience", t.value("patience", -1)}},
                                  "$.mtl");
    }

    m.arch.num_classes = 7;  // placeholder; each stage sets the real class count
    m.arch.validate();
    return m;
}

ExperimentManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_manifest(buf.str());
}

}  // namespace texnet
