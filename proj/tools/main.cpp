// texnet command-line front end: every subcommand consumes a JSON experiment
// manifest and reads/writes artifacts under the manifest's output directory,
// so stages can run in one process (`run`) or as separate invocations.
#include <cstdio>
#include <exception>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "texnet/error.hpp"
#include "texnet/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string manifest_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    int threads = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--manifest", opts.manifest_path, "experiment manifest (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "override the manifest seed");
    cmd->add_option("--out", opts.out_dir, "override the manifest output directory");
    cmd->add_option("--threads", opts.threads, "BLAS thread count (0 = library default)");
}

texnet::ExperimentManifest resolve(const CommonOpts& opts) {
    texnet::ExperimentManifest m = texnet::load_manifest(opts.manifest_path);
    if (opts.seed) {
        m.seed = *opts.seed;
        m.train.seed = *opts.seed;
    }
    if (!opts.out_dir.empty()) m.out_dir = opts.out_dir;
    if (opts.threads >= 0) m.threads = opts.threads;
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"texnet: multi-source transfer learning for texture patch classification"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string stage;
    for (const auto& [name, desc] :
         std::initializer_list<std::pair<const char*, const char*>>{
             {"synth-data", "generate the synthetic target and source patch sets"},
             {"ingest", "build the target patch set from windowed images + masks"},
             {"train", "train the scratch baseline on the target task"},
             {"pretrain", "train one source model per source task"},
             {"transfer-sweep", "fine-tune transferred models over all depths"},
             {"ensemble-select", "greedy forward ensemble selection over the pool"},
             {"distill", "distill the selected ensemble into a single student"},
             {"mtl", "multi-task baseline with alternating epochs"},
             {"report", "aggregate per-method metrics into report.csv"},
             {"run", "run the full pipeline end to end"}}) {
        CLI::App* cmd = app.add_subcommand(name, desc);
        add_common(cmd, opts);
        cmd->callback([&stage, name = std::string(name)] { stage = name; });
    }

    // eval takes a model artifact + patch set instead of driving a stage.
    std::string eval_model, eval_data, eval_split = "test", eval_out;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint or ensemble on a patch set");
    eval_cmd->add_option("--model", eval_model, "TXC1 checkpoint or ensemble manifest")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--data", eval_data, "patch set (.pset)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--split", eval_split, "train|val|test|all")->check(
        CLI::IsMember({"train", "val", "test", "all"}));
    eval_cmd->add_option("--out", eval_out, "output prefix for confusion/metrics files");
    int eval_threads = -1;
    eval_cmd->add_option("--threads", eval_threads, "BLAS thread count");
    eval_cmd->callback([&stage] { stage = "eval"; });

    CLI11_PARSE(app, argc, argv);

    try {
        if (stage == "eval") {
            if (eval_threads >= 0) texnet::set_compute_threads(eval_threads);
            texnet::PatchSet data = texnet::read_patchset(eval_data);
            if (eval_split != "all") {
                const texnet::SplitTag tag = eval_split == "train" ? texnet::SplitTag::Train
                                             : eval_split == "val" ? texnet::SplitTag::Val
                                                                   : texnet::SplitTag::Test;
                if (data.has_split()) data = data.subset_by_split(tag);
            }
            if (data.count() == 0) throw texnet::ValueError("selected split is empty");
            const double score = texnet::evaluate_artifact(eval_model, data, eval_out);
            std::printf("f_avg %.9g over %zu samples\n", score, data.count());
            return 0;
        }

        texnet::Pipeline pipeline(resolve(opts));
        texnet::RunLock lock(pipeline.out());
        if (stage == "synth-data") pipeline.synth_data();
        else if (stage == "ingest") pipeline.ingest();
        else if (stage == "train") pipeline.train_scratch();
        else if (stage == "pretrain") pipeline.pretrain();
        else if (stage == "transfer-sweep") pipeline.transfer_sweep();
        else if (stage == "ensemble-select") pipeline.ensemble_select();
        else if (stage == "distill") pipeline.distill_student();
        else if (stage == "mtl") pipeline.mtl_run();
        else if (stage == "report") pipeline.report();
        else if (stage == "run") pipeline.run_all();
        return 0;
    } catch (const texnet::FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return 3;
    } catch (const texnet::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const texnet::ShapeError& e) {
        std::fprintf(stderr, "shape error: %s\n", e.what());
        return 5;
    } catch (const texnet::ValueError& e) {
        std::fprintf(stderr, "value error: %s\n", e.what());
        return 6;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
