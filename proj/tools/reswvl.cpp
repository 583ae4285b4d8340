// Command-line entry point: one binary, subcommands per pipeline step.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 training failure,
// 5 evaluation failure.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reswvl/pipeline/run.hpp"

namespace {

using namespace reswvl;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_root;
};

PipelineConfig load_config(const CommonArgs& args) {
    if (args.config_path.empty()) throw ConfigError("--config is required for this subcommand");
    auto cfg = load_pipeline_config(args.config_path);
    // flags override file values
    if (args.seed) {
        cfg.seed = *args.seed;
        cfg.stage1.seed = *args.seed;
        cfg.stage2.seed = *args.seed;
        cfg.raw["seed"] = *args.seed;
    }
    if (args.out_root) {
        cfg.out_root = *args.out_root;
        cfg.raw["out_root"] = *args.out_root;
    }
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "pipeline config file (.toml or .json)");
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--out-root", args.out_root, "override the output root directory");
}

SyntheticSpec spec_from_json(const nlohmann::json& j) {
    SyntheticSpec spec;
    if (j.contains("phase_count")) spec.phase_count = j["phase_count"].get<int>();
    if (j.contains("videos")) spec.videos = j["videos"].get<int>();
    if (j.contains("mean_phase_length")) spec.mean_phase_length = j["mean_phase_length"].get<int>();
    if (j.contains("transition_regime"))
        spec.regime = parse_regime(j["transition_regime"].get<std::string>());
    if (j.contains("noise_level")) spec.noise_level = j["noise_level"].get<double>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("frame_size")) spec.frame_size = j["frame_size"].get<int>();
    return spec;
}

std::vector<std::pair<std::string, std::filesystem::path>> parse_pred_dirs(
    const std::vector<std::string>& raw) {
    std::vector<std::pair<std::string, std::filesystem::path>> out;
    for (const auto& item : raw) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            const std::filesystem::path p(item);
            out.emplace_back(p.filename().string(), p);
        } else {
            out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reswvl: two-stage surgical phase recognition (prompt-tuned dual encoder + causal TCN)"};
    app.require_subcommand(1);

    // data
    auto* data = app.add_subcommand("data", "dataset ingestion and generation");
    data->require_subcommand(1);

    std::string ingest_root, ingest_format = "canonical-tsv", ingest_out;
    auto* ingest = data->add_subcommand("ingest", "convert a dataset into the canonical layout");
    ingest->add_option("--root", ingest_root, "dataset root directory")->required();
    ingest->add_option("--format", ingest_format,
                       "cholec80-style | autolaparo-style | m2cai16-style | canonical-tsv");
    ingest->add_option("--out", ingest_out, "output root for the canonical dataset")->required();

    std::string synth_spec_path, synth_out;
    auto* synth = data->add_subcommand("synth", "generate a synthetic phase dataset");
    synth->add_option("--spec", synth_spec_path, "synthetic spec JSON file")->required();
    synth->add_option("--out", synth_out, "output dataset root")->required();

    // stage1
    auto* stage1 = app.add_subcommand("stage1", "image-encoder fine-tuning against learned prompts");
    stage1->require_subcommand(1);
    CommonArgs s1_train_args, s1_lr_args, s1_extract_args;
    auto* s1_train = stage1->add_subcommand("train", "run the fine-tuning loop");
    add_common(s1_train, s1_train_args);
    auto* s1_lr = stage1->add_subcommand("lr-search", "grid-search the learning rate");
    add_common(s1_lr, s1_lr_args);
    auto* s1_extract = stage1->add_subcommand("extract", "export frozen frame features per video");
    add_common(s1_extract, s1_extract_args);
    std::string extract_splits = "train,val,test";
    s1_extract->add_option("--split", extract_splits, "comma-separated splits to extract");

    // stage2
    auto* stage2 = app.add_subcommand("stage2", "temporal model on cached features");
    stage2->require_subcommand(1);
    CommonArgs s2_train_args, s2_predict_args;
    auto* s2_train = stage2->add_subcommand("train", "train the causal TCN");
    add_common(s2_train, s2_train_args);
    auto* s2_predict = stage2->add_subcommand("predict", "write per-video prediction files");
    add_common(s2_predict, s2_predict_args);
    std::string predict_splits = "test", predict_out;
    bool predict_logits = false;
    s2_predict->add_option("--split", predict_splits, "comma-separated splits to predict");
    s2_predict->add_option("--out", predict_out, "output directory (default <out_root>/preds/stage2)");
    s2_predict->add_flag("--logits", predict_logits, "also write per-video logits sidecars");

    // eval
    auto* eval = app.add_subcommand("eval", "metrics and ribbon plots");
    eval->require_subcommand(1);
    std::string eval_gt, eval_out = "report";
    std::vector<std::string> eval_preds;
    auto* eval_run = eval->add_subcommand("run", "compute the full metric report");
    eval_run->add_option("--gt", eval_gt, "ground-truth dataset root")->required();
    eval_run->add_option("--preds", eval_preds, "prediction directory, repeatable, optionally name=dir")
        ->required();
    eval_run->add_option("--out", eval_out, "report output directory");

    std::string ribbon_gt, ribbon_video, ribbon_out = "ribbons";
    std::vector<std::string> ribbon_preds;
    auto* eval_ribbon = eval->add_subcommand("ribbon", "render one video's timeline ribbon");
    eval_ribbon->add_option("--gt", ribbon_gt, "ground-truth dataset root")->required();
    eval_ribbon->add_option("--preds", ribbon_preds, "prediction directory, repeatable")->required();
    eval_ribbon->add_option("--video", ribbon_video, "video id")->required();
    eval_ribbon->add_option("--out", ribbon_out, "output directory");

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "chained end-to-end runs");
    pipeline->require_subcommand(1);
    CommonArgs all_args;
    auto* all = pipeline->add_subcommand("all", "dataset -> stage1 -> extract -> stage2 -> eval");
    add_common(all, all_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (ingest->parsed()) {
            run_data_ingest(ingest_root, ingest_format, ingest_out);
        } else if (synth->parsed()) {
            const auto j = load_config_file(synth_spec_path);
            run_data_synth(spec_from_json(j), synth_out);
        } else if (s1_train->parsed()) {
            run_stage1_train(load_config(s1_train_args));
        } else if (s1_lr->parsed()) {
            run_stage1_lr_search(load_config(s1_lr_args));
        } else if (s1_extract->parsed()) {
            run_stage1_extract(load_config(s1_extract_args), extract_splits);
        } else if (s2_train->parsed()) {
            run_stage2_train(load_config(s2_train_args));
        } else if (s2_predict->parsed()) {
            run_stage2_predict(load_config(s2_predict_args), predict_splits, predict_logits,
                               predict_out.empty() ? std::filesystem::path{}
                                                   : std::filesystem::path(predict_out));
        } else if (eval_run->parsed()) {
            run_eval(eval_gt, parse_pred_dirs(eval_preds), eval_out);
        } else if (eval_ribbon->parsed()) {
            run_eval_ribbon(ribbon_gt, parse_pred_dirs(ribbon_preds), ribbon_video, ribbon_out);
        } else if (all->parsed()) {
            run_pipeline_all(load_config(all_args));
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const TrainError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 4;
    } catch (const EvalError& e) {
        std::cerr << "evaluation error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
