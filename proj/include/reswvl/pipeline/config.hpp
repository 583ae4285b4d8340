#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "reswvl/core/rng.hpp"
#include "reswvl/data/synthetic.hpp"
#include "reswvl/pipeline/toml.hpp"
#include "reswvl/tcn/tcn.hpp"
#include "reswvl/train/stage1.hpp"

namespace reswvl {

struct DatasetConfig {
    std::string source = "root";  // "root": pre-existing dataset; "synthetic": generate
    std::string root;             // the one field without a default
    std::string format = "canonical-tsv";
    int train = 32, val = 8, test = 40;  // the usual 32/8/40 convention
    SyntheticSpec synthetic;
};

/// Full pipeline configuration. Defaults encode the training protocol this
/// pipeline targets at full scale (50/25 epochs, lr range 5e-6..5e-4, TCN
/// 1 stage x 8 layers x 256, d = 1024), so a real-data run only needs the
/// dataset section; desk-scale runs override toward the toy backbone.
struct PipelineConfig {
    std::uint64_t seed = 0;
    std::string out_root = "out";
    DatasetConfig dataset;

    Stage1Config stage1;
    std::string backbone = "clip-resnet50";
    std::string backbone_weights;
    ToyEncoderOptions toy;
    std::string prompt_variant = "ordinal";
    int context_tokens = 8;
    int reference_count = 3;
    std::vector<int> reference_indices;  // optional explicit override
    bool normalize_logits = true;
    bool init_tokens_from_text_encoder = true;

    TcnConfig stage2;

    nlohmann::json raw = nlohmann::json::object();

    std::string digest() const {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(fnv1a64(raw.dump())));
        return buf;
    }
};

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void read_augment(const nlohmann::json& j, AugmentParams& a) {
    read_field(j, "resize", a.resize);
    read_field(j, "crop", a.crop);
    read_field(j, "flip_prob", a.flip_prob);
    read_field(j, "max_translate_frac", a.max_translate_frac);
    read_field(j, "scale_lo", a.scale_lo);
    read_field(j, "scale_hi", a.scale_hi);
    read_field(j, "max_rotate_deg", a.max_rotate_deg);
}

}  // namespace detail

inline PipelineConfig parse_pipeline_config(const nlohmann::json& j) {
    PipelineConfig cfg;
    cfg.raw = j;
    detail::read_field(j, "seed", cfg.seed);
    detail::read_field(j, "out_root", cfg.out_root);
    if (const char* env = std::getenv("RESWVL_OUT_ROOT"); env && *env) cfg.out_root = env;

    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        detail::read_field(d, "source", cfg.dataset.source);
        detail::read_field(d, "root", cfg.dataset.root);
        detail::read_field(d, "format", cfg.dataset.format);
        if (d.contains("split")) {
            detail::read_field(d.at("split"), "train", cfg.dataset.train);
            detail::read_field(d.at("split"), "val", cfg.dataset.val);
            detail::read_field(d.at("split"), "test", cfg.dataset.test);
        }
        if (d.contains("synthetic")) {
            const auto& s = d.at("synthetic");
            auto& spec = cfg.dataset.synthetic;
            spec.seed = cfg.seed;
            detail::read_field(s, "phase_count", spec.phase_count);
            detail::read_field(s, "videos", spec.videos);
            detail::read_field(s, "mean_phase_length", spec.mean_phase_length);
            detail::read_field(s, "noise_level", spec.noise_level);
            detail::read_field(s, "frame_size", spec.frame_size);
            detail::read_field(s, "seed", spec.seed);
            if (s.contains("transition_regime"))
                spec.regime = parse_regime(s.at("transition_regime").get<std::string>());
        }
    }
    if (cfg.dataset.source != "root" && cfg.dataset.source != "synthetic")
        throw ConfigError("dataset.source must be 'root' or 'synthetic'");

    if (j.contains("stage1")) {
        const auto& s = j.at("stage1");
        detail::read_field(s, "epochs", cfg.stage1.epochs);
        detail::read_field(s, "learning_rate", cfg.stage1.learning_rate);
        detail::read_field(s, "lr_grid", cfg.stage1.lr_grid);
        detail::read_field(s, "lr_search_epochs", cfg.stage1.lr_search_epochs);
        detail::read_field(s, "batch_size", cfg.stage1.batch_size);
        detail::read_field(s, "weight_decay", cfg.stage1.weight_decay);
        detail::read_field(s, "eval_resize", cfg.stage1.eval_resize);
        if (s.contains("augmentation")) detail::read_augment(s.at("augmentation"), cfg.stage1.augment);
        detail::read_field(s, "backbone", cfg.backbone);
        detail::read_field(s, "backbone_weights", cfg.backbone_weights);
        detail::read_field(s, "feature_dim", cfg.toy.feature_dim);
        detail::read_field(s, "token_dim", cfg.toy.token_dim);
        detail::read_field(s, "conv1_channels", cfg.toy.conv1_channels);
        detail::read_field(s, "conv2_channels", cfg.toy.conv2_channels);
        detail::read_field(s, "variant", cfg.prompt_variant);
        detail::read_field(s, "context_tokens", cfg.context_tokens);
        detail::read_field(s, "reference_count", cfg.reference_count);
        detail::read_field(s, "reference_indices", cfg.reference_indices);
        detail::read_field(s, "normalize_logits", cfg.normalize_logits);
        detail::read_field(s, "init_tokens_from_text_encoder", cfg.init_tokens_from_text_encoder);
    }
    cfg.stage1.seed = cfg.seed;

    if (j.contains("stage2")) {
        const auto& s = j.at("stage2");
        detail::read_field(s, "stages", cfg.stage2.stages);
        detail::read_field(s, "layers", cfg.stage2.layers);
        detail::read_field(s, "hidden_dim", cfg.stage2.hidden_dim);
        detail::read_field(s, "kernel_size", cfg.stage2.kernel_size);
        detail::read_field(s, "dropout", cfg.stage2.dropout);
        detail::read_field(s, "epochs", cfg.stage2.epochs);
        detail::read_field(s, "learning_rate", cfg.stage2.learning_rate);
        detail::read_field(s, "lr_grid", cfg.stage2.lr_grid);
        detail::read_field(s, "lr_search_epochs", cfg.stage2.lr_search_epochs);
        detail::read_field(s, "weight_decay", cfg.stage2.weight_decay);
    }
    cfg.stage2.seed = cfg.seed;

    parse_prompt_variant(cfg.prompt_variant);  // validate early
    return cfg;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    return parse_pipeline_config(load_config_file(path));
}

/// Build options for the stage-1 system given the dataset's phase count.
inline Stage1BuildOptions stage1_build_options(const PipelineConfig& cfg, int phase_count) {
    Stage1BuildOptions opt;
    opt.backbone = cfg.backbone;
    opt.weights_path = cfg.backbone_weights;
    opt.toy = cfg.toy;
    opt.seed = cfg.seed;
    opt.normalize_logits = cfg.normalize_logits;
    opt.init_tokens_from_text_encoder = cfg.init_tokens_from_text_encoder;
    opt.prompt.phase_count = phase_count;
    opt.prompt.context_tokens = cfg.context_tokens;
    opt.prompt.variant = parse_prompt_variant(cfg.prompt_variant);
    if (opt.prompt.variant == PromptVariant::ordinal) {
        opt.prompt.reference_indices =
            cfg.reference_indices.empty()
                ? default_reference_indices(phase_count, cfg.reference_count)
                : cfg.reference_indices;
    }
    return opt;
}

}  // namespace reswvl
