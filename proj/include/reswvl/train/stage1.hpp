#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reswvl/core/archive.hpp"
#include "reswvl/core/errors.hpp"
#include "reswvl/core/rng.hpp"
#include "reswvl/data/annotation.hpp"
#include "reswvl/encoder/logit_head.hpp"
#include "reswvl/encoder/registry.hpp"
#include "reswvl/io/image_ops.hpp"
#include "reswvl/nn/optimizer.hpp"
#include "reswvl/prompt/prompt_bank.hpp"
#include "reswvl/train/feature_cache.hpp"
#include "reswvl/train/frame_store.hpp"
#include "reswvl/train/loss.hpp"

namespace reswvl {

/// Log-spaced learning-rate candidates across the search range.
inline std::vector<double> default_lr_grid(int points = 5, double lo = 5e-6, double hi = 5e-4) {
    std::vector<double> grid;
    for (int i = 0; i < points; ++i) {
        const double f = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
        grid.push_back(lo * std::pow(hi / lo, f));
    }
    return grid;
}

struct Stage1Config {
    int epochs = 50;
    double learning_rate = 0.0;  // 0: run the grid search first
    std::vector<double> lr_grid = default_lr_grid();
    int lr_search_epochs = 5;
    int batch_size = 64;
    double weight_decay = 0.01;
    AugmentParams augment{};   // resize 256, crop 224
    int eval_resize = 224;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 1) throw ConfigError("stage 1: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("stage 1: batch_size must be >= 1");
        if (lr_grid.empty()) throw ConfigError("stage 1: learning-rate grid is empty");
        for (const double lr : lr_grid)
            if (lr < 5e-6 * (1 - 1e-9) || lr > 5e-4 * (1 + 1e-9))
                throw ConfigError("stage 1: grid rate " + std::to_string(lr) +
                                  " outside the search range [5e-6, 5e-4]");
        if (augment.crop > augment.resize)
            throw ConfigError("stage 1: crop size exceeds resize size");
    }
};

struct Stage1BuildOptions {
    std::string backbone = "toy";
    std::filesystem::path weights_path;
    ToyEncoderOptions toy;
    PromptBankConfig prompt;
    bool normalize_logits = true;
    bool init_tokens_from_text_encoder = true;
    std::uint64_t seed = 0;
};

/// Everything stage 1 trains: image encoder, prompt bank, logit head. The
/// text encoder rides along frozen.
template <typename T>
struct Stage1System {
    EncoderPair<T> encoders;
    PromptBank<T> bank;
    LogitHead<T> head{true};
    Stage1BuildOptions build;

    int phase_count() const { return bank.config().phase_count; }
    int feature_dim() const { return encoders.image->feature_dim(); }

    std::vector<Param<T>*> trainable_parameters() {
        auto out = encoders.image->parameters();
        for (auto* p : bank.parameters()) out.push_back(p);
        out.push_back(&head.log_scale);
        return out;
    }

    /// Current P x d text features from the learned prompts.
    Tensor<T> text_features() { return encoders.text->encode_tokens(bank.materialize_all()); }
};

template <typename T>
Stage1System<T> build_stage1_system(Stage1BuildOptions opt) {
    opt.toy.seed = opt.seed;
    Stage1System<T> sys;
    sys.encoders = attach_pretrained_backbone<T>(opt.backbone, opt.weights_path, opt.toy);
    if (opt.prompt.token_dim == 0) opt.prompt.token_dim = sys.encoders.text->token_dim();
    if (opt.prompt.token_dim != sys.encoders.text->token_dim())
        throw ConfigError("prompt token_dim " + std::to_string(opt.prompt.token_dim) +
                          " does not match text encoder token_dim " +
                          std::to_string(sys.encoders.text->token_dim()));

    std::function<std::vector<T>(const std::string&)> embedder;
    if (opt.init_tokens_from_text_encoder) {
        const auto* text = sys.encoders.text.get();
        if (!text->embed_token_string("1").empty())
            embedder = [text](const std::string& s) { return text->embed_token_string(s); };
    }
    Rng bank_rng(derive_seed(opt.seed, "prompt-bank"));
    sys.bank = PromptBank<T>(opt.prompt, bank_rng, embedder);
    sys.head = LogitHead<T>(opt.normalize_logits);
    sys.build = opt;
    return sys;
}

struct Stage1EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct Stage1TrainReport {
    std::vector<Stage1EpochStats> history;
    int best_epoch = -1;
    double best_val_accuracy = 0.0;
    bool diverged = false;
    bool selected_by_val = true;
    double chosen_learning_rate = 0.0;
};

namespace detail {

struct FrameRef {
    std::size_t video;  // index into the annotations vector
    std::size_t second;
    int label;
};

inline std::map<std::string, std::size_t> index_by_id(const std::vector<VideoAnnotation>& videos) {
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < videos.size(); ++i) out[videos[i].video_id] = i;
    return out;
}

inline std::vector<FrameRef> collect_frames(const std::vector<VideoAnnotation>& videos,
                                            const std::vector<std::string>& ids,
                                            const std::map<std::string, std::size_t>& index) {
    std::vector<FrameRef> out;
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw DataError("split references unknown video '" + id + "'");
        const auto vi = it->second;
        for (std::size_t t = 0; t < videos[vi].labels.size(); ++t)
            out.push_back({vi, t, videos[vi].labels[t]});
    }
    return out;
}

template <typename T>
std::vector<Tensor<T>> snapshot_values(const std::vector<Param<T>*>& params) {
    std::vector<Tensor<T>> out;
    for (const auto* p : params) out.push_back(p->value);
    return out;
}

template <typename T>
void restore_values(const std::vector<Param<T>*>& params, const std::vector<Tensor<T>>& snap) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

}  // namespace detail

/// Validation frame accuracy with the encoder in eval mode (resize only, no
/// augmentation).
template <typename T>
double evaluate_stage1(Stage1System<T>& sys, const std::vector<VideoAnnotation>& videos,
                       const std::vector<std::string>& ids, const FrameStore& frames,
                       int eval_resize, int batch_size) {
    const auto index = detail::index_by_id(videos);
    const auto items = detail::collect_frames(videos, ids, index);
    if (items.empty()) return 0.0;
    const auto txt = sys.text_features();
    std::size_t hits = 0;
    for (std::size_t start = 0; start < items.size(); start += batch_size) {
        const std::size_t n = std::min<std::size_t>(batch_size, items.size() - start);
        Tensor<T> batch({n, 3, static_cast<std::size_t>(eval_resize),
                         static_cast<std::size_t>(eval_resize)});
        std::vector<int> targets(n);
        for (std::size_t b = 0; b < n; ++b) {
            const auto& item = items[start + b];
            Image img = frames.frame(videos[item.video], item.second);
            if (img.width != eval_resize || img.height != eval_resize)
                img = resize_bilinear(img, eval_resize, eval_resize);
            image_to_batch(img, batch, b);
            targets[b] = item.label;
        }
        const auto feats = sys.encoders.image->encode(batch, /*train_mode=*/false);
        const auto logits = sys.head.forward(feats, txt);
        const auto pred = argmax_labels(logits);
        for (std::size_t b = 0; b < n; ++b)
            if (pred[b] == targets[b]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(items.size());
}

/// Stage-1 fine-tuning: augmented frames against the prompt bank under
/// weighted cross entropy; updates flow to the image encoder, the prompts and
/// the logit scale, never to the text encoder. Returns the best-validation
/// epoch's parameters in place.
template <typename T>
Stage1TrainReport train_stage1(Stage1System<T>& sys, const std::vector<VideoAnnotation>& videos,
                               const DatasetSplit& split, const FrameStore& frames,
                               const Stage1Config& cfg, std::ostream* log = &std::cerr) {
    cfg.validate();
    if (split.train.empty()) throw TrainError("stage 1: training split is empty");
    if (cfg.learning_rate <= 0.0)
        throw ConfigError("stage 1: learning rate not set (run the lr search or set one)");

    const auto index = detail::index_by_id(videos);
    auto train_items = detail::collect_frames(videos, split.train, index);

    std::vector<const std::vector<int>*> train_labels;
    for (const auto& id : split.train) train_labels.push_back(&videos[index.at(id)].labels);
    const auto weights =
        median_frequency_weights(phase_counts(train_labels, sys.phase_count()));

    auto params = sys.trainable_parameters();
    AdamW<T> optimizer(params, {0.9, 0.999, 1e-8, cfg.weight_decay});

    Stage1TrainReport report;
    report.chosen_learning_rate = cfg.learning_rate;
    report.selected_by_val = !split.val.empty();
    std::vector<Tensor<T>> best_snapshot = detail::snapshot_values(params);
    double best_metric = -std::numeric_limits<double>::infinity();

    const int crop = cfg.augment.crop;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(cfg.learning_rate, epoch, cfg.epochs);
        Rng shuffle_rng(derive_seed(cfg.seed, "stage1-shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(train_items);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        bool finite = true;
        for (std::size_t start = 0; start < train_items.size() && finite;
             start += cfg.batch_size) {
            const std::size_t n = std::min<std::size_t>(cfg.batch_size, train_items.size() - start);
            Tensor<T> batch({n, 3, static_cast<std::size_t>(crop), static_cast<std::size_t>(crop)});
            std::vector<int> targets(n);
            for (std::size_t b = 0; b < n; ++b) {
                const auto& item = train_items[start + b];
                // augmentation stream keyed by (epoch, video, second): results
                // do not depend on shuffling or batch boundaries
                Rng aug_rng(derive_seed(cfg.seed, "stage1-augment", static_cast<std::uint64_t>(epoch),
                                        item.video, item.second));
                const Image img = frames.frame(videos[item.video], item.second);
                image_to_batch(augment(img, cfg.augment, aug_rng), batch, b);
                targets[b] = item.label;
            }

            const auto img_feats = sys.encoders.image->encode(batch, /*train_mode=*/true);
            const auto txt_feats = sys.text_features();
            const auto logits = sys.head.forward(img_feats, txt_feats);
            const auto ce = weighted_cross_entropy(logits, targets, weights);
            if (!std::isfinite(ce.loss)) {
                finite = false;
                break;
            }
            loss_sum += ce.loss;
            ++batches;

            auto [dimg, dtxt] = sys.head.backward(ce.dlogits);
            sys.bank.accumulate_grad_all(sys.encoders.text->backward_tokens(dtxt));
            sys.encoders.image->backward(dimg);
            optimizer.step(lr);
            optimizer.zero_grad();
        }

        if (!finite) {
            report.diverged = true;
            if (log) (*log) << "[stage1] epoch " << epoch + 1 << ": non-finite loss, stopping and "
                            << "keeping the best checkpoint so far\n";
            break;
        }

        Stage1EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        stats.val_accuracy =
            split.val.empty() ? 0.0
                              : evaluate_stage1(sys, videos, split.val, frames, cfg.eval_resize,
                                                cfg.batch_size);
        report.history.push_back(stats);
        if (log)
            (*log) << "[stage1] epoch " << epoch + 1 << "/" << cfg.epochs << "  lr " << lr
                   << "  loss " << stats.train_loss << "  val acc " << stats.val_accuracy << "\n";

        const double metric = report.selected_by_val ? stats.val_accuracy : -stats.train_loss;
        if (metric > best_metric) {
            best_metric = metric;
            report.best_epoch = epoch;
            report.best_val_accuracy = stats.val_accuracy;
            best_snapshot = detail::snapshot_values(params);
        }
    }

    detail::restore_values(params, best_snapshot);
    return report;
}

struct LrSearchResult {
    double rate = 0.0;
    std::vector<std::pair<double, double>> candidate_scores;  // (rate, best val accuracy)
};

/// Trains each candidate rate for a short budget from a fresh system and
/// keeps the one with the best validation frame accuracy; ties go to the
/// smaller rate.
template <typename T>
LrSearchResult select_learning_rate(const std::function<Stage1System<T>()>& make_system,
                                    const std::vector<VideoAnnotation>& videos,
                                    const DatasetSplit& split, const FrameStore& frames,
                                    const Stage1Config& cfg, std::ostream* log = &std::cerr) {
    cfg.validate();
    if (cfg.lr_search_epochs < 1)
        throw ConfigError("lr search: budget must be at least one epoch");
    auto grid = cfg.lr_grid;
    std::sort(grid.begin(), grid.end());
    LrSearchResult result;
    double best = -1.0;
    for (const double rate : grid) {
        auto sys = make_system();
        Stage1Config short_cfg = cfg;
        short_cfg.epochs = cfg.lr_search_epochs;
        short_cfg.learning_rate = rate;
        const auto rep = train_stage1(sys, videos, split, frames, short_cfg, nullptr);
        result.candidate_scores.emplace_back(rate, rep.best_val_accuracy);
        if (log)
            (*log) << "[lr-search] rate " << rate << "  val acc " << rep.best_val_accuracy << "\n";
        if (rep.best_val_accuracy > best) {
            best = rep.best_val_accuracy;
            result.rate = rate;
        }
    }
    if (log) (*log) << "[lr-search] selected " << result.rate << "\n";
    return result;
}

/// One d-vector per 1 fps frame with the encoder in eval mode; the sole input
/// of stage 2.
template <typename T>
Tensor<T> encode_video_features(ImageEncoder<T>& encoder, const VideoAnnotation& video,
                                const FrameStore& frames, int eval_resize, int batch_size) {
    const std::size_t total = video.labels.size();
    const auto d = static_cast<std::size_t>(encoder.feature_dim());
    Tensor<T> out({total, d});
    for (std::size_t start = 0; start < total; start += batch_size) {
        const std::size_t n = std::min<std::size_t>(batch_size, total - start);
        Tensor<T> batch({n, 3, static_cast<std::size_t>(eval_resize),
                         static_cast<std::size_t>(eval_resize)});
        for (std::size_t b = 0; b < n; ++b) {
            Image img = frames.frame(video, start + b);
            if (img.width != eval_resize || img.height != eval_resize)
                img = resize_bilinear(img, eval_resize, eval_resize);
            image_to_batch(img, batch, b);
        }
        const auto feats = encoder.encode(batch, /*train_mode=*/false);
        std::copy(feats.data.begin(), feats.data.end(), out.ptr() + start * d);
    }
    return out;
}

struct ExtractStats {
    int written = 0;
    int skipped = 0;
};

/// Fills the feature cache for the given videos; complete entries are left
/// untouched, so reruns are no-ops.
template <typename T>
ExtractStats extract_features(Stage1System<T>& sys, const std::vector<VideoAnnotation>& videos,
                              const std::vector<std::string>& ids, const FrameStore& frames,
                              FeatureCache& cache, int eval_resize, int batch_size,
                              std::ostream* log = &std::cerr) {
    const auto index = detail::index_by_id(videos);
    ExtractStats stats;
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw DataError("extract: unknown video '" + id + "'");
        const auto& video = videos[it->second];
        const auto d = static_cast<std::size_t>(sys.feature_dim());
        if (cache.has_complete(id, video.labels.size(), d)) {
            ++stats.skipped;
            continue;
        }
        FeatureCacheEntry<T> entry;
        entry.video_id = id;
        entry.labels = video.labels;
        entry.features =
            encode_video_features(*sys.encoders.image, video, frames, eval_resize, batch_size);
        cache.write(entry);
        ++stats.written;
        if (log) (*log) << "[extract] " << id << ": " << video.labels.size() << " x " << d << "\n";
    }
    return stats;
}

/// Frame-by-frame argmax over prompt logits; the "stage 1 only" baseline.
template <typename T>
std::vector<int> framewise_argmax(Stage1System<T>& sys, const Tensor<T>& features) {
    const auto txt = sys.text_features();
    return argmax_labels(sys.head.forward(features, txt));
}

// ---------------------------------------------------------------------------
// checkpointing

template <typename T>
void save_stage1_checkpoint(const std::filesystem::path& path, Stage1System<T>& sys,
                            AdamW<T>* optimizer, const Stage1TrainReport& report,
                            const std::string& config_digest) {
    Archive a;
    const auto& opt = sys.build;
    a.manifest["kind"] = "stage1-checkpoint";
    a.manifest["backbone"] = opt.backbone;
    a.manifest["toy"] = {{"feature_dim", opt.toy.feature_dim},
                         {"token_dim", opt.toy.token_dim},
                         {"conv1_channels", opt.toy.conv1_channels},
                         {"conv2_channels", opt.toy.conv2_channels}};
    a.manifest["prompt.variant"] = to_string(sys.bank.config().variant);
    a.manifest["prompt.m"] = sys.bank.config().context_tokens;
    a.manifest["prompt.n"] = sys.bank.config().reference_count();
    a.manifest["prompt.reference_indices"] = sys.bank.config().reference_indices;
    a.manifest["prompt.phase_count"] = sys.bank.config().phase_count;
    a.manifest["prompt.token_dim"] = sys.bank.config().token_dim;
    a.manifest["normalize_logits"] = opt.normalize_logits;
    a.manifest["seed"] = opt.seed;
    a.manifest["config_digest"] = config_digest;
    a.manifest["best_epoch"] = report.best_epoch;
    a.manifest["best_val_accuracy"] = report.best_val_accuracy;
    a.manifest["diverged"] = report.diverged;
    a.manifest["chosen_learning_rate"] = report.chosen_learning_rate;
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : report.history)
        hist.push_back({{"epoch", h.epoch},
                        {"lr", h.lr},
                        {"train_loss", h.train_loss},
                        {"val_accuracy", h.val_accuracy}});
    a.manifest["history"] = hist;

    for (auto* p : sys.trainable_parameters()) a.put(p->name, p->value);
    if (optimizer) {
        optimizer->visit_state([&](const std::string& name, const Tensor<T>& t) { a.put(name, t); });
        Tensor<std::int64_t> step({1});
        step(0) = optimizer->step_count();
        a.put("optimizer.step_count", step);
    }
    a.save(path);
}

template <typename T>
struct Stage1Checkpoint {
    Stage1System<T> system;
    nlohmann::json manifest;
};

template <typename T>
Stage1Checkpoint<T> load_stage1_checkpoint(const std::filesystem::path& path) {
    Archive a = Archive::load(path);
    if (!a.manifest.contains("kind") || a.manifest["kind"] != "stage1-checkpoint")
        throw DataError("not a stage-1 checkpoint: " + path.string());
    Stage1BuildOptions opt;
    opt.backbone = a.manifest["backbone"].get<std::string>();
    opt.toy.feature_dim = a.manifest["toy"]["feature_dim"].get<int>();
    opt.toy.token_dim = a.manifest["toy"]["token_dim"].get<int>();
    opt.toy.conv1_channels = a.manifest["toy"]["conv1_channels"].get<int>();
    opt.toy.conv2_channels = a.manifest["toy"]["conv2_channels"].get<int>();
    opt.prompt.phase_count = a.manifest["prompt.phase_count"].get<int>();
    opt.prompt.context_tokens = a.manifest["prompt.m"].get<int>();
    opt.prompt.token_dim = a.manifest["prompt.token_dim"].get<int>();
    opt.prompt.variant = parse_prompt_variant(a.manifest["prompt.variant"].get<std::string>());
    opt.prompt.reference_indices =
        a.manifest["prompt.reference_indices"].get<std::vector<int>>();
    opt.normalize_logits = a.manifest["normalize_logits"].get<bool>();
    opt.seed = a.manifest["seed"].get<std::uint64_t>();

    Stage1Checkpoint<T> ck;
    ck.system = build_stage1_system<T>(opt);
    ck.manifest = a.manifest;
    for (auto* p : ck.system.trainable_parameters()) {
        const auto& t = a.get<T>(p->name);
        if (t.shape != p->value.shape)
            throw DataError("checkpoint: shape mismatch for '" + p->name + "' in " + path.string());
        p->value = t;
    }
    return ck;
}

}  // namespace reswvl
