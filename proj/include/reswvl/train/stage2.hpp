#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "reswvl/core/archive.hpp"
#include "reswvl/tcn/tcn.hpp"
#include "reswvl/train/feature_cache.hpp"
#include "reswvl/train/loss.hpp"

namespace reswvl {

template <typename T>
struct PhasePrediction {
    std::string video_id;
    Tensor<T> logits;         // T x P, last stage
    std::vector<int> labels;  // per-frame argmax, 1-based
};

struct Stage2EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct Stage2TrainReport {
    std::vector<Stage2EpochStats> history;
    int best_epoch = -1;
    double best_val_accuracy = 0.0;
    bool diverged = false;
    bool selected_by_val = true;
    double chosen_learning_rate = 0.0;
};

namespace detail {

template <typename T>
double tcn_accuracy(Tcn<T>& tcn, const std::vector<FeatureCacheEntry<T>>& entries) {
    std::size_t hits = 0, total = 0;
    for (const auto& e : entries) {
        const auto pred = argmax_labels(tcn.forward_eval(e.features));
        for (std::size_t t = 0; t < pred.size(); ++t)
            if (pred[t] == e.labels[t]) ++hits;
        total += pred.size();
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace detail

/// Stage 2: trains the TCN on cached features, one full video per
/// optimization step, weighted cross entropy over all frames with
/// median-frequency weights from the training split. The image encoder never
/// appears here; its output is already frozen into the cache.
template <typename T>
Stage2TrainReport train_stage2(Tcn<T>& tcn, const FeatureCache& cache, const DatasetSplit& split,
                               std::ostream* log = &std::cerr) {
    const auto& cfg = tcn.config();
    cfg.validate();
    if (cfg.learning_rate <= 0.0)
        throw ConfigError("stage 2: learning rate not set (run the lr search or set one)");
    if (split.train.empty()) throw TrainError("stage 2: training split is empty");

    std::vector<FeatureCacheEntry<T>> train_entries, val_entries;
    for (const auto& id : split.train) train_entries.push_back(cache.read<T>(id));
    for (const auto& id : split.val) val_entries.push_back(cache.read<T>(id));

    std::vector<const std::vector<int>*> train_labels;
    for (const auto& e : train_entries) train_labels.push_back(&e.labels);
    const auto weights = median_frequency_weights(phase_counts(train_labels, cfg.phase_count));

    auto params = tcn.parameters();
    AdamW<T> optimizer(params, {0.9, 0.999, 1e-8, cfg.weight_decay});

    Stage2TrainReport report;
    report.chosen_learning_rate = cfg.learning_rate;
    report.selected_by_val = !val_entries.empty();
    auto best_snapshot = detail::snapshot_values(params);
    double best_metric = -std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(train_entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(cfg.learning_rate, epoch, cfg.epochs);
        Rng shuffle_rng(derive_seed(cfg.seed, "stage2-shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        bool finite = true;
        for (const auto vi : order) {
            const auto& entry = train_entries[vi];
            Rng drop_rng(derive_seed(cfg.seed, "stage2-dropout", static_cast<std::uint64_t>(epoch), vi));
            const auto logits = tcn.forward(entry.features, /*train=*/true, &drop_rng);
            double video_loss = 0.0;
            std::vector<Tensor<T>> dlogits;
            for (const auto& stage_logits : logits) {
                auto ce = weighted_cross_entropy(stage_logits, entry.labels, weights);
                video_loss += ce.loss;
                dlogits.push_back(std::move(ce.dlogits));
            }
            if (!std::isfinite(video_loss)) {
                finite = false;
                break;
            }
            loss_sum += video_loss;
            tcn.backward(dlogits);
            optimizer.step(lr);
            optimizer.zero_grad();
        }

        if (!finite) {
            report.diverged = true;
            if (log) (*log) << "[stage2] epoch " << epoch + 1 << ": non-finite loss, stopping and "
                            << "keeping the best checkpoint so far\n";
            break;
        }

        Stage2EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_loss =
            order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size());
        stats.val_accuracy = val_entries.empty() ? 0.0 : detail::tcn_accuracy(tcn, val_entries);
        report.history.push_back(stats);
        if (log)
            (*log) << "[stage2] epoch " << epoch + 1 << "/" << cfg.epochs << "  lr " << lr
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

/// Deterministic per-video inference; causality makes any prefix of the
/// features produce the same prefix of predictions.
template <typename T>
PhasePrediction<T> predict_video(Tcn<T>& tcn, const FeatureCacheEntry<T>& entry) {
    PhasePrediction<T> out;
    out.video_id = entry.video_id;
    out.logits = tcn.forward_eval(entry.features);
    out.labels = argmax_labels(out.logits);
    return out;
}

// ---------------------------------------------------------------------------
// checkpointing

template <typename T>
void save_stage2_checkpoint(const std::filesystem::path& path, Tcn<T>& tcn,
                            const Stage2TrainReport& report, const std::string& config_digest) {
    Archive a;
    const auto& cfg = tcn.config();
    a.manifest["kind"] = "stage2-checkpoint";
    a.manifest["tcn"] = {{"stages", cfg.stages},         {"layers", cfg.layers},
                         {"hidden_dim", cfg.hidden_dim}, {"kernel_size", cfg.kernel_size},
                         {"dropout", cfg.dropout},       {"input_dim", cfg.input_dim},
                         {"phase_count", cfg.phase_count}};
    a.manifest["seed"] = cfg.seed;
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
    for (auto* p : tcn.parameters()) a.put(p->name, p->value);
    a.save(path);
}

template <typename T>
Tcn<T> load_stage2_checkpoint(const std::filesystem::path& path) {
    Archive a = Archive::load(path);
    if (!a.manifest.contains("kind") || a.manifest["kind"] != "stage2-checkpoint")
        throw DataError("not a stage-2 checkpoint: " + path.string());
    TcnConfig cfg;
    const auto& j = a.manifest["tcn"];
    cfg.stages = j["stages"].get<int>();
    cfg.layers = j["layers"].get<int>();
    cfg.hidden_dim = j["hidden_dim"].get<int>();
    cfg.kernel_size = j["kernel_size"].get<int>();
    cfg.dropout = j["dropout"].get<double>();
    cfg.input_dim = j["input_dim"].get<int>();
    cfg.phase_count = j["phase_count"].get<int>();
    cfg.seed = a.manifest["seed"].get<std::uint64_t>();
    cfg.learning_rate = a.manifest["chosen_learning_rate"].get<double>();
    if (cfg.learning_rate <= 0.0) cfg.learning_rate = 5e-4;
    Rng rng(derive_seed(cfg.seed, "tcn-init"));
    Tcn<T> tcn(cfg, rng);
    for (auto* p : tcn.parameters()) {
        const auto& t = a.get<T>(p->name);
        if (t.shape != p->value.shape)
            throw DataError("checkpoint: shape mismatch for '" + p->name + "' in " + path.string());
        p->value = t;
    }
    return tcn;
}

}  // namespace reswvl
