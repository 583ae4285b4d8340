#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "reswvl/core/version.hpp"
#include "reswvl/eval/metrics.hpp"
#include "reswvl/eval/prediction_io.hpp"
#include "reswvl/eval/ribbon.hpp"
#include "reswvl/pipeline/config.hpp"
#include "reswvl/train/stage2.hpp"

namespace reswvl {

/// Numeric type for full pipeline runs; tests drive the same code in double.
using PipelineScalar = float;

struct PipelinePaths {
    std::filesystem::path out_root, dataset_root, stage1_dir, cache_dir, stage2_dir, preds_root,
        report_dir;

    static PipelinePaths from_config(const PipelineConfig& cfg) {
        PipelinePaths p;
        p.out_root = cfg.out_root;
        p.dataset_root = cfg.dataset.root.empty() ? p.out_root / "dataset"
                                                  : std::filesystem::path(cfg.dataset.root);
        p.stage1_dir = p.out_root / "stage1";
        p.cache_dir = p.out_root / "cache";
        p.stage2_dir = p.out_root / "stage2";
        p.preds_root = p.out_root / "preds";
        p.report_dir = p.out_root / "report";
        return p;
    }

    std::filesystem::path stage1_checkpoint() const { return stage1_dir / "checkpoint.rswv"; }
    std::filesystem::path stage2_checkpoint() const { return stage2_dir / "checkpoint.rswv"; }
};

/// Every run directory carries a manifest that pins what produced it: the
/// command, the full config, its digest, the seed and the library version.
/// No timestamps, so identical runs stay byte-identical.
inline void write_run_manifest(const std::filesystem::path& dir, const std::string& command,
                               const PipelineConfig& cfg,
                               const nlohmann::json& extra = nlohmann::json::object()) {
    std::filesystem::create_directories(dir);
    nlohmann::json m{{"command", command},
                     {"config_digest", cfg.digest()},
                     {"seed", cfg.seed},
                     {"library_version", kVersion},
                     {"config", cfg.raw}};
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    std::ofstream out(dir / "manifest.json");
    if (!out) throw DataError("cannot write manifest in " + dir.string());
    out << m.dump(2) << "\n";
}

struct PreparedDataset {
    PhaseVocabulary vocabulary;
    std::vector<VideoAnnotation> videos;
    DatasetSplit split;
};

/// Materializes the synthetic dataset root when configured (and absent), then
/// ingests annotations and forms the split.
inline PreparedDataset prepare_dataset(const PipelineConfig& cfg, const PipelinePaths& paths) {
    std::string format = cfg.dataset.format;
    if (cfg.dataset.source == "synthetic") {
        format = "canonical-tsv";
        if (!std::filesystem::exists(paths.dataset_root / "phases.json")) {
            std::cerr << "[data] generating synthetic dataset at " << paths.dataset_root << "\n";
            write_synthetic_root(paths.dataset_root, generate_synthetic(cfg.dataset.synthetic));
        }
    } else if (cfg.dataset.root.empty()) {
        throw ConfigError("dataset.root is required when dataset.source = \"root\"");
    }
    auto ingest = load_annotations(paths.dataset_root, parse_annotation_format(format));
    PreparedDataset out;
    out.vocabulary = std::move(ingest.vocabulary);
    out.videos = std::move(ingest.videos);
    out.split = make_split(out.videos, cfg.dataset.train, cfg.dataset.val, cfg.dataset.test);
    return out;
}

// ---------------------------------------------------------------------------
// data subcommands

inline void run_data_synth(const SyntheticSpec& spec, const std::filesystem::path& out_root) {
    write_synthetic_root(out_root, generate_synthetic(spec));
    std::cerr << "[data] wrote synthetic dataset (" << spec.videos << " videos, " << spec.phase_count
              << " phases) to " << out_root << "\n";
}

inline void run_data_ingest(const std::filesystem::path& root, const std::string& format,
                            const std::filesystem::path& out_root) {
    const auto result = load_annotations(root, parse_annotation_format(format));
    std::vector<VideoAnnotation> videos = result.videos;
    write_canonical_root(out_root, result.vocabulary, videos);
    std::cerr << "[data] ingested " << videos.size() << " videos ("
              << result.vocabulary.phase_count() << " phases) into " << out_root << "\n";
}

// ---------------------------------------------------------------------------
// stage 1

inline void run_stage1_lr_search(const PipelineConfig& cfg) {
    const auto paths = PipelinePaths::from_config(cfg);
    auto data = prepare_dataset(cfg, paths);
    const auto build = stage1_build_options(cfg, data.vocabulary.phase_count());
    DiskFrameStore frames;
    const auto result = select_learning_rate<PipelineScalar>(
        [&] { return build_stage1_system<PipelineScalar>(build); }, data.videos, data.split, frames,
        cfg.stage1);
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& [rate, acc] : result.candidate_scores)
        scores.push_back({{"rate", rate}, {"val_accuracy", acc}});
    std::filesystem::create_directories(paths.stage1_dir);
    std::ofstream out(paths.stage1_dir / "lr_search.json");
    out << nlohmann::json{{"selected_rate", result.rate}, {"candidates", scores}}.dump(2) << "\n";
    write_run_manifest(paths.stage1_dir, "stage1 lr-search", cfg);
}

inline double resolve_stage1_rate(const PipelineConfig& cfg, const PreparedDataset& data,
                                  const Stage1BuildOptions& build, const FrameStore& frames) {
    if (cfg.stage1.learning_rate > 0.0) return cfg.stage1.learning_rate;
    std::cerr << "[stage1] no learning rate set; searching the grid\n";
    return select_learning_rate<PipelineScalar>(
               [&] { return build_stage1_system<PipelineScalar>(build); }, data.videos, data.split,
               frames, cfg.stage1)
        .rate;
}

inline void run_stage1_train(const PipelineConfig& cfg) {
    const auto paths = PipelinePaths::from_config(cfg);
    auto data = prepare_dataset(cfg, paths);
    const auto build = stage1_build_options(cfg, data.vocabulary.phase_count());
    DiskFrameStore frames;

    Stage1Config s1 = cfg.stage1;
    s1.learning_rate = resolve_stage1_rate(cfg, data, build, frames);

    auto sys = build_stage1_system<PipelineScalar>(build);
    auto report = train_stage1(sys, data.videos, data.split, frames, s1);
    if (report.diverged && report.best_epoch < 0)
        throw TrainError("stage 1 diverged before completing a single epoch");

    std::filesystem::create_directories(paths.stage1_dir);
    save_stage1_checkpoint(paths.stage1_checkpoint(), sys, static_cast<AdamW<PipelineScalar>*>(nullptr),
                           report, cfg.digest());
    write_run_manifest(paths.stage1_dir, "stage1 train", cfg,
                       {{"best_epoch", report.best_epoch},
                        {"best_val_accuracy", report.best_val_accuracy},
                        {"learning_rate", s1.learning_rate},
                        {"reference_indices", build.prompt.reference_indices}});
    std::cerr << "[stage1] best epoch " << report.best_epoch + 1 << " val acc "
              << report.best_val_accuracy << "\n";
}

/// Splits named on the `stage1 extract` command line.
inline std::vector<std::string> split_ids(const PreparedDataset& data, const std::string& which) {
    std::vector<std::string> ids;
    std::stringstream ss(which);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part == "train") ids.insert(ids.end(), data.split.train.begin(), data.split.train.end());
        else if (part == "val") ids.insert(ids.end(), data.split.val.begin(), data.split.val.end());
        else if (part == "test") ids.insert(ids.end(), data.split.test.begin(), data.split.test.end());
        else throw ConfigError("unknown split '" + part + "' (expected train, val, test)");
    }
    return ids;
}

inline void run_stage1_extract(const PipelineConfig& cfg, const std::string& which = "train,val,test") {
    const auto paths = PipelinePaths::from_config(cfg);
    auto data = prepare_dataset(cfg, paths);
    auto ck = load_stage1_checkpoint<PipelineScalar>(paths.stage1_checkpoint());
    DiskFrameStore frames;
    FeatureCache cache(paths.cache_dir);

    const auto ids = split_ids(data, which);
    const auto stats = extract_features(ck.system, data.videos, ids, frames, cache,
                                        cfg.stage1.eval_resize, cfg.stage1.batch_size);

    // framewise argmax over the cached features: the stage-1-only baseline
    const auto preds_dir = paths.preds_root / "stage1";
    std::filesystem::create_directories(preds_dir);
    for (const auto& id : data.split.test) {
        if (!std::filesystem::exists(cache.entry_path(id))) continue;  // test split not extracted
        const auto entry = cache.read<PipelineScalar>(id);
        const auto labels = framewise_argmax(ck.system, entry.features);
        write_prediction_tsv(preds_dir / (id + ".tsv"), entry.labels, labels);
    }

    write_run_manifest(paths.cache_dir, "stage1 extract", cfg,
                       {{"written", stats.written}, {"skipped", stats.skipped}, {"splits", which}});
    std::cerr << "[extract] wrote " << stats.written << " entries, skipped " << stats.skipped
              << " complete\n";
}

// ---------------------------------------------------------------------------
// stage 2

template <typename T>
double select_stage2_learning_rate(const TcnConfig& cfg, const FeatureCache& cache,
                                   const DatasetSplit& split, std::ostream* log = &std::cerr) {
    if (cfg.lr_search_epochs < 1) throw ConfigError("lr search: budget must be at least one epoch");
    auto grid = cfg.lr_grid;
    std::sort(grid.begin(), grid.end());
    double best_acc = -1.0, best_rate = grid.front();
    for (const double rate : grid) {
        TcnConfig trial = cfg;
        trial.epochs = cfg.lr_search_epochs;
        trial.learning_rate = rate;
        Rng rng(derive_seed(cfg.seed, "tcn-init"));
        Tcn<T> tcn(trial, rng);
        const auto rep = train_stage2(tcn, cache, split, nullptr);
        if (log) (*log) << "[stage2 lr-search] rate " << rate << "  val acc "
                        << rep.best_val_accuracy << "\n";
        if (rep.best_val_accuracy > best_acc) {
            best_acc = rep.best_val_accuracy;
            best_rate = rate;
        }
    }
    if (log) (*log) << "[stage2 lr-search] selected " << best_rate << "\n";
    return best_rate;
}

inline void run_stage2_train(const PipelineConfig& cfg) {
    const auto paths = PipelinePaths::from_config(cfg);
    auto data = prepare_dataset(cfg, paths);
    FeatureCache cache(paths.cache_dir);
    if (data.split.train.empty()) throw TrainError("stage 2: training split is empty");

    TcnConfig tcfg = cfg.stage2;
    tcfg.phase_count = data.vocabulary.phase_count();
    const auto probe = cache.read<PipelineScalar>(data.split.train.front());
    tcfg.input_dim = static_cast<int>(probe.features.dim(1));
    if (tcfg.learning_rate <= 0.0)
        tcfg.learning_rate = select_stage2_learning_rate<PipelineScalar>(tcfg, cache, data.split);

    Rng rng(derive_seed(tcfg.seed, "tcn-init"));
    Tcn<PipelineScalar> tcn(tcfg, rng);
    const auto report = train_stage2(tcn, cache, data.split);
    if (report.diverged && report.best_epoch < 0)
        throw TrainError("stage 2 diverged before completing a single epoch");

    std::filesystem::create_directories(paths.stage2_dir);
    save_stage2_checkpoint(paths.stage2_checkpoint(), tcn, report, cfg.digest());
    write_run_manifest(paths.stage2_dir, "stage2 train", cfg,
                       {{"best_epoch", report.best_epoch},
                        {"best_val_accuracy", report.best_val_accuracy},
                        {"learning_rate", tcfg.learning_rate},
                        {"receptive_field", tcfg.receptive_field()}});
    std::cerr << "[stage2] best epoch " << report.best_epoch + 1 << " val acc "
              << report.best_val_accuracy << "\n";
}

inline void run_stage2_predict(const PipelineConfig& cfg, const std::string& which = "test",
                               bool write_logits = false,
                               const std::filesystem::path& out_override = {}) {
    const auto paths = PipelinePaths::from_config(cfg);
    auto data = prepare_dataset(cfg, paths);
    FeatureCache cache(paths.cache_dir);
    auto tcn = load_stage2_checkpoint<PipelineScalar>(paths.stage2_checkpoint());

    const auto preds_dir = out_override.empty() ? paths.preds_root / "stage2" : out_override;
    std::filesystem::create_directories(preds_dir);
    for (const auto& id : split_ids(data, which)) {
        const auto entry = cache.read<PipelineScalar>(id);
        const auto pred = predict_video(tcn, entry);
        write_prediction_tsv(preds_dir / (id + ".tsv"), entry.labels, pred.labels);
        if (write_logits) {
            Archive a;
            a.manifest = {{"kind", "logits"}, {"video_id", id}};
            a.put("logits", pred.logits);
            a.save(preds_dir / (id + ".logits.rswv"));
        }
    }
    write_run_manifest(preds_dir, "stage2 predict", cfg, {{"splits", which}});
}

// ---------------------------------------------------------------------------
// evaluation

namespace detail {

inline std::string format_pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
    return buf;
}

inline nlohmann::json mean_std_json(const MeanStd& ms) {
    return {{"mean", ms.mean}, {"std", ms.std}, {"count", ms.count}};
}

}  // namespace detail

struct MethodEval {
    std::string name;
    std::vector<EvalSequences> sequences;
    EvalReport report;
};

/// Evaluates each prediction directory against the ground-truth annotations
/// and writes report.json, report.md and per-video ribbons.
inline void run_eval(const std::filesystem::path& gt_root,
                     const std::vector<std::pair<std::string, std::filesystem::path>>& pred_dirs,
                     const std::filesystem::path& out_dir,
                     const PipelineConfig* manifest_cfg = nullptr) {
    if (pred_dirs.empty()) throw ConfigError("eval: no prediction directories given");
    std::string format = "canonical-tsv";
    if (std::filesystem::exists(gt_root / "meta.json")) {
        std::ifstream meta_in(gt_root / "meta.json");
        nlohmann::json meta;
        meta_in >> meta;
        if (meta.contains("format")) format = meta["format"].get<std::string>();
    }
    const auto gt = load_annotations(gt_root, parse_annotation_format(format));
    std::map<std::string, const VideoAnnotation*> gt_by_id;
    for (const auto& v : gt.videos) gt_by_id[v.video_id] = &v;
    const int phase_count = gt.vocabulary.phase_count();

    std::vector<MethodEval> methods;
    for (const auto& [name, dir] : pred_dirs) {
        MethodEval m;
        m.name = name;
        for (auto& file : read_prediction_dir(dir)) {
            auto it = gt_by_id.find(file.video_id);
            if (it == gt_by_id.end())
                throw EvalError("eval: prediction for unknown video '" + file.video_id + "'");
            if (file.gt != it->second->labels)
                throw EvalError("eval: ground-truth column of " + file.video_id +
                                ".tsv does not match the annotations under " + gt_root.string());
            m.sequences.push_back({file.video_id, it->second->labels, std::move(file.pred)});
        }
        m.report = evaluate(m.sequences, phase_count);
        methods.push_back(std::move(m));
    }

    std::filesystem::create_directories(out_dir / "ribbons");

    // report.json: aggregates, the per-cell table, per-video transitions
    nlohmann::json j;
    j["phase_count"] = phase_count;
    j["phase_names"] = gt.vocabulary.names();
    nlohmann::json jmethods = nlohmann::json::object();
    for (const auto& m : methods) {
        nlohmann::json jm;
        std::vector<std::string> video_ids;
        for (const auto& s : m.sequences) video_ids.push_back(s.video_id);
        jm["videos"] = video_ids;
        jm["accuracy"] = detail::mean_std_json(m.report.accuracy);
        jm["accuracy"]["per_video"] = m.report.per_video_accuracy;
        jm["precision"] = detail::mean_std_json(m.report.precision);
        jm["recall"] = detail::mean_std_json(m.report.recall);
        jm["jaccard"] = detail::mean_std_json(m.report.jaccard);
        jm["f1"] = m.report.f1;
        nlohmann::json per_phase = nlohmann::json::array();
        for (const auto& p : m.report.per_phase) {
            nlohmann::json jp{{"phase", p.phase}};
            jp["precision"] = p.precision ? nlohmann::json(*p.precision) : nlohmann::json();
            jp["recall"] = p.recall ? nlohmann::json(*p.recall) : nlohmann::json();
            jp["jaccard"] = p.jaccard ? nlohmann::json(*p.jaccard) : nlohmann::json();
            per_phase.push_back(jp);
        }
        jm["per_phase"] = per_phase;
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : m.report.cells)
            cells.push_back({{"video", c.video_id},
                             {"phase", c.phase},
                             {"tp", c.tp},
                             {"fp", c.fp},
                             {"fn", c.fn}});
        jm["cells"] = cells;
        jm["transitions"] = {{"gt", m.report.gt_transitions}, {"pred", m.report.pred_transitions}};
        jmethods[m.name] = jm;
    }
    j["methods"] = jmethods;
    {
        std::ofstream out(out_dir / "report.json");
        if (!out) throw EvalError("cannot write " + (out_dir / "report.json").string());
        out << j.dump(2) << "\n";
    }

    // report.md: the familiar one-row-per-method summary
    {
        std::ofstream md(out_dir / "report.md");
        md << "# Evaluation report\n\n";
        md << "Phase-wise video-wise metrics, in percent. Precision/recall/Jaccard are "
              "mean +/- std over phases; accuracy is mean +/- std over videos; F1 is the "
              "harmonic mean of mean precision and mean recall.\n\n";
        md << "| Method | Accuracy | Precision | Recall | Jaccard | F1 |\n";
        md << "|---|---|---|---|---|---|\n";
        for (const auto& m : methods) {
            const auto& r = m.report;
            md << "| " << m.name << " | " << detail::format_pct(r.accuracy.mean) << " +/- "
               << detail::format_pct(r.accuracy.std) << " | " << detail::format_pct(r.precision.mean)
               << " +/- " << detail::format_pct(r.precision.std) << " | "
               << detail::format_pct(r.recall.mean) << " +/- " << detail::format_pct(r.recall.std)
               << " | " << detail::format_pct(r.jaccard.mean) << " +/- "
               << detail::format_pct(r.jaccard.std) << " | " << detail::format_pct(r.f1) << " |\n";
        }
        md << "\n| Method | Mean transitions (pred) | Mean transitions (gt) |\n|---|---|---|\n";
        for (const auto& m : methods) {
            double gt_mean = 0, pred_mean = 0;
            for (auto t : m.report.gt_transitions) gt_mean += static_cast<double>(t);
            for (auto t : m.report.pred_transitions) pred_mean += static_cast<double>(t);
            const auto n = std::max<std::size_t>(1, m.report.gt_transitions.size());
            char buf[64];
            std::snprintf(buf, sizeof buf, "| %s | %.2f | %.2f |\n", m.name.c_str(),
                          pred_mean / n, gt_mean / n);
            md << buf;
        }
    }

    // ribbons: ground truth plus every method, shared axis per video
    for (const auto& s : methods.front().sequences) {
        std::vector<RibbonRow> rows;
        rows.push_back({"ground truth", s.gt});
        for (const auto& m : methods)
            for (const auto& ms : m.sequences)
                if (ms.video_id == s.video_id) rows.push_back({m.name, ms.pred});
        write_ribbon(out_dir / "ribbons" / (s.video_id + ".png"),
                     out_dir / "ribbons" / (s.video_id + ".json"), s.video_id, rows, phase_count);
    }

    if (manifest_cfg) write_run_manifest(out_dir, "eval run", *manifest_cfg);
    std::cerr << "[eval] wrote " << (out_dir / "report.json") << "\n";
}

/// One ribbon for a single video (CLI `eval ribbon`).
inline void run_eval_ribbon(const std::filesystem::path& gt_root,
                            const std::vector<std::pair<std::string, std::filesystem::path>>& pred_dirs,
                            const std::string& video_id, const std::filesystem::path& out_dir) {
    std::string format = "canonical-tsv";
    if (std::filesystem::exists(gt_root / "meta.json")) {
        std::ifstream meta_in(gt_root / "meta.json");
        nlohmann::json meta;
        meta_in >> meta;
        if (meta.contains("format")) format = meta["format"].get<std::string>();
    }
    const auto gt = load_annotations(gt_root, parse_annotation_format(format));
    const VideoAnnotation* video = nullptr;
    for (const auto& v : gt.videos)
        if (v.video_id == video_id) video = &v;
    if (!video) throw EvalError("eval ribbon: video '" + video_id + "' not found in ground truth");

    std::vector<RibbonRow> rows;
    rows.push_back({"ground truth", video->labels});
    for (const auto& [name, dir] : pred_dirs) {
        const auto file = read_prediction_tsv(dir / (video_id + ".tsv"));
        rows.push_back({name, file.pred});
    }
    std::filesystem::create_directories(out_dir);
    write_ribbon(out_dir / (video_id + ".png"), out_dir / (video_id + ".json"), video_id, rows,
                 gt.vocabulary.phase_count());
}

// ---------------------------------------------------------------------------
// pipeline all

inline void run_pipeline_all(const PipelineConfig& cfg) {
    const auto paths = PipelinePaths::from_config(cfg);
    run_stage1_train(cfg);
    run_stage1_extract(cfg);
    run_stage2_train(cfg);
    run_stage2_predict(cfg);
    run_eval(paths.dataset_root,
             {{"stage1", paths.preds_root / "stage1"}, {"stage2", paths.preds_root / "stage2"}},
             paths.report_dir, &cfg);
}

}  // namespace reswvl
