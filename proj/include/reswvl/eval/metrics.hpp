#pragma once

#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "reswvl/core/errors.hpp"

namespace reswvl {

/// Ground truth and prediction for one video, both 1 fps label sequences.
struct EvalSequences {
    std::string video_id;
    std::vector<int> gt;
    std::vector<int> pred;
};

/// Number of indices t with label[t] != label[t-1]; the instability measure
/// behind the qualitative ribbon comparison.
inline long count_transitions(const std::vector<int>& labels) {
    if (labels.empty()) throw EvalError("count_transitions: empty sequence");
    long n = 0;
    for (std::size_t t = 1; t < labels.size(); ++t)
        if (labels[t] != labels[t - 1]) ++n;
    return n;
}

/// Harmonic mean of the mean precision and the mean recall.
inline double f1_from_means(double mean_precision, double mean_recall) {
    if (mean_precision < 0.0 || mean_precision > 1.0 || mean_recall < 0.0 || mean_recall > 1.0)
        throw EvalError("f1_from_means: inputs must lie in [0, 1]");
    if (mean_precision == 0.0 && mean_recall == 0.0) {
        std::cerr << "[reswvl] warning: precision and recall both zero; F1 reported as 0\n";
        return 0.0;
    }
    return 2.0 * mean_precision * mean_recall / (mean_precision + mean_recall);
}

/// One (video, phase) confusion cell. Cells where the phase appears in
/// neither ground truth nor prediction are never created.
struct ConfusionCell {
    std::string video_id;
    int phase = 0;
    long tp = 0, fp = 0, fn = 0;

    std::optional<double> precision() const {
        if (tp + fp == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    std::optional<double> recall() const {
        if (tp + fn == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    std::optional<double> jaccard() const {
        if (tp + fp + fn == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    }
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    int count = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd out;
    out.count = static_cast<int>(xs.size());
    if (xs.empty()) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(var / static_cast<double>(xs.size()));
    return out;
}

/// Per-phase averages over videos. A metric that is undefined for every
/// video of a phase stays empty and the phase drops out of that metric's
/// cross-phase summary.
struct PhaseAverages {
    int phase = 0;
    std::optional<double> precision, recall, jaccard;
};

struct EvalReport {
    MeanStd accuracy;  // over videos
    std::vector<double> per_video_accuracy;
    std::vector<PhaseAverages> per_phase;
    MeanStd precision, recall, jaccard;  // over phases
    double f1 = 0.0;
    std::vector<ConfusionCell> cells;
    std::vector<long> gt_transitions, pred_transitions;  // per video
};

/// Video-wise mean accuracy and its spread across videos.
inline MeanStd accuracy(const std::vector<EvalSequences>& videos,
                        std::vector<double>* per_video = nullptr) {
    std::vector<double> acc;
    for (const auto& v : videos) {
        if (v.gt.size() != v.pred.size())
            throw EvalError("accuracy: video '" + v.video_id + "' has " +
                            std::to_string(v.gt.size()) + " ground-truth frames but " +
                            std::to_string(v.pred.size()) + " predictions");
        if (v.gt.empty()) throw EvalError("accuracy: video '" + v.video_id + "' is empty");
        std::size_t hits = 0;
        for (std::size_t t = 0; t < v.gt.size(); ++t)
            if (v.gt[t] == v.pred[t]) ++hits;
        acc.push_back(static_cast<double>(hits) / static_cast<double>(v.gt.size()));
    }
    if (per_video) *per_video = acc;
    return mean_std(acc);
}

/// Confusion cells for every (video, phase) where the phase is present in
/// ground truth or prediction.
inline std::vector<ConfusionCell> confusion_cells(const std::vector<EvalSequences>& videos,
                                                  int phase_count) {
    std::vector<ConfusionCell> cells;
    for (const auto& v : videos) {
        if (v.gt.size() != v.pred.size())
            throw EvalError("metrics: length mismatch in video '" + v.video_id + "'");
        for (const int l : v.gt)
            if (l < 1 || l > phase_count)
                throw EvalError("metrics: ground-truth phase " + std::to_string(l) +
                                " outside vocabulary in video '" + v.video_id + "'");
        for (const int l : v.pred)
            if (l < 1 || l > phase_count)
                throw EvalError("metrics: predicted phase " + std::to_string(l) +
                                " outside vocabulary in video '" + v.video_id + "'");
        for (int p = 1; p <= phase_count; ++p) {
            ConfusionCell cell;
            cell.video_id = v.video_id;
            cell.phase = p;
            for (std::size_t t = 0; t < v.gt.size(); ++t) {
                const bool in_gt = v.gt[t] == p, in_pred = v.pred[t] == p;
                if (in_gt && in_pred) ++cell.tp;
                else if (in_pred) ++cell.fp;
                else if (in_gt) ++cell.fn;
            }
            if (cell.tp + cell.fp + cell.fn > 0) cells.push_back(cell);
        }
    }
    return cells;
}

/// Phase-wise video-wise averaging: each metric is averaged per phase over
/// the videos where it is defined, then summarized as mean +/- std over
/// phases.
inline EvalReport evaluate(const std::vector<EvalSequences>& videos, int phase_count) {
    EvalReport report;
    report.accuracy = accuracy(videos, &report.per_video_accuracy);
    report.cells = confusion_cells(videos, phase_count);

    std::vector<double> phase_precision, phase_recall, phase_jaccard;
    for (int p = 1; p <= phase_count; ++p) {
        std::vector<double> precs, recs, jacs;
        for (const auto& cell : report.cells) {
            if (cell.phase != p) continue;
            if (const auto v = cell.precision()) precs.push_back(*v);
            if (const auto v = cell.recall()) recs.push_back(*v);
            if (const auto v = cell.jaccard()) jacs.push_back(*v);
        }
        PhaseAverages avg;
        avg.phase = p;
        if (!precs.empty()) avg.precision = mean_std(precs).mean;
        if (!recs.empty()) avg.recall = mean_std(recs).mean;
        if (!jacs.empty()) avg.jaccard = mean_std(jacs).mean;
        if (avg.precision) phase_precision.push_back(*avg.precision);
        if (avg.recall) phase_recall.push_back(*avg.recall);
        if (avg.jaccard) phase_jaccard.push_back(*avg.jaccard);
        report.per_phase.push_back(avg);
    }
    report.precision = mean_std(phase_precision);
    report.recall = mean_std(phase_recall);
    report.jaccard = mean_std(phase_jaccard);
    report.f1 = f1_from_means(report.precision.mean, report.recall.mean);

    for (const auto& v : videos) {
        report.gt_transitions.push_back(count_transitions(v.gt));
        report.pred_transitions.push_back(count_transitions(v.pred));
    }
    return report;
}

}  // namespace reswvl
