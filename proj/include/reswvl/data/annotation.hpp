#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reswvl/core/errors.hpp"
#include "reswvl/data/vocabulary.hpp"

namespace reswvl {

/// Per-frame phase labels of one video, already downsampled to 1 fps.
struct VideoAnnotation {
    std::string video_id;
    double fps_source = 1.0;
    std::vector<int> labels;                // 1-based phase ids, one per second
    std::vector<std::string> frame_paths;   // optional, aligned with labels

    std::size_t frame_count() const { return labels.size(); }

    void validate(int phase_count) const {
        if (labels.empty()) throw DataError("video '" + video_id + "' has no frames");
        if (!frame_paths.empty() && frame_paths.size() != labels.size())
            throw DataError("video '" + video_id + "': frame paths (" +
                            std::to_string(frame_paths.size()) + ") do not match labels (" +
                            std::to_string(labels.size()) + ")");
        for (std::size_t t = 0; t < labels.size(); ++t)
            if (labels[t] < 1 || labels[t] > phase_count)
                throw DataError("video '" + video_id + "': phase id " + std::to_string(labels[t]) +
                                " at second " + std::to_string(t) + " outside 1.." +
                                std::to_string(phase_count));
    }
};

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

/// Keeps the annotation at each whole-second boundary: label[t] = raw[floor(t * fps)].
/// Already-1 fps input comes back unchanged.
inline std::vector<int> downsample_to_1fps(const std::vector<int>& raw_labels, double fps_source) {
    if (fps_source <= 0) throw DataError("downsample: fps must be positive");
    if (raw_labels.empty()) return {};
    std::vector<int> out;
    for (std::size_t t = 0;; ++t) {
        const auto idx = static_cast<std::size_t>(std::floor(static_cast<double>(t) * fps_source + 1e-9));
        if (idx >= raw_labels.size()) break;
        out.push_back(raw_labels[idx]);
    }
    return out;
}

/// Orders video ids so that embedded numbers compare numerically
/// ("video2" < "video10"); used wherever a deterministic video order matters.
inline bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (std::isdigit(static_cast<unsigned char>(a[i])) &&
            std::isdigit(static_cast<unsigned char>(b[j]))) {
            std::size_t i2 = i, j2 = j;
            while (i2 < a.size() && std::isdigit(static_cast<unsigned char>(a[i2]))) ++i2;
            while (j2 < b.size() && std::isdigit(static_cast<unsigned char>(b[j2]))) ++j2;
            const std::string_view na(a.data() + i, i2 - i), nb(b.data() + j, j2 - j);
            const auto sa = na.find_first_not_of('0'), sb = nb.find_first_not_of('0');
            const std::string_view ta = sa == std::string_view::npos ? "" : na.substr(sa);
            const std::string_view tb = sb == std::string_view::npos ? "" : nb.substr(sb);
            if (ta.size() != tb.size()) return ta.size() < tb.size();
            if (ta != tb) return ta < tb;
            i = i2;
            j = j2;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    return a.size() < b.size();
}

/// First `train` ids to train, next `val` to val, next `test` to test, in
/// natural video-id order.
inline DatasetSplit make_split(const std::vector<VideoAnnotation>& videos, int n_train, int n_val,
                               int n_test) {
    if (n_train < 0 || n_val < 0 || n_test < 0)
        throw ConfigError("split: negative counts");
    const std::size_t want = static_cast<std::size_t>(n_train) + n_val + n_test;
    if (want > videos.size())
        throw ConfigError("split: requested " + std::to_string(want) + " videos but only " +
                          std::to_string(videos.size()) + " available");
    std::vector<std::string> ids;
    ids.reserve(videos.size());
    for (const auto& v : videos) ids.push_back(v.video_id);
    std::sort(ids.begin(), ids.end(), natural_less);
    DatasetSplit s;
    s.train.assign(ids.begin(), ids.begin() + n_train);
    s.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    s.test.assign(ids.begin() + n_train + n_val, ids.begin() + n_train + n_val + n_test);
    return s;
}

}  // namespace reswvl
