#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "reswvl/core/errors.hpp"
#include "reswvl/core/rng.hpp"
#include "reswvl/data/ingest.hpp"
#include "reswvl/io/image_ops.hpp"
#include "reswvl/io/png.hpp"

namespace reswvl {

enum class TransitionRegime { sequential, revisiting };

inline TransitionRegime parse_regime(const std::string& s) {
    if (s == "sequential") return TransitionRegime::sequential;
    if (s == "revisiting") return TransitionRegime::revisiting;
    throw ConfigError("unknown transition regime '" + s + "' (expected sequential or revisiting)");
}

/// Desk-scale synthetic dataset: procedurally rendered frames whose dominant
/// color encodes the phase, with optional appearance corruption.
struct SyntheticSpec {
    int phase_count = 7;
    int videos = 20;
    int mean_phase_length = 12;  // seconds per phase, on average
    TransitionRegime regime = TransitionRegime::sequential;
    double noise_level = 0.0;    // probability a frame is rendered as a wrong phase
    std::uint64_t seed = 0;
    int frame_size = 64;

    void validate() const {
        if (phase_count < 2) throw ConfigError("synthetic: phase_count must be >= 2");
        if (videos < 1) throw ConfigError("synthetic: videos must be >= 1");
        if (mean_phase_length < 2) throw ConfigError("synthetic: mean_phase_length must be >= 2");
        if (noise_level < 0.0 || noise_level > 1.0)
            throw ConfigError("synthetic: noise_level must be in [0, 1]");
        if (frame_size < 16) throw ConfigError("synthetic: frame_size must be >= 16");
    }
};

struct SyntheticVideo {
    VideoAnnotation annotation;
    std::vector<Image> frames;
    std::vector<int> rendered_phase;  // appearance actually drawn (differs from label when corrupted)
};

struct SyntheticDataset {
    PhaseVocabulary vocabulary;
    std::vector<SyntheticVideo> videos;
};

namespace detail {

inline int geometric_duration(Rng& rng, int mean) {
    // 1 + geometric number of failures; expectation == mean, support >= 1
    const double p = 1.0 / mean;
    int d = 1;
    while (rng.uniform() >= p && d < 10 * mean) ++d;
    return d;
}

inline std::vector<int> sequential_labels(Rng& rng, int phases, int mean_len) {
    std::vector<int> labels;
    for (int p = 1; p <= phases; ++p) {
        const int d = geometric_duration(rng, mean_len);
        labels.insert(labels.end(), d, p);
    }
    return labels;
}

inline std::vector<int> revisiting_labels(Rng& rng, int phases, int mean_len) {
    std::vector<int> order{1};
    int p = 1;
    const int max_segments = 4 * phases;
    while (static_cast<int>(order.size()) < max_segments) {
        if (p == phases) {
            if (rng.bernoulli(0.35)) p = static_cast<int>(rng.uniform_int(1, phases - 1));
            else break;
        } else if (p > 1 && rng.bernoulli(0.3)) {
            p = static_cast<int>(rng.uniform_int(1, p - 1));
        } else {
            ++p;
        }
        order.push_back(p);
    }
    std::vector<int> labels;
    for (int phase : order) {
        const int d = geometric_duration(rng, mean_len);
        labels.insert(labels.end(), d, phase);
    }
    return labels;
}

inline bool has_decrease(const std::vector<int>& labels) {
    for (std::size_t t = 1; t < labels.size(); ++t)
        if (labels[t] < labels[t - 1]) return true;
    return false;
}

}  // namespace detail

/// Renders one frame for `rendered_phase`: dominant background color per
/// phase, jittered blocks in a lighter shade, light pixel noise.
inline Image render_phase_frame(int rendered_phase, int phase_count, int size, Rng& rng) {
    Image img(size, size);
    std::uint8_t base[3];
    phase_color(rendered_phase, phase_count, base);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            std::copy_n(base, 3, img.px(x, y));

    for (int k = 0; k < 3; ++k) {
        const int w = static_cast<int>(rng.uniform_int(size / 8, size / 3));
        const int h = static_cast<int>(rng.uniform_int(size / 8, size / 3));
        const int x0 = static_cast<int>(rng.uniform_int(0, size - w));
        const int y0 = static_cast<int>(rng.uniform_int(0, size - h));
        const double shade = rng.uniform(0.75, 1.25);
        for (int y = y0; y < y0 + h; ++y)
            for (int x = x0; x < x0 + w; ++x)
                for (int c = 0; c < 3; ++c) {
                    const double v = base[c] * shade;
                    img.px(x, y)[c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
                }
    }
    for (auto& b : img.rgb) {
        const int v = b + static_cast<int>(rng.uniform_int(-8, 8));
        b = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
    }
    return img;
}

inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticDataset ds;
    std::vector<std::string> names;
    for (int p = 1; p <= spec.phase_count; ++p)
        names.push_back("synthetic phase " + std::to_string(p));
    ds.vocabulary = PhaseVocabulary(std::move(names));

    for (int vi = 0; vi < spec.videos; ++vi) {
        SyntheticVideo video;
        char id[32];
        std::snprintf(id, sizeof id, "video%03d", vi + 1);
        video.annotation.video_id = id;
        video.annotation.fps_source = 1.0;

        if (spec.regime == TransitionRegime::sequential) {
            Rng rng(derive_seed(spec.seed, "labels", static_cast<std::uint64_t>(vi)));
            video.annotation.labels =
                detail::sequential_labels(rng, spec.phase_count, spec.mean_phase_length);
        } else {
            // retry derived seeds until the sequence actually revisits a phase
            for (std::uint64_t attempt = 0;; ++attempt) {
                Rng rng(derive_seed(spec.seed, "labels", static_cast<std::uint64_t>(vi), attempt));
                video.annotation.labels =
                    detail::revisiting_labels(rng, spec.phase_count, spec.mean_phase_length);
                if (detail::has_decrease(video.annotation.labels)) break;
                if (attempt > 256)
                    throw DataError("synthetic: could not realize a revisiting sequence");
            }
        }

        Rng noise_rng(derive_seed(spec.seed, "noise", static_cast<std::uint64_t>(vi)));
        Rng render_rng(derive_seed(spec.seed, "render", static_cast<std::uint64_t>(vi)));
        const auto frames = video.annotation.labels.size();
        video.rendered_phase.resize(frames);
        video.frames.reserve(frames);
        for (std::size_t t = 0; t < frames; ++t) {
            int shown = video.annotation.labels[t];
            if (spec.noise_level > 0 && noise_rng.bernoulli(spec.noise_level)) {
                // draw the appearance from a wrong phase; the label stays true
                int wrong = static_cast<int>(noise_rng.uniform_int(1, spec.phase_count - 1));
                if (wrong >= shown) ++wrong;
                shown = wrong;
            }
            video.rendered_phase[t] = shown;
            video.frames.push_back(
                render_phase_frame(shown, spec.phase_count, spec.frame_size, render_rng));
        }
        ds.videos.push_back(std::move(video));
    }
    return ds;
}

/// Materializes a synthetic dataset as a canonical dataset root
/// (phases.json + annotations/<id>.tsv + videos/<id>/frames/%06d.png).
inline void write_synthetic_root(const std::filesystem::path& root, const SyntheticDataset& ds) {
    std::vector<VideoAnnotation> annotations;
    for (const auto& v : ds.videos) annotations.push_back(v.annotation);
    write_canonical_root(root, ds.vocabulary, annotations);
    for (const auto& v : ds.videos) {
        const auto frames_dir = root / "videos" / v.annotation.video_id / "frames";
        std::filesystem::create_directories(frames_dir);
        for (std::size_t t = 0; t < v.frames.size(); ++t) {
            char name[16];
            std::snprintf(name, sizeof name, "%06zu.png", t);
            write_png(frames_dir / name, v.frames[t]);
        }
    }
}

}  // namespace reswvl
