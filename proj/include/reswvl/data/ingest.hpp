#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reswvl/core/errors.hpp"
#include "reswvl/data/annotation.hpp"
#include "reswvl/data/vocabulary.hpp"

namespace reswvl {

enum class AnnotationFormat { cholec80_style, autolaparo_style, m2cai16_style, canonical_tsv };

inline AnnotationFormat parse_annotation_format(const std::string& s) {
    if (s == "cholec80-style") return AnnotationFormat::cholec80_style;
    if (s == "autolaparo-style") return AnnotationFormat::autolaparo_style;
    if (s == "m2cai16-style") return AnnotationFormat::m2cai16_style;
    if (s == "canonical-tsv") return AnnotationFormat::canonical_tsv;
    throw ConfigError("unknown annotation format '" + s +
                      "' (expected cholec80-style, autolaparo-style, m2cai16-style, canonical-tsv)");
}

inline std::string to_string(AnnotationFormat f) {
    switch (f) {
        case AnnotationFormat::cholec80_style: return "cholec80-style";
        case AnnotationFormat::autolaparo_style: return "autolaparo-style";
        case AnnotationFormat::m2cai16_style: return "m2cai16-style";
        case AnnotationFormat::canonical_tsv: return "canonical-tsv";
    }
    return "?";
}

struct IngestResult {
    PhaseVocabulary vocabulary;
    std::vector<VideoAnnotation> videos;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == '\t' || line[i] == ' ') {
            if (i > start) out.emplace_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::string strip_cr(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
    return s;
}

inline int parse_int_field(const std::string& s, const std::string& file, std::size_t lineno) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError(file + ":" + std::to_string(lineno) + ": expected an integer, got '" + s + "'");
    }
}

/// Video id from an annotation filename: "video01-phase.txt" -> "video01".
inline std::string video_id_from_file(const std::filesystem::path& p) {
    std::string stem = p.stem().string();
    const std::string suffix = "-phase";
    if (stem.size() > suffix.size() && stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0)
        stem.resize(stem.size() - suffix.size());
    return stem;
}

inline double require_fps(const std::filesystem::path& root, AnnotationFormat fmt) {
    const auto meta_path = root / "meta.json";
    std::ifstream in(meta_path);
    if (!in)
        throw DataError("format " + to_string(fmt) + " requires " + meta_path.string() +
                        " with an \"fps_source\" field");
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid JSON in " + meta_path.string() + ": " + e.what());
    }
    if (!meta.contains("fps_source") || !meta["fps_source"].is_number())
        throw DataError(meta_path.string() + ": missing numeric \"fps_source\" (required for format " +
                        to_string(fmt) + ")");
    const double fps = meta["fps_source"].get<double>();
    if (fps <= 0) throw DataError(meta_path.string() + ": fps_source must be positive");
    return fps;
}

/// Attaches videos/<id>/frames/%06d.png paths when the frames directory exists.
inline void attach_frame_paths(const std::filesystem::path& root, VideoAnnotation& v) {
    const auto frames_dir = root / "videos" / v.video_id / "frames";
    if (!std::filesystem::is_directory(frames_dir)) return;
    v.frame_paths.clear();
    v.frame_paths.reserve(v.labels.size());
    for (std::size_t t = 0; t < v.labels.size(); ++t) {
        char name[16];
        std::snprintf(name, sizeof name, "%06zu.png", t);
        v.frame_paths.push_back((frames_dir / name).string());
    }
}

}  // namespace detail

/// Canonical per-video annotation: `second<TAB>phase_id`, one row per second.
inline VideoAnnotation read_canonical_tsv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open annotation file " + file.string());
    VideoAnnotation v;
    v.video_id = file.stem().string();
    v.fps_source = 1.0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        const auto fields = detail::split_fields(line);
        if (fields.size() != 2)
            throw DataError(file.string() + ":" + std::to_string(lineno) +
                            ": expected `second<TAB>phase_id`");
        const int second = detail::parse_int_field(fields[0], file.string(), lineno);
        const int phase = detail::parse_int_field(fields[1], file.string(), lineno);
        if (second != static_cast<int>(v.labels.size()))
            throw DataError(file.string() + ":" + std::to_string(lineno) + ": seconds must be " +
                            "consecutive from 0 (got " + std::to_string(second) + ")");
        v.labels.push_back(phase);
    }
    if (v.labels.empty()) throw DataError("empty annotation file " + file.string());
    return v;
}

inline void write_canonical_tsv(const std::filesystem::path& file, const VideoAnnotation& v) {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write " + file.string());
    for (std::size_t t = 0; t < v.labels.size(); ++t) out << t << '\t' << v.labels[t] << '\n';
}

/// Frame-indexed annotation with named phases (Cholec80/m2cai16 releases) or
/// numeric ids without a header (AutoLaparo releases). Raw rows are per source
/// frame; labels come back downsampled to 1 fps.
inline VideoAnnotation read_frame_annotation(const std::filesystem::path& file,
                                             const PhaseVocabulary& vocab, double fps_source,
                                             bool named_phases) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open annotation file " + file.string());
    VideoAnnotation v;
    v.video_id = detail::video_id_from_file(file);
    v.fps_source = fps_source;
    std::vector<int> raw;
    std::string line;
    std::size_t lineno = 0;
    bool header_checked = false;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        if (named_phases && !header_checked) {
            header_checked = true;
            // releases carry a "Frame\tPhase" header row
            const auto fields = detail::split_fields(line);
            if (!fields.empty() && fields[0] == "Frame") continue;
        }
        const auto tab = line.find('\t');
        const auto fields = detail::split_fields(line);
        if (fields.size() < 2)
            throw DataError(file.string() + ":" + std::to_string(lineno) +
                            ": expected `frame<TAB>phase`");
        const int frame = detail::parse_int_field(fields[0], file.string(), lineno);
        if (frame != static_cast<int>(raw.size()))
            throw DataError(file.string() + ":" + std::to_string(lineno) +
                            ": frame indices must be consecutive from 0 (got " +
                            std::to_string(frame) + ")");
        if (named_phases) {
            // phase names may contain spaces; everything after the first tab is the name
            std::string name = tab == std::string::npos ? fields[1] : line.substr(tab + 1);
            name = detail::strip_cr(name);
            const int id = vocab.id_of(name);
            if (id == 0)
                throw DataError(file.string() + ":" + std::to_string(lineno) +
                                ": unknown phase name '" + name + "'");
            raw.push_back(id);
        } else {
            raw.push_back(detail::parse_int_field(fields[1], file.string(), lineno));
        }
    }
    if (raw.empty()) throw DataError("empty annotation file " + file.string());
    v.labels = downsample_to_1fps(raw, fps_source);
    return v;
}

/// Loads every annotation under `root/annotations` in the declared format,
/// downsampled to 1 fps and validated against `root/phases.json`.
inline IngestResult load_annotations(const std::filesystem::path& root, AnnotationFormat fmt) {
    if (!std::filesystem::is_directory(root))
        throw DataError("dataset root does not exist: " + root.string());
    const auto phases_path = root / "phases.json";
    if (!std::filesystem::exists(phases_path))
        throw DataError("missing phase-name file " + phases_path.string());
    IngestResult result;
    result.vocabulary = PhaseVocabulary::load(phases_path);

    const auto ann_dir = root / "annotations";
    if (!std::filesystem::is_directory(ann_dir))
        throw DataError("missing annotations directory " + ann_dir.string());

    double fps = 1.0;
    if (fmt != AnnotationFormat::canonical_tsv) fps = detail::require_fps(root, fmt);

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(ann_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".tsv" || ext == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
        return natural_less(a.filename().string(), b.filename().string());
    });
    if (files.empty()) throw DataError("no annotation files in " + ann_dir.string());

    for (const auto& file : files) {
        VideoAnnotation v;
        switch (fmt) {
            case AnnotationFormat::canonical_tsv:
                v = read_canonical_tsv(file);
                break;
            case AnnotationFormat::cholec80_style:
            case AnnotationFormat::m2cai16_style:
                v = read_frame_annotation(file, result.vocabulary, fps, /*named_phases=*/true);
                break;
            case AnnotationFormat::autolaparo_style:
                v = read_frame_annotation(file, result.vocabulary, fps, /*named_phases=*/false);
                break;
        }
        detail::attach_frame_paths(root, v);
        v.validate(result.vocabulary.phase_count());
        result.videos.push_back(std::move(v));
    }
    return result;
}

/// Writes a dataset in the canonical layout: phases.json, meta.json,
/// annotations/<id>.tsv (frames, when present, are written by the caller).
inline void write_canonical_root(const std::filesystem::path& root, const PhaseVocabulary& vocab,
                                 const std::vector<VideoAnnotation>& videos) {
    std::filesystem::create_directories(root / "annotations");
    vocab.save(root / "phases.json");
    nlohmann::json meta{{"format", "canonical-tsv"}, {"fps_source", 1}};
    std::ofstream meta_out(root / "meta.json");
    meta_out << meta.dump(2) << "\n";
    for (const auto& v : videos)
        write_canonical_tsv(root / "annotations" / (v.video_id + ".tsv"), v);
}

}  // namespace reswvl
