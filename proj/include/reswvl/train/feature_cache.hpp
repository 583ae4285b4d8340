#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reswvl/core/errors.hpp"
#include "reswvl/core/tensor.hpp"

namespace reswvl {

template <typename T>
struct FeatureCacheEntry {
    std::string video_id;
    Tensor<T> features;       // frames x d, frozen-encoder output at 1 fps
    std::vector<int> labels;  // aligned phase ids
};

/// On-disk cache of per-video frame features: one file per video with a JSON
/// header (video id, dims, dtype, labels) followed by row-major vectors, plus
/// an index JSON. Writes are per-video, so extraction is resumable; complete
/// entries are never rewritten.
class FeatureCache {
public:
    explicit FeatureCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const { return dir_; }

    std::filesystem::path entry_path(const std::string& video_id) const {
        return dir_ / (video_id + ".feat");
    }

    /// True when the entry exists with the expected length and width.
    bool has_complete(const std::string& video_id, std::size_t frames, std::size_t dim) const {
        const auto path = entry_path(video_id);
        if (!std::filesystem::exists(path)) return false;
        try {
            const auto header = read_header(path);
            return header.at("length").get<std::size_t>() == frames &&
                   header.at("feature_dim").get<std::size_t>() == dim;
        } catch (const DataError&) {
            return false;
        }
    }

    template <typename T>
    void write(const FeatureCacheEntry<T>& entry) {
        const std::size_t frames = entry.features.dim(0), dim = entry.features.dim(1);
        if (entry.labels.size() != frames)
            throw DataError("feature cache: labels (" + std::to_string(entry.labels.size()) +
                            ") do not match feature rows (" + std::to_string(frames) + ")");
        nlohmann::json header{
            {"video_id", entry.video_id},
            {"feature_dim", dim},
            {"length", frames},
            {"dtype", dtype_name<T>()},
            {"labels", entry.labels},
        };
        const auto path = entry_path(entry.video_id);
        const auto tmp = path.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw DataError("feature cache: cannot write " + tmp);
            out.write(kMagic, 8);
            const std::string h = header.dump();
            const auto hlen = static_cast<std::uint64_t>(h.size());
            out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
            out.write(h.data(), static_cast<std::streamsize>(h.size()));
            out.write(reinterpret_cast<const char*>(entry.features.ptr()),
                      static_cast<std::streamsize>(entry.features.numel() * sizeof(T)));
            if (!out) throw DataError("feature cache: write failed: " + tmp);
        }
        std::filesystem::rename(tmp, path);
        update_index(entry.video_id, frames, dim);
    }

    template <typename T>
    FeatureCacheEntry<T> read(const std::string& video_id) const {
        const auto path = entry_path(video_id);
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw DataError("feature cache: no entry for video '" + video_id + "' (expected " +
                            path.string() + ")");
        const auto header = read_header_stream(in, path);
        if (header.at("dtype").get<std::string>() != dtype_name<T>())
            throw DataError("feature cache: dtype mismatch in " + path.string() + " (stored " +
                            header.at("dtype").get<std::string>() + ")");
        FeatureCacheEntry<T> entry;
        entry.video_id = header.at("video_id").get<std::string>();
        entry.labels = header.at("labels").get<std::vector<int>>();
        const auto frames = header.at("length").get<std::size_t>();
        const auto dim = header.at("feature_dim").get<std::size_t>();
        entry.features = Tensor<T>({frames, dim});
        in.read(reinterpret_cast<char*>(entry.features.ptr()),
                static_cast<std::streamsize>(entry.features.numel() * sizeof(T)));
        if (!in) throw DataError("feature cache: truncated data in " + path.string());
        return entry;
    }

private:
    static constexpr const char* kMagic = "RSWFEAT1";
    std::filesystem::path dir_;

    template <typename T>
    static std::string dtype_name() {
        if constexpr (std::is_same_v<T, float>) return "f32";
        else return "f64";
    }

    static nlohmann::json read_header_stream(std::ifstream& in, const std::filesystem::path& path) {
        char magic[8] = {};
        in.read(magic, 8);
        if (!in || std::string(magic, 8) != kMagic)
            throw DataError("feature cache: " + path.string() +
                            " is not a feature cache file or uses an unknown version");
        std::uint64_t hlen = 0;
        in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
        std::string h(hlen, '\0');
        in.read(h.data(), static_cast<std::streamsize>(hlen));
        if (!in) throw DataError("feature cache: truncated header in " + path.string());
        try {
            return nlohmann::json::parse(h);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("feature cache: corrupt header in " + path.string() + ": " + e.what());
        }
    }

    static nlohmann::json read_header(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("feature cache: cannot open " + path.string());
        return read_header_stream(in, path);
    }

    void update_index(const std::string& video_id, std::size_t frames, std::size_t dim) const {
        const auto index_path = dir_ / "index.json";
        nlohmann::json index = nlohmann::json::object();
        if (std::filesystem::exists(index_path)) {
            std::ifstream in(index_path);
            try {
                in >> index;
            } catch (const nlohmann::json::exception&) {
                index = nlohmann::json::object();
            }
        }
        index[video_id] = {{"file", video_id + ".feat"}, {"length", frames}, {"feature_dim", dim}};
        std::ofstream out(index_path);
        out << index.dump(2) << "\n";
    }
};

}  // namespace reswvl
