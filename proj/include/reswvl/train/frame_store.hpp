#pragma once

#include <map>
#include <string>
#include <vector>

#include "reswvl/core/errors.hpp"
#include "reswvl/data/annotation.hpp"
#include "reswvl/data/synthetic.hpp"
#include "reswvl/io/png.hpp"

namespace reswvl {

/// Access to the frame image of (video, second). Disk-backed for real
/// datasets, memory-backed for generated ones.
class FrameStore {
public:
    virtual ~FrameStore() = default;
    virtual Image frame(const VideoAnnotation& video, std::size_t second) const = 0;
};

class DiskFrameStore final : public FrameStore {
public:
    Image frame(const VideoAnnotation& video, std::size_t second) const override {
        if (second >= video.frame_paths.size())
            throw DataError("video '" + video.video_id + "': no frame path for second " +
                            std::to_string(second) +
                            (video.frame_paths.empty() ? " (dataset has no frames directory)" : ""));
        return read_png(video.frame_paths[second]);
    }
};

class MemoryFrameStore final : public FrameStore {
public:
    explicit MemoryFrameStore(const SyntheticDataset& ds) {
        for (const auto& v : ds.videos) frames_[v.annotation.video_id] = &v.frames;
    }

    Image frame(const VideoAnnotation& video, std::size_t second) const override {
        auto it = frames_.find(video.video_id);
        if (it == frames_.end())
            throw DataError("no frames held for video '" + video.video_id + "'");
        if (second >= it->second->size())
            throw DataError("video '" + video.video_id + "': second " + std::to_string(second) +
                            " beyond " + std::to_string(it->second->size()) + " frames");
        return (*it->second)[second];
    }

private:
    std::map<std::string, const std::vector<Image>*> frames_;
};

}  // namespace reswvl
