#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "reswvl/core/archive.hpp"
#include "reswvl/core/errors.hpp"
#include "reswvl/encoder/toy.hpp"

namespace reswvl {

struct BackboneInfo {
    std::string name;
    int feature_dim;    // d
    int token_dim;
    bool trainable;
    bool bundled;       // compute kernels ship with this build
    std::string note;
};

inline const std::vector<BackboneInfo>& backbone_registry() {
    static const std::vector<BackboneInfo> entries = {
        {"toy", 64, 32, true, true, "CPU-scale trainable encoder pair for tests and synthetic runs"},
        {"clip-resnet50", 1024, 512, true, false,
         "pretrained CLIP ResNet-50; requires an exported weights archive"},
        {"clip-vit-b16", 512, 512, true, false, "interface-compatible; not implemented"},
    };
    return entries;
}

inline const BackboneInfo& backbone_info(const std::string& name) {
    for (const auto& e : backbone_registry())
        if (e.name == name) return e;
    throw ConfigError("unknown backbone '" + name + "' (known: toy, clip-resnet50, clip-vit-b16)");
}

template <typename T>
struct EncoderPair {
    std::unique_ptr<ImageEncoder<T>> image;
    std::unique_ptr<TextEncoder<T>> text;
};

/// Resolves a backbone name to an encoder pair.
///
/// "toy" needs no weights and is fully trainable. "clip-resnet50" resolves
/// with d=1024 and validates the weights archive, but its compute kernels
/// are not part of this build: runs at that scale belong on a GPU stack, and
/// the encoder interfaces are the integration point for one. "clip-vit-b16"
/// is reserved.
template <typename T>
EncoderPair<T> attach_pretrained_backbone(const std::string& name,
                                          const std::filesystem::path& weights_path = {},
                                          const ToyEncoderOptions& toy_options = {}) {
    const auto& info = backbone_info(name);

    if (name == "toy") {
        EncoderPair<T> pair;
        pair.image = std::make_unique<ToyImageEncoder<T>>(toy_options);
        pair.text = std::make_unique<ToyTextEncoder<T>>(toy_options);
        if (!weights_path.empty()) {
            const Archive a = Archive::load(weights_path);
            for (auto* p : pair.image->parameters()) {
                const auto& t = a.get<T>(p->name);
                if (t.shape != p->value.shape)
                    throw DataError("backbone weights: shape mismatch for '" + p->name + "' in " +
                                    weights_path.string());
                p->value = t;
            }
        }
        return pair;
    }

    if (name == "clip-vit-b16")
        throw ConfigError("backbone 'clip-vit-b16' is not implemented; the encoder interface is "
                          "compatible, so an external implementation can be attached");

    // clip-resnet50
    if (weights_path.empty() || !std::filesystem::exists(weights_path))
        throw DataError("backbone 'clip-resnet50' needs a pretrained weights archive; not found at '" +
                        weights_path.string() +
                        "' (export CLIP RN50 weights into the tensor-archive format; see README)");
    const Archive a = Archive::load(weights_path);  // rejects corrupt files
    if (!a.manifest.contains("backbone") || a.manifest["backbone"] != "clip-resnet50")
        throw DataError("weights archive " + weights_path.string() +
                        " does not declare backbone 'clip-resnet50'");
    if (!a.manifest.contains("feature_dim") ||
        a.manifest["feature_dim"].get<int>() != info.feature_dim)
        throw DataError("weights archive " + weights_path.string() + " must declare feature_dim " +
                        std::to_string(info.feature_dim));
    throw ConfigError(
        "backbone 'clip-resnet50' weights validated, but its compute kernels are not bundled in "
        "this build; use backbone 'toy' for CPU-scale runs or attach an external encoder through "
        "the ImageEncoder/TextEncoder interfaces");
}

}  // namespace reswvl
