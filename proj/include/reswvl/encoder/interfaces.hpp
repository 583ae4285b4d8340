#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reswvl/core/tensor.hpp"

namespace reswvl {

/// Frame encoder: batch of images (B x 3 x H x W) to features (B x d).
/// Training-mode calls cache activations; backward() must follow the encode()
/// whose gradient it receives, so one batch is in flight at a time.
template <typename T>
class ImageEncoder {
public:
    virtual ~ImageEncoder() = default;
    virtual int feature_dim() const = 0;
    virtual bool trainable() const = 0;
    virtual Tensor<T> encode(const Tensor<T>& images, bool train_mode) = 0;
    virtual void backward(const Tensor<T>& grad_features) = 0;
    virtual std::vector<Param<T>*> parameters() = 0;
};

/// Prompt encoder: P token sequences (P x L x token_dim) to features (P x d).
/// Never fine-tuned; its parameters are outside every optimizer, and the
/// checksum makes that auditable. Gradients still flow *through* it to the
/// prompt tokens.
template <typename T>
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual int feature_dim() const = 0;
    virtual int token_dim() const = 0;
    virtual Tensor<T> encode_tokens(const Tensor<T>& prompts) = 0;
    virtual Tensor<T> backward_tokens(const Tensor<T>& grad_features) = 0;
    virtual std::uint64_t parameter_checksum() const = 0;

    /// Tokenizer hook: embedding of a single token string (used to seed the
    /// prompt bank with phase-number tokens). Empty when unavailable.
    virtual std::vector<T> embed_token_string(const std::string&) const { return {}; }
};

}  // namespace reswvl
