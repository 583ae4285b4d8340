#pragma once

#include <memory>
#include <string>

#include "reswvl/core/checksum.hpp"
#include "reswvl/core/rng.hpp"
#include "reswvl/encoder/interfaces.hpp"
#include "reswvl/nn/layers.hpp"

namespace reswvl {

struct ToyEncoderOptions {
    int feature_dim = 64;
    int token_dim = 32;
    int conv1_channels = 8;
    int conv2_channels = 16;
    std::uint64_t seed = 0;
};

/// Small trainable CNN: two strided 3x3 convolutions, global average pool,
/// linear head. Milliseconds per batch on CPU, double-precision capable, so
/// the whole training stack can be checked with finite differences.
template <typename T>
class ToyImageEncoder final : public ImageEncoder<T> {
public:
    explicit ToyImageEncoder(const ToyEncoderOptions& opt) : opt_(opt) {
        Rng rng(derive_seed(opt.seed, "toy-image-encoder"));
        conv1_ = Conv2d<T>("image.conv1", 3, static_cast<std::size_t>(opt.conv1_channels), 3, 2, 1, rng);
        conv2_ = Conv2d<T>("image.conv2", static_cast<std::size_t>(opt.conv1_channels),
                           static_cast<std::size_t>(opt.conv2_channels), 3, 2, 1, rng);
        proj_ = Linear<T>("image.proj", static_cast<std::size_t>(opt.conv2_channels),
                          static_cast<std::size_t>(opt.feature_dim), rng);
    }

    int feature_dim() const override { return opt_.feature_dim; }
    bool trainable() const override { return true; }

    Tensor<T> encode(const Tensor<T>& images, bool /*train_mode*/) override {
        auto h = relu1_.forward(conv1_.forward(images));
        h = relu2_.forward(conv2_.forward(h));
        return proj_.forward(pool_.forward(h));
    }

    void backward(const Tensor<T>& grad_features) override {
        auto g = pool_.backward(proj_.backward(grad_features));
        g = conv2_.backward(relu2_.backward(g));
        conv1_.backward(relu1_.backward(g));
    }

    std::vector<Param<T>*> parameters() override {
        std::vector<Param<T>*> out;
        conv1_.collect(out);
        conv2_.collect(out);
        proj_.collect(out);
        return out;
    }

private:
    ToyEncoderOptions opt_;
    Conv2d<T> conv1_, conv2_;
    Relu<T> relu1_, relu2_;
    GlobalAvgPool<T> pool_;
    Linear<T> proj_;
};

/// Deterministic frozen text encoder: mean of the prompt tokens pushed
/// through a fixed random linear map. Frozen by construction; there is
/// nothing an optimizer could even reach.
template <typename T>
class ToyTextEncoder final : public TextEncoder<T> {
public:
    explicit ToyTextEncoder(const ToyEncoderOptions& opt) : opt_(opt) {
        Rng rng(derive_seed(opt.seed, "toy-text-encoder"));
        map_ = Tensor<T>({static_cast<std::size_t>(opt.token_dim),
                          static_cast<std::size_t>(opt.feature_dim)});
        const double std = 1.0 / std::sqrt(static_cast<double>(opt.token_dim));
        for (auto& v : map_.data) v = static_cast<T>(rng.normal(0.0, std));
    }

    int feature_dim() const override { return opt_.feature_dim; }
    int token_dim() const override { return opt_.token_dim; }

    Tensor<T> encode_tokens(const Tensor<T>& prompts) override {
        const std::size_t count = prompts.dim(0), len = prompts.dim(1), tok = prompts.dim(2);
        if (tok != static_cast<std::size_t>(opt_.token_dim))
            throw TrainError("toy text encoder: token dim mismatch");
        prompt_len_ = len;
        Tensor<T> mean({count, tok});
        for (std::size_t p = 0; p < count; ++p)
            for (std::size_t l = 0; l < len; ++l)
                for (std::size_t c = 0; c < tok; ++c)
                    mean(p, c) += prompts(p, l, c) / static_cast<T>(len);
        Tensor<T> out({count, static_cast<std::size_t>(opt_.feature_dim)});
        as_matrix(out, count, static_cast<std::size_t>(opt_.feature_dim)).noalias() =
            as_matrix(mean, count, tok) *
            as_matrix(map_, tok, static_cast<std::size_t>(opt_.feature_dim));
        return out;
    }

    Tensor<T> backward_tokens(const Tensor<T>& grad_features) override {
        const std::size_t count = grad_features.dim(0);
        const auto tok = static_cast<std::size_t>(opt_.token_dim);
        const auto d = static_cast<std::size_t>(opt_.feature_dim);
        Tensor<T> dmean({count, tok});
        as_matrix(dmean, count, tok).noalias() =
            as_matrix(grad_features, count, d) * as_matrix(map_, tok, d).transpose();
        Tensor<T> dtokens({count, prompt_len_, tok});
        for (std::size_t p = 0; p < count; ++p)
            for (std::size_t l = 0; l < prompt_len_; ++l)
                for (std::size_t c = 0; c < tok; ++c)
                    dtokens(p, l, c) = dmean(p, c) / static_cast<T>(prompt_len_);
        return dtokens;
    }

    std::uint64_t parameter_checksum() const override { return checksum(map_); }

    /// Deterministic pseudo-embedding per token string; gives the prompt bank
    /// an ordered, reproducible starting point.
    std::vector<T> embed_token_string(const std::string& token) const override {
        Rng rng(derive_seed(opt_.seed, "toy-token", fnv1a64(token)));
        std::vector<T> out(static_cast<std::size_t>(opt_.token_dim));
        for (auto& v : out) v = static_cast<T>(rng.normal(0.0, 0.02));
        return out;
    }

private:
    ToyEncoderOptions opt_;
    Tensor<T> map_;  // token_dim x feature_dim, fixed at construction
    std::size_t prompt_len_ = 1;
};

}  // namespace reswvl
