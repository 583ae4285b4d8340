#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "reswvl/core/archive.hpp"
#include "reswvl/core/errors.hpp"
#include "reswvl/core/rng.hpp"
#include "reswvl/nn/layers.hpp"
#include "reswvl/train/stage1.hpp"

namespace reswvl {

struct TcnConfig {
    int stages = 1;
    int layers = 8;
    int hidden_dim = 256;
    int kernel_size = 3;
    double dropout = 0.5;
    int input_dim = 1024;  // d of the cached features
    int phase_count = 0;

    int epochs = 25;
    double learning_rate = 0.0;
    std::vector<double> lr_grid = default_lr_grid();
    int lr_search_epochs = 5;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;

    /// Frames of history one output can see: 1 + (k-1) * sum_l 2^l.
    long receptive_field() const {
        return 1 + static_cast<long>(kernel_size - 1) * ((1L << layers) - 1);
    }

    void validate() const {
        if (stages < 1) throw ConfigError("tcn: stages must be >= 1");
        if (layers < 1 || layers > 24) throw ConfigError("tcn: layers must be in 1..24");
        if (hidden_dim < 1) throw ConfigError("tcn: hidden_dim must be >= 1");
        if (kernel_size < 1) throw ConfigError("tcn: kernel_size must be >= 1");
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("tcn: dropout must be in [0, 1)");
        if (input_dim < 1) throw ConfigError("tcn: input_dim must be >= 1");
        if (phase_count < 1) throw ConfigError("tcn: phase_count must be >= 1");
        if (epochs < 1) throw ConfigError("tcn: epochs must be >= 1");
    }
};

/// Causal dilated temporal convolutional network over cached frame features.
/// Residual blocks of dilation 2^l; everything left-padded, so outputs at
/// time t never see inputs after t. Stages beyond the first refine the
/// softmax of the previous stage's logits.
template <typename T>
class Tcn {
public:
    Tcn() = default;

    Tcn(const TcnConfig& cfg, Rng& rng) : cfg_(cfg) {
        cfg_.validate();
        const auto hidden = static_cast<std::size_t>(cfg.hidden_dim);
        const auto p_count = static_cast<std::size_t>(cfg.phase_count);
        for (int s = 0; s < cfg.stages; ++s) {
            StageNet net;
            const std::size_t in = s == 0 ? static_cast<std::size_t>(cfg.input_dim) : p_count;
            const std::string prefix = "tcn.stage" + std::to_string(s);
            net.in_proj = CausalConv1d<T>(prefix + ".in_proj", in, hidden, 1, 1, rng);
            for (int l = 0; l < cfg.layers; ++l) {
                Block blk;
                const std::string bp = prefix + ".block" + std::to_string(l);
                blk.dilated = CausalConv1d<T>(bp + ".dilated", hidden, hidden, cfg.kernel_size,
                                              1 << l, rng);
                blk.pointwise = CausalConv1d<T>(bp + ".pointwise", hidden, hidden, 1, 1, rng);
                blk.drop = Dropout<T>(cfg.dropout);
                net.blocks.push_back(std::move(blk));
            }
            net.head = CausalConv1d<T>(prefix + ".head", hidden, p_count, 1, 1, rng);
            stages_.push_back(std::move(net));
        }
    }

    const TcnConfig& config() const { return cfg_; }

    /// Per-stage logits (T x P each). `dropout_rng` is only consulted in
    /// training mode.
    std::vector<Tensor<T>> forward(const Tensor<T>& features, bool train, Rng* dropout_rng) {
        if (features.rank() != 2 || features.dim(1) != static_cast<std::size_t>(cfg_.input_dim))
            throw TrainError("tcn: expected features T x " + std::to_string(cfg_.input_dim));
        if (features.dim(0) < 1) throw TrainError("tcn: empty feature sequence");
        std::vector<Tensor<T>> all_logits;
        stage_probs_.clear();
        Tensor<T> input = features;
        for (std::size_t s = 0; s < stages_.size(); ++s) {
            auto& net = stages_[s];
            Tensor<T> h = net.in_proj.forward(input);
            for (auto& blk : net.blocks) {
                Tensor<T> y = blk.relu.forward(blk.dilated.forward(h));
                y = blk.pointwise.forward(y);
                if (train && dropout_rng) {
                    y = blk.drop.forward(y, true, *dropout_rng);
                } else {
                    Rng unused(0);
                    y = blk.drop.forward(y, false, unused);
                }
                for (std::size_t i = 0; i < h.numel(); ++i) y.data[i] += h.data[i];
                h = std::move(y);
            }
            Tensor<T> logits = net.head.forward(h);
            if (s + 1 < stages_.size()) {
                stage_probs_.push_back(softmax_rows(logits));
                input = stage_probs_.back();
            }
            all_logits.push_back(std::move(logits));
        }
        return all_logits;
    }

    /// Last-stage logits with dropout off.
    Tensor<T> forward_eval(const Tensor<T>& features) {
        auto outs = forward(features, /*train=*/false, nullptr);
        return std::move(outs.back());
    }

    /// Chains the per-stage logit gradients back through the network,
    /// accumulating parameter gradients.
    void backward(const std::vector<Tensor<T>>& dlogits) {
        if (dlogits.size() != stages_.size())
            throw TrainError("tcn: expected one gradient tensor per stage");
        Tensor<T> carry;  // gradient flowing into stage s's logits from stage s+1
        for (int s = static_cast<int>(stages_.size()) - 1; s >= 0; --s) {
            Tensor<T> g = dlogits[static_cast<std::size_t>(s)];
            if (carry.numel() > 0)
                for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += carry.data[i];
            auto& net = stages_[static_cast<std::size_t>(s)];
            Tensor<T> dh = net.head.backward(g);
            for (auto it = net.blocks.rbegin(); it != net.blocks.rend(); ++it) {
                // out = x + dropout(pointwise(relu(dilated(x))))
                Tensor<T> dbranch = it->drop.backward(dh);
                dbranch = it->pointwise.backward(dbranch);
                dbranch = it->dilated.backward(it->relu.backward(dbranch));
                for (std::size_t i = 0; i < dh.numel(); ++i) dh.data[i] += dbranch.data[i];
            }
            Tensor<T> dinput = net.in_proj.backward(dh);
            if (s > 0)
                carry = softmax_rows_backward(stage_probs_[static_cast<std::size_t>(s) - 1], dinput);
        }
    }

    std::vector<Param<T>*> parameters() {
        std::vector<Param<T>*> out;
        for (auto& net : stages_) {
            net.in_proj.collect(out);
            for (auto& blk : net.blocks) {
                blk.dilated.collect(out);
                blk.pointwise.collect(out);
            }
            net.head.collect(out);
        }
        return out;
    }

private:
    struct Block {
        CausalConv1d<T> dilated, pointwise;
        Relu<T> relu;
        Dropout<T> drop{0.5};
    };
    struct StageNet {
        CausalConv1d<T> in_proj;
        std::vector<Block> blocks;
        CausalConv1d<T> head;
    };

    TcnConfig cfg_;
    std::vector<StageNet> stages_;
    std::vector<Tensor<T>> stage_probs_;

    static Tensor<T> softmax_rows(const Tensor<T>& x) {
        Tensor<T> out(x.shape);
        const std::size_t rows = x.dim(0), cols = x.dim(1);
        for (std::size_t r = 0; r < rows; ++r) {
            const T* in = x.ptr() + r * cols;
            T* o = out.ptr() + r * cols;
            T maxv = in[0];
            for (std::size_t c = 1; c < cols; ++c) maxv = std::max(maxv, in[c]);
            T z = 0;
            for (std::size_t c = 0; c < cols; ++c) {
                o[c] = std::exp(in[c] - maxv);
                z += o[c];
            }
            for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
        }
        return out;
    }

    static Tensor<T> softmax_rows_backward(const Tensor<T>& probs, const Tensor<T>& dprobs) {
        Tensor<T> out(probs.shape);
        const std::size_t rows = probs.dim(0), cols = probs.dim(1);
        for (std::size_t r = 0; r < rows; ++r) {
            const T* p = probs.ptr() + r * cols;
            const T* dp = dprobs.ptr() + r * cols;
            T* o = out.ptr() + r * cols;
            T dot = 0;
            for (std::size_t c = 0; c < cols; ++c) dot += p[c] * dp[c];
            for (std::size_t c = 0; c < cols; ++c) o[c] = p[c] * (dp[c] - dot);
        }
        return out;
    }
};

}  // namespace reswvl
