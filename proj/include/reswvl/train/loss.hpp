#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <vector>

#include "reswvl/core/errors.hpp"
#include "reswvl/core/tensor.hpp"

namespace reswvl {

/// Per-phase loss weights, index p-1 for phase p.
struct ClassWeights {
    std::vector<double> weights;

    double weight_of(int phase) const { return weights.at(static_cast<std::size_t>(phase) - 1); }
    std::size_t phase_count() const { return weights.size(); }

    static ClassWeights uniform(int phase_count) {
        return {std::vector<double>(static_cast<std::size_t>(phase_count), 1.0)};
    }
};

/// Median frequency balancing: weight_c = median(freq) / freq_c, computed
/// over the phases that actually occur. Absent phases get weight 0 and a
/// warning, since no gradient can reach them anyway.
inline ClassWeights median_frequency_weights(const std::vector<std::int64_t>& counts) {
    std::int64_t total = 0;
    for (auto c : counts) {
        if (c < 0) throw DataError("class weights: negative count");
        total += c;
    }
    if (total == 0) throw DataError("class weights: all phase counts are zero");

    std::vector<double> freqs;
    for (auto c : counts)
        if (c > 0) freqs.push_back(static_cast<double>(c) / static_cast<double>(total));
    std::sort(freqs.begin(), freqs.end());
    const std::size_t mid = freqs.size() / 2;
    const double median =
        freqs.size() % 2 == 1 ? freqs[mid] : (freqs[mid - 1] + freqs[mid]) / 2.0;

    ClassWeights out;
    out.weights.resize(counts.size(), 0.0);
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] > 0) {
            const double freq = static_cast<double>(counts[c]) / static_cast<double>(total);
            out.weights[c] = median / freq;
        } else {
            std::cerr << "[reswvl] warning: phase " << c + 1
                      << " has no training frames; weight set to 0\n";
        }
    }
    return out;
}

/// Frame counts per phase over a set of label sequences.
inline std::vector<std::int64_t> phase_counts(const std::vector<const std::vector<int>*>& label_seqs,
                                              int phase_count) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(phase_count), 0);
    for (const auto* seq : label_seqs)
        for (int l : *seq) ++counts.at(static_cast<std::size_t>(l) - 1);
    return counts;
}

template <typename T>
struct WeightedCeResult {
    double loss = 0.0;
    double weight_sum = 0.0;
    Tensor<T> dlogits;
};

/// Weighted cross entropy: sum_b w_{y_b} * (-log softmax(logits_b)[y_b])
/// normalized by the sum of the batch's weights, so uniformly rescaling the
/// weights leaves the loss unchanged.
template <typename T>
WeightedCeResult<T> weighted_cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets,
                                           const ClassWeights& weights) {
    const std::size_t batch = logits.dim(0), phases = logits.dim(1);
    if (targets.size() != batch) throw TrainError("weighted CE: batch size mismatch");
    for (const auto v : logits.data)
        if (!std::isfinite(static_cast<double>(v)))
            throw TrainError("weighted CE: non-finite logits");

    WeightedCeResult<T> res;
    res.dlogits = Tensor<T>({batch, phases});
    double weight_sum = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const int y = targets[b];
        if (y < 1 || y > static_cast<int>(phases))
            throw TrainError("weighted CE: target " + std::to_string(y) + " outside 1.." +
                             std::to_string(phases));
        weight_sum += weights.weight_of(y);
    }
    res.weight_sum = weight_sum;
    if (weight_sum <= 0.0) return res;  // batch carries no learnable signal

    double loss = 0.0;
    std::vector<double> probs(phases);
    for (std::size_t b = 0; b < batch; ++b) {
        const T* row = logits.ptr() + b * phases;
        double maxv = static_cast<double>(row[0]);
        for (std::size_t p = 1; p < phases; ++p) maxv = std::max(maxv, static_cast<double>(row[p]));
        double z = 0.0;
        for (std::size_t p = 0; p < phases; ++p) {
            probs[p] = std::exp(static_cast<double>(row[p]) - maxv);
            z += probs[p];
        }
        const int y = targets[b];
        const double w = weights.weight_of(y);
        const double log_py = static_cast<double>(row[y - 1]) - maxv - std::log(z);
        loss += w * (-log_py);
        for (std::size_t p = 0; p < phases; ++p) {
            double g = probs[p] / z;
            if (static_cast<int>(p) == y - 1) g -= 1.0;
            res.dlogits(b, p) = static_cast<T>(w * g / weight_sum);
        }
    }
    res.loss = loss / weight_sum;
    return res;
}

/// Fraction of frames whose argmax logit matches the target.
template <typename T>
double frame_accuracy(const Tensor<T>& logits, const std::vector<int>& targets) {
    const std::size_t batch = logits.dim(0), phases = logits.dim(1);
    std::size_t hits = 0;
    for (std::size_t b = 0; b < batch; ++b) {
        const T* row = logits.ptr() + b * phases;
        std::size_t best = 0;
        for (std::size_t p = 1; p < phases; ++p)
            if (row[p] > row[best]) best = p;
        if (static_cast<int>(best) + 1 == targets[b]) ++hits;
    }
    return batch == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(batch);
}

template <typename T>
std::vector<int> argmax_labels(const Tensor<T>& logits) {
    const std::size_t rows = logits.dim(0), phases = logits.dim(1);
    std::vector<int> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = logits.ptr() + r * phases;
        std::size_t best = 0;
        for (std::size_t p = 1; p < phases; ++p)
            if (row[p] > row[best]) best = p;
        out[r] = static_cast<int>(best) + 1;
    }
    return out;
}

}  // namespace reswvl
