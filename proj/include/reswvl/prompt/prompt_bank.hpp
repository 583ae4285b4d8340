#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "reswvl/core/errors.hpp"
#include "reswvl/core/rng.hpp"
#include "reswvl/core/tensor.hpp"

namespace reswvl {

enum class PromptVariant { independent, ordinal };

inline PromptVariant parse_prompt_variant(const std::string& s) {
    if (s == "independent") return PromptVariant::independent;
    if (s == "ordinal") return PromptVariant::ordinal;
    throw ConfigError("unknown prompt variant '" + s + "' (expected independent or ordinal)");
}

inline std::string to_string(PromptVariant v) {
    return v == PromptVariant::independent ? "independent" : "ordinal";
}

/// Evenly spaced reference phase ids from 1 to P, n of them, always including
/// both endpoints. Fractional positions round half down; collisions are
/// back-filled with the nearest unused ids.
inline std::vector<int> default_reference_indices(int phase_count, int reference_count) {
    if (reference_count < 2) throw ConfigError("reference count must be >= 2");
    if (reference_count > phase_count)
        throw ConfigError("reference count " + std::to_string(reference_count) +
                          " exceeds phase count " + std::to_string(phase_count));
    std::set<int> refs;
    for (int k = 0; k < reference_count; ++k) {
        const double pos = 1.0 + static_cast<double>(phase_count - 1) * k / (reference_count - 1);
        refs.insert(static_cast<int>(std::ceil(pos - 0.5)));
    }
    refs.insert(1);
    refs.insert(phase_count);
    for (int delta = 1; static_cast<int>(refs.size()) < reference_count && delta < phase_count; ++delta) {
        const std::vector<int> present(refs.begin(), refs.end());
        for (int r : present) {
            for (int cand : {r + delta, r - delta}) {
                if (cand >= 1 && cand <= phase_count && !refs.count(cand)) {
                    refs.insert(cand);
                    if (static_cast<int>(refs.size()) == reference_count) break;
                }
            }
            if (static_cast<int>(refs.size()) == reference_count) break;
        }
    }
    return {refs.begin(), refs.end()};
}

struct PromptBankConfig {
    int phase_count = 0;
    int context_tokens = 8;  // learnable tokens after the phase token, shared across phases
    int token_dim = 0;
    PromptVariant variant = PromptVariant::independent;
    std::vector<int> reference_indices;  // ordinal only; sorted, unique, endpoints 1 and P

    int reference_count() const { return static_cast<int>(reference_indices.size()); }

    void validate() const {
        if (phase_count < 1) throw ConfigError("prompt bank: phase count must be >= 1");
        if (context_tokens < 0) throw ConfigError("prompt bank: context token count must be >= 0");
        if (token_dim < 1) throw ConfigError("prompt bank: token dim must be >= 1");
        if (variant == PromptVariant::ordinal) {
            const auto& r = reference_indices;
            if (r.size() < 2 || static_cast<int>(r.size()) > phase_count)
                throw ConfigError("prompt bank: ordinal variant needs 2..P reference indices");
            if (!std::is_sorted(r.begin(), r.end()) ||
                std::adjacent_find(r.begin(), r.end()) != r.end())
                throw ConfigError("prompt bank: reference indices must be sorted and unique");
            if (r.front() != 1 || r.back() != phase_count)
                throw ConfigError("prompt bank: reference indices must start at 1 and end at P");
        }
    }
};

/// How phase p's first token is assembled from the reference rows: either an
/// exact reference row, or a convex blend of the two bracketing references.
struct TokenBlend {
    bool exact = false;
    std::size_t row_lo = 0, row_hi = 0;
    double w_lo = 1.0, w_hi = 0.0;
};

/// The P learnable prompts: one phase-specific first token plus m shared
/// context tokens. Independent variant learns all P first tokens; ordinal
/// learns n reference tokens and linearly interpolates the rest, preserving
/// phase order in the token space.
template <typename T>
class PromptBank {
public:
    PromptBank() = default;

    /// `token_embedder`, when provided, seeds first/reference tokens with the
    /// text encoder's embeddings of the phase-number strings "1".."P";
    /// otherwise all tokens start from N(0, 0.02^2).
    PromptBank(PromptBankConfig cfg, Rng& rng,
               const std::function<std::vector<T>(const std::string&)>& token_embedder = nullptr)
        : cfg_(std::move(cfg)) {
        cfg_.validate();
        const auto dim = static_cast<std::size_t>(cfg_.token_dim);
        context_ = Param<T>("prompt.context",
                            Tensor<T>({static_cast<std::size_t>(cfg_.context_tokens), dim}));
        for (auto& v : context_.value.data) v = static_cast<T>(rng.normal(0.0, 0.02));

        const auto rows = first_token_rows();
        first_ = Param<T>("prompt.first", Tensor<T>({rows, dim}));
        for (std::size_t r = 0; r < rows; ++r) {
            const int phase = cfg_.variant == PromptVariant::ordinal
                                  ? cfg_.reference_indices[r]
                                  : static_cast<int>(r) + 1;
            if (token_embedder) {
                const auto emb = token_embedder(std::to_string(phase));
                if (emb.size() != dim)
                    throw ConfigError("prompt bank: token embedder returned wrong width");
                std::copy(emb.begin(), emb.end(), first_.value.ptr() + r * dim);
            } else {
                for (std::size_t c = 0; c < dim; ++c)
                    first_.value(r, c) = static_cast<T>(rng.normal(0.0, 0.02));
            }
        }
    }

    const PromptBankConfig& config() const { return cfg_; }
    int prompt_length() const { return 1 + cfg_.context_tokens; }

    std::size_t first_token_rows() const {
        return cfg_.variant == PromptVariant::ordinal
                   ? static_cast<std::size_t>(cfg_.reference_count())
                   : static_cast<std::size_t>(cfg_.phase_count);
    }

    TokenBlend blend_for(int phase) const {
        check_phase(phase);
        TokenBlend b;
        if (cfg_.variant == PromptVariant::independent) {
            b.exact = true;
            b.row_lo = static_cast<std::size_t>(phase - 1);
            return b;
        }
        const auto& refs = cfg_.reference_indices;
        const auto it = std::lower_bound(refs.begin(), refs.end(), phase);
        if (it != refs.end() && *it == phase) {
            b.exact = true;
            b.row_lo = static_cast<std::size_t>(it - refs.begin());
            return b;
        }
        const auto hi = static_cast<std::size_t>(it - refs.begin());
        const auto lo = hi - 1;
        const double lambda =
            static_cast<double>(phase - refs[lo]) / static_cast<double>(refs[hi] - refs[lo]);
        b.exact = false;
        b.row_lo = lo;
        b.row_hi = hi;
        b.w_lo = 1.0 - lambda;
        b.w_hi = lambda;
        return b;
    }

    /// First token of phase p. Reference phases recover their reference row
    /// exactly (no arithmetic); others are convex blends of the two
    /// bracketing references.
    std::vector<T> first_token(int phase) const {
        const auto dim = static_cast<std::size_t>(cfg_.token_dim);
        const auto b = blend_for(phase);
        std::vector<T> out(dim);
        const T* lo = first_.value.ptr() + b.row_lo * dim;
        if (b.exact) {
            std::copy(lo, lo + dim, out.begin());
        } else {
            const T* hi = first_.value.ptr() + b.row_hi * dim;
            for (std::size_t c = 0; c < dim; ++c)
                out[c] = static_cast<T>(b.w_lo) * lo[c] + static_cast<T>(b.w_hi) * hi[c];
        }
        return out;
    }

    /// Prompt for phase p: (1 + m) x token_dim; row 0 is the first token,
    /// rows 1..m are the shared context tokens.
    Tensor<T> materialize(int phase) const {
        const auto dim = static_cast<std::size_t>(cfg_.token_dim);
        Tensor<T> out({static_cast<std::size_t>(prompt_length()), dim});
        const auto first = first_token(phase);
        std::copy(first.begin(), first.end(), out.ptr());
        std::copy(context_.value.data.begin(), context_.value.data.end(), out.ptr() + dim);
        return out;
    }

    /// All P prompts: P x (1+m) x token_dim.
    Tensor<T> materialize_all() const {
        const auto dim = static_cast<std::size_t>(cfg_.token_dim);
        const auto len = static_cast<std::size_t>(prompt_length());
        Tensor<T> out({static_cast<std::size_t>(cfg_.phase_count), len, dim});
        for (int p = 1; p <= cfg_.phase_count; ++p) {
            const auto one = materialize(p);
            std::copy(one.data.begin(), one.data.end(), out.ptr() + (p - 1) * len * dim);
        }
        return out;
    }

    /// Routes the gradient of one materialized prompt back onto the bank's
    /// parameters: context rows accumulate directly, the first-token row is
    /// split across the (at most two) references that produced it.
    void accumulate_grad(int phase, const Tensor<T>& grad_tokens) {
        const auto dim = static_cast<std::size_t>(cfg_.token_dim);
        if (grad_tokens.numel() != static_cast<std::size_t>(prompt_length()) * dim)
            throw TrainError("prompt bank: gradient shape mismatch");
        const auto b = blend_for(phase);
        const T* g0 = grad_tokens.ptr();
        T* lo = first_.grad.ptr() + b.row_lo * dim;
        if (b.exact) {
            for (std::size_t c = 0; c < dim; ++c) lo[c] += g0[c];
        } else {
            T* hi = first_.grad.ptr() + b.row_hi * dim;
            for (std::size_t c = 0; c < dim; ++c) {
                lo[c] += static_cast<T>(b.w_lo) * g0[c];
                hi[c] += static_cast<T>(b.w_hi) * g0[c];
            }
        }
        for (int m = 0; m < cfg_.context_tokens; ++m) {
            const T* g = grad_tokens.ptr() + (m + 1) * dim;
            T* ctx = context_.grad.ptr() + static_cast<std::size_t>(m) * dim;
            for (std::size_t c = 0; c < dim; ++c) ctx[c] += g[c];
        }
    }

    /// Gradient of all P prompts at once (P x (1+m) x token_dim).
    void accumulate_grad_all(const Tensor<T>& grad) {
        const auto dim = static_cast<std::size_t>(cfg_.token_dim);
        const auto len = static_cast<std::size_t>(prompt_length());
        Tensor<T> one({len, dim});
        for (int p = 1; p <= cfg_.phase_count; ++p) {
            std::copy(grad.ptr() + (p - 1) * len * dim, grad.ptr() + p * len * dim, one.ptr());
            accumulate_grad(p, one);
        }
    }

    std::vector<Param<T>*> parameters() {
        std::vector<Param<T>*> out;
        if (cfg_.context_tokens > 0) out.push_back(&context_);
        out.push_back(&first_);
        return out;
    }

    Param<T>& context_param() { return context_; }
    Param<T>& first_param() { return first_; }
    const Param<T>& context_param() const { return context_; }
    const Param<T>& first_param() const { return first_; }

private:
    PromptBankConfig cfg_;
    Param<T> context_;  // m x token_dim
    Param<T> first_;    // P x token_dim (independent) or n x token_dim (ordinal references)

    void check_phase(int phase) const {
        if (phase < 1 || phase > cfg_.phase_count)
            throw ConfigError("prompt bank: phase id " + std::to_string(phase) + " outside 1.." +
                              std::to_string(cfg_.phase_count));
    }
};

}  // namespace reswvl
