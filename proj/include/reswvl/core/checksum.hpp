#pragma once

#include <cstdint>
#include <vector>

#include "reswvl/core/rng.hpp"
#include "reswvl/core/tensor.hpp"

namespace reswvl {

/// Checksum of raw parameter bytes. Two parameter sets compare equal iff
/// every value is bit-identical, which is what the frozen-encoder contract
/// requires.
template <typename T>
std::uint64_t checksum(const Tensor<T>& t) {
    return fnv1a64(t.data.data(), t.data.size() * sizeof(T));
}

template <typename T>
std::uint64_t checksum(const std::vector<Param<T>*>& params) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto* p : params)
        h = fnv1a64(p->value.data.data(), p->value.data.size() * sizeof(T), h);
    return h;
}

}  // namespace reswvl
