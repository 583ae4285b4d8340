#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reswvl/core/errors.hpp"

namespace reswvl {

/// Dense row-major tensor. Shapes are dynamic; everything in this library is
/// small enough that a flat vector plus a shape is all we need.
template <typename T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> s)
        : shape(std::move(s)), data(count(shape), T(0)) {}

    Tensor(std::initializer_list<std::size_t> s)
        : Tensor(std::vector<std::size_t>(s)) {}

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    std::size_t rank() const { return shape.size(); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    // 1-d / 2-d / 3-d accessors, unchecked on purpose (hot paths).
    T& operator()(std::size_t i) { return data[i]; }
    T operator()(std::size_t i) const { return data[i]; }
    T& operator()(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    T operator()(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    T& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    T operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Maps a rank-2 tensor (or a flat view rows x cols) onto an Eigen matrix.
template <typename T>
Eigen::Map<MatrixRM<T>> as_matrix(Tensor<T>& t, std::size_t rows, std::size_t cols) {
    if (rows * cols != t.numel())
        throw TrainError("tensor view mismatch: " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " vs numel " + std::to_string(t.numel()));
    return Eigen::Map<MatrixRM<T>>(t.ptr(), static_cast<Eigen::Index>(rows),
                                   static_cast<Eigen::Index>(cols));
}

template <typename T>
Eigen::Map<const MatrixRM<T>> as_matrix(const Tensor<T>& t, std::size_t rows, std::size_t cols) {
    if (rows * cols != t.numel())
        throw TrainError("tensor view mismatch: " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " vs numel " + std::to_string(t.numel()));
    return Eigen::Map<const MatrixRM<T>>(t.ptr(), static_cast<Eigen::Index>(rows),
                                         static_cast<Eigen::Index>(cols));
}

/// A learnable tensor with its gradient accumulator.
template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Param() = default;
    Param(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor<T>(value.shape);
    }

    void zero_grad() { grad.fill(T(0)); }
    std::size_t numel() const { return value.numel(); }
};

}  // namespace reswvl
