#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "reswvl/core/rng.hpp"
#include "reswvl/core/tensor.hpp"

namespace reswvl {

/// Fully connected layer, y = x W^T + b. Caches its input between forward
/// and backward; one batch in flight at a time.
template <typename T>
class Linear {
public:
    Param<T> weight;  // out x in
    Param<T> bias;    // out

    Linear() = default;
    Linear(const std::string& name, std::size_t in_dim, std::size_t out_dim, Rng& rng)
        : weight(name + ".weight", Tensor<T>({out_dim, in_dim})),
          bias(name + ".bias", Tensor<T>({out_dim})) {
        const double std = std::sqrt(2.0 / static_cast<double>(in_dim));
        for (auto& w : weight.value.data) w = static_cast<T>(rng.normal(0.0, std));
    }

    std::size_t in_dim() const { return weight.value.dim(1); }
    std::size_t out_dim() const { return weight.value.dim(0); }

    Tensor<T> forward(const Tensor<T>& x) {
        const std::size_t batch = x.numel() / in_dim();
        x_ = x;
        Tensor<T> y({batch, out_dim()});
        auto ym = as_matrix(y, batch, out_dim());
        ym.noalias() = as_matrix(x, batch, in_dim()) * as_matrix(weight.value, out_dim(), in_dim()).transpose();
        ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(
            bias.value.ptr(), static_cast<Eigen::Index>(out_dim()));
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t batch = dy.numel() / out_dim();
        auto dym = as_matrix(dy, batch, out_dim());
        auto xm = as_matrix(x_, batch, in_dim());
        as_matrix(weight.grad, out_dim(), in_dim()).noalias() += dym.transpose() * xm;
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> bg(bias.grad.ptr(),
                                                           static_cast<Eigen::Index>(out_dim()));
        bg += dym.colwise().sum().transpose();
        Tensor<T> dx(x_.shape);
        as_matrix(dx, batch, in_dim()).noalias() =
            dym * as_matrix(weight.value, out_dim(), in_dim());
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

private:
    Tensor<T> x_;
};

/// 2-d convolution via im2col + GEMM. Input B x C x H x W.
template <typename T>
class Conv2d {
public:
    Param<T> weight;  // out_ch x (in_ch * k * k)
    Param<T> bias;    // out_ch

    Conv2d() = default;
    Conv2d(const std::string& name, std::size_t in_ch, std::size_t out_ch, int kernel, int stride,
           int pad, Rng& rng)
        : weight(name + ".weight", Tensor<T>({out_ch, in_ch * kernel * kernel})),
          bias(name + ".bias", Tensor<T>({out_ch})),
          in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad) {
        const double std = std::sqrt(2.0 / static_cast<double>(in_ch * kernel * kernel));
        for (auto& w : weight.value.data) w = static_cast<T>(rng.normal(0.0, std));
    }

    int out_size(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }

    Tensor<T> forward(const Tensor<T>& x) {
        const std::size_t batch = x.dim(0);
        in_h_ = static_cast<int>(x.dim(2));
        in_w_ = static_cast<int>(x.dim(3));
        const int oh = out_size(in_h_), ow = out_size(in_w_);
        const std::size_t patch = in_ch_ * kernel_ * kernel_;
        cols_ = Tensor<T>({batch, patch, static_cast<std::size_t>(oh) * ow});
        Tensor<T> y({batch, out_ch_, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
        for (std::size_t b = 0; b < batch; ++b) {
            im2col(x.ptr() + b * in_ch_ * in_h_ * in_w_, cols_.ptr() + b * patch * oh * ow, oh, ow);
            Eigen::Map<MatrixRM<T>> ym(y.ptr() + b * out_ch_ * oh * ow,
                                       static_cast<Eigen::Index>(out_ch_),
                                       static_cast<Eigen::Index>(oh) * ow);
            Eigen::Map<const MatrixRM<T>> cm(cols_.ptr() + b * patch * oh * ow,
                                             static_cast<Eigen::Index>(patch),
                                             static_cast<Eigen::Index>(oh) * ow);
            ym.noalias() = as_matrix(weight.value, out_ch_, patch) * cm;
            ym.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(
                bias.value.ptr(), static_cast<Eigen::Index>(out_ch_));
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t batch = dy.dim(0);
        const int oh = static_cast<int>(dy.dim(2)), ow = static_cast<int>(dy.dim(3));
        const std::size_t patch = in_ch_ * kernel_ * kernel_;
        Tensor<T> dx({batch, in_ch_, static_cast<std::size_t>(in_h_), static_cast<std::size_t>(in_w_)});
        auto wg = as_matrix(weight.grad, out_ch_, patch);
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> bg(bias.grad.ptr(),
                                                           static_cast<Eigen::Index>(out_ch_));
        std::vector<T> dcols(patch * oh * ow);
        for (std::size_t b = 0; b < batch; ++b) {
            Eigen::Map<const MatrixRM<T>> dym(dy.ptr() + b * out_ch_ * oh * ow,
                                              static_cast<Eigen::Index>(out_ch_),
                                              static_cast<Eigen::Index>(oh) * ow);
            Eigen::Map<const MatrixRM<T>> cm(cols_.ptr() + b * patch * oh * ow,
                                             static_cast<Eigen::Index>(patch),
                                             static_cast<Eigen::Index>(oh) * ow);
            wg.noalias() += dym * cm.transpose();
            bg += dym.rowwise().sum();
            Eigen::Map<MatrixRM<T>> dcm(dcols.data(), static_cast<Eigen::Index>(patch),
                                        static_cast<Eigen::Index>(oh) * ow);
            dcm.noalias() = as_matrix(weight.value, out_ch_, patch).transpose() * dym;
            col2im(dcols.data(), dx.ptr() + b * in_ch_ * in_h_ * in_w_, oh, ow);
        }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

private:
    std::size_t in_ch_ = 0, out_ch_ = 0;
    int kernel_ = 0, stride_ = 1, pad_ = 0;
    int in_h_ = 0, in_w_ = 0;
    Tensor<T> cols_;

    void im2col(const T* img, T* cols, int oh, int ow) const {
        const std::size_t plane = static_cast<std::size_t>(in_h_) * in_w_;
        std::size_t row = 0;
        for (std::size_t c = 0; c < in_ch_; ++c) {
            for (int ky = 0; ky < kernel_; ++ky) {
                for (int kx = 0; kx < kernel_; ++kx, ++row) {
                    T* dst = cols + row * oh * ow;
                    for (int y = 0; y < oh; ++y) {
                        const int sy = y * stride_ + ky - pad_;
                        for (int x = 0; x < ow; ++x) {
                            const int sx = x * stride_ + kx - pad_;
                            dst[y * ow + x] =
                                (sy >= 0 && sy < in_h_ && sx >= 0 && sx < in_w_)
                                    ? img[c * plane + sy * in_w_ + sx]
                                    : T(0);
                        }
                    }
                }
            }
        }
    }

    void col2im(const T* cols, T* img, int oh, int ow) const {
        const std::size_t plane = static_cast<std::size_t>(in_h_) * in_w_;
        std::fill(img, img + in_ch_ * plane, T(0));
        std::size_t row = 0;
        for (std::size_t c = 0; c < in_ch_; ++c) {
            for (int ky = 0; ky < kernel_; ++ky) {
                for (int kx = 0; kx < kernel_; ++kx, ++row) {
                    const T* src = cols + row * oh * ow;
                    for (int y = 0; y < oh; ++y) {
                        const int sy = y * stride_ + ky - pad_;
                        if (sy < 0 || sy >= in_h_) continue;
                        for (int x = 0; x < ow; ++x) {
                            const int sx = x * stride_ + kx - pad_;
                            if (sx >= 0 && sx < in_w_) img[c * plane + sy * in_w_ + sx] += src[y * ow + x];
                        }
                    }
                }
            }
        }
    }
};

template <typename T>
class Relu {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        x_ = x;
        Tensor<T> y(x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(dy.shape);
        for (std::size_t i = 0; i < dy.numel(); ++i)
            dx.data[i] = x_.data[i] > T(0) ? dy.data[i] : T(0);
        return dx;
    }

private:
    Tensor<T> x_;
};

/// B x C x H x W -> B x C mean over the spatial plane.
template <typename T>
class GlobalAvgPool {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        shape_ = x.shape;
        const std::size_t batch = x.dim(0), ch = x.dim(1), plane = x.dim(2) * x.dim(3);
        Tensor<T> y({batch, ch});
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = 0; c < ch; ++c) {
                T sum = 0;
                const T* p = x.ptr() + (b * ch + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) sum += p[i];
                y(b, c) = sum / static_cast<T>(plane);
            }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t batch = shape_[0], ch = shape_[1], plane = shape_[2] * shape_[3];
        Tensor<T> dx(shape_);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = 0; c < ch; ++c) {
                const T g = dy(b, c) / static_cast<T>(plane);
                T* p = dx.ptr() + (b * ch + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) p[i] = g;
            }
        return dx;
    }

private:
    std::vector<std::size_t> shape_;
};

/// Inverted dropout; identity in eval mode.
template <typename T>
class Dropout {
public:
    explicit Dropout(double p = 0.5) : p_(p) {}

    Tensor<T> forward(const Tensor<T>& x, bool train, Rng& rng) {
        if (!train || p_ <= 0.0) {
            active_ = false;
            return x;
        }
        active_ = true;
        mask_.assign(x.numel(), T(0));
        const T scale = static_cast<T>(1.0 / (1.0 - p_));
        Tensor<T> y(x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i) {
            if (!rng.bernoulli(p_)) {
                mask_[i] = scale;
                y.data[i] = x.data[i] * scale;
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        if (!active_) return dy;
        Tensor<T> dx(dy.shape);
        for (std::size_t i = 0; i < dy.numel(); ++i) dx.data[i] = dy.data[i] * mask_[i];
        return dx;
    }

private:
    double p_;
    bool active_ = false;
    std::vector<T> mask_;
};

/// Dilated 1-d convolution over a time-major sequence (T x C_in -> T x C_out)
/// with left padding only: output at time t reads inputs at
/// t, t - dilation, ..., t - (k-1) * dilation. Nothing to the right of t is
/// ever touched, which is what makes the stack causal.
template <typename T>
class CausalConv1d {
public:
    Param<T> weight;  // k x out_ch x in_ch (tap-major)
    Param<T> bias;    // out_ch

    CausalConv1d() = default;
    CausalConv1d(const std::string& name, std::size_t in_ch, std::size_t out_ch, int kernel,
                 int dilation, Rng& rng)
        : weight(name + ".weight", Tensor<T>({static_cast<std::size_t>(kernel), out_ch, in_ch})),
          bias(name + ".bias", Tensor<T>({out_ch})),
          in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), dilation_(dilation) {
        const double std = std::sqrt(2.0 / static_cast<double>(in_ch * kernel));
        for (auto& w : weight.value.data) w = static_cast<T>(rng.normal(0.0, std));
    }

    std::size_t in_ch() const { return in_ch_; }
    std::size_t out_ch() const { return out_ch_; }

    // Plain fixed-order loops on purpose: the accumulation order for the
    // output at time t depends only on (k, ci), never on the sequence length
    // or buffer placement, so a prefix of the input yields a bit-identical
    // prefix of the output.
    Tensor<T> forward(const Tensor<T>& x) {
        x_ = x;
        const std::size_t frames = x.dim(0);
        Tensor<T> y({frames, out_ch_});
        for (std::size_t t = 0; t < frames; ++t) {
            T* yrow = y.ptr() + t * out_ch_;
            for (std::size_t co = 0; co < out_ch_; ++co) yrow[co] = bias.value(co);
        }
        for (int k = 0; k < kernel_; ++k) {
            const std::size_t shift = static_cast<std::size_t>(kernel_ - 1 - k) * dilation_;
            if (shift >= frames) continue;
            const T* wk = weight.value.ptr() + static_cast<std::size_t>(k) * out_ch_ * in_ch_;
            for (std::size_t t = shift; t < frames; ++t) {
                const T* xrow = x.ptr() + (t - shift) * in_ch_;
                T* yrow = y.ptr() + t * out_ch_;
                for (std::size_t co = 0; co < out_ch_; ++co) {
                    const T* w = wk + co * in_ch_;
                    T acc = 0;
                    for (std::size_t ci = 0; ci < in_ch_; ++ci) acc += w[ci] * xrow[ci];
                    yrow[co] += acc;
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t frames = dy.dim(0);
        Tensor<T> dx(x_.shape);
        for (std::size_t t = 0; t < frames; ++t) {
            const T* dyrow = dy.ptr() + t * out_ch_;
            for (std::size_t co = 0; co < out_ch_; ++co) bias.grad(co) += dyrow[co];
        }
        for (int k = 0; k < kernel_; ++k) {
            const std::size_t shift = static_cast<std::size_t>(kernel_ - 1 - k) * dilation_;
            if (shift >= frames) continue;
            const std::size_t off = static_cast<std::size_t>(k) * out_ch_ * in_ch_;
            const T* wk = weight.value.ptr() + off;
            T* wgk = weight.grad.ptr() + off;
            for (std::size_t t = shift; t < frames; ++t) {
                const T* xrow = x_.ptr() + (t - shift) * in_ch_;
                const T* dyrow = dy.ptr() + t * out_ch_;
                T* dxrow = dx.ptr() + (t - shift) * in_ch_;
                for (std::size_t co = 0; co < out_ch_; ++co) {
                    const T g = dyrow[co];
                    const T* w = wk + co * in_ch_;
                    T* wg = wgk + co * in_ch_;
                    for (std::size_t ci = 0; ci < in_ch_; ++ci) {
                        wg[ci] += g * xrow[ci];
                        dxrow[ci] += g * w[ci];
                    }
                }
            }
        }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

private:
    std::size_t in_ch_ = 0, out_ch_ = 0;
    int kernel_ = 1, dilation_ = 1;
    Tensor<T> x_;
};

}  // namespace reswvl
