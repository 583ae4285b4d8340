#pragma once

#include <cmath>
#include <utility>

#include "reswvl/core/tensor.hpp"

namespace reswvl {

/// P-way classification head: inner products between one image feature and
/// the P text features. With `normalize` on (the CLIP convention, default)
/// both sides are L2-normalized first, so pre-scale logits are cosines in
/// [-1, 1]; `normalize` off gives the raw inner product. The learnable
/// temperature is stored as a log-scale and exponentiated before use.
template <typename T>
class LogitHead {
public:
    Param<T> log_scale;
    bool normalize = true;

    explicit LogitHead(bool normalize_features = true,
                       double initial_log_scale = std::log(1.0 / 0.07))
        : log_scale("head.log_scale", Tensor<T>({1})), normalize(normalize_features) {
        log_scale.value(0) = static_cast<T>(initial_log_scale);
    }

    /// logits[b][p] = exp(log_scale) * <img_b, txt_p>; B x P.
    Tensor<T> forward(const Tensor<T>& image_features, const Tensor<T>& text_features) {
        const std::size_t batch = image_features.dim(0), p_count = text_features.dim(0);
        const std::size_t d = image_features.dim(1);
        if (text_features.dim(1) != d)
            throw TrainError("logit head: feature dims differ (image " + std::to_string(d) +
                             ", text " + std::to_string(text_features.dim(1)) + ")");
        img_ = normalize ? l2_rows(image_features) : image_features;
        txt_ = normalize ? l2_rows(text_features) : text_features;
        raw_img_ = image_features;
        raw_txt_ = text_features;
        const T scale = std::exp(log_scale.value(0));
        logits_ = Tensor<T>({batch, p_count});
        as_matrix(logits_, batch, p_count).noalias() =
            scale * (as_matrix(img_, batch, d) * as_matrix(txt_, p_count, d).transpose());
        return logits_;
    }

    /// Gradients w.r.t. both feature sets; the log-scale gradient is
    /// accumulated in place.
    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dlogits) {
        const std::size_t batch = dlogits.dim(0), p_count = dlogits.dim(1);
        const std::size_t d = img_.dim(1);
        const T scale = std::exp(log_scale.value(0));

        // d logits / d log_scale = logits
        T ds = 0;
        for (std::size_t i = 0; i < dlogits.numel(); ++i) ds += dlogits.data[i] * logits_.data[i];
        log_scale.grad(0) += ds;

        Tensor<T> dimg_hat({batch, d});
        as_matrix(dimg_hat, batch, d).noalias() =
            scale * (as_matrix(dlogits, batch, p_count) * as_matrix(txt_, p_count, d));
        Tensor<T> dtxt_hat({p_count, d});
        as_matrix(dtxt_hat, p_count, d).noalias() =
            scale * (as_matrix(dlogits, batch, p_count).transpose() * as_matrix(img_, batch, d));

        if (!normalize) return {std::move(dimg_hat), std::move(dtxt_hat)};
        return {l2_rows_backward(raw_img_, img_, dimg_hat), l2_rows_backward(raw_txt_, txt_, dtxt_hat)};
    }

private:
    Tensor<T> img_, txt_, raw_img_, raw_txt_, logits_;

    static Tensor<T> l2_rows(const Tensor<T>& x) {
        Tensor<T> out(x.shape);
        const std::size_t rows = x.dim(0), d = x.dim(1);
        for (std::size_t r = 0; r < rows; ++r) {
            T norm = 0;
            for (std::size_t c = 0; c < d; ++c) norm += x(r, c) * x(r, c);
            norm = std::sqrt(norm);
            const T inv = norm > T(0) ? T(1) / norm : T(0);
            for (std::size_t c = 0; c < d; ++c) out(r, c) = x(r, c) * inv;
        }
        return out;
    }

    // v_hat = v / |v|  =>  dv = (dv_hat - v_hat (v_hat . dv_hat)) / |v|
    static Tensor<T> l2_rows_backward(const Tensor<T>& raw, const Tensor<T>& unit,
                                      const Tensor<T>& dunit) {
        Tensor<T> out(raw.shape);
        const std::size_t rows = raw.dim(0), d = raw.dim(1);
        for (std::size_t r = 0; r < rows; ++r) {
            T norm = 0;
            for (std::size_t c = 0; c < d; ++c) norm += raw(r, c) * raw(r, c);
            norm = std::sqrt(norm);
            if (norm <= T(0)) continue;
            T dot = 0;
            for (std::size_t c = 0; c < d; ++c) dot += unit(r, c) * dunit(r, c);
            for (std::size_t c = 0; c < d; ++c)
                out(r, c) = (dunit(r, c) - unit(r, c) * dot) / norm;
        }
        return out;
    }
};

/// Standalone logits (no cache, no gradients): the evaluation path and the
/// shape every test oracle checks against.
template <typename T>
Tensor<T> compute_logits(const Tensor<T>& image_features, const Tensor<T>& text_features,
                         bool normalize = true, T log_scale = T(0)) {
    LogitHead<T> head(normalize, static_cast<double>(log_scale));
    return head.forward(image_features, text_features);
}

}  // namespace reswvl
