#pragma once

#include <algorithm>
#include <cmath>

#include "reswvl/core/rng.hpp"
#include "reswvl/core/tensor.hpp"
#include "reswvl/io/png.hpp"

namespace reswvl {

inline void hsv_to_rgb(double h, double s, double v, std::uint8_t rgb[3]) {
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else { r = c; b = x; }
    const double m = v - c;
    rgb[0] = static_cast<std::uint8_t>(std::lround((r + m) * 255));
    rgb[1] = static_cast<std::uint8_t>(std::lround((g + m) * 255));
    rgb[2] = static_cast<std::uint8_t>(std::lround((b + m) * 255));
}

/// Distinct, stable color per phase; shared by the synthetic renderer and
/// the ribbon plots so phases look the same everywhere.
inline void phase_color(int phase, int phase_count, std::uint8_t rgb[3]) {
    const double hue = 360.0 * (phase - 1) / phase_count;
    hsv_to_rgb(hue, 0.78, 0.88, rgb);
}

inline std::uint8_t sample_bilinear(const Image& img, double x, double y, int ch) {
    const double cx = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    const double cy = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    const int x0 = static_cast<int>(cx);
    const int y0 = static_cast<int>(cy);
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fx = cx - x0, fy = cy - y0;
    const double v = (1 - fx) * (1 - fy) * img.px(x0, y0)[ch] + fx * (1 - fy) * img.px(x1, y0)[ch] +
                     (1 - fx) * fy * img.px(x0, y1)[ch] + fx * fy * img.px(x1, y1)[ch];
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

inline Image resize_bilinear(const Image& img, int out_w, int out_h) {
    Image out(out_w, out_h);
    const double sx = static_cast<double>(img.width) / out_w;
    const double sy = static_cast<double>(img.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const double srcx = (x + 0.5) * sx - 0.5;
            const double srcy = (y + 0.5) * sy - 0.5;
            for (int c = 0; c < 3; ++c) out.px(x, y)[c] = sample_bilinear(img, srcx, srcy, c);
        }
    }
    return out;
}

inline Image crop(const Image& img, int x0, int y0, int w, int h) {
    Image out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            std::copy_n(img.px(x0 + x, y0 + y), 3, out.px(x, y));
    return out;
}

/// Training-time augmentation parameters. Magnitudes are conservative and
/// config-exposed; flip/translate/scale/rotate compose into one warp so each
/// frame is resampled once.
struct AugmentParams {
    int resize = 256;
    int crop = 224;
    double flip_prob = 0.5;
    double max_translate_frac = 0.10;
    double scale_lo = 0.90;
    double scale_hi = 1.10;
    double max_rotate_deg = 10.0;
};

/// resize -> (flip, translate, scale, rotate) -> random crop.
inline Image augment(const Image& src, const AugmentParams& p, Rng& rng) {
    Image base = (src.width == p.resize && src.height == p.resize)
                     ? src
                     : resize_bilinear(src, p.resize, p.resize);

    const bool flip = rng.bernoulli(p.flip_prob);
    const double angle = rng.uniform(-p.max_rotate_deg, p.max_rotate_deg) * 3.14159265358979323846 / 180.0;
    const double scale = rng.uniform(p.scale_lo, p.scale_hi);
    const double tx = rng.uniform(-p.max_translate_frac, p.max_translate_frac) * p.resize;
    const double ty = rng.uniform(-p.max_translate_frac, p.max_translate_frac) * p.resize;

    // inverse mapping: out pixel -> source location
    const double c = (p.resize - 1) / 2.0;
    const double cosA = std::cos(angle), sinA = std::sin(angle);
    Image warped(p.resize, p.resize);
    for (int y = 0; y < p.resize; ++y) {
        for (int x = 0; x < p.resize; ++x) {
            double dx = x - c - tx;
            double dy = y - c - ty;
            double sx = (cosA * dx + sinA * dy) / scale;
            double sy = (-sinA * dx + cosA * dy) / scale;
            if (flip) sx = -sx;
            for (int ch = 0; ch < 3; ++ch)
                warped.px(x, y)[ch] = sample_bilinear(base, sx + c, sy + c, ch);
        }
    }

    const int max_off = p.resize - p.crop;
    const int ox = max_off > 0 ? static_cast<int>(rng.uniform_int(0, max_off)) : 0;
    const int oy = max_off > 0 ? static_cast<int>(rng.uniform_int(0, max_off)) : 0;
    return crop(warped, ox, oy, p.crop, p.crop);
}

/// Writes one image into row `b` of a batch tensor (B x 3 x H x W), [0,1] scaled.
template <typename T>
void image_to_batch(const Image& img, Tensor<T>& batch, std::size_t b) {
    const std::size_t hw = static_cast<std::size_t>(img.width) * img.height;
    T* dst = batch.ptr() + b * 3 * hw;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* s = img.px(x, y);
            const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
            dst[0 * hw + i] = static_cast<T>(s[0]) / T(255);
            dst[1 * hw + i] = static_cast<T>(s[1]) / T(255);
            dst[2 * hw + i] = static_cast<T>(s[2]) / T(255);
        }
    }
}

}  // namespace reswvl
