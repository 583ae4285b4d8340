#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reswvl/core/errors.hpp"
#include "reswvl/io/image_ops.hpp"
#include "reswvl/io/png.hpp"

namespace reswvl {

/// One timeline row of a ribbon plot.
struct RibbonRow {
    std::string name;
    std::vector<int> labels;
};

namespace detail {

// 5x7 bitmap glyphs, rows top to bottom, bit 4 is the leftmost pixel.
inline const std::uint8_t* glyph5x7(char c) {
    static const std::uint8_t digits[10][7] = {
        {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
        {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
        {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
        {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
        {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}};
    static const std::uint8_t letters[26][7] = {
        {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}, {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},
        {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}, {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C},
        {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}, {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},
        {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}, {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},
        {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}, {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},
        {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}, {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},
        {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}, {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11},
        {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},
        {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}, {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},
        {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}, {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},
        {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},
        {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}, {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},
        {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}};
    static const std::uint8_t dash[7] = {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00};
    static const std::uint8_t blank[7] = {0, 0, 0, 0, 0, 0, 0};
    if (c >= '0' && c <= '9') return digits[c - '0'];
    const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u >= 'A' && u <= 'Z') return letters[u - 'A'];
    if (c == '-') return dash;
    return blank;
}

inline void draw_text(Image& img, int x, int y, const std::string& text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        const std::uint8_t* g = glyph5x7(text[i]);
        for (int row = 0; row < 7; ++row)
            for (int col = 0; col < 5; ++col)
                if (g[row] & (0x10 >> col)) {
                    const int px = x + static_cast<int>(i) * 6 + col, py = y + row;
                    if (px >= 0 && px < img.width && py >= 0 && py < img.height) {
                        auto* p = img.px(px, py);
                        p[0] = p[1] = p[2] = 20;
                    }
                }
    }
}

inline void fill_rect(Image& img, int x0, int y0, int w, int h, const std::uint8_t rgb[3]) {
    for (int y = std::max(0, y0); y < std::min(img.height, y0 + h); ++y)
        for (int x = std::max(0, x0); x < std::min(img.width, x0 + w); ++x)
            std::copy_n(rgb, 3, img.px(x, y));
}

}  // namespace detail

/// Horizontal color-band timelines (one row per sequence, shared time axis)
/// plus a phase legend. Purely a function of its inputs, so identical inputs
/// give identical bytes.
inline Image render_ribbon_image(const std::vector<RibbonRow>& rows, int phase_count) {
    if (rows.empty()) throw EvalError("ribbon: no rows");
    const std::size_t frames = rows.front().labels.size();
    if (frames == 0) throw EvalError("ribbon: empty label sequence");
    for (const auto& row : rows) {
        if (row.labels.size() != frames)
            throw EvalError("ribbon: row '" + row.name + "' length differs");
        for (const int l : row.labels)
            if (l < 1 || l > phase_count)
                throw EvalError("ribbon: phase " + std::to_string(l) + " outside 1.." +
                                std::to_string(phase_count) + " in row '" + row.name + "'");
    }

    const int cell_w = std::clamp(static_cast<int>(1200 / frames), 1, 6);
    const int band_h = 20, gap = 8, margin = 10;
    std::size_t label_chars = 0;
    for (const auto& row : rows) label_chars = std::max(label_chars, row.name.size());
    const int label_w = static_cast<int>(label_chars) * 6 + 10;
    const int plot_w = static_cast<int>(frames) * cell_w;
    const int legend_h = 24;
    const int width = margin + label_w + plot_w + margin;
    const int height = margin + static_cast<int>(rows.size()) * (band_h + gap) + legend_h + margin;

    Image img(width, height);
    std::fill(img.rgb.begin(), img.rgb.end(), std::uint8_t(255));

    std::uint8_t rgb[3];
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const int y0 = margin + static_cast<int>(r) * (band_h + gap);
        detail::draw_text(img, margin, y0 + (band_h - 7) / 2, rows[r].name);
        for (std::size_t t = 0; t < frames; ++t) {
            phase_color(rows[r].labels[t], phase_count, rgb);
            detail::fill_rect(img, margin + label_w + static_cast<int>(t) * cell_w, y0, cell_w,
                              band_h, rgb);
        }
    }

    // legend: one swatch per phase with its id
    int x = margin + label_w;
    const int ly = margin + static_cast<int>(rows.size()) * (band_h + gap) + 4;
    for (int p = 1; p <= phase_count; ++p) {
        phase_color(p, phase_count, rgb);
        detail::fill_rect(img, x, ly, 14, 14, rgb);
        detail::draw_text(img, x + 17, ly + 3, std::to_string(p));
        x += 17 + 6 * static_cast<int>(std::to_string(p).size()) + 10;
    }
    return img;
}

/// PNG plus a plain JSON series (time -> phase per row), so other plotting
/// backends can redraw the same data.
inline void write_ribbon(const std::filesystem::path& png_path,
                         const std::filesystem::path& json_path, const std::string& video_id,
                         const std::vector<RibbonRow>& rows, int phase_count) {
    write_png(png_path, render_ribbon_image(rows, phase_count));
    nlohmann::json j{{"video_id", video_id}, {"phase_count", phase_count}};
    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& row : rows) jrows.push_back({{"name", row.name}, {"labels", row.labels}});
    j["rows"] = jrows;
    std::ofstream out(json_path);
    if (!out) throw EvalError("ribbon: cannot write " + json_path.string());
    out << j.dump(2) << "\n";
}

}  // namespace reswvl
