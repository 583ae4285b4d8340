#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "reswvl/core/errors.hpp"

namespace reswvl {

/// 8-bit RGB image, row-major, no padding.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // width * height * 3

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* px(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* px(int x, int y) const {
        return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
};

namespace detail {

inline void put_u32be(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>(x >> 24));
    v.push_back(static_cast<std::uint8_t>(x >> 16));
    v.push_back(static_cast<std::uint8_t>(x >> 8));
    v.push_back(static_cast<std::uint8_t>(x));
}

inline std::uint32_t get_u32be(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline void write_chunk(std::vector<std::uint8_t>& out, const char type[5],
                        const std::vector<std::uint8_t>& data) {
    put_u32be(out, static_cast<std::uint32_t>(data.size()));
    std::vector<std::uint8_t> td;
    td.insert(td.end(), type, type + 4);
    td.insert(td.end(), data.begin(), data.end());
    out.insert(out.end(), td.begin(), td.end());
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, td.data(), static_cast<uInt>(td.size())));
    put_u32be(out, crc);
}

inline int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace detail

/// Encodes an RGB image as an 8-bit truecolor PNG (filter 0, fixed zlib
/// level), so identical pixels always produce identical bytes.
inline std::vector<std::uint8_t> encode_png(const Image& img) {
    if (img.width <= 0 || img.height <= 0)
        throw DataError("png: refusing to encode empty image");
    std::vector<std::uint8_t> out;
    static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.insert(out.end(), sig, sig + 8);

    std::vector<std::uint8_t> ihdr;
    detail::put_u32be(ihdr, static_cast<std::uint32_t>(img.width));
    detail::put_u32be(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    detail::write_chunk(out, "IHDR", ihdr);

    const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
    std::vector<std::uint8_t> raw((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw[y * (stride + 1)] = 0;  // filter: none
        std::memcpy(&raw[y * (stride + 1) + 1], img.rgb.data() + y * stride, stride);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(bound);
    if (compress2(comp.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw DataError("png: zlib compression failed");
    comp.resize(bound);
    detail::write_chunk(out, "IDAT", comp);
    detail::write_chunk(out, "IEND", {});
    return out;
}

inline void write_png(const std::filesystem::path& path, const Image& img) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("png: cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("png: write failed: " + path.string());
}

/// Decodes 8-bit non-interlaced PNGs in grayscale, gray+alpha, RGB or RGBA
/// (what frame-extraction tools emit). Alpha is dropped.
inline Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        throw DataError("png: not a PNG file: " + origin);

    int width = 0, height = 0, bitdepth = 0, colortype = 0, interlace = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    bool seen_end = false;
    while (pos + 8 <= bytes.size() && !seen_end) {
        const std::uint32_t len = detail::get_u32be(&bytes[pos]);
        if (pos + 12 + len > bytes.size())
            throw DataError("png: truncated chunk in " + origin);
        const std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
        const std::uint8_t* data = &bytes[pos + 8];
        if (type == "IHDR") {
            if (len != 13) throw DataError("png: bad IHDR in " + origin);
            width = static_cast<int>(detail::get_u32be(data));
            height = static_cast<int>(detail::get_u32be(data + 4));
            bitdepth = data[8];
            colortype = data[9];
            interlace = data[12];
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            seen_end = true;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0 || idat.empty())
        throw DataError("png: missing IHDR/IDAT in " + origin);
    if (bitdepth != 8 || interlace != 0)
        throw DataError("png: only 8-bit non-interlaced PNGs are supported: " + origin);
    int channels = 0;
    switch (colortype) {
        case 0: channels = 1; break;
        case 2: channels = 3; break;
        case 4: channels = 2; break;
        case 6: channels = 4; break;
        default:
            throw DataError("png: unsupported color type " + std::to_string(colortype) +
                            " (palette images are not supported): " + origin);
    }

    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    std::vector<std::uint8_t> raw((stride + 1) * height);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    const int zr = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
    if (zr != Z_OK || raw_len != raw.size())
        throw DataError("png: corrupt image data in " + origin);

    // undo scanline filters in place
    std::vector<std::uint8_t> pix(stride * height);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t filter = raw[y * (stride + 1)];
        const std::uint8_t* src = &raw[y * (stride + 1) + 1];
        std::uint8_t* dst = &pix[y * stride];
        const std::uint8_t* up = y > 0 ? &pix[(y - 1) * stride] : nullptr;
        for (std::size_t x = 0; x < stride; ++x) {
            const int a = x >= static_cast<std::size_t>(channels) ? dst[x - channels] : 0;
            const int b = up ? up[x] : 0;
            const int c = (up && x >= static_cast<std::size_t>(channels)) ? up[x - channels] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += detail::paeth(a, b, c); break;
                default: throw DataError("png: unknown filter type in " + origin);
            }
            dst[x] = static_cast<std::uint8_t>(v & 0xff);
        }
    }

    Image img(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::uint8_t* s = &pix[y * stride + static_cast<std::size_t>(x) * channels];
            std::uint8_t* d = img.px(x, y);
            if (channels == 1 || channels == 2) {
                d[0] = d[1] = d[2] = s[0];
            } else {
                d[0] = s[0];
                d[1] = s[1];
                d[2] = s[2];
            }
        }
    }
    return img;
}

inline Image read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("png: cannot open: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_png(bytes, path.string());
}

}  // namespace reswvl
