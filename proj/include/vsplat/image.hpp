#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "atomic_file.hpp"
#include "errors.hpp"

namespace vsplat {

/// Row-major RGB image with real-valued channels. Images loaded from disk are in [0,1];
/// raw renders may exceed 1 because color activation has no upper clamp.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }

    double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    bool same_shape(const Image& o) const { return width == o.width && height == o.height; }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Checks the on-disk image invariant: finite channels in [0,1], consistent size.
inline bool is_valid_image(const Image& img) {
    if (img.width < 0 || img.height < 0 || img.data.size() != img.pixel_count() * 3) return false;
    return std::all_of(img.data.begin(), img.data.end(),
                       [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
}

inline Image clamped01(Image img) {
    for (double& v : img.data) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    return img;
}

/// Box-filter downsampling by an integer factor (trailing partial blocks dropped).
inline Image downsample(const Image& img, int factor) {
    if (factor <= 1) return img;
    Image out(img.width / factor, img.height / factor);
    const double norm = 1.0 / (factor * factor);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double s = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) s += img.at(x * factor + dx, y * factor + dy, c);
                out.at(x, y, c) = s * norm;
            }
    return out;
}

namespace detail {

inline std::uint8_t quantize8(double v) {
    if (!std::isfinite(v)) v = 0.0;
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

} // namespace detail

/// Decodes a binary PPM (P6, maxval 255) held in memory.
inline Image decode_ppm(const std::string& bytes, const std::string& name = "<memory>") {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            const char ch = bytes[pos];
            if (ch == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&](const char* field) {
        skip_space();
        long long v = 0;
        std::size_t digits = 0;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9' && digits < 10) {
            v = v * 10 + (bytes[pos] - '0');
            ++pos;
            ++digits;
        }
        if (digits == 0) throw ParseError(name, std::string("malformed PPM header field: ") + field);
        return v;
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw ParseError(name, "not a binary PPM (expected magic P6)");
    pos = 2;
    const long long w = read_int("width");
    const long long h = read_int("height");
    const long long maxval = read_int("maxval");
    if (w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16) throw ParseError(name, "invalid PPM dimensions");
    if (maxval != 255) throw ParseError(name, "unsupported PPM maxval " + std::to_string(maxval) + " (expected 255)");
    if (pos >= bytes.size()) throw ParseError(name, "truncated PPM header");
    ++pos; // single whitespace byte before the raster

    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
    if (bytes.size() - pos < need) {
        throw ParseError(name, "truncated PPM pixel data at byte offset " + std::to_string(bytes.size()) + " (expected " +
                                   std::to_string(pos + need) + " bytes)");
    }
    Image img(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < need; ++i)
        img.data[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
    return img;
}

inline std::string encode_ppm(const Image& img) {
    std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::string out = header;
    out.reserve(header.size() + img.data.size());
    for (double v : img.data) out.push_back(static_cast<char>(detail::quantize8(v)));
    return out;
}

inline Image read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), "cannot open image file");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_ppm(bytes, path.string());
}

/// Writes a P6 PPM; channels are clamped to [0,1] and rounded to 8 bits.
inline void write_image(const Image& img, const std::filesystem::path& path) {
    const std::string bytes = encode_ppm(img);
    write_file_atomically(path, [&](std::ostream& out) { out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); });
}

} // namespace vsplat
