#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "error.hpp"
#include "image.hpp"
#include "vec.hpp"

namespace spikenerf {

/// Decodes an 8-bit PNG to [0, 1] RGB, compositing any alpha channel over
/// background.
inline Image read_png(const std::filesystem::path& path, Vec3<float> background = {1, 1, 1}) {
    if (!std::filesystem::exists(path)) {
        detail::fail(ErrorCode::io, "image file not found: " + path.string());
    }
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
        detail::fail(ErrorCode::io, "cannot decode PNG " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGBA;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&img);
        detail::fail(ErrorCode::io, "cannot decode PNG " + path.string() + ": " + img.message);
    }
    Image out(static_cast<int>(img.width), static_cast<int>(img.height));
    for (std::size_t i = 0; i < out.pixels(); ++i) {
        const float a = buf[4 * i + 3] / 255.f;
        for (int c = 0; c < 3; ++c) {
            const float v = buf[4 * i + c] / 255.f;
            out.rgb[3 * i + c] = v * a + background[c] * (1.f - a);
        }
    }
    return out;
}

inline std::uint8_t to_byte(float v) {
    const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    return static_cast<std::uint8_t>(std::lround(c * 255.f));
}

inline void write_png(const std::filesystem::path& path, const Image& image) {
    std::vector<std::uint8_t> buf(image.pixels() * 3);
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(image.rgb[i]);
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
        detail::fail(ErrorCode::io, "cannot write PNG " + path.string() + ": " + img.message);
    }
}

} // namespace spikenerf
