#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "porogen/core/image.hpp"

namespace porogen {

/// Decodes an 8-bit RGB or RGBA PNG (alpha ignored; palette expanded).
ColorImage read_png(const std::string& path);

/// Writes interleaved RGB8 rows. Output carries no timestamps, so identical
/// pixels give identical files.
void write_png_rgb8(const std::string& path, const std::uint8_t* rgb, int height, int width);

inline void write_png(const std::string& path, const ColorImage& img) {
    const auto buf = to_rgb8(img);
    write_png_rgb8(path, buf.data(), img.height(), img.width());
}

} // namespace porogen
