#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "porogen/core/errors.hpp"

namespace porogen {

/// 3-channel raster, RGB order, channel values in [0,1].
class ColorImage {
  public:
    ColorImage() = default;

    ColorImage(int height, int width)
        : height_(height), width_(width), px_(std::size_t(height) * width * 3, 0.0f) {
        if (height < 1 || width < 1)
            throw DomainError("ColorImage: dimensions must be >= 1");
    }

    int height() const { return height_; }
    int width() const { return width_; }

    float& at(int y, int x, int c) { return px_[idx(y, x, c)]; }
    float at(int y, int x, int c) const { return px_[idx(y, x, c)]; }

    const std::vector<float>& pixels() const { return px_; }
    std::vector<float>& pixels() { return px_; }

    bool channels_in_range() const {
        for (float v : px_)
            if (!(v >= 0.0f && v <= 1.0f)) return false;
        return true;
    }

  private:
    std::size_t idx(int y, int x, int c) const {
        return (std::size_t(y) * width_ + x) * 3 + c;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<float> px_;
};

/// Binary raster; 1 = pore, 0 = solid. Dimensions track its source image.
class PoreMask {
  public:
    PoreMask() = default;

    PoreMask(int height, int width)
        : height_(height), width_(width), bits_(std::size_t(height) * width, 0) {
        if (height < 1 || width < 1)
            throw DomainError("PoreMask: dimensions must be >= 1");
    }

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return bits_.size(); }

    std::uint8_t& at(int y, int x) { return bits_[std::size_t(y) * width_ + x]; }
    std::uint8_t at(int y, int x) const { return bits_[std::size_t(y) * width_ + x]; }

    const std::vector<std::uint8_t>& bits() const { return bits_; }
    std::vector<std::uint8_t>& bits() { return bits_; }

    PoreMask complement() const {
        PoreMask out(height_, width_);
        for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] ? 0 : 1;
        return out;
    }

    bool operator==(const PoreMask& o) const {
        return height_ == o.height_ && width_ == o.width_ && bits_ == o.bits_;
    }

  private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// 8-bit quantization used whenever an image crosses a file boundary.
inline std::uint8_t quantize8(float v) {
    float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return std::uint8_t(std::lround(c * 255.0f));
}

inline float dequantize8(std::uint8_t v) { return float(v) / 255.0f; }

/// Interleaved RGB8 buffer of an image, in raster order.
inline std::vector<std::uint8_t> to_rgb8(const ColorImage& img) {
    std::vector<std::uint8_t> out(img.pixels().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = quantize8(img.pixels()[i]);
    return out;
}

inline ColorImage from_rgb8(const std::uint8_t* rgb, int height, int width) {
    ColorImage img(height, width);
    const std::size_t n = std::size_t(height) * width * 3;
    for (std::size_t i = 0; i < n; ++i) img.pixels()[i] = dequantize8(rgb[i]);
    return img;
}

/// Snaps every channel onto the 8-bit grid, so in-memory values equal what a
/// PNG round trip would produce.
inline void snap_to_8bit(ColorImage& img) {
    for (float& v : img.pixels()) v = dequantize8(quantize8(v));
}

} // namespace porogen
