#include "porogen/render.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "porogen/core/png_io.hpp"

namespace porogen {

namespace {

// 5x7 glyphs, one byte per row, bit 4 = leftmost column.
struct Glyph {
    std::uint8_t rows[7];
};

const std::unordered_map<char, Glyph>& font() {
    static const std::unordered_map<char, Glyph> f = {
        {'0', {{0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}},
        {'1', {{0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}}},
        {'2', {{0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}},
        {'3', {{0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}}},
        {'4', {{0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}},
        {'5', {{0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}}},
        {'6', {{0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}},
        {'7', {{0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}}},
        {'8', {{0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}},
        {'9', {{0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}}},
        {'A', {{0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}},
        {'B', {{0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}}},
        {'C', {{0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}},
        {'D', {{0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}}},
        {'E', {{0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}},
        {'F', {{0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}}},
        {'G', {{0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}},
        {'H', {{0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}},
        {'I', {{0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}},
        {'J', {{0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}}},
        {'K', {{0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}},
        {'L', {{0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}}},
        {'M', {{0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}},
        {'N', {{0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}}},
        {'O', {{0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}},
        {'P', {{0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}}},
        {'Q', {{0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}},
        {'R', {{0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}}},
        {'S', {{0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}},
        {'T', {{0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}}},
        {'U', {{0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}},
        {'V', {{0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}}},
        {'W', {{0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}},
        {'X', {{0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}}},
        {'Y', {{0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}},
        {'Z', {{0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}}},
        {'.', {{0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}},
        {',', {{0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}}},
        {'-', {{0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}}},
        {'+', {{0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}}},
        {'(', {{0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}}},
        {')', {{0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}}},
        {'%', {{0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}}},
        {'_', {{0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}}},
        {':', {{0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}}},
        {'=', {{0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}}},
        {'/', {{0x01, 0x02, 0x02, 0x04, 0x08, 0x08, 0x10}}},
        {' ', {{0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}}},
    };
    return f;
}

} // namespace

Canvas::Canvas(int height, int width, Rgb8 bg) : h_(height), w_(width) {
    px_.resize(std::size_t(height) * width * 3);
    for (std::size_t i = 0; i < px_.size(); i += 3) {
        px_[i] = bg.r;
        px_[i + 1] = bg.g;
        px_[i + 2] = bg.b;
    }
}

void Canvas::set(int x, int y, Rgb8 c) {
    if (x < 0 || x >= w_ || y < 0 || y >= h_) return;
    const std::size_t i = (std::size_t(y) * w_ + x) * 3;
    px_[i] = c.r;
    px_[i + 1] = c.g;
    px_[i + 2] = c.b;
}

void Canvas::fill_rect(int x, int y, int w, int h, Rgb8 c) {
    for (int yy = y; yy < y + h; ++yy)
        for (int xx = x; xx < x + w; ++xx) set(xx, yy, c);
}

void Canvas::rect(int x, int y, int w, int h, Rgb8 c) {
    line(x, y, x + w - 1, y, c);
    line(x, y + h - 1, x + w - 1, y + h - 1, c);
    line(x, y, x, y + h - 1, c);
    line(x + w - 1, y, x + w - 1, y + h - 1, c);
}

void Canvas::line(int x0, int y0, int x1, int y1, Rgb8 c) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        set(x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void Canvas::disc(int cx, int cy, int radius, Rgb8 c) {
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= radius * radius) set(cx + dx, cy + dy, c);
}

void Canvas::blit_scaled(const std::vector<std::uint8_t>& rgb, int src_size, int x, int y,
                         int dst_size) {
    for (int dy = 0; dy < dst_size; ++dy)
        for (int dx = 0; dx < dst_size; ++dx) {
            const int sy = dy * src_size / dst_size;
            const int sx = dx * src_size / dst_size;
            const std::size_t s = (std::size_t(sy) * src_size + sx) * 3;
            set(x + dx, y + dy, {rgb[s], rgb[s + 1], rgb[s + 2]});
        }
}

void Canvas::text(int x, int y, const std::string& s, int scale, Rgb8 c) {
    int cx = x;
    for (char raw : s) {
        const char ch = char(std::toupper(static_cast<unsigned char>(raw)));
        const auto it = font().find(ch);
        if (it != font().end()) {
            for (int row = 0; row < 7; ++row)
                for (int col = 0; col < 5; ++col)
                    if (it->second.rows[row] & (1 << (4 - col)))
                        fill_rect(cx + col * scale, y + row * scale, scale, scale, c);
        }
        cx += 6 * scale;
    }
}

int Canvas::text_width(const std::string& s, int scale) {
    return int(s.size()) * 6 * scale - (s.empty() ? 0 : scale);
}

void Canvas::save(const std::string& path) const {
    write_png_rgb8(path, px_.data(), h_, w_);
}

std::string format_number(double v, int decimals) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

} // namespace porogen
