#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace porogen {

struct Rgb8 {
    std::uint8_t r = 0, g = 0, b = 0;
};

namespace palette {
inline constexpr Rgb8 white{255, 255, 255};
inline constexpr Rgb8 black{20, 20, 20};
inline constexpr Rgb8 gray{150, 150, 150};
inline constexpr Rgb8 light_gray{225, 225, 225};
inline constexpr Rgb8 green{30, 150, 60};
inline constexpr Rgb8 red{200, 40, 40};
inline constexpr Rgb8 blue{40, 80, 200};
} // namespace palette

/// Minimal software canvas for report figures: filled shapes, Bresenham
/// lines, nearest-neighbour blits and a built-in 5x7 uppercase font.
class Canvas {
  public:
    Canvas(int height, int width, Rgb8 bg);

    int height() const { return h_; }
    int width() const { return w_; }

    void set(int x, int y, Rgb8 c);
    void fill_rect(int x, int y, int w, int h, Rgb8 c);
    void rect(int x, int y, int w, int h, Rgb8 c);
    void line(int x0, int y0, int x1, int y1, Rgb8 c);
    void disc(int cx, int cy, int radius, Rgb8 c);

    /// Interleaved RGB8 square tile scaled to dst_size (nearest neighbour).
    void blit_scaled(const std::vector<std::uint8_t>& rgb, int src_size, int x, int y,
                     int dst_size);

    /// Uppercase 5x7 text; lowercase input is uppercased, unknown glyphs skip.
    void text(int x, int y, const std::string& s, int scale, Rgb8 c);
    static int text_width(const std::string& s, int scale);
    static int text_height(int scale) { return 7 * scale; }

    void save(const std::string& path) const;

  private:
    int h_, w_;
    std::vector<std::uint8_t> px_;
};

/// Axis tick labeling helper: fixed decimals, no trailing spaces.
std::string format_number(double v, int decimals);

} // namespace porogen
