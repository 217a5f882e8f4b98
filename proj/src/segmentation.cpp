#include "porogen/segmentation.hpp"

#include <algorithm>
#include <cmath>

namespace porogen {

Hsv rgb_to_hsv(double r, double g, double b) {
    if (!(r >= 0.0 && r <= 1.0 && g >= 0.0 && g <= 1.0 && b >= 0.0 && b <= 1.0))
        throw DomainError("rgb_to_hsv: channel outside [0,1]");

    const double v = std::max({r, g, b});
    const double lo = std::min({r, g, b});
    const double delta = v - lo;

    Hsv out{0.0, 0.0, v};
    if (delta <= 0.0 || v <= 0.0) return out; // achromatic: hue defined as 0

    out.s = delta / v;

    double h;
    if (v == r)
        h = std::fmod((g - b) / delta, 6.0);
    else if (v == g)
        h = (b - r) / delta + 2.0;
    else
        h = (r - g) / delta + 4.0;
    h /= 6.0;
    if (h < 0.0) h += 1.0;
    if (h >= 1.0) h -= 1.0;
    out.h = h;
    return out;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    h = h - std::floor(h);
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r1 = 0, g1 = 0, b1 = 0;
    switch (int(hp)) {
        case 0: r1 = c; g1 = x; break;
        case 1: r1 = x; g1 = c; break;
        case 2: g1 = c; b1 = x; break;
        case 3: g1 = x; b1 = c; break;
        case 4: r1 = x; b1 = c; break;
        default: r1 = c; b1 = x; break;
    }
    const double m = v - c;
    r = r1 + m;
    g = g1 + m;
    b = b1 + m;
}

PoreMask segment_pores(const ColorImage& img, const HSVThresholds& th) {
    th.validate();
    PoreMask mask(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const Hsv hsv = rgb_to_hsv(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
            const bool pore = th.hue_in_band(hsv.h) && hsv.s >= th.sat_min && hsv.v >= th.val_min;
            mask.at(y, x) = pore ? 1 : 0;
        }
    return mask;
}

double porosity_of(const PoreMask& mask) {
    if (mask.size() == 0) throw DomainError("porosity_of: empty mask");
    std::size_t count = 0;
    for (std::uint8_t b : mask.bits()) count += b;
    return double(count) / double(mask.size());
}

} // namespace porogen
