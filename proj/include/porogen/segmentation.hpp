#pragma once

#include "porogen/core/errors.hpp"
#include "porogen/core/image.hpp"

// Threshold segmentation of epoxy-stained thin-section imagery in HSV space.
// Pore pixels are chromatically separable (dyed epoxy), so a hue band plus
// saturation/value floors is sufficient; no morphological cleanup is applied.

namespace porogen {

struct Hsv {
    double h; // hue fraction in [0,1); 0 for achromatic pixels
    double s; // saturation in [0,1]
    double v; // value in [0,1]
};

/// Hue band may wrap: hue_lo > hue_hi means the band passes through 1.0 -> 0.0.
struct HSVThresholds {
    double hue_lo = 0.50;
    double hue_hi = 0.75;
    double sat_min = 0.25;
    double val_min = 0.20;

    void validate() const {
        if (!(hue_lo >= 0.0 && hue_lo < 1.0) || !(hue_hi >= 0.0 && hue_hi < 1.0))
            throw ConfigError("HSVThresholds: hue bounds must lie in [0,1)");
        if (!(sat_min >= 0.0 && sat_min <= 1.0))
            throw ConfigError("HSVThresholds: sat_min must lie in [0,1]");
        if (!(val_min >= 0.0 && val_min <= 1.0))
            throw ConfigError("HSVThresholds: val_min must lie in [0,1]");
    }

    bool hue_in_band(double h) const {
        if (hue_lo <= hue_hi) return h >= hue_lo && h <= hue_hi;
        return h >= hue_lo || h <= hue_hi; // wrapped band
    }
};

/// Hexcone RGB -> HSV. Achromatic pixels get hue 0.
Hsv rgb_to_hsv(double r, double g, double b);

/// Inverse of rgb_to_hsv; used by the synthetic corpus painter.
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

/// Marks a pixel as pore iff hue is inside the band AND sat >= sat_min AND
/// val >= val_min. Pure per-pixel function.
PoreMask segment_pores(const ColorImage& img, const HSVThresholds& th);

/// Pore-pixel fraction of the mask.
double porosity_of(const PoreMask& mask);

} // namespace porogen
