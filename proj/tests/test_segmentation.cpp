#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "porogen/core/rng.hpp"
#include "porogen/corpus.hpp"
#include "porogen/segmentation.hpp"

using namespace porogen;

namespace {

// Independent transcription of the hexcone formula, kept deliberately naive.
// The production implementation must agree with this to 1e-6 per channel.
struct RefHsv {
    double h, s, v;
};

RefHsv reference_hexcone(double r, double g, double b) {
    double mx = r;
    if (g > mx) mx = g;
    if (b > mx) mx = b;
    double mn = r;
    if (g < mn) mn = g;
    if (b < mn) mn = b;
    const double d = mx - mn;

    double h = 0.0;
    if (d > 0.0) {
        if (mx == r)
            h = 60.0 * ((g - b) / d);
        else if (mx == g)
            h = 60.0 * ((b - r) / d) + 120.0;
        else
            h = 60.0 * ((r - g) / d) + 240.0;
        while (h < 0.0) h += 360.0;
        while (h >= 360.0) h -= 360.0;
    }
    const double s = mx > 0.0 ? d / mx : 0.0;
    return {h / 360.0, s, mx};
}

ColorImage uniform_image(int size, double r, double g, double b) {
    ColorImage img(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            img.at(y, x, 0) = float(r);
            img.at(y, x, 1) = float(g);
            img.at(y, x, 2) = float(b);
        }
    return img;
}

} // namespace

TEST_CASE("rgb_to_hsv pins the hexcone corners") {
    auto red = rgb_to_hsv(1, 0, 0);
    CHECK(red.h == doctest::Approx(0.0));
    CHECK(red.s == doctest::Approx(1.0));
    CHECK(red.v == doctest::Approx(1.0));

    auto blue = rgb_to_hsv(0, 0, 1);
    CHECK(blue.h == doctest::Approx(2.0 / 3.0));
    CHECK(blue.s == doctest::Approx(1.0));
    CHECK(blue.v == doctest::Approx(1.0));

    auto gray = rgb_to_hsv(0.5, 0.5, 0.5);
    CHECK(gray.h == 0.0);
    CHECK(gray.s == 0.0);
    CHECK(gray.v == doctest::Approx(0.5));
}

TEST_CASE("rgb_to_hsv rejects channels outside [0,1]") {
    CHECK_THROWS_AS(rgb_to_hsv(1.1, 0, 0), DomainError);
    CHECK_THROWS_AS(rgb_to_hsv(0, -0.01, 0), DomainError);
}

TEST_CASE("rgb_to_hsv matches the brute-force hexcone reference on 1000 random triples") {
    Rng rng(42);
    for (int i = 0; i < 1000; ++i) {
        const double r = rng.uniform(), g = rng.uniform(), b = rng.uniform();
        const Hsv got = rgb_to_hsv(r, g, b);
        const RefHsv want = reference_hexcone(r, g, b);
        CHECK(std::fabs(got.h - want.h) <= 1e-6);
        CHECK(std::fabs(got.s - want.s) <= 1e-6);
        CHECK(std::fabs(got.v - want.v) <= 1e-6);
    }
}

TEST_CASE("hsv_to_rgb inverts rgb_to_hsv on chromatic colors") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        const double h = rng.uniform(), s = rng.uniform(0.2, 1.0), v = rng.uniform(0.2, 1.0);
        double r, g, b;
        hsv_to_rgb(h, s, v, r, g, b);
        const Hsv back = rgb_to_hsv(r, g, b);
        CHECK(std::fabs(back.s - s) <= 1e-9);
        CHECK(std::fabs(back.v - v) <= 1e-9);
        const double dh = std::fabs(back.h - h);
        CHECK(std::min(dh, 1.0 - dh) <= 1e-9);
    }
}

TEST_CASE("segment_pores marks uniform epoxy blue and rejects gray") {
    const HSVThresholds th;
    double r, g, b;
    hsv_to_rgb(0.6, 0.9, 0.9, r, g, b);

    const PoreMask blue = segment_pores(uniform_image(8, r, g, b), th);
    CHECK(porosity_of(blue) == 1.0);

    const PoreMask gray = segment_pores(uniform_image(8, 0.5, 0.5, 0.5), th);
    CHECK(porosity_of(gray) == 0.0);
}

TEST_CASE("segment_pores supports a wrapping hue band") {
    HSVThresholds th;
    th.hue_lo = 0.9;
    th.hue_hi = 0.1; // wraps through red
    double r, g, b;
    hsv_to_rgb(0.95, 0.8, 0.8, r, g, b);
    CHECK(porosity_of(segment_pores(uniform_image(4, r, g, b), th)) == 1.0);
    hsv_to_rgb(0.05, 0.8, 0.8, r, g, b);
    CHECK(porosity_of(segment_pores(uniform_image(4, r, g, b), th)) == 1.0);
    hsv_to_rgb(0.5, 0.8, 0.8, r, g, b);
    CHECK(porosity_of(segment_pores(uniform_image(4, r, g, b), th)) == 0.0);
}

TEST_CASE("segment_pores reproduces the synthetic painter's ground truth exactly") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto [img, mask] = synth_tile(seed, 0.35, 48, 2.0);
        CHECK(segment_pores(img, HSVThresholds{}) == mask);
    }
}

TEST_CASE("porosity_of counts pore pixels") {
    PoreMask zeros(256, 256);
    CHECK(porosity_of(zeros) == 0.0);

    PoreMask checker(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) checker.at(y, x) = std::uint8_t((x + y) % 2);
    CHECK(porosity_of(checker) == 0.5);

    // random mask vs an independent popcount
    Rng rng(11);
    PoreMask random(37, 53);
    std::size_t expected = 0;
    for (auto& bit : random.bits()) {
        bit = rng.uniform() < 0.3 ? 1 : 0;
        expected += bit;
    }
    CHECK(porosity_of(random) == double(expected) / double(random.size()));
}

TEST_CASE("porosity_of rejects an empty mask") {
    CHECK_THROWS_AS(porosity_of(PoreMask{}), DomainError);
}

TEST_CASE("complement law: porosity(mask) + porosity(~mask) == 1 exactly") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        PoreMask m(19, 23);
        for (auto& bit : m.bits()) bit = rng.uniform() < rng.uniform() ? 1 : 0;
        CHECK(porosity_of(m) + porosity_of(m.complement()) == 1.0);
    }
}

TEST_CASE("porosity is invariant under pixel permutation") {
    Rng rng(6);
    PoreMask m(16, 16);
    for (auto& bit : m.bits()) bit = rng.uniform() < 0.4 ? 1 : 0;
    const double before = porosity_of(m);

    auto bits = m.bits();
    shuffle_in_place(bits, rng);
    PoreMask shuffled(16, 16);
    shuffled.bits() = bits;
    CHECK(porosity_of(shuffled) == before);
}

TEST_CASE("segmentation is idempotent under canonical re-painting") {
    const HSVThresholds th;
    const auto [img, truth] = synth_tile(99, 0.42, 32, 1.5);
    const PoreMask first = segment_pores(img, th);

    // repaint with canonical pore/solid colors and segment again
    double pr, pg, pb, sr, sg, sb;
    hsv_to_rgb(0.60, 0.85, 0.80, pr, pg, pb);
    hsv_to_rgb(0.10, 0.15, 0.65, sr, sg, sb);
    ColorImage repainted(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            repainted.at(y, x, 0) = float(first.at(y, x) ? pr : sr);
            repainted.at(y, x, 1) = float(first.at(y, x) ? pg : sg);
            repainted.at(y, x, 2) = float(first.at(y, x) ? pb : sb);
        }
    snap_to_8bit(repainted);
    CHECK(segment_pores(repainted, th) == first);
}
