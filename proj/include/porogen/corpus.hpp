#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "porogen/binning.hpp"
#include "porogen/core/image.hpp"
#include "porogen/core/rng.hpp"
#include "porogen/segmentation.hpp"

// Corpus construction: tiling of source imagery, porosity labeling, binning,
// class balancing by dihedral augmentation, and a procedural synthetic corpus
// with exact ground-truth masks.

namespace porogen {

struct TileRecord {
    std::string path;    // relative to the corpus directory; empty until written
    double porosity = 0.0;
    int class_index = 0;
    std::string augment; // "" for originals, "d4r{r}f{f}" for augmented copies
    std::string source;  // provenance: file + grid position, or synth parameters
    std::string split = "train";
};

/// One tile held in memory: interleaved RGB8 pixels plus its record.
struct TileData {
    std::vector<std::uint8_t> rgb;
    TileRecord rec;
};

/// In-memory corpus; written to disk as tiles/<class>/<id>.png + manifest.json.
struct CorpusBuild {
    PorosityBinning binning;
    int tile_size = 0;
    std::vector<TileData> tiles;

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(std::size_t(binning.num_classes()), 0);
        for (const auto& t : tiles) counts[std::size_t(t.rec.class_index)]++;
        return counts;
    }
};

/// Serialized corpus description. Canonical JSON form is byte-stable for a
/// given corpus, so manifests from identically seeded builds compare equal.
struct CorpusManifest {
    PorosityBinning binning;
    int tile_size = 0;
    std::vector<TileRecord> records;

    std::vector<std::size_t> class_counts() const;
    std::string to_json() const;                    // canonical serialization
    static CorpusManifest from_json(const std::string& text);

    void save(const std::string& dir) const;        // writes <dir>/manifest.json
    static CorpusManifest load(const std::string& dir);

    /// FNV-1a digest of the canonical JSON; recorded in checkpoints.
    std::string digest() const;
};

// --- tiling ---------------------------------------------------------------

struct TileCut {
    ColorImage image;
    int x0 = 0;
    int y0 = 0;
};

/// Regular grid, top-left anchored, partial border tiles discarded. Output is
/// row-major in (y0, x0) and deterministic.
std::vector<TileCut> extract_tiles(const ColorImage& img, int tile_size, int stride);

// --- dihedral augmentation -------------------------------------------------

/// The 8 square symmetries: op = r + 4*f with r quarter-turns then an optional
/// horizontal mirror. op 0 is the identity.
constexpr int kDihedralOps = 8;

std::vector<std::uint8_t> dihedral_apply_rgb8(const std::vector<std::uint8_t>& rgb, int size,
                                              int op);
PoreMask dihedral_apply(const PoreMask& mask, int op);
ColorImage dihedral_apply(const ColorImage& img, int op);

std::string dihedral_tag(int op);

// --- synthetic tiles ---------------------------------------------------------

/// Seeded blob texture with an exact pore-pixel count. White noise is blurred
/// with a Gaussian of the given radius and thresholded at the empirical
/// quantile so that exactly round(target_phi * size^2) pixels are pore. Pore
/// pixels are painted epoxy blue, solids a tan/gray palette; all channels are
/// snapped to the 8-bit grid so a PNG round trip is lossless. Deterministic in
/// (seed, target_phi, tile_size, blur_radius).
std::pair<ColorImage, PoreMask> synth_tile(std::uint64_t seed, double target_phi, int tile_size,
                                           double blur_radius = 2.0);

// --- corpus assembly ---------------------------------------------------------

struct BalanceOptions {
    std::size_t target_per_class = 0; // 0 = grow everything to the max class count
    bool allow_downsample = false;
    std::uint64_t seed = 0;
};

/// Grows (or with allow_downsample shrinks) every class to exactly the target
/// count. Added tiles are seeded dihedral transforms of in-class originals;
/// porosity labels are copied unchanged. Throws DataError on an empty class.
void balance_classes(CorpusBuild& corpus, const BalanceOptions& opts);

struct SynthCorpusSpec {
    int classes = 10;
    std::size_t per_class = 500;
    int tile_size = 64;
    double blur_radius = 2.0;
    std::uint64_t seed = 0;
    PorosityBinning binning = PorosityBinning::default_bins();
};

/// Synthetic corpus: per_class tiles per class at the bin-midpoint porosity,
/// per-tile seeds derived as hash(seed, class, ordinal).
CorpusBuild synth_corpus(const SynthCorpusSpec& spec);

struct IngestOptions {
    int tile_size = 256;
    int stride = 0;        // 0 = tile_size (non-overlapping)
    HSVThresholds thresholds;
    PorosityBinning binning = PorosityBinning::default_bins();
    std::size_t balance_to = 0; // 0 = no balancing
    double holdout_fraction = 0.0;
    std::uint64_t seed = 0;
};

/// Tiles source images, segments and labels each tile, bins, optionally
/// balances and assigns a seeded holdout split.
CorpusBuild ingest_corpus(const std::vector<std::string>& image_paths, const IngestOptions& opts);

/// Writes tile PNGs and the manifest under dir; returns the manifest.
CorpusManifest write_corpus(const CorpusBuild& corpus, const std::string& dir);

/// Reads every tile PNG referenced by the manifest back into memory.
CorpusBuild load_corpus(const std::string& dir);

} // namespace porogen
