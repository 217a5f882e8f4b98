#pragma once

#include <string>
#include <vector>

#include "porogen/cgan.hpp"
#include "porogen/segmentation.hpp"

// Depth-guided synthesis: a (depth, porosity) log drives the trained
// generator, producing one or more images per log record plus a composite
// track figure.

namespace porogen {

struct LogRecord {
    double depth_m = 0.0;
    double porosity = 0.0;
};

struct WellLog {
    std::string well_id;
    std::vector<LogRecord> records;
};

/// CSV with header `depth_m,porosity`; depths strictly increasing, porosity
/// in [0,1]. Errors carry the offending row number.
WellLog load_log(const std::string& path);

struct TrackEntry {
    double depth_m = 0.0;
    double input_porosity = 0.0;
    int class_index = 0;
    double representative_porosity = 0.0; // bin midpoint of the class
    std::vector<std::string> image_paths;  // relative to the track directory
    std::vector<std::uint64_t> seeds;
    std::vector<double> measured_porosity;
};

struct TrackManifest {
    std::string checkpoint_digest;
    std::vector<TrackEntry> entries;

    std::string to_json() const;
    static TrackManifest from_json(const std::string& text);
    void save(const std::string& dir) const; // <dir>/track_manifest.json
    static TrackManifest load(const std::string& dir);
};

struct TrackOptions {
    int k_per_depth = 1;
    std::uint64_t seed = 0;
    HSVThresholds thresholds;
};

/// Maps each record's porosity through the checkpoint's binning (clamped:
/// out-of-range values land in the end bins, never an error here), generates
/// k_per_depth images with latents seeded by hash(seed, depth bits, ordinal),
/// writes them under <out_dir>/images/ and returns the manifest. Requires a
/// trained checkpoint.
TrackManifest synthesize_track(Checkpoint& ckpt, const WellLog& log, const TrackOptions& opts,
                               const std::string& out_dir);

/// Composite figure: vertical depth axis, porosity curve, and per-depth
/// thumbnails with leader lines. Manifest and log must describe the same
/// depths.
void render_track(const TrackManifest& manifest, const WellLog& log, const std::string& track_dir,
                  const std::string& png_path);

} // namespace porogen
