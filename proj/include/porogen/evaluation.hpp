#pragma once

#include <functional>
#include <string>
#include <vector>

#include "porogen/cgan.hpp"
#include "porogen/segmentation.hpp"

// Conditioning fidelity: generate samples per class, measure their porosity by
// segmentation, and score the fraction landing inside the margin window around
// each class's target range.

namespace porogen {

struct ValidationRecord {
    int class_index = 0;
    double target_lo = 0.0;
    double target_hi = 0.0;
    int sample_id = 0;
    double measured_porosity = 0.0;
    bool within = false;
};

struct ValidationReport {
    std::vector<double> per_class_accuracy;
    double overall_accuracy = 0.0;
    std::vector<ValidationRecord> records;
    std::string config_digest;
    double margin = 0.10;
    std::string margin_mode = "range"; // "range" or "absolute"
    int n_per_class = 0;
    std::uint64_t seed = 0;

    std::string to_json() const;
    void save(const std::string& path) const;
};

/// Margin window as a two-sided extension of the bin by m times the bin
/// width: lo - m*(hi-lo) <= phi <= hi + m*(hi-lo).
bool within_margin(double phi, double lo, double hi, double m);

/// Alternative reading: absolute extension by m on both sides.
bool within_margin_absolute(double phi, double lo, double hi, double m);

struct ValidateOptions {
    int n_per_class = 100;
    double margin = 0.10;
    std::string margin_mode = "range";
    std::uint64_t seed = 0;
    HSVThresholds thresholds;
    bool allow_untrained = false;
};

/// Image source seam: class index and sample ordinal to a [0,1] image. Lets
/// tests validate oracle stubs through the same scoring path as the model.
using SampleSource = std::function<ColorImage(int class_index, int ordinal)>;

ValidationReport validate_source(const SampleSource& source, const PorosityBinning& binning,
                                 const ValidateOptions& opts);

/// Checkpoint path: per-sample latents are seeded by hash(seed, class,
/// ordinal), so reports are deterministic and order-independent. Refuses
/// epoch-0 checkpoints unless allow_untrained.
ValidationReport validate(Checkpoint& ckpt, const ValidateOptions& opts);

/// Writes scatter.csv (class, target range, measured porosity, accepted flag)
/// and a rendered scatter figure with accepted/rejected coloring.
void emit_scatter(const ValidationReport& report, const PorosityBinning& binning,
                  const std::string& csv_path, const std::string& png_path);

/// Spearman rank correlation with average ranks on ties.
double spearman_rank(const std::vector<double>& a, const std::vector<double>& b);

/// Per-class mean measured porosity from a report.
std::vector<double> class_mean_porosity(const ValidationReport& report, int num_classes);

} // namespace porogen
