#include "porogen/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "porogen/render.hpp"

using nlohmann::json;

namespace porogen {

bool within_margin(double phi, double lo, double hi, double m) {
    if (!(lo < hi)) throw DomainError("within_margin: lo must be < hi");
    if (m < 0.0) throw DomainError("within_margin: margin must be >= 0");
    const double w = m * (hi - lo);
    return phi >= lo - w && phi <= hi + w;
}

bool within_margin_absolute(double phi, double lo, double hi, double m) {
    if (!(lo < hi)) throw DomainError("within_margin: lo must be < hi");
    if (m < 0.0) throw DomainError("within_margin: margin must be >= 0");
    return phi >= lo - m && phi <= hi + m;
}

std::string ValidationReport::to_json() const {
    json j;
    j["overall_accuracy"] = overall_accuracy;
    j["per_class_accuracy"] = per_class_accuracy;
    j["margin"] = margin;
    j["margin_mode"] = margin_mode;
    j["n_per_class"] = n_per_class;
    j["seed"] = seed;
    j["config_digest"] = config_digest;
    json recs = json::array();
    for (const auto& r : records)
        recs.push_back({{"class", r.class_index},
                        {"target_lo", r.target_lo},
                        {"target_hi", r.target_hi},
                        {"sample", r.sample_id},
                        {"measured_porosity", r.measured_porosity},
                        {"within", r.within}});
    j["records"] = std::move(recs);
    return j.dump(1);
}

void ValidationReport::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write report: " + path);
    out << to_json();
}

namespace {

ValidationReport score_records(std::vector<ValidationRecord> records,
                               const PorosityBinning& binning, const ValidateOptions& opts) {
    const int K = binning.num_classes();
    ValidationReport rep;
    rep.margin = opts.margin;
    rep.margin_mode = opts.margin_mode;
    rep.n_per_class = opts.n_per_class;
    rep.seed = opts.seed;
    rep.per_class_accuracy.assign(std::size_t(K), 0.0);

    std::vector<std::size_t> counts(std::size_t(K), 0);
    std::size_t hits = 0;
    for (auto& r : records) {
        r.within = opts.margin_mode == "absolute"
                       ? within_margin_absolute(r.measured_porosity, r.target_lo, r.target_hi,
                                                opts.margin)
                       : within_margin(r.measured_porosity, r.target_lo, r.target_hi, opts.margin);
        rep.per_class_accuracy[std::size_t(r.class_index)] += r.within ? 1.0 : 0.0;
        counts[std::size_t(r.class_index)]++;
        hits += r.within ? 1 : 0;
    }
    for (int c = 0; c < K; ++c)
        if (counts[std::size_t(c)])
            rep.per_class_accuracy[std::size_t(c)] /= double(counts[std::size_t(c)]);
    rep.overall_accuracy = records.empty() ? 0.0 : double(hits) / double(records.size());
    rep.records = std::move(records);
    return rep;
}

} // namespace

ValidationReport validate_source(const SampleSource& source, const PorosityBinning& binning,
                                 const ValidateOptions& opts) {
    binning.validate();
    if (opts.n_per_class < 1) throw ConfigError("validate: n_per_class must be >= 1");
    if (opts.margin < 0.0) throw ConfigError("validate: margin must be >= 0");
    if (opts.margin_mode != "range" && opts.margin_mode != "absolute")
        throw ConfigError("validate: margin mode must be 'range' or 'absolute'");

    std::vector<ValidationRecord> records;
    records.reserve(std::size_t(binning.num_classes()) * std::size_t(opts.n_per_class));
    for (int c = 0; c < binning.num_classes(); ++c)
        for (int i = 0; i < opts.n_per_class; ++i) {
            const ColorImage img = source(c, i);
            ValidationRecord r;
            r.class_index = c;
            r.target_lo = binning.lo(c);
            r.target_hi = binning.hi(c);
            r.sample_id = i;
            r.measured_porosity = porosity_of(segment_pores(img, opts.thresholds));
            records.push_back(r);
        }
    return score_records(std::move(records), binning, opts);
}

ValidationReport validate(Checkpoint& ckpt, const ValidateOptions& opts) {
    if (!ckpt.trained() && !opts.allow_untrained)
        throw CheckpointError("validate: checkpoint is untrained (epoch 0); "
                              "pass --allow-untrained to proceed anyway");

    // Generate per class in batches; per-sample latents are independently
    // seeded so the report does not depend on batch partitioning.
    const int batch_cap = 64;
    auto batch_source = [&](int c, int lo_ord, int hi_ord) {
        const std::int64_t n = hi_ord - lo_ord;
        nn::Tensor<float> z({n, std::int64_t(ckpt.config.latent_dim)});
        for (std::int64_t i = 0; i < n; ++i) {
            Rng rng(hash_u64(opts.seed, std::uint64_t(c), std::uint64_t(lo_ord + i)));
            for (int d = 0; d < ckpt.config.latent_dim; ++d)
                z[std::size_t(i * ckpt.config.latent_dim + d)] = float(rng.gaussian());
        }
        const std::vector<int> labels(std::size_t(n), c);
        return generator_forward(ckpt.model, z, labels, false);
    };

    std::vector<ValidationRecord> records;
    for (int c = 0; c < ckpt.binning.num_classes(); ++c) {
        for (int start = 0; start < opts.n_per_class; start += batch_cap) {
            const int stop = std::min(start + batch_cap, opts.n_per_class);
            const nn::Tensor<float> batch = batch_source(c, start, stop);
            for (int i = start; i < stop; ++i) {
                const ColorImage img = batch_to_image(batch, i - start);
                ValidationRecord r;
                r.class_index = c;
                r.target_lo = ckpt.binning.lo(c);
                r.target_hi = ckpt.binning.hi(c);
                r.sample_id = i;
                r.measured_porosity = porosity_of(segment_pores(img, opts.thresholds));
                records.push_back(r);
            }
        }
    }
    ValidationReport rep = score_records(std::move(records), ckpt.binning, opts);
    rep.config_digest = checkpoint_digest(ckpt);
    return rep;
}

void emit_scatter(const ValidationReport& report, const PorosityBinning& binning,
                  const std::string& csv_path, const std::string& png_path) {
    if (report.records.empty()) throw DataError("emit_scatter: empty report");

    {
        std::ofstream csv(csv_path, std::ios::binary);
        if (!csv) throw DataError("cannot write " + csv_path);
        csv << "class,target_lo,target_hi,measured_porosity,accepted\n";
        for (const auto& r : report.records)
            csv << r.class_index << ',' << r.target_lo << ',' << r.target_hi << ','
                << r.measured_porosity << ',' << (r.within ? 1 : 0) << '\n';
    }

    const int K = binning.num_classes();
    const int W = 900, H = 620;
    const int ml = 90, mr = 30, mt = 50, mb = 70;
    const int pw = W - ml - mr, ph = H - mt - mb;

    double phi_max = binning.edges.back();
    for (const auto& r : report.records) phi_max = std::max(phi_max, r.measured_porosity);
    phi_max *= 1.05;

    Canvas cv(H, W, palette::white);
    auto xof = [&](double cls) { return ml + int(std::lround((cls + 0.5) / K * pw)); };
    auto yof = [&](double phi) { return mt + ph - int(std::lround(phi / phi_max * ph)); };

    // per-class target range (light band) and margin window (outline)
    const int slot = pw / K;
    for (int c = 0; c < K; ++c) {
        const double lo = binning.lo(c), hi = binning.hi(c);
        const double w = report.margin_mode == "absolute" ? report.margin
                                                          : report.margin * (hi - lo);
        const int x0 = ml + c * pw / K + slot / 6;
        const int x1 = ml + (c + 1) * pw / K - slot / 6;
        cv.fill_rect(x0, yof(hi + w), x1 - x0, yof(lo - w) - yof(hi + w), palette::light_gray);
        cv.line(x0, yof(lo), x1, yof(lo), palette::gray);
        cv.line(x0, yof(hi), x1, yof(hi), palette::gray);
    }

    // axes
    cv.line(ml, mt, ml, mt + ph, palette::black);
    cv.line(ml, mt + ph, ml + pw, mt + ph, palette::black);
    for (int t = 0; t <= 5; ++t) {
        const double phi = phi_max * t / 5.0;
        cv.line(ml - 4, yof(phi), ml, yof(phi), palette::black);
        const std::string lab = format_number(phi, 2);
        cv.text(ml - 10 - Canvas::text_width(lab, 1), yof(phi) - 3, lab, 1, palette::black);
    }
    for (int c = 0; c < K; ++c) {
        const std::string lab = std::to_string(c);
        cv.text(xof(c) - Canvas::text_width(lab, 1) / 2, mt + ph + 8, lab, 1, palette::black);
    }

    // points, deterministically jittered inside the class slot
    for (const auto& r : report.records) {
        const double j =
            (double(hash_u64(std::uint64_t(r.class_index), std::uint64_t(r.sample_id)) % 1000) /
                 999.0 -
             0.5) *
            0.55;
        cv.disc(xof(r.class_index + j), yof(r.measured_porosity), 2,
                r.within ? palette::green : palette::red);
    }

    cv.text(ml, 18, "MEASURED POROSITY BY TARGET CLASS", 2, palette::black);
    const std::string acc = "OVERALL ACCURACY " + format_number(report.overall_accuracy * 100, 1) +
                            "% AT MARGIN " + format_number(report.margin, 2);
    cv.text(ml, mt + ph + 28, acc, 1, palette::black);
    cv.disc(ml + 360, mt + ph + 48, 3, palette::green);
    cv.text(ml + 370, mt + ph + 44, "WITHIN MARGIN", 1, palette::black);
    cv.disc(ml + 500, mt + ph + 48, 3, palette::red);
    cv.text(ml + 510, mt + ph + 44, "OUTLIER", 1, palette::black);
    cv.text(ml + pw / 2 - 30, mt + ph + 44, "CLASS", 1, palette::black);

    cv.save(png_path);
}

double spearman_rank(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw DomainError("spearman: need two equal-length series of size >= 2");

    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t(0));
        std::sort(idx.begin(), idx.end(), [&v](std::size_t x, std::size_t y) { return v[x] < v[y]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = (double(i) + double(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };

    const auto ra = ranks(a), rb = ranks(b);
    const double n = double(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    if (da == 0 || db == 0) return 0.0;
    return num / std::sqrt(da * db);
}

std::vector<double> class_mean_porosity(const ValidationReport& report, int num_classes) {
    std::vector<double> mean(std::size_t(num_classes), 0.0);
    std::vector<std::size_t> count(std::size_t(num_classes), 0);
    for (const auto& r : report.records) {
        mean[std::size_t(r.class_index)] += r.measured_porosity;
        count[std::size_t(r.class_index)]++;
    }
    for (int c = 0; c < num_classes; ++c)
        if (count[std::size_t(c)]) mean[std::size_t(c)] /= double(count[std::size_t(c)]);
    return mean;
}

} // namespace porogen
