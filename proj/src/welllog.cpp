#include "porogen/welllog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "porogen/core/png_io.hpp"
#include "porogen/render.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace porogen {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

std::string depth_name(double depth) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", depth);
    return buf;
}

} // namespace

WellLog load_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open well log: " + path);

    WellLog log;
    log.well_id = fs::path(path).stem().string();

    std::string line;
    std::size_t row = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++row;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (!have_header) {
            const auto h = split_csv(t);
            if (h.size() != 2 || h[0] != "depth_m" || h[1] != "porosity")
                throw ParseError("well log " + path + ": header must be 'depth_m,porosity'");
            have_header = true;
            continue;
        }
        const auto fields = split_csv(t);
        if (fields.size() != 2)
            throw ParseError("well log row " + std::to_string(row) + ": expected 2 fields");
        LogRecord rec{};
        try {
            std::size_t pos = 0;
            rec.depth_m = std::stod(fields[0], &pos);
            if (pos != fields[0].size()) throw std::invalid_argument("trailing");
            rec.porosity = std::stod(fields[1], &pos);
            if (pos != fields[1].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError("well log row " + std::to_string(row) + ": malformed number");
        }
        if (!(rec.porosity >= 0.0 && rec.porosity <= 1.0))
            throw DataError("well log row " + std::to_string(row) + ": porosity outside [0,1]");
        if (!log.records.empty() && !(rec.depth_m > log.records.back().depth_m))
            throw DataError("well log row " + std::to_string(row) +
                            ": depth not strictly increasing");
        log.records.push_back(rec);
    }
    if (!have_header) throw ParseError("well log " + path + ": missing header");
    if (log.records.empty()) throw DataError("well log " + path + ": no records");
    return log;
}

std::string TrackManifest::to_json() const {
    json j;
    j["checkpoint_digest"] = checkpoint_digest;
    json entries_json = json::array();
    for (const auto& e : entries)
        entries_json.push_back({{"depth_m", e.depth_m},
                                {"input_porosity", e.input_porosity},
                                {"class", e.class_index},
                                {"representative_porosity", e.representative_porosity},
                                {"images", e.image_paths},
                                {"seeds", e.seeds},
                                {"measured_porosity", e.measured_porosity}});
    j["entries"] = std::move(entries_json);
    return j.dump(1);
}

TrackManifest TrackManifest::from_json(const std::string& text) {
    TrackManifest m;
    try {
        const json j = json::parse(text);
        m.checkpoint_digest = j.at("checkpoint_digest").get<std::string>();
        for (const auto& e : j.at("entries")) {
            TrackEntry t;
            t.depth_m = e.at("depth_m").get<double>();
            t.input_porosity = e.at("input_porosity").get<double>();
            t.class_index = e.at("class").get<int>();
            t.representative_porosity = e.at("representative_porosity").get<double>();
            t.image_paths = e.at("images").get<std::vector<std::string>>();
            t.seeds = e.at("seeds").get<std::vector<std::uint64_t>>();
            t.measured_porosity = e.at("measured_porosity").get<std::vector<double>>();
            m.entries.push_back(std::move(t));
        }
    } catch (const json::exception& ex) {
        throw ParseError(std::string("track manifest: ") + ex.what());
    }
    return m;
}

void TrackManifest::save(const std::string& dir) const {
    fs::create_directories(dir);
    std::ofstream out(fs::path(dir) / "track_manifest.json", std::ios::binary);
    if (!out) throw DataError("cannot write track manifest under " + dir);
    out << to_json();
}

TrackManifest TrackManifest::load(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "track_manifest.json", std::ios::binary);
    if (!in) throw DataError("no track_manifest.json under " + dir);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

TrackManifest synthesize_track(Checkpoint& ckpt, const WellLog& log, const TrackOptions& opts,
                               const std::string& out_dir) {
    if (opts.k_per_depth < 1) throw ConfigError("logsynth: k_per_depth must be >= 1");
    if (log.records.empty()) throw DataError("logsynth: empty well log");
    if (!ckpt.trained())
        throw CheckpointError("logsynth: checkpoint is untrained (epoch 0)");

    // Track mode always clamps: any log porosity maps to an end bin at worst.
    PorosityBinning binning = ckpt.binning;
    binning.clamp_outside = true;

    fs::create_directories(fs::path(out_dir) / "images");

    TrackManifest manifest;
    manifest.checkpoint_digest = checkpoint_digest(ckpt);
    manifest.entries.resize(log.records.size());

    // One generation batch per chunk of (depth, ordinal) pairs; latents are
    // seeded per pair, so chunking does not affect outputs.
    struct Item {
        std::size_t entry;
        int ordinal;
        std::uint64_t seed;
        int label;
    };
    std::vector<Item> items;
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        const auto& rec = log.records[i];
        TrackEntry& e = manifest.entries[i];
        e.depth_m = rec.depth_m;
        e.input_porosity = rec.porosity;
        e.class_index = binning.bin_for(rec.porosity);
        e.representative_porosity = binning.midpoint(e.class_index);
        for (int j = 0; j < opts.k_per_depth; ++j)
            items.push_back({i, j, hash_u64(opts.seed, double_bits(rec.depth_m), std::uint64_t(j)),
                             e.class_index});
    }

    const std::size_t chunk = 64;
    for (std::size_t start = 0; start < items.size(); start += chunk) {
        const std::size_t stop = std::min(start + chunk, items.size());
        const auto n = std::int64_t(stop - start);
        nn::Tensor<float> z({n, std::int64_t(ckpt.config.latent_dim)});
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (std::int64_t b = 0; b < n; ++b) {
            const Item& it = items[start + std::size_t(b)];
            Rng rng(it.seed);
            for (int d = 0; d < ckpt.config.latent_dim; ++d)
                z[std::size_t(b * ckpt.config.latent_dim + d)] = float(rng.gaussian());
            labels[std::size_t(b)] = it.label;
        }
        const nn::Tensor<float> batch = generator_forward(ckpt.model, z, labels, false);
        for (std::int64_t b = 0; b < n; ++b) {
            const Item& it = items[start + std::size_t(b)];
            TrackEntry& e = manifest.entries[it.entry];
            const ColorImage img = batch_to_image(batch, b);

            std::string name = "images/depth_" + depth_name(e.depth_m);
            if (opts.k_per_depth > 1) name += "_" + std::to_string(it.ordinal);
            name += ".png";
            write_png((fs::path(out_dir) / name).string(), img);

            e.image_paths.push_back(name);
            e.seeds.push_back(it.seed);
            e.measured_porosity.push_back(porosity_of(segment_pores(img, opts.thresholds)));
        }
    }

    manifest.save(out_dir);
    return manifest;
}

void render_track(const TrackManifest& manifest, const WellLog& log, const std::string& track_dir,
                  const std::string& png_path) {
    if (manifest.entries.empty() || log.records.empty())
        throw DataError("render_track: empty manifest or log");
    if (manifest.entries.size() != log.records.size())
        throw DataError("render_track: manifest and log describe different depth sets");
    for (std::size_t i = 0; i < log.records.size(); ++i)
        if (manifest.entries[i].depth_m != log.records[i].depth_m)
            throw DataError("render_track: manifest and log depths disagree");

    const int n = int(manifest.entries.size());
    const int thumb = 48, row_gap = 10;
    const int mt = 60, mb = 40, ml = 80;
    const int curve_w = 260, gap = 60;
    const int H = std::max(420, mt + mb + n * (thumb + row_gap));
    const int W = ml + curve_w + gap + thumb + 220;

    const double d0 = log.records.front().depth_m, d1 = log.records.back().depth_m;
    const double span = d1 > d0 ? d1 - d0 : 1.0;
    double phi_max = 0.0;
    for (const auto& r : log.records) phi_max = std::max(phi_max, r.porosity);
    phi_max = std::max(phi_max * 1.1, 0.05);

    Canvas cv(H, W, palette::white);
    const int ph = H - mt - mb;
    auto yof = [&](double depth) { return mt + int(std::lround((depth - d0) / span * ph)); };
    auto xof = [&](double phi) { return ml + int(std::lround(phi / phi_max * curve_w)); };

    // frame + axes
    cv.rect(ml, mt, curve_w + 1, ph + 1, palette::gray);
    for (int t = 0; t <= 4; ++t) {
        const double depth = d0 + span * t / 4.0;
        cv.line(ml - 4, yof(depth), ml, yof(depth), palette::black);
        const std::string lab = format_number(depth, 1);
        cv.text(ml - 8 - Canvas::text_width(lab, 1), yof(depth) - 3, lab, 1, palette::black);
    }
    for (int t = 0; t <= 2; ++t) {
        const double phi = phi_max * t / 2.0;
        cv.line(xof(phi), mt + ph, xof(phi), mt + ph + 4, palette::black);
        cv.text(xof(phi) - 8, mt + ph + 8, format_number(phi, 2), 1, palette::black);
    }
    cv.text(ml, 18, "WELL LOG GUIDED SYNTHESIS", 2, palette::black);
    cv.text(ml, mt - 18, "POROSITY", 1, palette::blue);
    cv.text(8, mt - 18, "DEPTH (M)", 1, palette::black);

    // porosity curve
    for (std::size_t i = 1; i < log.records.size(); ++i)
        cv.line(xof(log.records[i - 1].porosity), yof(log.records[i - 1].depth_m),
                xof(log.records[i].porosity), yof(log.records[i].depth_m), palette::blue);
    for (const auto& r : log.records) cv.disc(xof(r.porosity), yof(r.depth_m), 2, palette::blue);

    // thumbnails in depth order with leader lines back to the curve
    const int tx = ml + curve_w + gap;
    for (int i = 0; i < n; ++i) {
        const auto& e = manifest.entries[std::size_t(i)];
        const int ty = mt + i * (thumb + row_gap);
        if (!e.image_paths.empty()) {
            const ColorImage img = read_png((fs::path(track_dir) / e.image_paths[0]).string());
            cv.blit_scaled(to_rgb8(img), img.width(), tx, ty, thumb);
            cv.rect(tx - 1, ty - 1, thumb + 2, thumb + 2, palette::gray);
        }
        cv.line(xof(e.input_porosity), yof(e.depth_m), tx - 4, ty + thumb / 2, palette::gray);
        const std::string lab = format_number(e.depth_m, 1) + "M PHI=" +
                                format_number(e.input_porosity, 3);
        cv.text(tx + thumb + 8, ty + thumb / 2 - 3, lab, 1, palette::black);
    }

    cv.save(png_path);
}

} // namespace porogen
