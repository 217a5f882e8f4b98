#include "porogen/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "porogen/core/parallel.hpp"
#include "porogen/core/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace porogen {

// --- tiling -----------------------------------------------------------------

std::vector<TileCut> extract_tiles(const ColorImage& img, int tile_size, int stride) {
    if (tile_size < 1) throw DomainError("extract_tiles: tile_size must be >= 1");
    if (stride < 1) throw DomainError("extract_tiles: stride must be >= 1");
    if (tile_size > img.height() || tile_size > img.width())
        throw DomainError("extract_tiles: image smaller than tile size");

    std::vector<TileCut> out;
    for (int y0 = 0; y0 + tile_size <= img.height(); y0 += stride)
        for (int x0 = 0; x0 + tile_size <= img.width(); x0 += stride) {
            TileCut cut;
            cut.x0 = x0;
            cut.y0 = y0;
            cut.image = ColorImage(tile_size, tile_size);
            for (int y = 0; y < tile_size; ++y)
                for (int x = 0; x < tile_size; ++x)
                    for (int c = 0; c < 3; ++c)
                        cut.image.at(y, x, c) = img.at(y0 + y, x0 + x, c);
            out.push_back(std::move(cut));
        }
    return out;
}

// --- dihedral ops -------------------------------------------------------------

namespace {

// Source coordinates feeding destination (y,x) under op = r + 4f: rotate r
// quarter-turns counterclockwise, then mirror horizontally if f.
inline std::pair<int, int> dihedral_src(int y, int x, int size, int op) {
    if (op >> 2) x = size - 1 - x;
    switch (op & 3) {
        case 0: return {y, x};
        case 1: return {x, size - 1 - y};
        case 2: return {size - 1 - y, size - 1 - x};
        default: return {size - 1 - x, y};
    }
}

} // namespace

std::vector<std::uint8_t> dihedral_apply_rgb8(const std::vector<std::uint8_t>& rgb, int size,
                                              int op) {
    if (op < 0 || op >= kDihedralOps) throw DomainError("dihedral op out of range");
    std::vector<std::uint8_t> out(rgb.size());
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const auto [sy, sx] = dihedral_src(y, x, size, op);
            const std::size_t d = (std::size_t(y) * size + x) * 3;
            const std::size_t s = (std::size_t(sy) * size + sx) * 3;
            out[d] = rgb[s];
            out[d + 1] = rgb[s + 1];
            out[d + 2] = rgb[s + 2];
        }
    return out;
}

PoreMask dihedral_apply(const PoreMask& mask, int op) {
    if (op < 0 || op >= kDihedralOps) throw DomainError("dihedral op out of range");
    if (mask.height() != mask.width()) throw DomainError("dihedral needs a square mask");
    PoreMask out(mask.height(), mask.width());
    const int size = mask.height();
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const auto [sy, sx] = dihedral_src(y, x, size, op);
            out.at(y, x) = mask.at(sy, sx);
        }
    return out;
}

ColorImage dihedral_apply(const ColorImage& img, int op) {
    if (op < 0 || op >= kDihedralOps) throw DomainError("dihedral op out of range");
    if (img.height() != img.width()) throw DomainError("dihedral needs a square image");
    ColorImage out(img.height(), img.width());
    const int size = img.height();
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const auto [sy, sx] = dihedral_src(y, x, size, op);
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    return out;
}

std::string dihedral_tag(int op) {
    return "d4r" + std::to_string(op & 3) + "f" + std::to_string(op >> 2);
}

// --- synthetic tiles ------------------------------------------------------------

namespace {

// Separable Gaussian blur with replicated edges; sigma in pixels.
void gaussian_blur(std::vector<double>& field, int size, double sigma) {
    if (sigma <= 0.0) return;
    const int half = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(std::size_t(2 * half + 1));
    double sum = 0.0;
    for (int i = -half; i <= half; ++i) {
        const double w = std::exp(-0.5 * (double(i) / sigma) * (double(i) / sigma));
        kernel[std::size_t(i + half)] = w;
        sum += w;
    }
    for (double& w : kernel) w /= sum;

    std::vector<double> tmp(field.size());
    auto clampi = [size](int i) { return i < 0 ? 0 : (i >= size ? size - 1 : i); };
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double acc = 0.0;
            for (int i = -half; i <= half; ++i)
                acc += kernel[std::size_t(i + half)] * field[std::size_t(y) * size + clampi(x + i)];
            tmp[std::size_t(y) * size + x] = acc;
        }
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double acc = 0.0;
            for (int i = -half; i <= half; ++i)
                acc += kernel[std::size_t(i + half)] * tmp[std::size_t(clampi(y + i)) * size + x];
            field[std::size_t(y) * size + x] = acc;
        }
}

} // namespace

std::pair<ColorImage, PoreMask> synth_tile(std::uint64_t seed, double target_phi, int tile_size,
                                           double blur_radius) {
    if (!(target_phi >= 0.0 && target_phi <= 1.0))
        throw DomainError("synth_tile: target_phi outside [0,1]");
    if (tile_size < 1) throw DomainError("synth_tile: tile_size must be >= 1");

    const std::size_t total = std::size_t(tile_size) * tile_size;
    Rng rng(seed);

    std::vector<double> field(total);
    for (double& v : field) v = rng.gaussian();
    gaussian_blur(field, tile_size, blur_radius);

    // Exact-count threshold: the pore set is the round(phi * S^2) highest field
    // values, with index order breaking ties deterministically.
    const std::size_t pore_count = std::size_t(std::llround(target_phi * double(total)));
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::sort(order.begin(), order.end(), [&field](std::size_t a, std::size_t b) {
        if (field[a] != field[b]) return field[a] > field[b];
        return a < b;
    });

    PoreMask mask(tile_size, tile_size);
    for (std::size_t i = 0; i < pore_count; ++i) mask.bits()[order[i]] = 1;

    // Normalized field drives the solid texture shading.
    const auto [mn_it, mx_it] = std::minmax_element(field.begin(), field.end());
    const double mn = *mn_it, span = (*mx_it - *mn_it) > 0 ? (*mx_it - *mn_it) : 1.0;

    ColorImage img(tile_size, tile_size);
    for (int y = 0; y < tile_size; ++y)
        for (int x = 0; x < tile_size; ++x) {
            const std::size_t i = std::size_t(y) * tile_size + x;
            const double n = (field[i] - mn) / span;
            double r, g, b;
            if (mask.bits()[i]) {
                // Epoxy blue, value jittered; stays well inside the default
                // segmentation window after 8-bit quantization.
                const double val = 0.70 + 0.20 * rng.uniform();
                hsv_to_rgb(0.60, 0.85, val, r, g, b);
            } else {
                // Tan/gray grain palette: hue far outside the pore band and
                // saturation below the floor.
                rng.uniform(); // keep the stream aligned across pixel kinds
                hsv_to_rgb(0.08 + 0.04 * n, 0.10 + 0.10 * n, 0.50 + 0.35 * n, r, g, b);
            }
            img.at(y, x, 0) = float(r);
            img.at(y, x, 1) = float(g);
            img.at(y, x, 2) = float(b);
        }
    snap_to_8bit(img);
    return {std::move(img), std::move(mask)};
}

// --- balancing -------------------------------------------------------------------

void balance_classes(CorpusBuild& corpus, const BalanceOptions& opts) {
    corpus.binning.validate();
    const int K = corpus.binning.num_classes();

    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(K));
    for (std::size_t i = 0; i < corpus.tiles.size(); ++i)
        if (corpus.tiles[i].rec.split == "train")
            members[std::size_t(corpus.tiles[i].rec.class_index)].push_back(i);

    std::size_t max_count = 0;
    for (int c = 0; c < K; ++c) {
        if (members[std::size_t(c)].empty())
            throw DataError("balance_classes: class " + std::to_string(c) + " has no tiles");
        max_count = std::max(max_count, members[std::size_t(c)].size());
    }

    const std::size_t target = opts.target_per_class ? opts.target_per_class : max_count;
    if (target < max_count && !opts.allow_downsample)
        throw ConfigError("balance_classes: target below largest class; downsampling not enabled");

    std::vector<char> drop(corpus.tiles.size(), 0);
    for (int c = 0; c < K; ++c) {
        auto& mem = members[std::size_t(c)];
        Rng rng(hash_u64(opts.seed, hash_tag("balance"), std::uint64_t(c)));
        if (mem.size() > target) {
            shuffle_in_place(mem, rng);
            for (std::size_t i = target; i < mem.size(); ++i) drop[mem[i]] = 1;
            continue;
        }
        for (std::size_t n = mem.size(); n < target; ++n) {
            const std::size_t src = mem[std::size_t(rng.below(mem.size()))];
            const int op = int(rng.below(kDihedralOps));
            TileData t;
            t.rgb = dihedral_apply_rgb8(corpus.tiles[src].rgb, corpus.tile_size, op);
            t.rec = corpus.tiles[src].rec;
            t.rec.path.clear();
            t.rec.augment = dihedral_tag(op);
            corpus.tiles.push_back(std::move(t));
        }
    }

    if (std::any_of(drop.begin(), drop.end(), [](char d) { return d != 0; })) {
        std::vector<TileData> kept;
        kept.reserve(corpus.tiles.size());
        for (std::size_t i = 0; i < corpus.tiles.size(); ++i)
            if (i >= drop.size() || !drop[i]) kept.push_back(std::move(corpus.tiles[i]));
        corpus.tiles = std::move(kept);
    }
}

// --- corpus assembly ----------------------------------------------------------------

CorpusBuild synth_corpus(const SynthCorpusSpec& spec) {
    spec.binning.validate();
    if (spec.classes != spec.binning.num_classes())
        throw ConfigError("synth_corpus: class count does not match binning");
    if (spec.per_class < 1) throw ConfigError("synth_corpus: per_class must be >= 1");

    CorpusBuild corpus;
    corpus.binning = spec.binning;
    corpus.tile_size = spec.tile_size;
    corpus.tiles.resize(std::size_t(spec.classes) * spec.per_class);

    const auto n = std::int64_t(corpus.tiles.size());
    std::exception_ptr err;
#pragma omp parallel for num_threads(worker_count()) schedule(static)
    for (std::int64_t idx = 0; idx < n; ++idx) {
        try {
            const int c = int(std::size_t(idx) / spec.per_class);
            const std::size_t i = std::size_t(idx) % spec.per_class;
            const std::uint64_t tile_seed = hash_u64(spec.seed, std::uint64_t(c), std::uint64_t(i));
            auto [img, mask] =
                synth_tile(tile_seed, spec.binning.midpoint(c), spec.tile_size, spec.blur_radius);

            TileData t;
            t.rgb = to_rgb8(img);
            t.rec.porosity = porosity_of(mask);
            t.rec.class_index = corpus.binning.bin_for(t.rec.porosity);
            t.rec.source = "synth:c" + std::to_string(c) + ":i" + std::to_string(i);
            corpus.tiles[std::size_t(idx)] = std::move(t);
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return corpus;
}

CorpusBuild ingest_corpus(const std::vector<std::string>& image_paths, const IngestOptions& opts) {
    if (image_paths.empty()) throw DataError("ingest: no source images");
    opts.binning.validate();
    opts.thresholds.validate();
    const int stride = opts.stride > 0 ? opts.stride : opts.tile_size;

    CorpusBuild corpus;
    corpus.binning = opts.binning;
    corpus.tile_size = opts.tile_size;

    for (const auto& path : image_paths) {
        const ColorImage img = read_png(path);
        const auto cuts = extract_tiles(img, opts.tile_size, stride);
        const std::string base = fs::path(path).filename().string();
        for (const auto& cut : cuts) {
            TileData t;
            t.rgb = to_rgb8(cut.image);
            const PoreMask mask = segment_pores(cut.image, opts.thresholds);
            t.rec.porosity = porosity_of(mask);
            t.rec.class_index = corpus.binning.bin_for(t.rec.porosity);
            t.rec.source = base + ":y" + std::to_string(cut.y0) + ":x" + std::to_string(cut.x0);
            corpus.tiles.push_back(std::move(t));
        }
    }

    if (opts.holdout_fraction > 0.0) {
        Rng rng(hash_u64(opts.seed, hash_tag("holdout")));
        for (auto& t : corpus.tiles)
            if (rng.uniform() < opts.holdout_fraction) t.rec.split = "val";
    }

    if (opts.balance_to > 0) {
        BalanceOptions b;
        b.target_per_class = opts.balance_to;
        b.seed = opts.seed;
        balance_classes(corpus, b);
    }
    return corpus;
}

// --- manifest ------------------------------------------------------------------------

std::vector<std::size_t> CorpusManifest::class_counts() const {
    std::vector<std::size_t> counts(std::size_t(binning.num_classes()), 0);
    for (const auto& r : records) counts[std::size_t(r.class_index)]++;
    return counts;
}

std::string CorpusManifest::to_json() const {
    json j;
    j["binning"] = {{"edges", binning.edges}, {"clamp_outside", binning.clamp_outside}};
    j["tile_size"] = tile_size;
    j["counts"] = class_counts();
    json tiles = json::array();
    for (const auto& r : records) {
        tiles.push_back({{"path", r.path},
                         {"porosity", r.porosity},
                         {"class", r.class_index},
                         {"augment", r.augment},
                         {"source", r.source},
                         {"split", r.split}});
    }
    j["tiles"] = std::move(tiles);
    return j.dump(1);
}

CorpusManifest CorpusManifest::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    CorpusManifest m;
    try {
        m.binning.edges = j.at("binning").at("edges").get<std::vector<double>>();
        m.binning.clamp_outside = j.at("binning").at("clamp_outside").get<bool>();
        m.tile_size = j.at("tile_size").get<int>();
        for (const auto& t : j.at("tiles")) {
            TileRecord r;
            r.path = t.at("path").get<std::string>();
            r.porosity = t.at("porosity").get<double>();
            r.class_index = t.at("class").get<int>();
            r.augment = t.at("augment").get<std::string>();
            r.source = t.at("source").get<std::string>();
            r.split = t.value("split", "train");
            m.records.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    m.binning.validate();
    for (const auto& r : m.records)
        if (r.class_index < 0 || r.class_index >= m.binning.num_classes())
            throw DataError("manifest: class index out of range for " + r.path);
    return m;
}

void CorpusManifest::save(const std::string& dir) const {
    fs::create_directories(dir);
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!out) throw DataError("cannot write manifest under " + dir);
    out << to_json();
}

CorpusManifest CorpusManifest::load(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!in) throw DataError("no manifest.json under " + dir);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string CorpusManifest::digest() const {
    const std::string text = to_json();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(text.data(), text.size())));
    return buf;
}

CorpusManifest write_corpus(const CorpusBuild& corpus, const std::string& dir) {
    CorpusManifest manifest;
    manifest.binning = corpus.binning;
    manifest.tile_size = corpus.tile_size;

    for (int c = 0; c < corpus.binning.num_classes(); ++c)
        fs::create_directories(fs::path(dir) / "tiles" / std::to_string(c));

    for (std::size_t i = 0; i < corpus.tiles.size(); ++i) {
        const auto& t = corpus.tiles[i];
        char name[32];
        std::snprintf(name, sizeof name, "t%07zu.png", i);
        TileRecord rec = t.rec;
        rec.path = "tiles/" + std::to_string(rec.class_index) + "/" + name;
        write_png_rgb8((fs::path(dir) / rec.path).string(), t.rgb.data(), corpus.tile_size,
                       corpus.tile_size);
        manifest.records.push_back(std::move(rec));
    }
    manifest.save(dir);
    return manifest;
}

CorpusBuild load_corpus(const std::string& dir) {
    const CorpusManifest manifest = CorpusManifest::load(dir);
    CorpusBuild corpus;
    corpus.binning = manifest.binning;
    corpus.tile_size = manifest.tile_size;
    corpus.tiles.resize(manifest.records.size());

    const auto n = std::int64_t(manifest.records.size());
    std::exception_ptr err;
#pragma omp parallel for num_threads(worker_count()) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            const auto& rec = manifest.records[std::size_t(i)];
            const ColorImage img = read_png((fs::path(dir) / rec.path).string());
            if (img.height() != manifest.tile_size || img.width() != manifest.tile_size)
                throw DataError("corpus tile has wrong size: " + rec.path);
            corpus.tiles[std::size_t(i)] = TileData{to_rgb8(img), rec};
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return corpus;
}

} // namespace porogen
