#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "porogen/core/png_io.hpp"
#include "porogen/corpus.hpp"

using namespace porogen;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "porogen_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("extract_tiles covers an exact grid") {
    const auto [img, mask] = synth_tile(1, 0.3, 512, 3.0);
    CHECK(extract_tiles(img, 256, 256).size() == 4);
    CHECK(extract_tiles(img, 256, 128).size() == 9); // (512-256)/128+1 = 3 per axis
}

TEST_CASE("extract_tiles is row-major and top-left anchored") {
    const auto [img, mask] = synth_tile(2, 0.3, 96, 2.0);
    const auto tiles = extract_tiles(img, 32, 32);
    REQUIRE(tiles.size() == 9);
    CHECK(tiles[0].x0 == 0);
    CHECK(tiles[0].y0 == 0);
    CHECK(tiles[1].x0 == 32);
    CHECK(tiles[1].y0 == 0);
    CHECK(tiles[3].x0 == 0);
    CHECK(tiles[3].y0 == 32);
    // content equals the source crop
    CHECK(tiles[4].image.at(0, 0, 0) == img.at(32, 32, 0));
}

TEST_CASE("extract_tiles rejects undersized images and bad strides") {
    const auto [img, mask] = synth_tile(3, 0.3, 200, 2.0);
    CHECK_THROWS_AS(extract_tiles(img, 256, 256), DomainError);
    CHECK_THROWS_AS(extract_tiles(img, 64, 0), DomainError);
}

TEST_CASE("bin_for implements half-open bins with a closed top edge") {
    const PorosityBinning b = PorosityBinning::default_bins();
    CHECK(b.num_classes() == 10);
    CHECK(b.bin_for(0.0) == 0);
    CHECK(b.bin_for(0.37) == 4);  // floor(0.37 / 0.075)
    CHECK(b.bin_for(0.745) == 9); // observed maximum lands in the top class
    CHECK(b.bin_for(0.75) == 9);  // top edge belongs to the last class
    CHECK(b.bin_for(0.075) == 1); // interior edges open below
}

TEST_CASE("bin_for clamps or rejects out-of-range porosities") {
    PorosityBinning b = PorosityBinning::default_bins();
    CHECK(b.bin_for(0.9) == 9);
    CHECK(b.bin_for(-0.1) == 0);
    b.clamp_outside = false;
    CHECK_THROWS_AS(b.bin_for(0.9), DomainError);
    CHECK_THROWS_AS(b.bin_for(-0.1), DomainError);
}

TEST_CASE("binning partitions the interval and is monotone") {
    const PorosityBinning b = PorosityBinning::default_bins();
    Rng rng(17);
    double prev_phi = 0.0;
    int prev_class = 0;
    for (int i = 0; i < 10000; ++i) {
        const double phi = rng.uniform(0.0, 0.75);
        const int k = b.bin_for(phi);
        CHECK(k >= 0);
        CHECK(k < 10);
        CHECK(b.lo(k) <= phi);
        CHECK((phi < b.hi(k) || (k == 9 && phi <= b.hi(k))));
        if (phi >= prev_phi) CHECK(k >= prev_class);
        prev_phi = phi;
        prev_class = k;
    }
}

TEST_CASE("binning validation rejects non-increasing edges") {
    PorosityBinning b;
    b.edges = {0.0, 0.5, 0.5, 1.0};
    CHECK_THROWS_AS(b.validate(), ConfigError);
    CHECK_THROWS_AS(PorosityBinning::equal_width(1, 0.0, 1.0), ConfigError);
}

TEST_CASE("dihedral group: 8 distinct label-preserving transforms") {
    const auto [img, mask] = synth_tile(4, 0.4, 16, 1.0);
    const auto rgb = to_rgb8(img);

    std::vector<std::vector<std::uint8_t>> seen;
    for (int op = 0; op < kDihedralOps; ++op) {
        const auto t = dihedral_apply_rgb8(rgb, 16, op);
        for (const auto& other : seen) CHECK(t != other);
        seen.push_back(t);

        // porosity is preserved exactly: transforms only permute pixels
        CHECK(porosity_of(dihedral_apply(mask, op)) == porosity_of(mask));
    }
    CHECK(seen[0] == rgb); // op 0 is the identity
}

TEST_CASE("synth_tile hits the requested pore count exactly") {
    {
        const auto [img, mask] = synth_tile(5, 0.0, 64, 2.0);
        CHECK(porosity_of(mask) == 0.0);
    }
    {
        const auto [img, mask] = synth_tile(6, 0.5, 64, 2.0);
        std::size_t count = 0;
        for (auto bit : mask.bits()) count += bit;
        CHECK(count == 2048);
    }
    {
        const auto [img, mask] = synth_tile(7, 1.0, 16, 2.0);
        CHECK(porosity_of(mask) == 1.0);
    }
    // porosity_of(mask) == round(phi * S^2) / S^2 for arbitrary targets
    for (double phi : {0.004, 0.123, 0.62, 0.745}) {
        const auto [img, mask] = synth_tile(8, phi, 32, 1.5);
        CHECK(porosity_of(mask) == std::llround(phi * 32 * 32) / double(32 * 32));
    }
}

TEST_CASE("synth_tile is bit-deterministic in its inputs") {
    const auto [img1, mask1] = synth_tile(9, 0.33, 32, 2.0);
    const auto [img2, mask2] = synth_tile(9, 0.33, 32, 2.0);
    CHECK(img1.pixels() == img2.pixels());
    CHECK(mask1 == mask2);

    const auto [img3, mask3] = synth_tile(10, 0.33, 32, 2.0);
    CHECK(img1.pixels() != img3.pixels());
}

TEST_CASE("synth_tile rejects porosity outside [0,1]") {
    CHECK_THROWS_AS(synth_tile(1, -0.1, 32, 2.0), DomainError);
    CHECK_THROWS_AS(synth_tile(1, 1.1, 32, 2.0), DomainError);
}

TEST_CASE("balance_classes grows every class to the target with in-class transforms") {
    SynthCorpusSpec spec;
    spec.classes = 2;
    spec.per_class = 2;
    spec.tile_size = 16;
    spec.binning = PorosityBinning::equal_width(2, 0.0, 0.75);
    spec.seed = 3;
    CorpusBuild corpus = synth_corpus(spec);
    // skew: drop all but 2 tiles of class 0, add 8 extra tiles to class 1
    for (std::size_t i = 0; i < 8; ++i) {
        TileData t = corpus.tiles[2 + (i % 2)];
        corpus.tiles.push_back(t);
    }
    auto counts = corpus.class_counts();
    REQUIRE(counts[0] == 2);
    REQUIRE(counts[1] == 10);

    const std::vector<TileData> originals = corpus.tiles;

    BalanceOptions opts;
    opts.target_per_class = 10;
    opts.seed = 99;
    balance_classes(corpus, opts);

    counts = corpus.class_counts();
    CHECK(counts[0] == 10);
    CHECK(counts[1] == 10);

    for (std::size_t i = originals.size(); i < corpus.tiles.size(); ++i) {
        const auto& added = corpus.tiles[i];
        CHECK(!added.rec.augment.empty());
        // added tile must be a dihedral image of an in-class original with the
        // same porosity label
        bool matched = false;
        for (const auto& orig : originals) {
            if (orig.rec.class_index != added.rec.class_index) continue;
            for (int op = 0; op < kDihedralOps && !matched; ++op)
                if (dihedral_apply_rgb8(orig.rgb, corpus.tile_size, op) == added.rgb &&
                    orig.rec.porosity == added.rec.porosity)
                    matched = true;
            if (matched) break;
        }
        CHECK(matched);
    }
}

TEST_CASE("balance_classes leaves balanced corpora unchanged") {
    SynthCorpusSpec spec;
    spec.classes = 3;
    spec.per_class = 4;
    spec.tile_size = 16;
    spec.binning = PorosityBinning::equal_width(3, 0.0, 0.75);
    CorpusBuild corpus = synth_corpus(spec);
    const std::size_t before = corpus.tiles.size();

    BalanceOptions opts;
    opts.target_per_class = 4;
    balance_classes(corpus, opts);
    CHECK(corpus.tiles.size() == before);
}

TEST_CASE("balance_classes rejects empty classes and silent downsampling") {
    SynthCorpusSpec spec;
    spec.classes = 2;
    spec.per_class = 3;
    spec.tile_size = 16;
    spec.binning = PorosityBinning::equal_width(2, 0.0, 0.75);
    CorpusBuild corpus = synth_corpus(spec);

    BalanceOptions opts;
    opts.target_per_class = 2;
    CHECK_THROWS_AS(balance_classes(corpus, opts), ConfigError);
    opts.allow_downsample = true;
    balance_classes(corpus, opts);
    CHECK(corpus.tiles.size() == 4);

    corpus.tiles.erase(std::remove_if(corpus.tiles.begin(), corpus.tiles.end(),
                                      [](const TileData& t) { return t.rec.class_index == 0; }),
                       corpus.tiles.end());
    opts.target_per_class = 4;
    CHECK_THROWS_AS(balance_classes(corpus, opts), DataError);
}

TEST_CASE("augmented tiles keep segmentation-measured porosity") {
    SynthCorpusSpec spec;
    spec.classes = 2;
    spec.per_class = 1;
    spec.tile_size = 24;
    spec.binning = PorosityBinning::equal_width(2, 0.0, 0.75);
    CorpusBuild corpus = synth_corpus(spec);

    BalanceOptions opts;
    opts.target_per_class = 5;
    opts.seed = 12;
    balance_classes(corpus, opts);

    for (const auto& t : corpus.tiles) {
        const ColorImage img = from_rgb8(t.rgb.data(), corpus.tile_size, corpus.tile_size);
        const double measured = porosity_of(segment_pores(img, HSVThresholds{}));
        CHECK(measured == t.rec.porosity);
    }
}

TEST_CASE("synth_corpus labels tiles with their exact measured porosity") {
    SynthCorpusSpec spec;
    spec.classes = 10;
    spec.per_class = 3;
    spec.tile_size = 24;
    spec.seed = 21;
    const CorpusBuild corpus = synth_corpus(spec);
    CHECK(corpus.tiles.size() == 30);
    for (int c = 0; c < 10; ++c) CHECK(corpus.class_counts()[std::size_t(c)] == 3);
    for (const auto& t : corpus.tiles)
        CHECK(t.rec.class_index == corpus.binning.bin_for(t.rec.porosity));
}

TEST_CASE("write_corpus + load_corpus round-trips tiles and manifest") {
    const auto dir = temp_dir("roundtrip");
    SynthCorpusSpec spec;
    spec.classes = 4;
    spec.per_class = 2;
    spec.tile_size = 16;
    spec.binning = PorosityBinning::equal_width(4, 0.0, 0.75);
    spec.seed = 2;
    const CorpusBuild corpus = synth_corpus(spec);
    const CorpusManifest manifest = write_corpus(corpus, dir.string());

    CHECK(manifest.records.size() == 8);
    const auto counts = manifest.class_counts();
    std::size_t total = 0;
    for (auto c : counts) total += c;
    CHECK(total == manifest.records.size());

    const CorpusBuild loaded = load_corpus(dir.string());
    REQUIRE(loaded.tiles.size() == corpus.tiles.size());
    for (std::size_t i = 0; i < loaded.tiles.size(); ++i) {
        CHECK(loaded.tiles[i].rgb == corpus.tiles[i].rgb);
        CHECK(loaded.tiles[i].rec.porosity == corpus.tiles[i].rec.porosity);
    }
}

TEST_CASE("corpus builds are byte-deterministic for a fixed seed") {
    const auto dir1 = temp_dir("det1");
    const auto dir2 = temp_dir("det2");
    SynthCorpusSpec spec;
    spec.classes = 3;
    spec.per_class = 4;
    spec.tile_size = 16;
    spec.binning = PorosityBinning::equal_width(3, 0.0, 0.75);
    spec.seed = 31;

    write_corpus(synth_corpus(spec), dir1.string());
    write_corpus(synth_corpus(spec), dir2.string());

    CHECK(file_bytes(dir1 / "manifest.json") == file_bytes(dir2 / "manifest.json"));
    CHECK(file_bytes(dir1 / "tiles/0/t0000000.png") == file_bytes(dir2 / "tiles/0/t0000000.png"));
    CHECK(CorpusManifest::load(dir1.string()).digest() ==
          CorpusManifest::load(dir2.string()).digest());
}

TEST_CASE("ingest_corpus labels tiles against the pixel-count oracle") {
    const auto dir = temp_dir("ingest");
    const auto [img, mask] = synth_tile(77, 0.35, 512, 3.0);
    write_png((dir / "src.png").string(), img);

    IngestOptions opts;
    opts.tile_size = 256;
    opts.stride = 256;
    const CorpusBuild corpus = ingest_corpus({(dir / "src.png").string()}, opts);
    REQUIRE(corpus.tiles.size() == 4);

    const auto cuts = extract_tiles(img, 256, 256);
    for (std::size_t i = 0; i < 4; ++i) {
        const PoreMask tile_mask = segment_pores(cuts[i].image, opts.thresholds);
        std::size_t count = 0;
        for (auto bit : tile_mask.bits()) count += bit;
        CHECK(corpus.tiles[i].rec.porosity == double(count) / double(tile_mask.size()));
    }
}

TEST_CASE("ingest_corpus fails when balancing hits an empty class") {
    const auto dir = temp_dir("ingest_empty");
    const auto [img, mask] = synth_tile(78, 0.1, 128, 2.0); // low porosity only
    write_png((dir / "src.png").string(), img);

    IngestOptions opts;
    opts.tile_size = 64;
    opts.balance_to = 8;
    CHECK_THROWS_AS(ingest_corpus({(dir / "src.png").string()}, opts), DataError);
}
