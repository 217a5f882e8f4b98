#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "porogen/training.hpp"

using namespace porogen;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "porogen_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

CorpusBuild tiny_corpus(int classes = 4, std::size_t per_class = 4, int size = 16) {
    SynthCorpusSpec spec;
    spec.classes = classes;
    spec.per_class = per_class;
    spec.tile_size = size;
    spec.blur_radius = 1.0;
    spec.binning = PorosityBinning::equal_width(classes, 0.0, 0.75);
    spec.seed = 100;
    return synth_corpus(spec);
}

Checkpoint tiny_checkpoint(const CorpusBuild& corpus, std::uint64_t seed = 7) {
    NetworkConfig cfg;
    cfg.image_size = corpus.tile_size;
    cfg.num_classes = corpus.binning.num_classes();
    cfg.latent_dim = 12;
    cfg.base_channels = 4;
    return init_networks(cfg, corpus.binning, seed);
}

std::vector<float> param_values(CganModel<float>& m) {
    std::vector<float> out;
    for (auto& ref : m.named_tensors())
        out.insert(out.end(), ref.value->raw().begin(), ref.value->raw().end());
    return out;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("epoch permutation depends only on (seed, epoch)") {
    const auto a = epoch_permutation(100, 5, 3);
    const auto b = epoch_permutation(100, 5, 3);
    const auto c = epoch_permutation(100, 5, 4);
    const auto d = epoch_permutation(100, 6, 3);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a != d);

    // it is a permutation
    std::vector<char> seen(100, 0);
    for (auto i : a) seen[i] = 1;
    for (char s : seen) CHECK(s == 1);
}

TEST_CASE("train_step moves both parameter sets and reports near-ln2 losses at init") {
    const CorpusBuild corpus = tiny_corpus();
    Checkpoint ckpt = tiny_checkpoint(corpus);

    TrainingConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 1;
    Trainer trainer(ckpt, cfg);

    const std::vector<float> before = param_values(ckpt.model);

    std::vector<const std::uint8_t*> tiles;
    std::vector<int> labels;
    for (std::size_t i = 0; i < 8; ++i) {
        tiles.push_back(corpus.tiles[i].rgb.data());
        labels.push_back(corpus.tiles[i].rec.class_index);
    }
    Rng rng(1);
    const StepLosses l = trainer.step(tiles, labels, rng);

    // untrained discriminator scores sit near 0.5, so the loss convention
    // pins D loss near 2*ln2 and G loss near ln2
    CHECK(l.d_loss == doctest::Approx(2 * std::log(2.0)).epsilon(0.15));
    CHECK(l.g_loss == doctest::Approx(std::log(2.0)).epsilon(0.25));
    CHECK(l.d_real > 0.4);
    CHECK(l.d_real < 0.6);
    CHECK(l.d_fake > 0.4);
    CHECK(l.d_fake < 0.6);

    const std::vector<float> after = param_values(ckpt.model);
    CHECK(before != after);
}

TEST_CASE("train_step with zero learning rate reports losses without moving parameters") {
    const CorpusBuild corpus = tiny_corpus();
    Checkpoint ckpt = tiny_checkpoint(corpus);

    TrainingConfig cfg;
    cfg.learning_rate = 0.0;
    Trainer trainer(ckpt, cfg);

    // batch-norm running statistics do move in train mode; compare trainable
    // parameters only
    std::vector<float> before;
    for (auto& p : ckpt.model.gen_params()) {
        before.insert(before.end(), p.value->raw().begin(), p.value->raw().end());
    }
    for (auto& p : ckpt.model.disc_params())
        before.insert(before.end(), p.value->raw().begin(), p.value->raw().end());

    std::vector<const std::uint8_t*> tiles{corpus.tiles[0].rgb.data(),
                                           corpus.tiles[1].rgb.data()};
    std::vector<int> labels{corpus.tiles[0].rec.class_index, corpus.tiles[1].rec.class_index};
    Rng rng(2);
    const StepLosses l = trainer.step(tiles, labels, rng);
    CHECK(l.d_loss > 0.0);
    CHECK(l.g_loss > 0.0);

    std::vector<float> after;
    for (auto& p : ckpt.model.gen_params())
        after.insert(after.end(), p.value->raw().begin(), p.value->raw().end());
    for (auto& p : ckpt.model.disc_params())
        after.insert(after.end(), p.value->raw().begin(), p.value->raw().end());
    CHECK(before == after);
}

TEST_CASE("train_step rejects an empty batch") {
    const CorpusBuild corpus = tiny_corpus();
    Checkpoint ckpt = tiny_checkpoint(corpus);
    TrainingConfig cfg;
    Trainer trainer(ckpt, cfg);
    Rng rng(3);
    CHECK_THROWS_AS(trainer.step({}, {}, rng), DomainError);
}

TEST_CASE("training config validation") {
    TrainingConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.learning_rate = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainingConfig{};
    cfg.adam_beta1 = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainingConfig{};
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainingConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("train runs the bookkeeping: steps, log lines, checkpoints") {
    const auto dir = temp_dir("train_bookkeeping");
    const CorpusBuild corpus = tiny_corpus(4, 4, 16); // 16 tiles
    Checkpoint ckpt = tiny_checkpoint(corpus);

    TrainingConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 4; // 4 steps
    cfg.seed = 11;

    int epochs_seen = 0;
    const auto reports = train(ckpt, corpus, cfg, dir.string(),
                               [&](const EpochReport&) { ++epochs_seen; });
    CHECK(reports.size() == 1);
    CHECK(epochs_seen == 1);
    CHECK(reports[0].epoch == 1);
    CHECK(reports[0].d_loss >= 0.0);
    CHECK(reports[0].g_loss >= 0.0);
    CHECK(reports[0].d_real > 0.0);
    CHECK(reports[0].d_real < 1.0);
    CHECK(ckpt.state.epoch == 1);
    CHECK(fs::exists(dir / "final.ckpt"));

    std::ifstream log(dir / "train_log.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(log, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 1);
}

TEST_CASE("train rejects corpus/config mismatches") {
    const auto dir = temp_dir("train_mismatch");
    const CorpusBuild corpus = tiny_corpus(4, 2, 16);

    NetworkConfig cfg;
    cfg.image_size = 16;
    cfg.num_classes = 10; // corpus has 4
    cfg.latent_dim = 8;
    cfg.base_channels = 4;
    Checkpoint ckpt = init_networks(cfg, PorosityBinning::default_bins(), 1);

    TrainingConfig tcfg;
    tcfg.epochs = 1;
    CHECK_THROWS_AS(train(ckpt, corpus, tcfg, dir.string()), ConfigError);
}

TEST_CASE("identical seeds give byte-identical final checkpoints") {
    const auto dir1 = temp_dir("train_det1");
    const auto dir2 = temp_dir("train_det2");
    const CorpusBuild corpus = tiny_corpus(4, 4, 16);

    for (const auto& dir : {dir1, dir2}) {
        Checkpoint ckpt = tiny_checkpoint(corpus, 9);
        TrainingConfig cfg;
        cfg.epochs = 2;
        cfg.batch_size = 4;
        cfg.seed = 33;
        train(ckpt, corpus, cfg, dir.string());
    }
    CHECK(file_bytes(dir1 / "final.ckpt") == file_bytes(dir2 / "final.ckpt"));
}

TEST_CASE("optimizer state survives a checkpoint round trip") {
    const auto dir = temp_dir("train_resume");
    const CorpusBuild corpus = tiny_corpus(4, 4, 16);
    Checkpoint ckpt = tiny_checkpoint(corpus, 15);

    TrainingConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.seed = 5;
    train(ckpt, corpus, cfg, dir.string());

    Checkpoint loaded = load_checkpoint((dir / "final.ckpt").string());
    CHECK(loaded.state.g_step == ckpt.state.g_step);
    CHECK(loaded.state.d_step == ckpt.state.d_step);
    CHECK(!loaded.state.opt_tensors.empty());
    // a trainer can re-attach to the restored state
    Trainer trainer(loaded, cfg);
    std::vector<const std::uint8_t*> tiles{corpus.tiles[0].rgb.data()};
    std::vector<int> labels{corpus.tiles[0].rec.class_index};
    Rng rng(8);
    CHECK_NOTHROW(trainer.step(tiles, labels, rng));
}
