// porogen: porosity-conditioned image synthesis pipeline.
//
// Subcommands: ingest, synth-corpus, train, generate, validate, logsynth.
// Configuration layers: config file < environment (POROGEN_*) < flags.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 checkpoint error,
// 1 unexpected failure.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "porogen/core/parallel.hpp"
#include "porogen/core/png_io.hpp"
#include "porogen/corpus.hpp"
#include "porogen/evaluation.hpp"
#include "porogen/render.hpp"
#include "porogen/training.hpp"
#include "porogen/welllog.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace porogen;

namespace {

// Accepts both TOML-style key/value files and JSON files: JSON objects are
// flattened into config items ({"train": {"epochs": 3}} -> [train] epochs=3).
class AutoConfig : public CLI::Config {
  public:
    std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                          std::string prefix) const override {
        return CLI::ConfigTOML{}.to_config(app, default_also, write_description, prefix);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        std::string text((std::istreambuf_iterator<char>(input)),
                         std::istreambuf_iterator<char>());
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && text[first] == '{') {
            json j;
            try {
                j = json::parse(text);
            } catch (const json::exception& e) {
                throw CLI::FileError(std::string("config JSON: ") + e.what());
            }
            std::vector<CLI::ConfigItem> items;
            flatten(j, {}, items);
            return items;
        }
        std::istringstream rest(text);
        return CLI::ConfigTOML{}.from_config(rest);
    }

  private:
    static void flatten(const json& j, std::vector<std::string> parents,
                        std::vector<CLI::ConfigItem>& out) {
        for (const auto& [key, value] : j.items()) {
            if (value.is_object()) {
                auto deeper = parents;
                deeper.push_back(key);
                flatten(value, deeper, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array())
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            else
                item.inputs.push_back(scalar(value));
            out.push_back(std::move(item));
        }
    }

    static std::string scalar(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        return v.dump();
    }
};

std::string env_name(std::string flag) {
    for (auto& c : flag) c = (c == '-') ? '_' : char(std::toupper(static_cast<unsigned char>(c)));
    return "POROGEN_" + flag;
}

// Adds the option and mirrors it as POROGEN_<NAME>.
template <typename T>
CLI::Option* opt(CLI::App* cmd, const std::string& name, T& var, const std::string& desc) {
    auto* o = cmd->add_option(name, var, desc);
    o->envname(env_name(name.substr(2)));
    return o;
}

CLI::Option* flg(CLI::App* cmd, const std::string& name, bool& var, const std::string& desc) {
    auto* o = cmd->add_flag(name, var, desc);
    o->envname(env_name(name.substr(2)));
    return o;
}

struct GlobalOpts {
    bool json = false;
    bool dry_run = false;
    int workers = 1;
};

void add_threshold_opts(CLI::App* cmd, HSVThresholds& th) {
    opt(cmd, "--hue-lo", th.hue_lo, "pore hue band lower bound, fraction in [0,1)");
    opt(cmd, "--hue-hi", th.hue_hi, "pore hue band upper bound, fraction in [0,1)");
    opt(cmd, "--sat-min", th.sat_min, "minimum saturation for pore pixels");
    opt(cmd, "--val-min", th.val_min, "minimum value for pore pixels");
}

void emit_summary(const GlobalOpts& g, const json& summary, const std::string& human) {
    if (g.json)
        std::cout << summary.dump() << std::endl;
    else
        std::cout << human << std::endl;
}

bool handle_dry_run(const GlobalOpts& g, const std::string& cmd, const json& resolved) {
    if (!g.dry_run) return false;
    json j;
    j["command"] = cmd;
    j["config"] = resolved;
    std::cout << j.dump(1) << std::endl;
    return true;
}

json thresholds_json(const HSVThresholds& th) {
    return {{"hue_lo", th.hue_lo},
            {"hue_hi", th.hue_hi},
            {"sat_min", th.sat_min},
            {"val_min", th.val_min}};
}

std::vector<std::string> png_sources(const std::string& src) {
    std::vector<std::string> paths;
    if (fs::is_directory(src)) {
        for (const auto& entry : fs::directory_iterator(src))
            if (entry.is_regular_file() && entry.path().extension() == ".png")
                paths.push_back(entry.path().string());
        std::sort(paths.begin(), paths.end());
    } else if (fs::exists(src)) {
        paths.push_back(src);
    }
    if (paths.empty()) throw DataError("ingest: no PNG sources under " + src);
    return paths;
}

json corpus_summary(const CorpusManifest& manifest, const std::string& out_dir) {
    json j;
    j["out"] = out_dir;
    j["tiles"] = manifest.records.size();
    j["per_class"] = manifest.class_counts();
    j["manifest_digest"] = manifest.digest();
    return j;
}

Checkpoint load_trained(const std::string& path, bool allow_untrained) {
    Checkpoint ckpt = load_checkpoint(path);
    if (!ckpt.trained() && !allow_untrained)
        throw CheckpointError("checkpoint is untrained (epoch 0); "
                              "pass --allow-untrained to proceed anyway");
    return ckpt;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"porogen: porosity-conditioned thin-section image synthesis"};
    app.require_subcommand(1);
    app.fallthrough(true);
    app.config_formatter(std::make_shared<AutoConfig>());
    app.set_config("--config", "", "configuration file (TOML key/value or JSON)");
    app.allow_config_extras(CLI::config_extras_mode::error);

    GlobalOpts g;
    app.add_flag("--json", g.json, "machine-readable JSON summary on stdout")
        ->envname("POROGEN_JSON");
    app.add_flag("--dry-run", g.dry_run, "validate configuration and print it; no side effects")
        ->envname("POROGEN_DRY_RUN");
    app.add_option("--workers", g.workers, "worker thread cap (1 = deterministic single-worker)")
        ->envname("POROGEN_WORKERS");

    // --- ingest ---------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "tile source images into a labeled corpus");
    struct {
        std::string src, out = "corpus";
        int tile = 256, stride = 0;
        std::size_t balance_to = 0;
        double holdout = 0.0;
        std::uint64_t seed = 0;
        int classes = 10;
        double bin_lo = 0.0, bin_hi = 0.75;
        HSVThresholds th;
    } ing;
    opt(ingest, "--src", ing.src, "source PNG file or directory")->required();
    opt(ingest, "--out", ing.out, "corpus output directory");
    opt(ingest, "--tile", ing.tile, "tile size in pixels");
    opt(ingest, "--stride", ing.stride, "tile stride; 0 = tile size (non-overlapping)");
    opt(ingest, "--balance-to", ing.balance_to, "augment every class up to this count");
    opt(ingest, "--holdout", ing.holdout, "seeded validation holdout fraction");
    opt(ingest, "--seed", ing.seed, "run seed");
    opt(ingest, "--classes", ing.classes, "number of porosity classes");
    opt(ingest, "--bin-lo", ing.bin_lo, "porosity axis lower edge");
    opt(ingest, "--bin-hi", ing.bin_hi, "porosity axis upper edge");
    add_threshold_opts(ingest, ing.th);

    ingest->callback([&] {
        set_worker_count(g.workers);
        IngestOptions opts;
        opts.tile_size = ing.tile;
        opts.stride = ing.stride;
        opts.thresholds = ing.th;
        opts.binning = PorosityBinning::equal_width(ing.classes, ing.bin_lo, ing.bin_hi);
        opts.balance_to = ing.balance_to;
        opts.holdout_fraction = ing.holdout;
        opts.seed = ing.seed;
        opts.thresholds.validate();

        json resolved{{"src", ing.src},
                      {"out", ing.out},
                      {"tile", ing.tile},
                      {"stride", ing.stride},
                      {"balance_to", ing.balance_to},
                      {"holdout", ing.holdout},
                      {"seed", ing.seed},
                      {"classes", ing.classes},
                      {"bin_lo", ing.bin_lo},
                      {"bin_hi", ing.bin_hi},
                      {"thresholds", thresholds_json(ing.th)}};
        if (handle_dry_run(g, "ingest", resolved)) return;

        const auto sources = png_sources(ing.src);
        std::cerr << "ingesting " << sources.size() << " image(s)\n";
        const CorpusBuild corpus = ingest_corpus(sources, opts);
        const CorpusManifest manifest = write_corpus(corpus, ing.out);
        emit_summary(g, corpus_summary(manifest, ing.out),
                     "wrote " + std::to_string(manifest.records.size()) + " tiles to " + ing.out);
    });

    // --- synth-corpus ----------------------------------------------------------
    auto* synth =
        app.add_subcommand("synth-corpus", "generate a synthetic corpus with exact ground truth");
    struct {
        int classes = 10;
        std::size_t per_class = 500;
        int size = 64;
        double blur = 2.0;
        std::uint64_t seed = 0;
        std::string out = "corpus";
        double bin_lo = 0.0, bin_hi = 0.75;
    } sc;
    opt(synth, "--classes", sc.classes, "number of porosity classes");
    opt(synth, "--per-class", sc.per_class, "tiles per class");
    opt(synth, "--size", sc.size, "tile size in pixels");
    opt(synth, "--blur", sc.blur, "blob blur radius in pixels");
    opt(synth, "--seed", sc.seed, "run seed");
    opt(synth, "--out", sc.out, "corpus output directory");
    opt(synth, "--bin-lo", sc.bin_lo, "porosity axis lower edge");
    opt(synth, "--bin-hi", sc.bin_hi, "porosity axis upper edge");

    synth->callback([&] {
        set_worker_count(g.workers);
        SynthCorpusSpec spec;
        spec.classes = sc.classes;
        spec.per_class = sc.per_class;
        spec.tile_size = sc.size;
        spec.blur_radius = sc.blur;
        spec.seed = sc.seed;
        spec.binning = PorosityBinning::equal_width(sc.classes, sc.bin_lo, sc.bin_hi);

        json resolved{{"classes", sc.classes}, {"per_class", sc.per_class}, {"size", sc.size},
                      {"blur", sc.blur},       {"seed", sc.seed},           {"out", sc.out},
                      {"bin_lo", sc.bin_lo},   {"bin_hi", sc.bin_hi}};
        if (handle_dry_run(g, "synth-corpus", resolved)) return;

        std::cerr << "synthesizing " << sc.classes * int(sc.per_class) << " tiles\n";
        const CorpusBuild corpus = synth_corpus(spec);
        const CorpusManifest manifest = write_corpus(corpus, sc.out);
        emit_summary(g, corpus_summary(manifest, sc.out),
                     "wrote " + std::to_string(manifest.records.size()) + " tiles to " + sc.out);
    });

    // --- train ------------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "adversarial training on a corpus");
    struct {
        std::string corpus = "corpus", out = "ckpt";
        int image_size = 0; // 0 = corpus tile size
        int classes = 0;    // 0 = corpus binning classes; set to cross-check
        int latent_dim = 100, base_channels = 64;
        bool no_batch_norm = false;
        double leaky_slope = 0.2;
        TrainingConfig tc;
    } t;
    opt(tr, "--corpus", t.corpus, "corpus directory");
    opt(tr, "--out", t.out, "checkpoint/log output directory");
    opt(tr, "--image-size", t.image_size, "network resolution; 0 = corpus tile size");
    opt(tr, "--classes", t.classes, "expected class count; must match the corpus");
    opt(tr, "--latent-dim", t.latent_dim, "latent vector length");
    opt(tr, "--base-channels", t.base_channels, "width of the first block");
    opt(tr, "--leaky-slope", t.leaky_slope, "LeakyReLU negative slope");
    flg(tr, "--no-batch-norm", t.no_batch_norm, "disable batch normalization");
    opt(tr, "--epochs", t.tc.epochs, "training epochs");
    opt(tr, "--batch", t.tc.batch_size, "batch size");
    opt(tr, "--lr", t.tc.learning_rate, "Adam learning rate");
    opt(tr, "--beta1", t.tc.adam_beta1, "Adam beta1");
    opt(tr, "--beta2", t.tc.adam_beta2, "Adam beta2");
    opt(tr, "--label-smoothing", t.tc.label_smoothing, "real-label smoothing");
    opt(tr, "--checkpoint-every", t.tc.checkpoint_every, "checkpoint cadence in epochs");
    opt(tr, "--seed", t.tc.seed, "run seed");

    tr->callback([&] {
        set_worker_count(g.workers);
        const CorpusManifest manifest = CorpusManifest::load(t.corpus);
        NetworkConfig cfg;
        cfg.image_size = t.image_size > 0 ? t.image_size : manifest.tile_size;
        cfg.num_classes = manifest.binning.num_classes();
        cfg.latent_dim = t.latent_dim;
        cfg.base_channels = t.base_channels;
        cfg.leaky_slope = t.leaky_slope;
        cfg.batch_norm = !t.no_batch_norm;
        cfg.validate();
        t.tc.validate();
        if (t.classes > 0 && t.classes != cfg.num_classes)
            throw ConfigError("train: corpus has " + std::to_string(cfg.num_classes) +
                              " classes, but --classes requested " + std::to_string(t.classes));

        json resolved{{"corpus", t.corpus},
                      {"out", t.out},
                      {"network",
                       {{"image_size", cfg.image_size},
                        {"num_classes", cfg.num_classes},
                        {"latent_dim", cfg.latent_dim},
                        {"base_channels", cfg.base_channels},
                        {"leaky_slope", cfg.leaky_slope},
                        {"batch_norm", cfg.batch_norm}}},
                      {"training",
                       {{"epochs", t.tc.epochs},
                        {"batch", t.tc.batch_size},
                        {"lr", t.tc.learning_rate},
                        {"beta1", t.tc.adam_beta1},
                        {"beta2", t.tc.adam_beta2},
                        {"label_smoothing", t.tc.label_smoothing},
                        {"checkpoint_every", t.tc.checkpoint_every},
                        {"seed", t.tc.seed}}}};
        if (handle_dry_run(g, "train", resolved)) return;

        const CorpusBuild corpus = load_corpus(t.corpus);
        Checkpoint ckpt = init_networks(cfg, corpus.binning, t.tc.seed);
        ckpt.state.manifest_digest = manifest.digest();

        std::cerr << "training on " << corpus.tiles.size() << " tiles\n";
        const auto reports = train(ckpt, corpus, t.tc, t.out, [&](const EpochReport& r) {
            std::cerr << "epoch " << r.epoch << "/" << t.tc.epochs
                      << " d_loss=" << format_number(r.d_loss, 4)
                      << " g_loss=" << format_number(r.g_loss, 4)
                      << " d_real=" << format_number(r.d_real, 3)
                      << " d_fake=" << format_number(r.d_fake, 3) << " ("
                      << format_number(r.seconds, 1) << "s)\n";
        });

        json summary{{"out", t.out},
                     {"epochs", ckpt.state.epoch},
                     {"checkpoint", (fs::path(t.out) / "final.ckpt").string()},
                     {"manifest_digest", ckpt.state.manifest_digest}};
        if (!reports.empty()) {
            summary["final_d_loss"] = reports.back().d_loss;
            summary["final_g_loss"] = reports.back().g_loss;
        }
        emit_summary(g, summary,
                     "trained " + std::to_string(ckpt.state.epoch) + " epochs; checkpoint at " +
                         (fs::path(t.out) / "final.ckpt").string());
    });

    // --- generate ----------------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "sample images for a porosity or class");
    struct {
        std::string ckpt, out = "generated";
        double phi = -1.0;
        int cls = -1;
        int n = 4;
        std::uint64_t seed = 0;
        bool allow_untrained = false;
        HSVThresholds th;
    } ge;
    opt(gen, "--ckpt", ge.ckpt, "checkpoint file")->required();
    opt(gen, "--out", ge.out, "output directory");
    opt(gen, "--phi", ge.phi, "target porosity; resolved through the checkpoint binning");
    opt(gen, "--class", ge.cls, "explicit class index (alternative to --phi)");
    opt(gen, "--n", ge.n, "number of samples");
    opt(gen, "--seed", ge.seed, "run seed");
    flg(gen, "--allow-untrained", ge.allow_untrained, "permit epoch-0 checkpoints");
    add_threshold_opts(gen, ge.th);

    gen->callback([&] {
        set_worker_count(g.workers);
        if ((ge.phi >= 0.0) == (ge.cls >= 0))
            throw ConfigError("generate: pass exactly one of --phi or --class");
        if (ge.n < 1) throw ConfigError("generate: --n must be >= 1");

        json resolved{{"ckpt", ge.ckpt}, {"out", ge.out}, {"phi", ge.phi},
                      {"class", ge.cls}, {"n", ge.n},     {"seed", ge.seed},
                      {"thresholds", thresholds_json(ge.th)}};
        if (handle_dry_run(g, "generate", resolved)) return;

        Checkpoint ckpt = load_trained(ge.ckpt, ge.allow_untrained);
        int cls = ge.cls;
        if (cls < 0) {
            try {
                cls = ckpt.binning.bin_for(ge.phi);
            } catch (const DomainError& e) {
                throw DataError(e.what()); // out-of-range phi with clamping disabled
            }
        } else if (cls >= ckpt.binning.num_classes()) {
            throw ConfigError("generate: class index out of range");
        }

        fs::create_directories(ge.out);
        json images = json::array();
        for (int i = 0; i < ge.n; ++i) {
            Rng rng(hash_u64(ge.seed, std::uint64_t(cls), std::uint64_t(i)));
            auto z = sample_latents<float>(1, ckpt.config.latent_dim, rng);
            const auto batch = generator_forward(ckpt.model, z, {cls}, false);
            const ColorImage img = batch_to_image(batch, 0);
            const double measured = porosity_of(segment_pores(img, ge.th));

            char name[48];
            std::snprintf(name, sizeof name, "gen_c%d_%03d.png", cls, i);
            const std::string path = (fs::path(ge.out) / name).string();
            write_png(path, img);
            images.push_back({{"path", path}, {"measured_porosity", measured}, {"class", cls}});
            if (!g.json)
                std::cout << path << " class=" << cls
                          << " measured_porosity=" << format_number(measured, 4) << "\n";
        }
        if (g.json) {
            json summary{{"class", cls}, {"images", images}};
            std::cout << summary.dump() << std::endl;
        }
    });

    // --- validate ------------------------------------------------------------------
    auto* val = app.add_subcommand("validate", "score conditioning fidelity per class");
    struct {
        std::string ckpt, out = "report";
        ValidateOptions vo;
    } va;
    opt(val, "--ckpt", va.ckpt, "checkpoint file")->required();
    opt(val, "--out", va.out, "report output directory");
    opt(val, "--per-class", va.vo.n_per_class, "samples per class");
    opt(val, "--margin", va.vo.margin, "acceptance margin");
    opt(val, "--margin-mode", va.vo.margin_mode, "range (fraction of bin width) or absolute")
        ->check(CLI::IsMember({"range", "absolute"}));
    opt(val, "--seed", va.vo.seed, "run seed");
    flg(val, "--allow-untrained", va.vo.allow_untrained, "permit epoch-0 checkpoints");
    add_threshold_opts(val, va.vo.thresholds);

    val->callback([&] {
        set_worker_count(g.workers);
        json resolved{{"ckpt", va.ckpt},
                      {"out", va.out},
                      {"per_class", va.vo.n_per_class},
                      {"margin", va.vo.margin},
                      {"margin_mode", va.vo.margin_mode},
                      {"seed", va.vo.seed},
                      {"thresholds", thresholds_json(va.vo.thresholds)}};
        if (handle_dry_run(g, "validate", resolved)) return;

        Checkpoint ckpt = load_checkpoint(va.ckpt);
        std::cerr << "validating " << ckpt.binning.num_classes() << " classes x "
                  << va.vo.n_per_class << " samples\n";
        const ValidationReport report = validate(ckpt, va.vo);

        fs::create_directories(va.out);
        report.save((fs::path(va.out) / "report.json").string());
        emit_scatter(report, ckpt.binning, (fs::path(va.out) / "scatter.csv").string(),
                     (fs::path(va.out) / "scatter.png").string());

        const auto means = class_mean_porosity(report, ckpt.binning.num_classes());
        std::vector<double> classes(means.size());
        for (std::size_t c = 0; c < classes.size(); ++c) classes[c] = double(c);
        const double spearman = spearman_rank(classes, means);

        json summary{{"overall_accuracy", report.overall_accuracy},
                     {"per_class_accuracy", report.per_class_accuracy},
                     {"class_mean_porosity", means},
                     {"spearman", spearman},
                     {"out", va.out}};
        emit_summary(g, summary,
                     "overall accuracy " + format_number(report.overall_accuracy * 100, 1) +
                         "% at margin " + format_number(report.margin, 2) + "; spearman " +
                         format_number(spearman, 3));
    });

    // --- logsynth ---------------------------------------------------------------------
    auto* ls = app.add_subcommand("logsynth", "synthesize an image track along a well log");
    struct {
        std::string log, ckpt, out = "track";
        TrackOptions to;
    } lo;
    opt(ls, "--log", lo.log, "well log CSV (depth_m,porosity)")->required();
    opt(ls, "--ckpt", lo.ckpt, "checkpoint file")->required();
    opt(ls, "--out", lo.out, "track output directory");
    opt(ls, "--k-per-depth", lo.to.k_per_depth, "images per log record");
    opt(ls, "--seed", lo.to.seed, "run seed");
    add_threshold_opts(ls, lo.to.thresholds);

    ls->callback([&] {
        set_worker_count(g.workers);
        json resolved{{"log", lo.log},
                      {"ckpt", lo.ckpt},
                      {"out", lo.out},
                      {"k_per_depth", lo.to.k_per_depth},
                      {"seed", lo.to.seed},
                      {"thresholds", thresholds_json(lo.to.thresholds)}};
        if (handle_dry_run(g, "logsynth", resolved)) return;

        const WellLog log = load_log(lo.log);
        Checkpoint ckpt = load_checkpoint(lo.ckpt);
        std::cerr << "synthesizing track for " << log.records.size() << " depths\n";
        const TrackManifest manifest = synthesize_track(ckpt, log, lo.to, lo.out);
        render_track(manifest, log, lo.out, (fs::path(lo.out) / "track.png").string());

        json summary{{"out", lo.out},
                     {"entries", manifest.entries.size()},
                     {"track_png", (fs::path(lo.out) / "track.png").string()},
                     {"checkpoint_digest", manifest.checkpoint_digest}};
        emit_summary(g, summary,
                     "track with " + std::to_string(manifest.entries.size()) + " depths at " +
                         lo.out);
    });

    try {
        app.parse(argc, argv);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
