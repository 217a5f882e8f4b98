#include "porogen/training.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace porogen {

std::string EpochReport::to_json_line() const {
    json j;
    j["epoch"] = epoch;
    j["d_loss"] = d_loss;
    j["g_loss"] = g_loss;
    j["d_real"] = d_real;
    j["d_fake"] = d_fake;
    j["seconds"] = seconds;
    return j.dump();
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t(0));
    Rng rng(hash_u64(seed, hash_tag("shuffle"), std::uint64_t(epoch)));
    shuffle_in_place(perm, rng);
    return perm;
}

Trainer::Trainer(Checkpoint& ckpt, const TrainingConfig& cfg)
    : ckpt_(ckpt), cfg_(cfg),
      opt_g_(float(cfg.learning_rate), float(cfg.adam_beta1), float(cfg.adam_beta2)),
      opt_d_(float(cfg.learning_rate), float(cfg.adam_beta1), float(cfg.adam_beta2)) {
    cfg_.validate();
    opt_g_.attach(ckpt_.model.gen_params());
    opt_d_.attach(ckpt_.model.disc_params());
    ckpt_.state.lr = cfg.learning_rate;
    ckpt_.state.beta1 = cfg.adam_beta1;
    ckpt_.state.beta2 = cfg.adam_beta2;
    if (!ckpt_.state.opt_tensors.empty()) restore_state_from_checkpoint();
}

StepLosses Trainer::step(const std::vector<const std::uint8_t*>& tiles,
                         const std::vector<int>& labels, Rng& rng) {
    if (tiles.empty()) throw DomainError("train_step: empty batch");
    if (tiles.size() != labels.size())
        throw DomainError("train_step: one label per tile required");

    auto& model = ckpt_.model;
    const auto N = std::int64_t(tiles.size());
    const float real_target = float(1.0 - cfg_.label_smoothing);

    StepLosses out;

    // (a) discriminator update: real vs 1, fresh fakes vs 0
    model.disc.zero_grads();

    const nn::Tensor<float> real = tiles_to_batch(tiles, model.cfg.image_size);
    const auto scores_real = nn::sigmoid_all(discriminator_logits(model, real, labels, true));
    out.d_loss += double(nn::bce_mean(scores_real, real_target));
    model.disc.backward(nn::bce_grad_wrt_logits(scores_real, real_target));

    nn::Tensor<float> z = sample_latents<float>(N, model.cfg.latent_dim, rng);
    const nn::Tensor<float> fake = generator_forward(model, z, labels, true);
    const auto scores_fake = nn::sigmoid_all(discriminator_logits(model, fake, labels, true));
    out.d_loss += double(nn::bce_mean(scores_fake, 0.0f));
    model.disc.backward(nn::bce_grad_wrt_logits(scores_fake, 0.0f));

    opt_d_.step(model.disc_params());

    double sr = 0, sf = 0;
    for (std::int64_t i = 0; i < N; ++i) {
        sr += double(scores_real[std::size_t(i)]);
        sf += double(scores_fake[std::size_t(i)]);
    }
    out.d_real = sr / double(N);
    out.d_fake = sf / double(N);

    // (b) generator update: fresh fakes scored by the updated discriminator vs 1
    model.gen.zero_grads();
    model.disc.zero_grads(); // scratch; D gradients from this pass are discarded

    nn::Tensor<float> z2 = sample_latents<float>(N, model.cfg.latent_dim, rng);
    const nn::Tensor<float> fake2 = generator_forward(model, z2, labels, true);
    const auto scores2 = nn::sigmoid_all(discriminator_logits(model, fake2, labels, true));
    out.g_loss = double(nn::bce_mean(scores2, 1.0f));

    const nn::Tensor<float> dinput = model.disc.backward(nn::bce_grad_wrt_logits(scores2, 1.0f));
    // keep only the gradient of the image channels, not the condition planes
    const int S = model.cfg.image_size;
    const std::int64_t plane = std::int64_t(S) * S;
    const std::int64_t in_ch = 3 + model.cfg.num_classes;
    nn::Tensor<float> dimg({N, 3, S, S});
    for (std::int64_t n = 0; n < N; ++n)
        std::copy_n(dinput.data() + n * in_ch * plane, 3 * plane, dimg.data() + n * 3 * plane);
    model.gen.backward(dimg);

    opt_g_.step(model.gen_params());
    return out;
}

void Trainer::sync_state_to_checkpoint() {
    auto sync = [this](const char* net, nn::Adam<float>& opt,
                       const std::vector<nn::ParamRef<float>>& params) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            ckpt_.state.opt_tensors["opt." + params[i].name + ".m"] = opt.moments1()[i];
            ckpt_.state.opt_tensors["opt." + params[i].name + ".v"] = opt.moments2()[i];
        }
        (void)net;
    };
    sync("g", opt_g_, ckpt_.model.gen_params());
    sync("d", opt_d_, ckpt_.model.disc_params());
    ckpt_.state.g_step = opt_g_.step_count();
    ckpt_.state.d_step = opt_d_.step_count();
}

void Trainer::restore_state_from_checkpoint() {
    auto restore = [this](nn::Adam<float>& opt, const std::vector<nn::ParamRef<float>>& params,
                          std::int64_t steps) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto m = ckpt_.state.opt_tensors.find("opt." + params[i].name + ".m");
            const auto v = ckpt_.state.opt_tensors.find("opt." + params[i].name + ".v");
            if (m == ckpt_.state.opt_tensors.end() || v == ckpt_.state.opt_tensors.end())
                throw CheckpointError("optimizer state missing for " + params[i].name);
            opt.moments1()[i] = m->second;
            opt.moments2()[i] = v->second;
        }
        opt.set_step_count(steps);
    };
    restore(opt_g_, ckpt_.model.gen_params(), ckpt_.state.g_step);
    restore(opt_d_, ckpt_.model.disc_params(), ckpt_.state.d_step);
}

std::vector<EpochReport> train(Checkpoint& ckpt, const CorpusBuild& corpus,
                               const TrainingConfig& cfg, const std::string& out_dir,
                               const std::function<void(const EpochReport&)>& on_epoch) {
    cfg.validate();
    corpus.binning.validate();
    if (corpus.binning.num_classes() != ckpt.config.num_classes)
        throw ConfigError("train: corpus has " + std::to_string(corpus.binning.num_classes()) +
                          " classes but network expects " +
                          std::to_string(ckpt.config.num_classes));
    if (corpus.tile_size != ckpt.config.image_size)
        throw ConfigError("train: corpus tile size " + std::to_string(corpus.tile_size) +
                          " does not match network image_size " +
                          std::to_string(ckpt.config.image_size));

    std::vector<const std::uint8_t*> tile_ptrs;
    std::vector<int> tile_labels;
    for (const auto& t : corpus.tiles) {
        if (t.rec.split != "train") continue;
        tile_ptrs.push_back(t.rgb.data());
        tile_labels.push_back(t.rec.class_index);
    }
    if (tile_ptrs.empty()) throw DataError("train: corpus has no training tiles");

    fs::create_directories(out_dir);
    std::ofstream log(fs::path(out_dir) / "train_log.jsonl",
                      ckpt.state.epoch > 0 ? std::ios::app : std::ios::trunc);

    const std::size_t n = tile_ptrs.size();
    const std::size_t batch = std::min<std::size_t>(std::size_t(cfg.batch_size), n);
    const std::size_t steps = n / batch;

    Trainer trainer(ckpt, cfg);
    Rng train_rng(hash_u64(cfg.seed, hash_tag("train")));
    ckpt.state.seed = cfg.seed;

    std::vector<EpochReport> reports;
    auto save = [&](const std::string& name) {
        trainer.sync_state_to_checkpoint();
        save_checkpoint(ckpt, (fs::path(out_dir) / name).string());
    };

    for (int e = int(ckpt.state.epoch) + 1; e <= cfg.epochs; ++e) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto perm = epoch_permutation(n, cfg.seed, e);

        EpochReport rep;
        rep.epoch = e;
        for (std::size_t s = 0; s < steps; ++s) {
            std::vector<const std::uint8_t*> bt(batch);
            std::vector<int> bl(batch);
            for (std::size_t i = 0; i < batch; ++i) {
                bt[i] = tile_ptrs[perm[s * batch + i]];
                bl[i] = tile_labels[perm[s * batch + i]];
            }
            const StepLosses l = trainer.step(bt, bl, train_rng);
            rep.d_loss += l.d_loss;
            rep.g_loss += l.g_loss;
            rep.d_real += l.d_real;
            rep.d_fake += l.d_fake;
        }
        rep.d_loss /= double(steps);
        rep.g_loss /= double(steps);
        rep.d_real /= double(steps);
        rep.d_fake /= double(steps);
        rep.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        ckpt.state.epoch = e;
        log << rep.to_json_line() << '\n';
        log.flush();
        if (on_epoch) on_epoch(rep);
        reports.push_back(rep);

        if (e % cfg.checkpoint_every == 0 && e != cfg.epochs) {
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%04d.ckpt", e);
            save(name);
        }
    }
    save("final.ckpt");
    return reports;
}

} // namespace porogen
