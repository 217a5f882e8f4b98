#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "porogen/cgan.hpp"
#include "porogen/corpus.hpp"
#include "porogen/nn/loss.hpp"

// Adversarial loop: per batch, one Adam step on the discriminator (real
// against 1, fresh fakes against 0), then one Adam step on the generator
// (fresh fakes scored by the updated discriminator against 1).
//
// Reported losses follow the convention
//   D loss = bce(real, 1) + bce(fake, 0),   G loss = bce(fake, 1),
// which equal 2*ln2 and ln2 at the uninformative score 0.5.

namespace porogen {

struct TrainingConfig {
    double learning_rate = 2e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    int epochs = 100;
    int batch_size = 64;
    std::uint64_t seed = 0;
    int checkpoint_every = 10;
    double label_smoothing = 0.0; // real-label target becomes 1 - s

    void validate() const {
        // learning_rate 0 is legal: a degenerate optimizer that reports losses
        // without moving parameters.
        if (learning_rate < 0.0) throw ConfigError("training: learning_rate must be >= 0");
        if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
            throw ConfigError("training: betas must lie in [0,1)");
        if (epochs < 1) throw ConfigError("training: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("training: batch_size must be >= 1");
        if (checkpoint_every < 1) throw ConfigError("training: checkpoint_every must be >= 1");
        if (!(label_smoothing >= 0.0 && label_smoothing < 0.5))
            throw ConfigError("training: label_smoothing must lie in [0,0.5)");
    }
};

struct EpochReport {
    int epoch = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double d_real = 0.0; // mean D score on real images
    double d_fake = 0.0; // mean D score on generated images
    double seconds = 0.0;

    std::string to_json_line() const;
};

struct StepLosses {
    double d_loss = 0.0;
    double g_loss = 0.0;
    double d_real = 0.0;
    double d_fake = 0.0;
};

/// Epoch-e shuffle permutation; depends only on (seed, e).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch);

/// Owns the two Adam optimizers bound to a checkpoint's networks.
class Trainer {
  public:
    Trainer(Checkpoint& ckpt, const TrainingConfig& cfg);

    /// One adversarial step on a batch of RGB8 tiles with class labels.
    /// Fake batches reuse the real batch's labels, so the discriminator never
    /// sees a class imbalance between the streams.
    StepLosses step(const std::vector<const std::uint8_t*>& tiles, const std::vector<int>& labels,
                    Rng& rng);

    /// Copies optimizer moments/steps into the checkpoint state (and back).
    void sync_state_to_checkpoint();
    void restore_state_from_checkpoint();

  private:
    Checkpoint& ckpt_;
    TrainingConfig cfg_;
    nn::Adam<float> opt_g_;
    nn::Adam<float> opt_d_;
};

/// Full loop over the corpus train split: seeded shuffle each epoch,
/// drop-tail batching, periodic checkpoints plus a final one, and a JSON-lines
/// log (one EpochReport per line) under out_dir. Deterministic for a fixed
/// seed in single-worker mode.
std::vector<EpochReport> train(Checkpoint& ckpt, const CorpusBuild& corpus,
                               const TrainingConfig& cfg, const std::string& out_dir,
                               const std::function<void(const EpochReport&)>& on_epoch = {});

} // namespace porogen
