#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "porogen/binning.hpp"
#include "porogen/core/image.hpp"
#include "porogen/core/rng.hpp"
#include "porogen/nn/adam.hpp"
#include "porogen/nn/loss.hpp"
#include "porogen/nn/sequential.hpp"

// Conditional DCGAN-family generator/discriminator pair. The generator takes
// a latent vector with the class indicator concatenated, projects to a 4x4
// grid and upsamples with stride-2 transposed convolutions; the discriminator
// sees the image with the class indicator broadcast as constant planes and
// downsamples with stride-2 convolutions into a sigmoid head.

namespace porogen {

struct NetworkConfig {
    int image_size = 256;   // power of two, >= 16
    int num_classes = 10;
    int latent_dim = 100;
    int base_channels = 64; // width doubles per block, capped at 8x
    double leaky_slope = 0.2;
    bool batch_norm = true;

    void validate() const {
        if (image_size < 16 || (image_size & (image_size - 1)) != 0)
            throw ConfigError("NetworkConfig: image_size must be a power of two >= 16");
        if (num_classes < 2) throw ConfigError("NetworkConfig: num_classes must be >= 2");
        if (latent_dim < 1) throw ConfigError("NetworkConfig: latent_dim must be >= 1");
        if (base_channels < 1) throw ConfigError("NetworkConfig: base_channels must be >= 1");
        if (!(leaky_slope >= 0.0 && leaky_slope < 1.0))
            throw ConfigError("NetworkConfig: leaky_slope must lie in [0,1)");
    }

    int gen_up_blocks() const { return log2i(image_size / 4); }
    int disc_down_blocks() const { return log2i(image_size / 8); }

    /// Channels entering generator up-block i (block 0 sees the projection).
    int gen_channels(int i) const {
        const int B = gen_up_blocks();
        return std::min(base_channels << (B - 1 - i), base_channels * 8);
    }

    /// Channels leaving discriminator down-block i.
    int disc_channels(int i) const { return std::min(base_channels << i, base_channels * 8); }

    bool operator==(const NetworkConfig& o) const {
        return image_size == o.image_size && num_classes == o.num_classes &&
               latent_dim == o.latent_dim && base_channels == o.base_channels &&
               leaky_slope == o.leaky_slope && batch_norm == o.batch_norm;
    }

  private:
    static int log2i(int v) {
        int n = 0;
        while (v > 1) {
            v >>= 1;
            ++n;
        }
        return n;
    }
};

template <typename T>
struct CganModel {
    NetworkConfig cfg;
    nn::Sequential<T> gen;
    nn::Sequential<T> disc;

    std::vector<nn::ParamRef<T>> gen_params() { return collect(gen, "g").first; }
    std::vector<nn::ParamRef<T>> disc_params() { return collect(disc, "d").first; }

    /// All named tensors (params + buffers) of both networks.
    std::vector<nn::ParamRef<T>> named_tensors() {
        auto [gp, gb] = collect(gen, "g");
        auto [dp, db] = collect(disc, "d");
        std::vector<nn::ParamRef<T>> all;
        for (auto* v : {&gp, &gb, &dp, &db})
            all.insert(all.end(), v->begin(), v->end());
        return all;
    }

  private:
    static std::pair<std::vector<nn::ParamRef<T>>, std::vector<nn::ParamRef<T>>>
    collect(nn::Sequential<T>& net, const std::string& prefix) {
        std::vector<nn::ParamRef<T>> p, b;
        net.collect(prefix, p, b);
        return {std::move(p), std::move(b)};
    }
};

/// Assembles both networks for the config; parameters are zero until
/// init_params (or a checkpoint load) fills them.
template <typename T>
CganModel<T> build_model(const NetworkConfig& cfg);

/// Seeded Gaussian initialization: weights N(0, 0.02), batch-norm gains
/// N(1, 0.02), biases/offsets zero. Identical seed gives identical parameters.
template <typename T>
void init_params(CganModel<T>& model, std::uint64_t seed);

// --- conditioning ----------------------------------------------------------

/// Concatenates the class indicator onto each latent row: (N,L) -> (N,L+K).
template <typename T>
nn::Tensor<T> make_gen_input(const nn::Tensor<T>& z, const std::vector<int>& labels,
                             const NetworkConfig& cfg);

/// Appends K constant indicator planes: (N,3,S,S) -> (N,3+K,S,S).
template <typename T>
nn::Tensor<T> make_disc_input(const nn::Tensor<T>& images, const std::vector<int>& labels,
                              const NetworkConfig& cfg);

/// Generator forward: z rows (N,L), one class label per row -> images
/// (N,3,S,S) with every value in [-1,1]. train=false uses running batch-norm
/// statistics, so results are independent of batch composition.
template <typename T>
nn::Tensor<T> generator_forward(CganModel<T>& model, const nn::Tensor<T>& z,
                                const std::vector<int>& labels, bool train = false);

/// Discriminator forward returning raw logits (N,1).
template <typename T>
nn::Tensor<T> discriminator_logits(CganModel<T>& model, const nn::Tensor<T>& images,
                                   const std::vector<int>& labels, bool train = false);

/// Discriminator forward returning sigmoid scores strictly inside (0,1).
template <typename T>
nn::Tensor<T> discriminator_forward(CganModel<T>& model, const nn::Tensor<T>& images,
                                    const std::vector<int>& labels, bool train = false);

/// Seeded standard-normal latent batch.
template <typename T>
nn::Tensor<T> sample_latents(std::int64_t n, int latent_dim, Rng& rng);

// --- image <-> tensor ---------------------------------------------------------

/// [0,1] RGB8 tile bytes -> network range [-1,1], one batch item.
nn::Tensor<float> tiles_to_batch(const std::vector<const std::uint8_t*>& tiles, int size);

/// Network output row n -> [0,1] image (values clamped, then 8-bit snapped so
/// measurements match the PNG that would be written).
ColorImage batch_to_image(const nn::Tensor<float>& batch, std::int64_t n);

// --- checkpoints ------------------------------------------------------------------

inline constexpr const char* kCheckpointMagic = "POROGEN-CKPT-1";

struct TrainState {
    std::int64_t epoch = 0;
    std::uint64_t seed = 0;
    std::string manifest_digest;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    std::int64_t g_step = 0;
    std::int64_t d_step = 0;
    std::map<std::string, nn::Tensor<float>> opt_tensors; // opt.{g,d}.<param>.{m,v}
};

/// Self-describing training artifact: config + binning + parameters +
/// optimizer state, all keyed by layer name.
struct Checkpoint {
    NetworkConfig config;
    PorosityBinning binning;
    TrainState state;
    CganModel<float> model;

    bool trained() const { return state.epoch > 0; }
};

Checkpoint init_networks(const NetworkConfig& cfg, const PorosityBinning& binning,
                         std::uint64_t seed);

void save_checkpoint(Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Digest of the checkpoint's canonical header JSON; used for provenance in
/// reports and track manifests.
std::string checkpoint_digest(const Checkpoint& ckpt);

} // namespace porogen
