#include "porogen/cgan.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

using nlohmann::json;

namespace porogen {

namespace {

std::string blk(const char* stem, int i) { return stem + std::to_string(i); }

} // namespace

template <typename T>
CganModel<T> build_model(const NetworkConfig& cfg) {
    cfg.validate();
    CganModel<T> m;
    m.cfg = cfg;
    const T slope = T(cfg.leaky_slope);

    // Generator: project to 4x4, then log2(S/4) stride-2 up-blocks; LeakyReLU
    // inside, tanh on the output block.
    {
        const int B = cfg.gen_up_blocks();
        const int c_top = cfg.gen_channels(0);
        m.gen.template add<nn::Dense<T>>("proj", cfg.latent_dim + cfg.num_classes,
                                         std::int64_t(c_top) * 16);
        m.gen.template add<nn::ReshapeToImage<T>>("proj_reshape", c_top, 4, 4);
        if (cfg.batch_norm) m.gen.template add<nn::BatchNorm2d<T>>("proj_bn", c_top);
        m.gen.template add<nn::LeakyReLU<T>>("proj_act", slope);
        for (int i = 0; i < B; ++i) {
            const int in_ch = cfg.gen_channels(i);
            const int out_ch = (i == B - 1) ? 3 : cfg.gen_channels(i + 1);
            m.gen.template add<nn::ConvTranspose2d<T>>(blk("up", i), in_ch, out_ch, 4, 2, 1);
            if (i < B - 1) {
                if (cfg.batch_norm)
                    m.gen.template add<nn::BatchNorm2d<T>>(blk("up", i) + "_bn", out_ch);
                m.gen.template add<nn::LeakyReLU<T>>(blk("up", i) + "_act", slope);
            }
        }
        m.gen.template add<nn::Tanh<T>>("out_act");
    }

    // Discriminator: log2(S/8) stride-2 down-blocks to an 8x8 grid, then a
    // dense head. Batch norm everywhere except the input block.
    {
        const int D = cfg.disc_down_blocks();
        int in_ch = 3 + cfg.num_classes;
        for (int i = 0; i < D; ++i) {
            const int out_ch = cfg.disc_channels(i);
            m.disc.template add<nn::Conv2d<T>>(blk("down", i), in_ch, out_ch, 4, 2, 1);
            if (i > 0 && cfg.batch_norm)
                m.disc.template add<nn::BatchNorm2d<T>>(blk("down", i) + "_bn", out_ch);
            m.disc.template add<nn::LeakyReLU<T>>(blk("down", i) + "_act", slope);
            in_ch = out_ch;
        }
        m.disc.template add<nn::Flatten<T>>("flatten");
        m.disc.template add<nn::Dense<T>>("head", std::int64_t(in_ch) * 64, 1);
    }
    return m;
}

template <typename T>
void init_params(CganModel<T>& model, std::uint64_t seed) {
    Rng rng(hash_u64(seed, hash_tag("init")));
    auto init_set = [&rng](std::vector<nn::ParamRef<T>> params) {
        for (auto& p : params) {
            const bool gain = p.name.size() >= 6 && p.name.ends_with(".gamma");
            const bool offset = p.name.ends_with(".b") || p.name.ends_with(".beta");
            for (std::int64_t i = 0; i < p.value->numel(); ++i) {
                if (offset)
                    (*p.value)[std::size_t(i)] = T(0);
                else
                    (*p.value)[std::size_t(i)] = T(rng.gaussian(gain ? 1.0 : 0.0, 0.02));
            }
        }
    };
    init_set(model.gen_params());
    init_set(model.disc_params());
}

template <typename T>
nn::Tensor<T> make_gen_input(const nn::Tensor<T>& z, const std::vector<int>& labels,
                             const NetworkConfig& cfg) {
    const std::int64_t N = z.dim(0);
    if (z.ndim() != 2 || z.dim(1) != cfg.latent_dim)
        throw DomainError("generator: latent length must be " + std::to_string(cfg.latent_dim));
    if (std::int64_t(labels.size()) != N)
        throw DomainError("generator: one label per latent row required");
    const int K = cfg.num_classes;
    nn::Tensor<T> in({N, std::int64_t(cfg.latent_dim) + K});
    for (std::int64_t n = 0; n < N; ++n) {
        const int c = labels[std::size_t(n)];
        if (c < 0 || c >= K)
            throw DomainError("generator: class_index " + std::to_string(c) +
                              " out of range [0," + std::to_string(K) + ")");
        T* row = in.data() + n * (cfg.latent_dim + K);
        std::memcpy(row, z.data() + n * cfg.latent_dim, sizeof(T) * std::size_t(cfg.latent_dim));
        for (int k = 0; k < K; ++k) row[cfg.latent_dim + k] = (k == c) ? T(1) : T(0);
    }
    return in;
}

template <typename T>
nn::Tensor<T> make_disc_input(const nn::Tensor<T>& images, const std::vector<int>& labels,
                              const NetworkConfig& cfg) {
    const int S = cfg.image_size;
    if (images.ndim() != 4 || images.dim(1) != 3 || images.dim(2) != S || images.dim(3) != S)
        throw DomainError("discriminator: image shape must be (N,3," + std::to_string(S) + "," +
                          std::to_string(S) + "), got " +
                          nn::Tensor<T>::shape_str(images.shape()));
    const std::int64_t N = images.dim(0);
    if (std::int64_t(labels.size()) != N)
        throw DomainError("discriminator: one label per image required");
    const int K = cfg.num_classes;
    const std::int64_t plane = std::int64_t(S) * S;

    nn::Tensor<T> in({N, 3 + std::int64_t(K), S, S});
    for (std::int64_t n = 0; n < N; ++n) {
        const int c = labels[std::size_t(n)];
        if (c < 0 || c >= K)
            throw DomainError("discriminator: class_index " + std::to_string(c) +
                              " out of range [0," + std::to_string(K) + ")");
        T* dst = in.data() + n * (3 + K) * plane;
        std::memcpy(dst, images.data() + n * 3 * plane, sizeof(T) * std::size_t(3 * plane));
        for (int k = 0; k < K; ++k) {
            T* pl = dst + (3 + std::int64_t(k)) * plane;
            const T v = (k == c) ? T(1) : T(0);
            for (std::int64_t i = 0; i < plane; ++i) pl[i] = v;
        }
    }
    return in;
}

template <typename T>
nn::Tensor<T> generator_forward(CganModel<T>& model, const nn::Tensor<T>& z,
                                const std::vector<int>& labels, bool train) {
    return model.gen.forward(make_gen_input(z, labels, model.cfg), train);
}

template <typename T>
nn::Tensor<T> discriminator_logits(CganModel<T>& model, const nn::Tensor<T>& images,
                                   const std::vector<int>& labels, bool train) {
    return model.disc.forward(make_disc_input(images, labels, model.cfg), train);
}

template <typename T>
nn::Tensor<T> discriminator_forward(CganModel<T>& model, const nn::Tensor<T>& images,
                                    const std::vector<int>& labels, bool train) {
    return nn::sigmoid_all(discriminator_logits(model, images, labels, train));
}

template <typename T>
nn::Tensor<T> sample_latents(std::int64_t n, int latent_dim, Rng& rng) {
    nn::Tensor<T> z({n, std::int64_t(latent_dim)});
    for (std::int64_t i = 0; i < z.numel(); ++i) z[std::size_t(i)] = T(rng.gaussian());
    return z;
}

// Explicit instantiations: float for the pipeline, double for numerical checks.
#define POROGEN_INSTANTIATE(T)                                                                   \
    template CganModel<T> build_model<T>(const NetworkConfig&);                                  \
    template void init_params<T>(CganModel<T>&, std::uint64_t);                                  \
    template nn::Tensor<T> make_gen_input<T>(const nn::Tensor<T>&, const std::vector<int>&,      \
                                             const NetworkConfig&);                              \
    template nn::Tensor<T> make_disc_input<T>(const nn::Tensor<T>&, const std::vector<int>&,     \
                                              const NetworkConfig&);                             \
    template nn::Tensor<T> generator_forward<T>(CganModel<T>&, const nn::Tensor<T>&,             \
                                                const std::vector<int>&, bool);                  \
    template nn::Tensor<T> discriminator_logits<T>(CganModel<T>&, const nn::Tensor<T>&,          \
                                                   const std::vector<int>&, bool);               \
    template nn::Tensor<T> discriminator_forward<T>(CganModel<T>&, const nn::Tensor<T>&,         \
                                                    const std::vector<int>&, bool);              \
    template nn::Tensor<T> sample_latents<T>(std::int64_t, int, Rng&);

POROGEN_INSTANTIATE(float)
POROGEN_INSTANTIATE(double)
#undef POROGEN_INSTANTIATE

// --- image <-> tensor ---------------------------------------------------------

nn::Tensor<float> tiles_to_batch(const std::vector<const std::uint8_t*>& tiles, int size) {
    const std::int64_t N = std::int64_t(tiles.size());
    nn::Tensor<float> batch({N, 3, size, size});
    const std::int64_t plane = std::int64_t(size) * size;
    for (std::int64_t n = 0; n < N; ++n) {
        const std::uint8_t* src = tiles[std::size_t(n)];
        float* dst = batch.data() + n * 3 * plane;
        // interleaved RGB -> planar, [0,255] -> [-1,1]
        for (std::int64_t i = 0; i < plane; ++i)
            for (int c = 0; c < 3; ++c)
                dst[c * plane + i] = float(src[i * 3 + c]) / 255.0f * 2.0f - 1.0f;
    }
    return batch;
}

ColorImage batch_to_image(const nn::Tensor<float>& batch, std::int64_t n) {
    const int S = int(batch.dim(2));
    const std::int64_t plane = std::int64_t(S) * S;
    ColorImage img(S, S);
    const float* src = batch.data() + n * 3 * plane;
    for (std::int64_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c) {
            float v = (src[c * plane + i] + 1.0f) * 0.5f;
            img.pixels()[std::size_t(i * 3 + c)] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        }
    snap_to_8bit(img);
    return img;
}

// --- checkpoints ------------------------------------------------------------------

namespace {

json config_to_json(const NetworkConfig& c) {
    return {{"image_size", c.image_size},     {"num_classes", c.num_classes},
            {"latent_dim", c.latent_dim},     {"base_channels", c.base_channels},
            {"leaky_slope", c.leaky_slope},   {"batch_norm", c.batch_norm}};
}

NetworkConfig config_from_json(const json& j) {
    NetworkConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.batch_norm = j.at("batch_norm").get<bool>();
    return c;
}

std::string header_json(const Checkpoint& ckpt) {
    json j;
    j["format"] = kCheckpointMagic;
    j["config"] = config_to_json(ckpt.config);
    j["binning"] = {{"edges", ckpt.binning.edges}, {"clamp_outside", ckpt.binning.clamp_outside}};
    j["epoch"] = ckpt.state.epoch;
    j["seed"] = ckpt.state.seed;
    j["manifest_digest"] = ckpt.state.manifest_digest;
    j["adam"] = {{"lr", ckpt.state.lr},
                 {"beta1", ckpt.state.beta1},
                 {"beta2", ckpt.state.beta2},
                 {"g_step", ckpt.state.g_step},
                 {"d_step", ckpt.state.d_step}};
    return j.dump();
}

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw CheckpointError("checkpoint: unexpected end of file");
    return v;
}

void write_tensor(std::ostream& out, const std::string& name, const nn::Tensor<float>& t) {
    write_pod<std::uint32_t>(out, std::uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    write_pod<std::uint32_t>(out, std::uint32_t(t.ndim()));
    for (auto d : t.shape()) write_pod<std::int64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data()),
              std::streamsize(sizeof(float) * std::size_t(t.numel())));
}

std::pair<std::string, nn::Tensor<float>> read_tensor(std::istream& in) {
    const auto name_len = read_pod<std::uint32_t>(in);
    if (name_len > 4096) throw CheckpointError("checkpoint: implausible tensor name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto ndim = read_pod<std::uint32_t>(in);
    if (ndim > 8) throw CheckpointError("checkpoint: implausible tensor rank");
    std::vector<std::int64_t> shape(ndim);
    for (auto& d : shape) d = read_pod<std::int64_t>(in);
    nn::Tensor<float> t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            std::streamsize(sizeof(float) * std::size_t(t.numel())));
    if (!in) throw CheckpointError("checkpoint: truncated tensor data for " + name);
    return {std::move(name), std::move(t)};
}

} // namespace

Checkpoint init_networks(const NetworkConfig& cfg, const PorosityBinning& binning,
                         std::uint64_t seed) {
    cfg.validate();
    binning.validate();
    if (binning.num_classes() != cfg.num_classes)
        throw ConfigError("init_networks: binning classes do not match network num_classes");
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.binning = binning;
    ckpt.state.seed = seed;
    ckpt.model = build_model<float>(cfg);
    init_params(ckpt.model, seed);
    return ckpt;
}

void save_checkpoint(Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint: " + path);

    out << kCheckpointMagic << '\n';
    const std::string header = header_json(ckpt);
    write_pod<std::uint64_t>(out, header.size());
    out.write(header.data(), std::streamsize(header.size()));

    std::map<std::string, const nn::Tensor<float>*> named;
    for (auto& ref : ckpt.model.named_tensors()) named[ref.name] = ref.value;
    for (const auto& [name, t] : ckpt.state.opt_tensors) named[name] = &t;

    write_pod<std::uint32_t>(out, std::uint32_t(named.size()));
    for (const auto& [name, t] : named) write_tensor(out, name, *t);
    if (!out) throw CheckpointError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);

    std::string magic;
    std::getline(in, magic);
    if (magic != kCheckpointMagic)
        throw CheckpointError("not a porogen checkpoint (bad magic): " + path);

    const auto header_len = read_pod<std::uint64_t>(in);
    if (header_len > (1u << 20)) throw CheckpointError("checkpoint: implausible header size");
    std::string header(header_len, '\0');
    in.read(header.data(), std::streamsize(header_len));
    if (!in) throw CheckpointError("checkpoint: truncated header");

    Checkpoint ckpt;
    try {
        const json j = json::parse(header);
        ckpt.config = config_from_json(j.at("config"));
        ckpt.binning.edges = j.at("binning").at("edges").get<std::vector<double>>();
        ckpt.binning.clamp_outside = j.at("binning").at("clamp_outside").get<bool>();
        ckpt.state.epoch = j.at("epoch").get<std::int64_t>();
        ckpt.state.seed = j.at("seed").get<std::uint64_t>();
        ckpt.state.manifest_digest = j.at("manifest_digest").get<std::string>();
        ckpt.state.lr = j.at("adam").at("lr").get<double>();
        ckpt.state.beta1 = j.at("adam").at("beta1").get<double>();
        ckpt.state.beta2 = j.at("adam").at("beta2").get<double>();
        ckpt.state.g_step = j.at("adam").at("g_step").get<std::int64_t>();
        ckpt.state.d_step = j.at("adam").at("d_step").get<std::int64_t>();
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint header: ") + e.what());
    }
    ckpt.config.validate();
    ckpt.binning.validate();

    const auto count = read_pod<std::uint32_t>(in);
    std::map<std::string, nn::Tensor<float>> tensors;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [name, t] = read_tensor(in);
        tensors.emplace(std::move(name), std::move(t));
    }

    ckpt.model = build_model<float>(ckpt.config);
    for (auto& ref : ckpt.model.named_tensors()) {
        auto it = tensors.find(ref.name);
        if (it == tensors.end())
            throw CheckpointError("checkpoint missing tensor: " + ref.name);
        if (it->second.shape() != ref.value->shape())
            throw CheckpointError("checkpoint tensor " + ref.name + " has shape " +
                                  nn::Tensor<float>::shape_str(it->second.shape()) +
                                  ", expected " +
                                  nn::Tensor<float>::shape_str(ref.value->shape()));
        *ref.value = std::move(it->second);
        tensors.erase(it);
    }
    // Whatever remains is optimizer state.
    for (auto& [name, t] : tensors) {
        if (name.rfind("opt.", 0) != 0)
            throw CheckpointError("checkpoint has unexpected tensor: " + name);
        ckpt.state.opt_tensors.emplace(name, std::move(t));
    }
    return ckpt;
}

std::string checkpoint_digest(const Checkpoint& ckpt) {
    const std::string header = header_json(ckpt);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(header.data(), header.size())));
    return buf;
}

} // namespace porogen
