#pragma once

#include "tracksort/io_binary.hpp"
#include "tracksort/model.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tracksort {

/// Adam moment estimates, one pair of tensors per model parameter.
struct CheckpointMoments {
    std::uint64_t step = 0;
    std::vector<Tensor<float>> m;
    std::vector<Tensor<float>> v;
};

/// Everything needed to resume or deploy: config, originating epoch, the
/// parameters, and (optionally) optimizer state.
struct Checkpoint {
    ModelConfig config;
    std::uint32_t epoch = 0;
    double val_loss = 0.0;
    std::vector<std::pair<std::string, Tensor<float>>> params;
    std::optional<CheckpointMoments> moments;
};

namespace detail {

inline void write_config(std::ostream& out, const ModelConfig& c) {
    io::write_u32(out, static_cast<std::uint32_t>(c.d_model));
    io::write_u32(out, static_cast<std::uint32_t>(c.n_heads));
    io::write_u32(out, static_cast<std::uint32_t>(c.d_ff));
    io::write_u32(out, static_cast<std::uint32_t>(c.n_encoder_layers));
    io::write_u32(out, static_cast<std::uint32_t>(c.n_decoder_layers));
    io::write_u32(out, static_cast<std::uint32_t>(c.vocab_size));
    io::write_u32(out, static_cast<std::uint32_t>(c.max_len));
    io::write_u32(out, c.tie_output_to_embedding ? 1 : 0);
    io::write_f64(out, c.ln_eps);
}

inline ModelConfig read_config(std::istream& in) {
    ModelConfig c;
    c.d_model = static_cast<int>(io::read_u32(in));
    c.n_heads = static_cast<int>(io::read_u32(in));
    c.d_ff = static_cast<int>(io::read_u32(in));
    c.n_encoder_layers = static_cast<int>(io::read_u32(in));
    c.n_decoder_layers = static_cast<int>(io::read_u32(in));
    c.vocab_size = static_cast<int>(io::read_u32(in));
    c.max_len = static_cast<int>(io::read_u32(in));
    c.tie_output_to_embedding = io::read_u32(in) != 0;
    c.ln_eps = io::read_f64(in);
    return c;
}

inline void write_tensor_f32(std::ostream& out, const Tensor<float>& t) {
    io::write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) io::write_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.data) io::write_f32(out, v);
}

inline Tensor<float> read_tensor_f32(std::istream& in) {
    const auto rank = io::read_u32(in);
    if (rank > 4) throw std::runtime_error("checkpoint: implausible tensor rank");
    std::vector<std::size_t> shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(io::read_u32(in));
    Tensor<float> t(shape);
    for (auto& v : t.data) v = io::read_f32(in);
    return t;
}

} // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    io::write_magic(out, "TSRT");
    io::write_u32(out, 1);
    detail::write_config(out, ckpt.config);
    io::write_u32(out, ckpt.epoch);
    io::write_f64(out, ckpt.val_loss);
    io::write_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& [name, t] : ckpt.params) {
        io::write_string(out, name);
        detail::write_tensor_f32(out, t);
    }
    if (ckpt.moments) {
        if (ckpt.moments->m.size() != ckpt.params.size() ||
            ckpt.moments->v.size() != ckpt.params.size())
            throw std::invalid_argument("save_checkpoint: moment count mismatch");
        io::write_u32(out, 1);
        io::write_u64(out, ckpt.moments->step);
        for (const auto& t : ckpt.moments->m) detail::write_tensor_f32(out, t);
        for (const auto& t : ckpt.moments->v) detail::write_tensor_f32(out, t);
    } else {
        io::write_u32(out, 0);
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    io::expect_magic(in, "TSRT", "load_checkpoint(" + path.string() + ")");
    const auto version = io::read_u32(in);
    if (version != 1)
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(version));
    Checkpoint ckpt;
    ckpt.config = detail::read_config(in);
    ckpt.epoch = io::read_u32(in);
    ckpt.val_loss = io::read_f64(in);
    const auto n = io::read_u32(in);
    ckpt.params.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string name = io::read_string(in, 4096);
        ckpt.params.emplace_back(std::move(name), detail::read_tensor_f32(in));
    }
    if (io::read_u32(in) != 0) {
        CheckpointMoments mom;
        mom.step = io::read_u64(in);
        for (std::uint32_t i = 0; i < n; ++i) mom.m.push_back(detail::read_tensor_f32(in));
        for (std::uint32_t i = 0; i < n; ++i) mom.v.push_back(detail::read_tensor_f32(in));
        ckpt.moments = std::move(mom);
    }
    return ckpt;
}

/// Rebuilds a runnable model: the index layout is reconstructed from the
/// config and the stored tensors must agree with it name-for-name.
inline Model<float> model_from_checkpoint(const Checkpoint& ckpt) {
    Model<float> m = init_model<float>(ckpt.config, nullptr, 0);
    if (m.params.size() != ckpt.params.size())
        throw std::runtime_error("model_from_checkpoint: expected " +
                                 std::to_string(m.params.size()) + " parameters, file has " +
                                 std::to_string(ckpt.params.size()));
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        if (m.params[i].first != ckpt.params[i].first)
            throw std::runtime_error("model_from_checkpoint: parameter " + std::to_string(i) +
                                     " is '" + ckpt.params[i].first + "', expected '" +
                                     m.params[i].first + "'");
        if (m.params[i].second.shape != ckpt.params[i].second.shape)
            throw std::runtime_error("model_from_checkpoint: shape mismatch for " +
                                     m.params[i].first);
        m.params[i].second = ckpt.params[i].second;
    }
    return m;
}

inline Checkpoint checkpoint_from_model(const Model<float>& m, std::uint32_t epoch,
                                        double val_loss) {
    Checkpoint ckpt;
    ckpt.config = m.config;
    ckpt.epoch = epoch;
    ckpt.val_loss = val_loss;
    ckpt.params = m.params;
    return ckpt;
}

} // namespace tracksort
