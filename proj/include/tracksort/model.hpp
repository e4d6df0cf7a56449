#pragma once

#include "tracksort/cbow.hpp"
#include "tracksort/tensor.hpp"
#include "tracksort/vocab.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tracksort {

struct ModelConfig {
    int d_model = 64;
    int n_heads = 1;
    int d_ff = 256;
    int n_encoder_layers = 6;
    int n_decoder_layers = 6;
    int vocab_size = 0;
    int max_len = 256;
    bool tie_output_to_embedding = true;
    double ln_eps = 1e-5;

    void validate() const {
        if (d_model < 1 || d_ff < 1 || vocab_size < kNumSpecialTokens + 1 || max_len < 2)
            throw std::invalid_argument("ModelConfig: d_model/d_ff/vocab_size/max_len too small");
        if (n_heads < 1 || d_model % n_heads != 0)
            throw std::invalid_argument("ModelConfig: d_model must be divisible by n_heads");
        if (d_model % 2 != 0)
            throw std::invalid_argument("ModelConfig: d_model must be even for sinusoidal PE");
        if (n_encoder_layers < 0 || n_decoder_layers < 0)
            throw std::invalid_argument("ModelConfig: negative layer count");
        if (ln_eps <= 0) throw std::invalid_argument("ModelConfig: ln_eps must be positive");
    }
};

namespace idx {
struct Attn {
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
};
struct Ln {
    std::size_t gain, bias;
};
struct Ff {
    std::size_t w1, b1, w2, b2;
};
struct EncoderLayer {
    Attn attn;
    Ln ln1;
    Ff ff;
    Ln ln2;
};
struct DecoderLayer {
    Attn self_attn;
    Ln ln1;
    Attn cross_attn;
    Ln ln2;
    Ff ff;
    Ln ln3;
};
} // namespace idx

/// Parameter locations inside Model::params, laid out at init time.
struct ParamIndex {
    std::size_t embedding = 0;
    std::vector<idx::EncoderLayer> encoder;
    std::vector<idx::DecoderLayer> decoder;
    std::size_t output_bias = 0;
    std::optional<std::size_t> output_weight; ///< only when untied
};

/// Encoder-decoder transformer with a shared token embedding. Parameters
/// live in a flat named list so training, checkpointing, and gradient
/// checks can enumerate them uniformly.
template <typename T>
struct Model {
    ModelConfig config;
    std::vector<std::pair<std::string, Tensor<T>>> params;
    ParamIndex index;
    Tensor<T> pos_encoding; ///< [max_len, d_model], not trainable

    Tensor<T>& param(std::size_t i) { return params[i].second; }
    const Tensor<T>& param(std::size_t i) const { return params[i].second; }

    std::size_t find(const std::string& name) const {
        for (std::size_t i = 0; i < params.size(); ++i)
            if (params[i].first == name) return i;
        throw std::out_of_range("Model: no parameter named " + name);
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [name, t] : params) n += t.numel();
        return n;
    }

    template <typename F>
    void for_each_parameter(F&& f) const {
        for (const auto& [name, t] : params) f(name, t);
    }
};

/// PE[p, 2i] = sin(p / 10000^{2i/d}), PE[p, 2i+1] = cos at the same angle.
template <typename T>
Tensor<T> positional_encoding(int max_len, int d_model) {
    if (d_model < 2 || d_model % 2 != 0)
        throw std::invalid_argument("positional_encoding: d_model must be positive and even");
    if (max_len < 1) throw std::invalid_argument("positional_encoding: max_len must be >= 1");
    Tensor<T> pe({static_cast<std::size_t>(max_len), static_cast<std::size_t>(d_model)});
    for (int p = 0; p < max_len; ++p)
        for (int i = 0; i < d_model / 2; ++i) {
            const double angle =
                p / std::pow(10000.0, (2.0 * i) / static_cast<double>(d_model));
            pe.at(static_cast<std::size_t>(p), static_cast<std::size_t>(2 * i)) =
                static_cast<T>(std::sin(angle));
            pe.at(static_cast<std::size_t>(p), static_cast<std::size_t>(2 * i + 1)) =
                static_cast<T>(std::cos(angle));
        }
    return pe;
}

/// Closed-form trainable parameter total for a config.
inline std::size_t parameter_count(const ModelConfig& cfg) {
    const std::size_t d = static_cast<std::size_t>(cfg.d_model);
    const std::size_t ff = static_cast<std::size_t>(cfg.d_ff);
    const std::size_t v = static_cast<std::size_t>(cfg.vocab_size);
    const std::size_t attn = 4 * (d * d + d);
    const std::size_t ln = 2 * d;
    const std::size_t mlp = d * ff + ff + ff * d + d;
    const std::size_t enc_layer = attn + ln + mlp + ln;
    const std::size_t dec_layer = attn + ln + attn + ln + mlp + ln;
    std::size_t total = v * d; // embedding
    total += static_cast<std::size_t>(cfg.n_encoder_layers) * enc_layer;
    total += static_cast<std::size_t>(cfg.n_decoder_layers) * dec_layer;
    total += v; // output bias
    if (!cfg.tie_output_to_embedding) total += v * d;
    return total;
}

namespace detail {

template <typename T>
class ModelBuilder {
  public:
    ModelBuilder(Model<T>& m, Rng& rng) : m_(m), rng_(rng) {}

    std::size_t matrix(const std::string& name, std::size_t rows, std::size_t cols) {
        const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Tensor<T> t({rows, cols});
        for (auto& v : t.data) v = static_cast<T>(rng_.uniform(-limit, limit));
        return push(name, std::move(t));
    }
    std::size_t zeros(const std::string& name, std::size_t n) {
        return push(name, Tensor<T>::zeros({n}));
    }
    std::size_t ones(const std::string& name, std::size_t n) {
        Tensor<T> t({n});
        for (auto& v : t.data) v = static_cast<T>(1);
        return push(name, std::move(t));
    }
    idx::Attn attn(const std::string& prefix, std::size_t d) {
        idx::Attn a;
        a.wq = matrix(prefix + ".wq", d, d);
        a.bq = zeros(prefix + ".bq", d);
        a.wk = matrix(prefix + ".wk", d, d);
        a.bk = zeros(prefix + ".bk", d);
        a.wv = matrix(prefix + ".wv", d, d);
        a.bv = zeros(prefix + ".bv", d);
        a.wo = matrix(prefix + ".wo", d, d);
        a.bo = zeros(prefix + ".bo", d);
        return a;
    }
    idx::Ln ln(const std::string& prefix, std::size_t d) {
        return {ones(prefix + ".gain", d), zeros(prefix + ".bias", d)};
    }
    idx::Ff ff(const std::string& prefix, std::size_t d, std::size_t dff) {
        idx::Ff f;
        f.w1 = matrix(prefix + ".w1", d, dff);
        f.b1 = zeros(prefix + ".b1", dff);
        f.w2 = matrix(prefix + ".w2", dff, d);
        f.b2 = zeros(prefix + ".b2", d);
        return f;
    }
    std::size_t push(const std::string& name, Tensor<T> t) {
        m_.params.emplace_back(name, std::move(t));
        return m_.params.size() - 1;
    }

  private:
    Model<T>& m_;
    Rng& rng_;
};

} // namespace detail

/// Builds all parameters under `seed`. When `embed_init` is given its input
/// vectors become the embedding table (vocab and dim must match); otherwise
/// the table is drawn uniform in [-0.5/d, 0.5/d], matching the CBOW scale.
template <typename T>
Model<T> init_model(const ModelConfig& cfg, const EmbeddingMatrix* embed_init,
                    std::uint64_t seed) {
    cfg.validate();
    Model<T> m;
    m.config = cfg;
    m.pos_encoding = positional_encoding<T>(cfg.max_len, cfg.d_model);

    Rng rng(seed ^ 0x6d6f64656c696e69ull); // "modelini"
    detail::ModelBuilder<T> b(m, rng);
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto v = static_cast<std::size_t>(cfg.vocab_size);

    {
        Tensor<T> emb({v, d});
        if (embed_init) {
            if (embed_init->vocab_size != cfg.vocab_size || embed_init->dim != cfg.d_model)
                throw std::invalid_argument(
                    "init_model: embedding initializer is " +
                    std::to_string(embed_init->vocab_size) + "x" +
                    std::to_string(embed_init->dim) + ", model needs " +
                    std::to_string(cfg.vocab_size) + "x" + std::to_string(cfg.d_model));
            for (std::size_t i = 0; i < emb.data.size(); ++i)
                emb.data[i] = static_cast<T>(embed_init->vectors[i]);
        } else {
            const double half = 0.5 / static_cast<double>(cfg.d_model);
            for (auto& x : emb.data) x = static_cast<T>(rng.uniform(-half, half));
        }
        m.index.embedding = b.push("embedding", std::move(emb));
    }

    for (int l = 0; l < cfg.n_encoder_layers; ++l) {
        const std::string p = "encoder." + std::to_string(l);
        idx::EncoderLayer layer;
        layer.attn = b.attn(p + ".attn", d);
        layer.ln1 = b.ln(p + ".ln1", d);
        layer.ff = b.ff(p + ".ff", d, static_cast<std::size_t>(cfg.d_ff));
        layer.ln2 = b.ln(p + ".ln2", d);
        m.index.encoder.push_back(layer);
    }
    for (int l = 0; l < cfg.n_decoder_layers; ++l) {
        const std::string p = "decoder." + std::to_string(l);
        idx::DecoderLayer layer;
        layer.self_attn = b.attn(p + ".self", d);
        layer.ln1 = b.ln(p + ".ln1", d);
        layer.cross_attn = b.attn(p + ".cross", d);
        layer.ln2 = b.ln(p + ".ln2", d);
        layer.ff = b.ff(p + ".ff", d, static_cast<std::size_t>(cfg.d_ff));
        layer.ln3 = b.ln(p + ".ln3", d);
        m.index.decoder.push_back(layer);
    }
    m.index.output_bias = b.zeros("output.bias", v);
    if (!cfg.tie_output_to_embedding)
        m.index.output_weight = b.matrix("output.weight", v, d);
    return m;
}

template <typename T>
Model<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
    return init_model<T>(cfg, nullptr, seed);
}

// ---------------------------------------------------------------------------
// Forward-graph construction. All builders operate on a Tape plus the node
// ids of bound parameters, so one tape can carry many sequence graphs that
// share a single set of parameter leaves (how batching works here).

template <typename T>
std::vector<std::size_t> bind_parameters(Tape<T>& tape, const Model<T>& m,
                                         bool requires_grad = true) {
    std::vector<std::size_t> ids;
    ids.reserve(m.params.size());
    for (const auto& [name, t] : m.params) ids.push_back(tape.leaf(t, requires_grad));
    return ids;
}

/// Additive attention mask: 0 where allowed, -inf where banned. Keys at or
/// beyond valid_k are banned (right padding); causal bans k > q.
template <typename T>
Tensor<T> attention_mask(std::size_t q_len, std::size_t k_len, std::size_t valid_k,
                         bool causal) {
    Tensor<T> mask({q_len, k_len});
    const T neg_inf = -std::numeric_limits<T>::infinity();
    for (std::size_t q = 0; q < q_len; ++q)
        for (std::size_t k = 0; k < k_len; ++k)
            mask.at(q, k) = (k >= valid_k || (causal && k > q)) ? neg_inf : T(0);
    return mask;
}

namespace detail {

template <typename T>
using NodeId = typename Tape<T>::NodeId;

/// Projection + scaled dot-product attention + output projection.
/// x_q: [q_len, d]; x_kv: [k_len, d]; mask broadcasts per head.
template <typename T>
std::size_t attention_block(Tape<T>& tape, const std::vector<std::size_t>& p,
                            const idx::Attn& a, std::size_t x_q, std::size_t x_kv,
                            std::optional<std::size_t> mask, int n_heads) {
    const std::size_t d = tape.value(x_q).cols();
    const std::size_t d_head = d / static_cast<std::size_t>(n_heads);
    const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_head)));

    const auto q = tape.add_row(tape.matmul(x_q, p[a.wq]), p[a.bq]);
    const auto k = tape.add_row(tape.matmul(x_kv, p[a.wk]), p[a.bk]);
    const auto v = tape.add_row(tape.matmul(x_kv, p[a.wv]), p[a.bv]);

    auto head_context = [&](std::size_t qh, std::size_t kh, std::size_t vh) {
        auto scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt);
        if (mask) scores = tape.add(scores, *mask);
        return tape.matmul(tape.softmax_rows(scores), vh);
    };

    std::size_t ctx;
    if (n_heads == 1) {
        ctx = head_context(q, k, v);
    } else {
        std::vector<std::size_t> heads;
        heads.reserve(static_cast<std::size_t>(n_heads));
        for (int h = 0; h < n_heads; ++h) {
            const std::size_t c0 = static_cast<std::size_t>(h) * d_head;
            heads.push_back(head_context(tape.slice_cols(q, c0, c0 + d_head),
                                         tape.slice_cols(k, c0, c0 + d_head),
                                         tape.slice_cols(v, c0, c0 + d_head)));
        }
        ctx = tape.concat_cols(heads);
    }
    return tape.add_row(tape.matmul(ctx, p[a.wo]), p[a.bo]);
}

template <typename T>
std::size_t feed_forward(Tape<T>& tape, const std::vector<std::size_t>& p, const idx::Ff& f,
                         std::size_t x) {
    auto h = tape.relu(tape.add_row(tape.matmul(x, p[f.w1]), p[f.b1]));
    return tape.add_row(tape.matmul(h, p[f.w2]), p[f.b2]);
}

/// Post-norm residual: layer_norm(x + sublayer(x)).
template <typename T>
std::size_t add_norm(Tape<T>& tape, const std::vector<std::size_t>& p, const idx::Ln& ln,
                     std::size_t x, std::size_t sub, T eps) {
    return tape.layer_norm(tape.add(x, sub), p[ln.gain], p[ln.bias], eps);
}

} // namespace detail

/// Token embedding scaled by sqrt(d_model), plus positional encoding rows.
template <typename T>
std::size_t embed_tokens(Tape<T>& tape, const Model<T>& m, const std::vector<std::size_t>& p,
                         const std::vector<TokenId>& tokens) {
    if (tokens.empty()) throw std::invalid_argument("embed_tokens: empty token sequence");
    if (tokens.size() > static_cast<std::size_t>(m.config.max_len))
        throw std::invalid_argument("embed_tokens: sequence of length " +
                                    std::to_string(tokens.size()) + " exceeds max_len " +
                                    std::to_string(m.config.max_len));
    auto emb = tape.embedding_rows(p[m.index.embedding],
                                   std::vector<int>(tokens.begin(), tokens.end()));
    auto scaled = tape.scale(emb, static_cast<T>(std::sqrt(static_cast<double>(m.config.d_model))));
    Tensor<T> pe({tokens.size(), static_cast<std::size_t>(m.config.d_model)});
    for (std::size_t i = 0; i < tokens.size(); ++i)
        for (std::size_t j = 0; j < pe.cols(); ++j) pe.at(i, j) = m.pos_encoding.at(i, j);
    return tape.add(scaled, tape.leaf(std::move(pe)));
}

/// Bidirectional encoder stack. Positions at or beyond valid_len (right
/// padding) are excluded from every attention's key set.
template <typename T>
std::size_t encode(Tape<T>& tape, const Model<T>& m, const std::vector<std::size_t>& p,
                   const std::vector<TokenId>& tokens, std::size_t valid_len) {
    if (valid_len == 0 || valid_len > tokens.size())
        throw std::invalid_argument("encode: valid_len must be in [1, len]");
    auto x = embed_tokens(tape, m, p, tokens);
    std::optional<std::size_t> mask;
    if (m.config.n_encoder_layers > 0 && valid_len < tokens.size())
        mask = tape.leaf(attention_mask<T>(tokens.size(), tokens.size(), valid_len, false));
    const T eps = static_cast<T>(m.config.ln_eps);
    for (const auto& layer : m.index.encoder) {
        auto attn = detail::attention_block(tape, p, layer.attn, x, x, mask, m.config.n_heads);
        x = detail::add_norm(tape, p, layer.ln1, x, attn, eps);
        auto ff = detail::feed_forward(tape, p, layer.ff, x);
        x = detail::add_norm(tape, p, layer.ln2, x, ff, eps);
    }
    return x;
}

template <typename T>
std::size_t encode(Tape<T>& tape, const Model<T>& m, const std::vector<std::size_t>& p,
                   const std::vector<TokenId>& tokens) {
    return encode(tape, m, p, tokens, tokens.size());
}

/// Causal decoder stack over `prefix` (must start with [SOS]), cross-
/// attending to `memory` whose first mem_valid_len rows are real tokens.
/// Returns logits [prefix_len, vocab_size].
template <typename T>
std::size_t decode_logits(Tape<T>& tape, const Model<T>& m, const std::vector<std::size_t>& p,
                          std::size_t memory, std::size_t mem_valid_len,
                          const std::vector<TokenId>& prefix) {
    if (prefix.empty()) throw std::invalid_argument("decode_logits: empty prefix");
    if (prefix.front() != kSosToken)
        throw std::invalid_argument("decode_logits: prefix must start with [SOS]");
    const std::size_t mem_len = tape.value(memory).rows();
    if (mem_valid_len == 0 || mem_valid_len > mem_len)
        throw std::invalid_argument("decode_logits: mem_valid_len out of range");

    auto x = embed_tokens(tape, m, p, prefix);
    std::optional<std::size_t> self_mask, cross_mask;
    if (m.config.n_decoder_layers > 0) {
        self_mask =
            tape.leaf(attention_mask<T>(prefix.size(), prefix.size(), prefix.size(), true));
        if (mem_valid_len < mem_len)
            cross_mask =
                tape.leaf(attention_mask<T>(prefix.size(), mem_len, mem_valid_len, false));
    }
    const T eps = static_cast<T>(m.config.ln_eps);
    for (const auto& layer : m.index.decoder) {
        auto self =
            detail::attention_block(tape, p, layer.self_attn, x, x, self_mask, m.config.n_heads);
        x = detail::add_norm(tape, p, layer.ln1, x, self, eps);
        auto cross = detail::attention_block(tape, p, layer.cross_attn, x, memory, cross_mask,
                                             m.config.n_heads);
        x = detail::add_norm(tape, p, layer.ln2, x, cross, eps);
        auto ff = detail::feed_forward(tape, p, layer.ff, x);
        x = detail::add_norm(tape, p, layer.ln3, x, ff, eps);
    }
    const std::size_t proj =
        m.index.output_weight ? *m.index.output_weight : m.index.embedding;
    return tape.add_row(tape.matmul_nt(x, p[proj]), p[m.index.output_bias]);
}

/// Mean token cross-entropy of teacher-forced next-token prediction.
/// Decoder input is [SOS] + target[:-1]; pad positions (target id 0) are
/// ignored by the loss.
template <typename T>
std::size_t teacher_forced_loss(Tape<T>& tape, const Model<T>& m,
                                const std::vector<std::size_t>& p,
                                const std::vector<TokenId>& input,
                                const std::vector<TokenId>& target) {
    if (target.empty() || target.back() != kSepToken)
        throw std::invalid_argument("teacher_forced_loss: target must end with [SEP]");
    auto memory = encode(tape, m, p, input);
    std::vector<TokenId> prefix;
    prefix.reserve(target.size());
    prefix.push_back(kSosToken);
    prefix.insert(prefix.end(), target.begin(), target.end() - 1);
    auto logits = decode_logits(tape, m, p, memory, input.size(), prefix);
    return tape.cross_entropy(logits, std::vector<int>(target.begin(), target.end()),
                              kSosToken);
}

} // namespace tracksort
