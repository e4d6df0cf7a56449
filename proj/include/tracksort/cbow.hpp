#pragma once

#include "tracksort/io_binary.hpp"
#include "tracksort/rng.hpp"
#include "tracksort/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracksort {

/// Word2vec-style lookup tables. `vectors` are the input (projection)
/// vectors that seed the transformer embedding; `context_vectors` are the
/// output-side vectors used only during CBOW training.
struct EmbeddingMatrix {
    int vocab_size = 0;
    int dim = 0;
    std::vector<double> vectors;         // vocab_size x dim, row-major
    std::vector<double> context_vectors; // vocab_size x dim, row-major

    double* row(int token) { return vectors.data() + static_cast<std::size_t>(token) * dim; }
    const double* row(int token) const {
        return vectors.data() + static_cast<std::size_t>(token) * dim;
    }
    double* context_row(int token) {
        return context_vectors.data() + static_cast<std::size_t>(token) * dim;
    }
    const double* context_row(int token) const {
        return context_vectors.data() + static_cast<std::size_t>(token) * dim;
    }
    void check_token(int token) const {
        if (token < 0 || token >= vocab_size)
            throw std::out_of_range("EmbeddingMatrix: token " + std::to_string(token) +
                                    " outside vocabulary of size " + std::to_string(vocab_size));
    }
};

struct CbowConfig {
    int dim = 64;
    int window = 20;    ///< tokens on each side, truncated at sentence ends
    int epochs = 100;
    int negatives = 5;  ///< noise samples per position
    double learning_rate = 0.025;
    std::uint64_t seed = 1;

    void validate() const {
        if (dim < 1 || window < 1 || epochs < 0 || negatives < 1 || learning_rate <= 0)
            throw std::invalid_argument("CbowConfig: dim/window/negatives must be >= 1, "
                                        "epochs >= 0, learning_rate > 0");
    }
};

/// Input vectors uniform in [-0.5/dim, 0.5/dim], context vectors zero.
inline EmbeddingMatrix init_embeddings(int vocab_size, int dim, std::uint64_t seed) {
    if (vocab_size < 1 || dim < 1)
        throw std::invalid_argument("init_embeddings: vocab_size and dim must be >= 1");
    EmbeddingMatrix e;
    e.vocab_size = vocab_size;
    e.dim = dim;
    e.vectors.resize(static_cast<std::size_t>(vocab_size) * dim);
    e.context_vectors.assign(static_cast<std::size_t>(vocab_size) * dim, 0.0);
    Rng rng(seed ^ 0x63626f77696e6974ull); // "cbowinit"
    const double half = 0.5 / dim;
    for (auto& v : e.vectors) v = rng.uniform(-half, half);
    return e;
}

/// Draws tokens with probability proportional to count^{3/4}.
class UnigramSampler {
  public:
    UnigramSampler(const std::vector<std::vector<TokenId>>& corpus, int vocab_size) {
        if (vocab_size < 1) throw std::invalid_argument("UnigramSampler: empty vocabulary");
        std::vector<std::uint64_t> counts(static_cast<std::size_t>(vocab_size), 0);
        for (const auto& sentence : corpus)
            for (TokenId t : sentence) {
                if (t < 0 || t >= vocab_size)
                    throw std::out_of_range("UnigramSampler: token " + std::to_string(t) +
                                            " outside vocabulary");
                ++counts[static_cast<std::size_t>(t)];
            }
        cumulative_.resize(counts.size());
        double total = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            total += std::pow(static_cast<double>(counts[i]), 0.75);
            cumulative_[i] = total;
        }
        if (total <= 0.0) throw std::invalid_argument("UnigramSampler: corpus has no tokens");
    }

    TokenId sample(Rng& rng) const {
        double u = rng.uniform() * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end()) --it; // u == total edge
        return static_cast<TokenId>(it - cumulative_.begin());
    }

    double weight(TokenId t) const {
        auto i = static_cast<std::size_t>(t);
        return i == 0 ? cumulative_[0] : cumulative_[i] - cumulative_[i - 1];
    }

  private:
    std::vector<double> cumulative_;
};

namespace detail {

inline double log_sigmoid(double x) {
    // -softplus(-x), stable for large |x|
    return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

} // namespace detail

/// Negative-sampling loss for one (context, target, negatives) triple:
///   -log s(h.v'_t) - sum_j log s(-h.v'_nj),  h = mean of context vectors.
/// Negatives that collide with the target contribute nothing.
inline double cbow_loss(const EmbeddingMatrix& e, const std::vector<TokenId>& context,
                        TokenId target, const std::vector<TokenId>& negatives) {
    if (context.empty()) throw std::invalid_argument("cbow_loss: empty context");
    e.check_token(target);
    const int dim = e.dim;
    std::vector<double> h(static_cast<std::size_t>(dim), 0.0);
    for (TokenId c : context) {
        e.check_token(c);
        const double* v = e.row(c);
        for (int d = 0; d < dim; ++d) h[static_cast<std::size_t>(d)] += v[d];
    }
    for (auto& x : h) x /= static_cast<double>(context.size());

    auto dot_context = [&](TokenId t) {
        const double* v = e.context_row(t);
        double s = 0.0;
        for (int d = 0; d < dim; ++d) s += h[static_cast<std::size_t>(d)] * v[d];
        return s;
    };

    double loss = -detail::log_sigmoid(dot_context(target));
    for (TokenId n : negatives) {
        e.check_token(n);
        if (n == target) continue;
        loss -= detail::log_sigmoid(-dot_context(n));
    }
    return loss;
}

/// Accumulates d(loss)/d(parameters) into `grad` (same shape as `e`, caller
/// zeroes it). Returns the loss. Mirrors cbow_loss exactly.
inline double cbow_loss_grad(const EmbeddingMatrix& e, const std::vector<TokenId>& context,
                             TokenId target, const std::vector<TokenId>& negatives,
                             EmbeddingMatrix& grad) {
    if (context.empty()) throw std::invalid_argument("cbow_loss_grad: empty context");
    if (grad.vocab_size != e.vocab_size || grad.dim != e.dim)
        throw std::invalid_argument("cbow_loss_grad: grad accumulator shape mismatch");
    e.check_token(target);
    const int dim = e.dim;
    const double inv_c = 1.0 / static_cast<double>(context.size());

    std::vector<double> h(static_cast<std::size_t>(dim), 0.0);
    for (TokenId c : context) {
        e.check_token(c);
        const double* v = e.row(c);
        for (int d = 0; d < dim; ++d) h[static_cast<std::size_t>(d)] += v[d];
    }
    for (auto& x : h) x *= inv_c;

    std::vector<double> dh(static_cast<std::size_t>(dim), 0.0);
    double loss = 0.0;
    auto absorb = [&](TokenId out_token, double label) {
        const double* v = e.context_row(out_token);
        double s = 0.0;
        for (int d = 0; d < dim; ++d) s += h[static_cast<std::size_t>(d)] * v[d];
        loss -= label > 0.5 ? detail::log_sigmoid(s) : detail::log_sigmoid(-s);
        double ds = detail::sigmoid(s) - label; // d(loss)/d(score)
        double* gv = grad.context_row(out_token);
        for (int d = 0; d < dim; ++d) {
            gv[d] += ds * h[static_cast<std::size_t>(d)];
            dh[static_cast<std::size_t>(d)] += ds * v[d];
        }
    };

    absorb(target, 1.0);
    for (TokenId n : negatives) {
        e.check_token(n);
        if (n == target) continue;
        absorb(n, 0.0);
    }

    for (TokenId c : context) {
        double* gv = grad.row(c);
        for (int d = 0; d < dim; ++d) gv[d] += dh[static_cast<std::size_t>(d)] * inv_c;
    }
    return loss;
}

struct CbowStats {
    std::vector<double> epoch_loss; ///< mean loss per (context,target) position
    std::size_t skipped_sentences = 0;
    std::size_t positions_per_epoch = 0;
};

struct CbowResult {
    EmbeddingMatrix embeddings;
    CbowStats stats;
};

/// Plain SGD over corpus positions in order; deterministic under cfg.seed.
inline CbowResult train_cbow(const std::vector<std::vector<TokenId>>& corpus, int vocab_size,
                             const CbowConfig& cfg) {
    cfg.validate();
    if (corpus.empty()) throw std::invalid_argument("train_cbow: empty corpus");

    CbowResult result;
    result.embeddings = init_embeddings(vocab_size, cfg.dim, cfg.seed);
    EmbeddingMatrix& e = result.embeddings;
    UnigramSampler sampler(corpus, vocab_size);
    Rng rng(cfg.seed ^ 0x63626f747261696eull); // "cbotrain"

    for (const auto& sentence : corpus)
        if (sentence.empty()) ++result.stats.skipped_sentences;

    const int dim = cfg.dim;
    std::vector<double> h(static_cast<std::size_t>(dim));
    std::vector<double> dh(static_cast<std::size_t>(dim));
    std::vector<TokenId> negatives(static_cast<std::size_t>(cfg.negatives));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t positions = 0;
        for (const auto& sentence : corpus) {
            const auto len = static_cast<long>(sentence.size());
            for (long t = 0; t < len; ++t) {
                const long lo = std::max<long>(0, t - cfg.window);
                const long hi = std::min<long>(len - 1, t + cfg.window);
                const long n_ctx = hi - lo; // excludes position t itself
                if (n_ctx <= 0) continue;

                const auto target = sentence[static_cast<std::size_t>(t)];
                e.check_token(target);
                const double inv_c = 1.0 / static_cast<double>(n_ctx);
                std::fill(h.begin(), h.end(), 0.0);
                for (long c = lo; c <= hi; ++c) {
                    if (c == t) continue;
                    const auto tok = sentence[static_cast<std::size_t>(c)];
                    e.check_token(tok);
                    const double* v = e.row(tok);
                    for (int d = 0; d < dim; ++d) h[static_cast<std::size_t>(d)] += v[d];
                }
                for (auto& x : h) x *= inv_c;

                for (auto& n : negatives) n = sampler.sample(rng);

                std::fill(dh.begin(), dh.end(), 0.0);
                auto sgd_output = [&](TokenId out_token, double label) {
                    double* v = e.context_row(out_token);
                    double s = 0.0;
                    for (int d = 0; d < dim; ++d) s += h[static_cast<std::size_t>(d)] * v[d];
                    loss_sum -= label > 0.5 ? detail::log_sigmoid(s) : detail::log_sigmoid(-s);
                    const double ds = detail::sigmoid(s) - label;
                    for (int d = 0; d < dim; ++d) {
                        dh[static_cast<std::size_t>(d)] += ds * v[d];
                        v[d] -= cfg.learning_rate * ds * h[static_cast<std::size_t>(d)];
                    }
                };
                sgd_output(target, 1.0);
                for (TokenId n : negatives)
                    if (n != target) sgd_output(n, 0.0);

                const double step = cfg.learning_rate * inv_c;
                for (long c = lo; c <= hi; ++c) {
                    if (c == t) continue;
                    double* v = e.row(sentence[static_cast<std::size_t>(c)]);
                    for (int d = 0; d < dim; ++d) v[d] -= step * dh[static_cast<std::size_t>(d)];
                }
                ++positions;
            }
        }
        result.stats.epoch_loss.push_back(positions ? loss_sum / static_cast<double>(positions)
                                                    : 0.0);
        result.stats.positions_per_epoch = positions;
    }
    return result;
}

inline double cosine(const EmbeddingMatrix& e, TokenId a, TokenId b) {
    e.check_token(a);
    e.check_token(b);
    const double *va = e.row(a), *vb = e.row(b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int d = 0; d < e.dim; ++d) {
        dot += va[d] * vb[d];
        na += va[d] * va[d];
        nb += vb[d] * vb[d];
    }
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("cosine: zero vector has no direction");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Binary layout: magic `CBOW`, version u32, vocab_size u32, dim u32,
/// then vocab_size*dim little-endian f32 input vectors, row-major.
inline void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& e) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_embeddings: cannot open " + path.string());
    io::write_magic(out, "CBOW");
    io::write_u32(out, 1);
    io::write_u32(out, static_cast<std::uint32_t>(e.vocab_size));
    io::write_u32(out, static_cast<std::uint32_t>(e.dim));
    for (double v : e.vectors) io::write_f32(out, static_cast<float>(v));
    if (!out) throw std::runtime_error("save_embeddings: write failed for " + path.string());
}

/// Context vectors are not stored; the result carries zeros there.
inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_embeddings: cannot open " + path.string());
    io::expect_magic(in, "CBOW", "load_embeddings(" + path.string() + ")");
    const auto version = io::read_u32(in);
    if (version != 1)
        throw std::runtime_error("load_embeddings: unsupported version " +
                                 std::to_string(version));
    EmbeddingMatrix e;
    e.vocab_size = static_cast<int>(io::read_u32(in));
    e.dim = static_cast<int>(io::read_u32(in));
    if (e.vocab_size < 1 || e.dim < 1)
        throw std::runtime_error("load_embeddings: corrupt header in " + path.string());
    e.vectors.resize(static_cast<std::size_t>(e.vocab_size) * e.dim);
    for (auto& v : e.vectors) v = io::read_f32(in);
    e.context_vectors.assign(e.vectors.size(), 0.0);
    return e;
}

} // namespace tracksort
