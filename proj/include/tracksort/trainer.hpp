#pragma once

#include "tracksort/checkpoint.hpp"
#include "tracksort/model.hpp"
#include "tracksort/rng.hpp"
#include "tracksort/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracksort {

struct TrainConfig {
    int epochs = 371;
    double base_lr = 1e-3;
    double min_lr = 1e-5;
    int batch_size = 32;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 0.0; ///< global-norm cap; 0 disables
    std::uint64_t seed = 1;

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (!(0 < min_lr && min_lr <= base_lr))
            throw std::invalid_argument("TrainConfig: need 0 < min_lr <= base_lr");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1) || adam_eps <= 0)
            throw std::invalid_argument("TrainConfig: bad Adam constants");
        if (grad_clip < 0) throw std::invalid_argument("TrainConfig: grad_clip must be >= 0");
    }
};

/// lr(t) = min + (base - min) * (1 + cos(pi t / epochs)) / 2.
inline double cosine_lr(int t, int epochs, double base_lr, double min_lr) {
    if (epochs < 1 || t < 0 || t > epochs)
        throw std::invalid_argument("cosine_lr: need 0 <= t <= epochs, epochs >= 1");
    const double pi = 3.14159265358979323846;
    return min_lr + 0.5 * (base_lr - min_lr) *
                        (1.0 + std::cos(pi * static_cast<double>(t) / epochs));
}

template <typename T>
struct AdamState {
    std::uint64_t step = 0;
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;

    explicit AdamState(const Model<T>& model) {
        m.reserve(model.params.size());
        v.reserve(model.params.size());
        for (const auto& [name, t] : model.params) {
            m.push_back(Tensor<T>(t.shape));
            v.push_back(Tensor<T>(t.shape));
        }
    }
};

/// One bias-corrected Adam update over all parameters.
/// grads[i] pairs with model.params[i]; non-finite gradients abort.
template <typename T>
void adam_step(Model<T>& model, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               double lr, const TrainConfig& cfg) {
    if (grads.size() != model.params.size())
        throw std::invalid_argument("adam_step: gradient list does not match parameters");
    state.step += 1;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < grads.size(); ++i) {
        auto& theta = model.params[i].second;
        const auto& g = grads[i];
        if (g.shape != theta.shape)
            throw std::invalid_argument("adam_step: gradient shape mismatch for " +
                                        model.params[i].first);
        if (!g.all_finite())
            throw std::runtime_error("adam_step: non-finite gradient in " +
                                     model.params[i].first);
        auto& mi = state.m[i];
        auto& vi = state.v[i];
        for (std::size_t j = 0; j < g.data.size(); ++j) {
            const double gj = static_cast<double>(g.data[j]);
            const double mj = b1 * static_cast<double>(mi.data[j]) + (1 - b1) * gj;
            const double vj = b2 * static_cast<double>(vi.data[j]) + (1 - b2) * gj * gj;
            mi.data[j] = static_cast<T>(mj);
            vi.data[j] = static_cast<T>(vj);
            const double mhat = mj / bc1;
            const double vhat = vj / bc2;
            theta.data[j] =
                static_cast<T>(static_cast<double>(theta.data[j]) -
                               lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
        }
    }
}

/// Scales all gradients so their global L2 norm is at most `cap`.
template <typename T>
void clip_gradients(std::vector<Tensor<T>>& grads, double cap) {
    if (cap <= 0) return;
    double sq = 0.0;
    for (const auto& g : grads)
        for (T x : g.data) sq += static_cast<double>(x) * static_cast<double>(x);
    const double norm = std::sqrt(sq);
    if (norm <= cap) return;
    const T s = static_cast<T>(cap / norm);
    for (auto& g : grads)
        for (T& x : g.data) x *= s;
}

namespace detail {

/// Right-pads a copy of `tokens` to `len` with `pad` (no-op when already there).
inline std::vector<TokenId> right_pad(const std::vector<TokenId>& tokens, std::size_t len,
                                      TokenId pad) {
    std::vector<TokenId> out = tokens;
    out.resize(len, pad);
    return out;
}

} // namespace detail

/// Teacher-forced loss for a batch built as one tape: every sample is a
/// separate forward sharing the same parameter leaves, inputs and targets
/// right-padded to the batch maxima ([SOS]=0 doubles as the pad id, ignored
/// by the loss). Returns the token-weighted mean loss node.
template <typename T>
std::size_t batch_loss(Tape<T>& tape, const Model<T>& m, const std::vector<std::size_t>& p,
                       const std::vector<const SeqRecord*>& batch) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    std::size_t max_in = 0, max_tgt = 0, total_tokens = 0;
    for (const auto* rec : batch) {
        max_in = std::max(max_in, rec->input.size());
        max_tgt = std::max(max_tgt, rec->target.size());
        total_tokens += rec->target.size();
    }
    std::optional<std::size_t> loss;
    for (const auto* rec : batch) {
        if (rec->input.empty() || rec->target.empty() || rec->target.back() != kSepToken)
            throw std::invalid_argument("batch_loss: record needs nonempty input and "
                                        "[SEP]-terminated target");
        const auto input = detail::right_pad(rec->input, max_in, kSosToken);
        const auto target = detail::right_pad(rec->target, max_tgt, kSosToken);
        auto memory = encode(tape, m, p, input, rec->input.size());
        std::vector<TokenId> prefix;
        prefix.reserve(target.size());
        prefix.push_back(kSosToken);
        prefix.insert(prefix.end(), target.begin(), target.end() - 1);
        auto logits = decode_logits(tape, m, p, memory, rec->input.size(), prefix);
        auto ce = tape.cross_entropy(logits, std::vector<int>(target.begin(), target.end()),
                                     kSosToken);
        // mean-per-token within the sample; reweight to a flat token mean
        auto weighted = tape.scale(ce, static_cast<T>(static_cast<double>(rec->target.size()) /
                                                      static_cast<double>(total_tokens)));
        loss = loss ? tape.add(*loss, weighted) : weighted;
    }
    return *loss;
}

/// Token-weighted mean teacher-forced loss without gradients.
template <typename T>
double dataset_loss(const Model<T>& m, const std::vector<SeqRecord>& records) {
    if (records.empty()) throw std::invalid_argument("dataset_loss: empty dataset");
    double ce_sum = 0.0;
    std::size_t tokens = 0;
    for (const auto& rec : records) {
        Tape<T> tape;
        auto p = bind_parameters(tape, m, false);
        auto loss = teacher_forced_loss(tape, m, p, rec.input, rec.target);
        ce_sum += static_cast<double>(tape.value(loss).data[0]) *
                  static_cast<double>(rec.target.size());
        tokens += rec.target.size();
    }
    return ce_sum / static_cast<double>(tokens);
}

/// Fraction of target positions whose greedy (unmasked) argmax logit equals
/// the teacher-forced target token.
template <typename T>
double token_accuracy(const Model<T>& m, const std::vector<SeqRecord>& records) {
    if (records.empty()) throw std::invalid_argument("token_accuracy: empty dataset");
    std::size_t hits = 0, total = 0;
    for (const auto& rec : records) {
        Tape<T> tape;
        auto p = bind_parameters(tape, m, false);
        auto memory = encode(tape, m, p, rec.input);
        std::vector<TokenId> prefix;
        prefix.push_back(kSosToken);
        prefix.insert(prefix.end(), rec.target.begin(), rec.target.end() - 1);
        auto logits = decode_logits(tape, m, p, memory, rec.input.size(), prefix);
        const Tensor<T>& l = tape.value(logits);
        for (std::size_t row = 0; row < l.rows(); ++row) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < l.cols(); ++c)
                if (l.at(row, c) > l.at(row, best)) best = c;
            if (static_cast<TokenId>(best) == rec.target[row]) ++hits;
            ++total;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

struct TrainLogRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    Checkpoint best;           ///< lowest-validation-loss snapshot
    std::vector<TrainLogRow> log;
};

/// `epoch,train_loss,val_loss,lr` CSV rows.
inline void write_train_log(const std::filesystem::path& path,
                            const std::vector<TrainLogRow>& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_train_log: cannot open " + path.string());
    out << "epoch,train_loss,val_loss,lr\n";
    out.precision(10);
    for (const auto& row : log)
        out << row.epoch << ',' << row.train_loss << ',' << row.val_loss << ',' << row.lr
            << '\n';
}

/// Full optimization loop. Mutates `model` in place (final-epoch weights)
/// and returns the best-validation checkpoint with optimizer moments.
inline TrainResult train(Model<float>& model, const std::vector<SeqRecord>& train_set,
                         const std::vector<SeqRecord>& val_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty() || val_set.empty())
        throw std::invalid_argument("train: datasets must be nonempty");

    AdamState<float> state(model);
    Rng rng(cfg.seed ^ 0x747261696e6c6f70ull); // "trainlop"
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    double best_val = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.base_lr, cfg.min_lr);
        shuffle(order, rng);

        double train_ce = 0.0;
        std::size_t train_tokens = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const SeqRecord*> batch;
            batch.reserve(stop - start);
            std::size_t batch_tokens = 0;
            for (std::size_t i = start; i < stop; ++i) {
                batch.push_back(&train_set[order[i]]);
                batch_tokens += train_set[order[i]].target.size();
            }

            Tape<float> tape;
            auto p = bind_parameters(tape, model, true);
            auto loss = batch_loss(tape, model, p, batch);
            const double loss_value = static_cast<double>(tape.value(loss).data[0]);
            if (!std::isfinite(loss_value))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch starting at sample " +
                                         std::to_string(start));
            tape.backward(loss);

            std::vector<Tensor<float>> grads;
            grads.reserve(p.size());
            for (auto id : p) grads.push_back(tape.grad(id));
            clip_gradients(grads, cfg.grad_clip);
            adam_step(model, grads, state, lr, cfg);

            train_ce += loss_value * static_cast<double>(batch_tokens);
            train_tokens += batch_tokens;
        }

        const double train_loss = train_ce / static_cast<double>(train_tokens);
        const double val_loss = dataset_loss(model, val_set);
        if (!std::isfinite(val_loss))
            throw std::runtime_error("train: non-finite validation loss at epoch " +
                                     std::to_string(epoch));
        result.log.push_back({epoch, train_loss, val_loss, lr});

        if (val_loss < best_val) {
            best_val = val_loss;
            result.best = checkpoint_from_model(model, static_cast<std::uint32_t>(epoch),
                                                val_loss);
            CheckpointMoments mom;
            mom.step = state.step;
            mom.m = state.m;
            mom.v = state.v;
            result.best.moments = std::move(mom);
        }
    }
    if (result.best.params.empty())
        throw std::logic_error("train: no checkpoint captured"); // unreachable: finite losses
    return result;
}

} // namespace tracksort
