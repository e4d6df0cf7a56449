// Minimal library tour: generate synthetic events, train a pocket-sized
// sorter in memory, then watch it untangle one merged pair it never saw.
// Runs in a few seconds; no files are written.

#include "tracksort/decode.hpp"
#include "tracksort/model.hpp"
#include "tracksort/sequence.hpp"
#include "tracksort/toygen.hpp"
#include "tracksort/trainer.hpp"
#include "tracksort/vocab.hpp"

#include <cstdio>
#include <vector>

using namespace tracksort;

namespace {

void print_tokens(const char* label, const std::vector<TokenId>& tokens,
                  const Vocabulary& vocab) {
    std::printf("%-12s", label);
    for (TokenId t : tokens) {
        if (t == kSepToken) {
            std::printf(" |");
        } else {
            const ModuleKey& key = vocab.decode(t);
            std::printf(" L%d.%02d", key.layer, key.module % 100);
        }
    }
    std::printf("\n");
}

} // namespace

int main() {
    // a barrel of 6 layers x 16 azimuthal sectors; every module is one token
    const auto det = ToyDetector::make(6, 16);
    const Vocabulary vocab(det.all_modules());
    std::printf("detector: %d modules -> vocabulary of %d tokens\n",
                vocab.size() - kNumSpecialTokens, vocab.size());

    // 400 merged two-track pairs for training, a few held out
    std::vector<SeqRecord> train_set, held_out;
    std::vector<std::vector<TokenId>> held_out_inputs;
    const std::uint64_t seed = 2024;
    for (long long event_id = 0; event_id < 101; ++event_id) {
        const auto ev = generate_event(det, 4, seed, {}, event_id);
        const auto pairs = pair_tracks(ev.tracks, seed + static_cast<std::uint64_t>(event_id));
        for (const auto& p : pairs) {
            auto rec = build_record(ev.tracks[p.a], ev.tracks[p.b], vocab);
            (event_id < 100 ? train_set : held_out).push_back(std::move(rec));
        }
    }
    std::printf("training on %zu pairs, holding out %zu\n\n", train_set.size(),
                held_out.size());

    ModelConfig mc;
    mc.d_model = 16;
    mc.n_heads = 1;
    mc.d_ff = 64;
    mc.n_encoder_layers = 1;
    mc.n_decoder_layers = 1;
    mc.vocab_size = vocab.size();
    mc.max_len = 64;
    auto model = init_model<float>(mc, /*embed_init=*/nullptr, /*seed=*/1);

    TrainConfig tc;
    tc.epochs = 30;
    tc.base_lr = 5e-3;
    tc.min_lr = 5e-4;
    tc.batch_size = 16;
    tc.seed = 1;
    const auto result = train(model, train_set, held_out, tc);
    std::printf("trained %d epochs: loss %.3f -> %.3f (held-out %.3f)\n\n", tc.epochs,
                result.log.front().train_loss, result.log.back().train_loss,
                result.log.back().val_loss);

    DecodeConfig dc;
    dc.sep_budget = 6;
    int shown = 0;
    for (const auto& rec : held_out) {
        if (++shown > 3) break;
        const auto res = greedy_decode(model, rec.input, dc);
        std::printf("held-out pair %d%s\n", shown, res.truncated ? " (truncated)" : "");
        print_tokens("  merged:", rec.input, vocab);
        print_tokens("  sorted:", res.tokens, vocab);
        print_tokens("  truth:", rec.target, vocab);
        std::printf("  %s\n\n", res.tokens == rec.target ? "exact match" : "differs");
    }
    return 0;
}
