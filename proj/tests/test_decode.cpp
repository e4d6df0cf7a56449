#include "tracksort/decode.hpp"
#include "tracksort/rng.hpp"
#include "tracksort/sequence.hpp"
#include "tracksort/toygen.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <vector>

using namespace tracksort;
using Catch::Matchers::ContainsSubstring;

namespace {

std::multiset<TokenId> without_sep(const std::vector<TokenId>& tokens) {
    std::multiset<TokenId> out;
    for (TokenId t : tokens)
        if (t != kSepToken) out.insert(t);
    return out;
}

/// Scripted provider: +10 on the scripted token for the current position,
/// flat elsewhere.
struct ScriptedProvider {
    std::vector<TokenId> script;
    int vocab;

    std::vector<float> operator()(const std::vector<TokenId>& prefix) const {
        std::vector<float> logits(static_cast<std::size_t>(vocab), 0.0f);
        const std::size_t pos = prefix.size() - 1;
        if (pos < script.size()) logits[static_cast<std::size_t>(script[pos])] = 10.0f;
        return logits;
    }
};

struct ConstantProvider {
    TokenId favourite;
    int vocab;

    std::vector<float> operator()(const std::vector<TokenId>&) const {
        std::vector<float> logits(static_cast<std::size_t>(vocab), 0.0f);
        logits[static_cast<std::size_t>(favourite)] = 10.0f;
        return logits;
    }
};

} // namespace

TEST_CASE("count mask bookkeeping", "[decode]") {
    SECTION("multiplicity example") {
        auto mask = init_count_mask({5, 7, 5}, 8);
        REQUIRE(mask.remaining[5] == 2);
        REQUIRE(mask.remaining[7] == 1);
        REQUIRE(mask.remaining[kSepToken] == 100);
        REQUIRE(mask.remaining[kSosToken] == 0);
        REQUIRE(mask.remaining[2] == 0);
    }
    SECTION("empty input leaves every module at zero") {
        auto mask = init_count_mask({}, 6);
        for (int t = 2; t < 6; ++t) REQUIRE(mask.remaining[static_cast<std::size_t>(t)] == 0);
        REQUIRE(mask.remaining[kSepToken] == 100);
    }
    SECTION("distinct tokens give one nonzero entry each") {
        std::vector<TokenId> input;
        for (int t = 2; t < 14; ++t) input.push_back(t);
        auto mask = init_count_mask(input, 20);
        int nonzero = 0;
        for (int t = 2; t < 20; ++t)
            if (mask.remaining[static_cast<std::size_t>(t)] > 0) ++nonzero;
        REQUIRE(nonzero == 12);
    }
    SECTION("special or out-of-range tokens are rejected") {
        REQUIRE_THROWS_WITH(init_count_mask({5, kSosToken}, 8), ContainsSubstring("special"));
        REQUIRE_THROWS_WITH(init_count_mask({kSepToken}, 8), ContainsSubstring("special"));
        REQUIRE_THROWS(init_count_mask({9}, 8));
        REQUIRE_THROWS(init_count_mask({-3}, 8));
    }
}

TEST_CASE("greedy decode follows a target-preferring script exactly", "[decode]") {
    // the canonical target for input {5,7,5}: two groups
    std::vector<TokenId> target{5, 5, kSepToken, 7, kSepToken};
    ScriptedProvider oracle{target, 9};
    auto res = greedy_decode(oracle, {5, 7, 5}, 9);
    REQUIRE(res.tokens == target);
    REQUIRE_FALSE(res.truncated);
    REQUIRE(res.steps == 5);

    SECTION("oracle reproduces built targets for toy pairs") {
        auto det = ToyDetector::make(6, 8);
        ToyGenConfig gen;
        auto ev = generate_event(det, 12, 404, gen);
        Vocabulary vocab(det.all_modules());
        auto pairs = pair_tracks(ev.tracks, 99);
        for (const auto& pr : pairs) {
            const auto& a = ev.tracks[pr.a];
            const auto& b = ev.tracks[pr.b];
            auto input = build_input(a, b, vocab);
            auto want = build_target(a, b, vocab);
            ScriptedProvider p{want, vocab.size()};
            auto got = greedy_decode(p, input, vocab.size());
            REQUIRE(got.tokens == want);
            REQUIRE_FALSE(got.truncated);
        }
    }
}

TEST_CASE("separator rules", "[decode]") {
    SECTION("a separator-obsessed provider alternates") {
        ConstantProvider p{kSepToken, 9};
        auto res = greedy_decode(p, {5, 7, 5}, 9);
        // consecutive-[SEP] ban forces a module after each [SEP]; lowest id
        // wins the module ties
        REQUIRE(res.tokens == std::vector<TokenId>{1, 5, 1, 5, 1, 7, 1});
        REQUIRE_FALSE(res.truncated);
    }
    SECTION("exhausted separator budget ends in truncation") {
        ConstantProvider p{kSepToken, 9};
        DecodeConfig cfg;
        cfg.sep_budget = 2;
        auto res = greedy_decode(p, {5, 7, 5}, 9, cfg);
        REQUIRE(res.truncated);
        REQUIRE(res.tokens.back() == kSepToken);
        REQUIRE(without_sep(res.tokens) == without_sep({5, 7, 5}));
        int seps = 0;
        for (std::size_t i = 0; i < res.tokens.size(); ++i) {
            if (res.tokens[i] == kSepToken) ++seps;
            if (i)
                REQUIRE_FALSE((res.tokens[i] == kSepToken &&
                               res.tokens[i - 1] == kSepToken));
        }
        REQUIRE(seps == 3); // budget of 2 plus the forced closer
    }
    SECTION("consumed tokens never return even when preferred") {
        // prefer token 5 forever; both copies go first, then the rest
        ConstantProvider p{5, 9};
        auto res = greedy_decode(p, {5, 7, 5}, 9);
        REQUIRE(res.tokens[0] == 5);
        REQUIRE(res.tokens[1] == 5);
        REQUIRE(without_sep(res.tokens) == without_sep({5, 7, 5}));
        REQUIRE(std::count(res.tokens.begin(), res.tokens.end(), 5) == 2);
    }
}

TEST_CASE("decode bounds and validation", "[decode]") {
    ScriptedProvider oracle{{5, kSepToken, 7, 5, kSepToken}, 9};
    SECTION("empty input") {
        REQUIRE_THROWS(greedy_decode(oracle, {}, 9));
    }
    SECTION("max_steps below input length + 1") {
        DecodeConfig cfg;
        cfg.max_steps = 3;
        REQUIRE_THROWS(greedy_decode(oracle, {5, 7, 5}, 9, cfg));
    }
    SECTION("tight max_steps truncates mid-script and closes the output") {
        // script wants 5 tokens; allow exactly input+1 = 4 steps
        DecodeConfig cfg;
        cfg.max_steps = 4;
        auto res = greedy_decode(oracle, {5, 7, 5}, 9, cfg);
        REQUIRE(res.truncated);
        REQUIRE(res.steps == 4);
        REQUIRE(res.tokens.back() == kSepToken);
    }
    SECTION("provider must return vocab-sized logits") {
        auto bad = [](const std::vector<TokenId>&) { return std::vector<float>(3, 0.0f); };
        REQUIRE_THROWS_WITH(greedy_decode(bad, {5, 7, 5}, 9), ContainsSubstring("logits"));
    }
    SECTION("model max_len must fit the longest possible prefix") {
        ModelConfig mc;
        mc.d_model = 8;
        mc.d_ff = 16;
        mc.n_encoder_layers = 1;
        mc.n_decoder_layers = 1;
        mc.vocab_size = 9;
        mc.max_len = 16; // far below 3 + 100 + 2
        auto m = init_model<float>(mc, 3);
        REQUIRE_THROWS_WITH(greedy_decode(m, std::vector<TokenId>{5, 7, 5}, DecodeConfig{}),
                            ContainsSubstring("max_len"));
        DecodeConfig cfg;
        cfg.sep_budget = 4;
        cfg.max_steps = 10;
        auto res = greedy_decode(m, std::vector<TokenId>{5, 7, 5}, cfg);
        REQUIRE(without_sep(res.tokens) == without_sep({5, 7, 5}));
    }
}

TEST_CASE("fuzzed decodes keep the invariants", "[decode]") {
    // random-weight models over random inputs: permutation, separator
    // spacing, termination
    ModelConfig mc;
    mc.d_model = 8;
    mc.d_ff = 16;
    mc.n_encoder_layers = 1;
    mc.n_decoder_layers = 1;
    mc.vocab_size = 11;
    mc.max_len = 64;
    DecodeConfig cfg;
    cfg.sep_budget = 20;

    Rng rng(616);
    for (int trial = 0; trial < 60; ++trial) {
        auto m = init_model<float>(mc, 1000 + static_cast<std::uint64_t>(trial));
        std::vector<TokenId> input(2 + rng.uniform_index(14));
        for (auto& t : input) t = static_cast<TokenId>(2 + rng.uniform_index(9));

        auto res = greedy_decode(m, input, cfg);
        const long max_steps = static_cast<long>(input.size()) + cfg.sep_budget + 1;
        REQUIRE(res.steps <= max_steps);
        REQUIRE(without_sep(res.tokens) == without_sep(input));
        REQUIRE(res.tokens.back() == kSepToken);
        for (std::size_t i = 1; i < res.tokens.size(); ++i)
            REQUIRE_FALSE((res.tokens[i] == kSepToken && res.tokens[i - 1] == kSepToken));
    }
}

TEST_CASE("splitting decoded sequences", "[decode]") {
    using Groups = std::vector<std::vector<TokenId>>;
    REQUIRE(split_tracks({4, 6, kSepToken, 9, kSepToken}) == Groups{{4, 6}, {9}});
    REQUIRE(split_tracks({kSepToken}) == Groups{});
    REQUIRE(split_tracks({}) == Groups{});
    REQUIRE(split_tracks({4, 6}) == Groups{{4, 6}});
    REQUIRE(split_tracks({kSepToken, 4, kSepToken, kSepToken, 6}) == Groups{{4}, {6}});
}

TEST_CASE("decode line format", "[decode]") {
    SECTION("round trip") {
        DecodeResult res;
        res.tokens = {4, 6, kSepToken, 9, kSepToken};
        REQUIRE(format_decode_line(res) == "4 6;9");
        auto [groups, trunc] = parse_decode_line("4 6;9");
        REQUIRE(groups == std::vector<std::vector<TokenId>>{{4, 6}, {9}});
        REQUIRE_FALSE(trunc);
    }
    SECTION("truncation flag") {
        DecodeResult res;
        res.tokens = {4, kSepToken};
        res.truncated = true;
        REQUIRE(format_decode_line(res) == "4;TRUNC");
        auto [groups, trunc] = parse_decode_line("4;TRUNC");
        REQUIRE(groups.size() == 1);
        REQUIRE(trunc);
    }
    SECTION("parse errors carry the line number") {
        REQUIRE_THROWS_WITH(parse_decode_line("4;TRUNC;5", 7), ContainsSubstring("7"));
        REQUIRE_THROWS(parse_decode_line("4 x;5"));
        REQUIRE_THROWS(parse_decode_line("4;;5"));
        REQUIRE_THROWS(parse_decode_line("-2 4"));
    }
    SECTION("empty line parses to nothing") {
        auto [groups, trunc] = parse_decode_line("");
        REQUIRE(groups.empty());
        REQUIRE_FALSE(trunc);
    }
}
