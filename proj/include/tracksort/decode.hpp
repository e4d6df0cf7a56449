#pragma once

#include "tracksort/model.hpp"
#include "tracksort/vocab.hpp"

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracksort {

/// Per-token emission budget. Module tokens carry their input multiplicity,
/// [SOS] is never emittable, [SEP] gets a fixed allowance.
struct CountMask {
    std::vector<int> remaining;

    bool exhausted(TokenId t) const { return remaining[static_cast<std::size_t>(t)] == 0; }
    void consume(TokenId t) { --remaining[static_cast<std::size_t>(t)]; }
};

struct DecodeConfig {
    int sep_budget = 100;
    long max_steps = 0; ///< 0 = auto: input length + sep_budget + 1

    void validate() const {
        if (sep_budget < 1) throw std::invalid_argument("DecodeConfig: sep_budget must be >= 1");
        if (max_steps < 0) throw std::invalid_argument("DecodeConfig: max_steps must be >= 0");
    }
};

inline CountMask init_count_mask(const std::vector<TokenId>& input, int vocab_size,
                                 int sep_budget = 100) {
    if (vocab_size < kNumSpecialTokens + 1)
        throw std::invalid_argument("init_count_mask: vocab too small");
    CountMask mask;
    mask.remaining.assign(static_cast<std::size_t>(vocab_size), 0);
    for (TokenId t : input) {
        if (t == kSosToken || t == kSepToken)
            throw std::invalid_argument("init_count_mask: special token " + std::to_string(t) +
                                        " in input");
        if (t < 0 || t >= vocab_size)
            throw std::invalid_argument("init_count_mask: token " + std::to_string(t) +
                                        " outside vocabulary");
        ++mask.remaining[static_cast<std::size_t>(t)];
    }
    mask.remaining[static_cast<std::size_t>(kSosToken)] = 0;
    mask.remaining[static_cast<std::size_t>(kSepToken)] = sep_budget;
    return mask;
}

struct DecodeResult {
    std::vector<TokenId> tokens;
    bool truncated = false;
    long steps = 0;
};

/// Greedy search under the count mask. `provider(prefix)` returns the
/// next-token logits (length vocab_size) given the prefix emitted so far
/// (starting with [SOS]). Each step excludes exhausted tokens and a [SEP]
/// directly after a [SEP], emits the surviving argmax (ties go to the lowest
/// token id), and stops once every input token is consumed and the last
/// emission is [SEP]. Hitting max_steps force-appends the closing [SEP] and
/// flags the result.
template <typename Provider>
DecodeResult greedy_decode(Provider&& provider, const std::vector<TokenId>& input,
                           int vocab_size, const DecodeConfig& cfg = {}) {
    cfg.validate();
    if (input.empty()) throw std::invalid_argument("greedy_decode: empty input");
    const long max_steps =
        cfg.max_steps == 0 ? static_cast<long>(input.size()) + cfg.sep_budget + 1
                           : cfg.max_steps;
    if (max_steps < static_cast<long>(input.size()) + 1)
        throw std::invalid_argument("greedy_decode: max_steps must be >= input length + 1");

    CountMask mask = init_count_mask(input, vocab_size, cfg.sep_budget);
    std::size_t modules_left = input.size();

    DecodeResult res;
    std::vector<TokenId> prefix{kSosToken};
    prefix.reserve(1 + static_cast<std::size_t>(max_steps));

    while (res.steps < max_steps) {
        const std::vector<float> logits = provider(prefix);
        if (logits.size() != static_cast<std::size_t>(vocab_size))
            throw std::invalid_argument("greedy_decode: provider returned " +
                                        std::to_string(logits.size()) + " logits, expected " +
                                        std::to_string(vocab_size));
        const bool after_sep = !res.tokens.empty() && res.tokens.back() == kSepToken;
        int best = -1;
        for (int t = 0; t < vocab_size; ++t) {
            if (mask.exhausted(static_cast<TokenId>(t))) continue;
            if (t == kSepToken && after_sep) continue;
            if (best < 0 || logits[static_cast<std::size_t>(t)] >
                                logits[static_cast<std::size_t>(best)])
                best = t;
        }
        if (best < 0) {
            // only reachable once the input is fully consumed and the [SEP]
            // allowance is spent; wrap up through the truncation path
            if (modules_left > 0)
                throw std::logic_error("greedy_decode: no candidate with input remaining");
            break;
        }
        const auto tok = static_cast<TokenId>(best);
        mask.consume(tok);
        if (tok != kSepToken) --modules_left;
        res.tokens.push_back(tok);
        prefix.push_back(tok);
        ++res.steps;
        if (modules_left == 0 && tok == kSepToken) return res;
    }
    res.truncated = true;
    if (res.tokens.empty() || res.tokens.back() != kSepToken) res.tokens.push_back(kSepToken);
    return res;
}

/// Next-token logits from a trained model: re-encodes the input and runs the
/// causal decoder over the whole prefix, returning the last row.
template <typename T>
class ModelLogitProvider {
public:
    ModelLogitProvider(const Model<T>& m, std::vector<TokenId> input)
        : model_(m), input_(std::move(input)) {}

    std::vector<float> operator()(const std::vector<TokenId>& prefix) const {
        Tape<T> tape;
        auto p = bind_parameters(tape, model_, false);
        auto memory = encode(tape, model_, p, input_);
        auto logits = decode_logits(tape, model_, p, memory, input_.size(), prefix);
        const Tensor<T>& l = tape.value(logits);
        std::vector<float> out(l.cols());
        const std::size_t last = l.rows() - 1;
        for (std::size_t c = 0; c < l.cols(); ++c)
            out[c] = static_cast<float>(l.at(last, c));
        return out;
    }

private:
    const Model<T>& model_;
    std::vector<TokenId> input_;
};

template <typename T>
DecodeResult greedy_decode(const Model<T>& m, const std::vector<TokenId>& input,
                           const DecodeConfig& cfg = {}) {
    const long max_steps =
        cfg.max_steps == 0 ? static_cast<long>(input.size()) + cfg.sep_budget + 1
                           : cfg.max_steps;
    if (static_cast<long>(m.config.max_len) < max_steps + 1)
        throw std::invalid_argument("greedy_decode: model max_len " +
                                    std::to_string(m.config.max_len) +
                                    " cannot hold max_steps + 1 = " +
                                    std::to_string(max_steps + 1) + " positions");
    return greedy_decode(ModelLogitProvider<T>(m, input), input, m.config.vocab_size, cfg);
}

/// Splits a decoded sequence at [SEP]; empty segments vanish.
inline std::vector<std::vector<TokenId>> split_tracks(const std::vector<TokenId>& tokens) {
    std::vector<std::vector<TokenId>> out;
    std::vector<TokenId> current;
    for (TokenId t : tokens) {
        if (t == kSepToken) {
            if (!current.empty()) out.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(t);
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

/// One decode as a text line: candidates joined by ';', tokens by ' ', with a
/// final ';TRUNC' field on force-stopped decodes.
inline std::string format_decode_line(const DecodeResult& res) {
    std::string line;
    const auto groups = split_tracks(res.tokens);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (g) line += ';';
        for (std::size_t i = 0; i < groups[g].size(); ++i) {
            if (i) line += ' ';
            line += std::to_string(groups[g][i]);
        }
    }
    if (res.truncated) {
        if (!line.empty()) line += ';';
        line += "TRUNC";
    }
    return line;
}

/// Inverse of format_decode_line (token groups + flag; step count is not
/// round-tripped).
inline std::pair<std::vector<std::vector<TokenId>>, bool>
parse_decode_line(const std::string& line, int line_number = 0) {
    std::vector<std::vector<TokenId>> groups;
    bool truncated = false;
    std::size_t start = 0;
    const auto fail = [&](const std::string& what) {
        throw std::runtime_error("decode line " + std::to_string(line_number) + ": " + what);
    };
    while (start <= line.size()) {
        std::size_t end = line.find(';', start);
        if (end == std::string::npos) end = line.size();
        const std::string field = line.substr(start, end - start);
        if (field == "TRUNC") {
            if (end != line.size()) fail("TRUNC must be the final field");
            truncated = true;
        } else if (!field.empty()) {
            std::vector<TokenId> group;
            std::size_t pos = 0;
            while (pos < field.size()) {
                std::size_t sp = field.find(' ', pos);
                if (sp == std::string::npos) sp = field.size();
                const std::string tok = field.substr(pos, sp - pos);
                if (tok.empty()) fail("empty token");
                std::size_t used = 0;
                int value = 0;
                try {
                    value = std::stoi(tok, &used);
                } catch (const std::exception&) {
                    fail("bad token '" + tok + "'");
                }
                if (used != tok.size() || value < 0) fail("bad token '" + tok + "'");
                group.push_back(value);
                pos = sp + 1;
            }
            groups.push_back(std::move(group));
        } else if (!line.empty()) {
            fail("empty candidate field");
        }
        if (end == line.size()) break;
        start = end + 1;
    }
    return {std::move(groups), truncated};
}

} // namespace tracksort
