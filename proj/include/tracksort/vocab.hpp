#pragma once

#include "tracksort/csv.hpp"
#include "tracksort/event.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracksort {

using TokenId = int;

inline constexpr TokenId kSosToken = 0;
inline constexpr TokenId kSepToken = 1;
inline constexpr int kNumSpecialTokens = 2;

enum class TokenKind { Special, Module };

/// Token dictionary over detector modules. Special tokens occupy ids 0
/// ([SOS]) and 1 ([SEP]); module ids follow in ascending key order, so the
/// mapping is a pure function of the module set.
class Vocabulary {
  public:
    Vocabulary() = default;

    explicit Vocabulary(const std::set<ModuleKey>& modules) {
        if (modules.empty())
            throw std::invalid_argument("Vocabulary: module set must be nonempty");
        keys_.reserve(modules.size());
        for (const ModuleKey& k : modules) {
            index_[k] = static_cast<TokenId>(kNumSpecialTokens + keys_.size());
            keys_.push_back(k);
        }
    }

    int size() const { return kNumSpecialTokens + static_cast<int>(keys_.size()); }

    TokenKind kind(TokenId id) const {
        check_range(id);
        return id < kNumSpecialTokens ? TokenKind::Special : TokenKind::Module;
    }

    TokenId encode(const ModuleKey& key) const {
        auto it = index_.find(key);
        if (it == index_.end())
            throw std::out_of_range("Vocabulary::encode: module (" +
                                    std::to_string(key.volume) + "," +
                                    std::to_string(key.layer) + "," +
                                    std::to_string(key.module) + ") is not in the vocabulary");
        return it->second;
    }

    const ModuleKey& decode(TokenId id) const {
        check_range(id);
        if (id < kNumSpecialTokens)
            throw std::invalid_argument("Vocabulary::decode: token " + std::to_string(id) +
                                        " is special, not a module");
        return keys_[static_cast<std::size_t>(id - kNumSpecialTokens)];
    }

    bool contains(const ModuleKey& key) const { return index_.count(key) != 0; }

    /// One row per token: `token_id,volume_id,layer_id,module_id`.
    /// Specials come first with -1 sentinels in the key columns.
    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("Vocabulary::save: cannot open " + path.string());
        out << "token_id,volume_id,layer_id,module_id\n";
        out << kSosToken << ",-1,-1,-1\n";
        out << kSepToken << ",-1,-1,-1\n";
        for (std::size_t i = 0; i < keys_.size(); ++i)
            out << kNumSpecialTokens + i << ',' << keys_[i].volume << ',' << keys_[i].layer
                << ',' << keys_[i].module << '\n';
        if (!out) throw std::runtime_error("Vocabulary::save: write failed for " + path.string());
    }

    static Vocabulary load(const std::filesystem::path& path) {
        csv::Reader r(path.string());
        const int c_tok = r.column("token_id");
        const int c_vol = r.column("volume_id");
        const int c_lay = r.column("layer_id");
        const int c_mod = r.column("module_id");

        Vocabulary v;
        std::vector<std::string> f;
        TokenId expect = 0;
        while (r.next(f)) {
            const auto tok = static_cast<TokenId>(r.as_int(f, c_tok));
            if (tok != expect)
                throw std::runtime_error(path.string() + ':' +
                                         std::to_string(r.line_number()) +
                                         ": token ids must be dense from 0, got " +
                                         std::to_string(tok) + " expecting " +
                                         std::to_string(expect));
            ModuleKey key{static_cast<int>(r.as_int(f, c_vol)),
                          static_cast<int>(r.as_int(f, c_lay)),
                          static_cast<int>(r.as_int(f, c_mod))};
            if (tok < kNumSpecialTokens) {
                if (key.volume != -1 || key.layer != -1 || key.module != -1)
                    throw std::runtime_error(path.string() + ':' +
                                             std::to_string(r.line_number()) +
                                             ": special tokens must use -1 key columns");
            } else {
                if (!v.keys_.empty() && !(v.keys_.back() < key))
                    throw std::runtime_error(path.string() + ':' +
                                             std::to_string(r.line_number()) +
                                             ": module keys must be strictly ascending");
                v.index_[key] = tok;
                v.keys_.push_back(key);
            }
            ++expect;
        }
        if (expect < kNumSpecialTokens)
            throw std::runtime_error(path.string() + ": missing special token rows");
        return v;
    }

  private:
    void check_range(TokenId id) const {
        if (id < 0 || id >= size())
            throw std::out_of_range("Vocabulary: token " + std::to_string(id) +
                                    " outside [0," + std::to_string(size()) + ")");
    }

    std::vector<ModuleKey> keys_; // token id - kNumSpecialTokens -> key
    std::map<ModuleKey, TokenId> index_;
};

} // namespace tracksort
