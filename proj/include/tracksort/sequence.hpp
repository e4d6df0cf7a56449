#pragma once

#include "tracksort/event.hpp"
#include "tracksort/rng.hpp"
#include "tracksort/vocab.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracksort {

/// Indices into the track list the pair was drawn from; a != b.
struct TrackPair {
    std::size_t a = 0;
    std::size_t b = 0;
};

/// Each track appears exactly once in the `a` slot; the partner is drawn
/// uniformly from the remaining tracks (with replacement across pairs).
inline std::vector<TrackPair> pair_tracks(const std::vector<Track>& tracks, std::uint64_t seed) {
    if (tracks.size() < 2)
        throw std::invalid_argument("pair_tracks: need at least 2 tracks");
    Rng rng(seed ^ 0x7061697274726b73ull); // "skrtpair"
    std::vector<TrackPair> pairs;
    pairs.reserve(tracks.size());
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        std::size_t j = rng.uniform_index(tracks.size() - 1);
        if (j >= i) ++j;
        pairs.push_back({i, j});
    }
    return pairs;
}

namespace detail {

inline std::vector<SpacePoint> sorted_points(const Track& t) {
    std::vector<SpacePoint> pts = t.points;
    std::sort(pts.begin(), pts.end(), point_order);
    return pts;
}

inline void encode_points(const std::vector<SpacePoint>& pts, const Vocabulary& v,
                          std::vector<TokenId>& out) {
    for (const SpacePoint& p : pts) out.push_back(v.encode(p.module_key));
}

} // namespace detail

/// Merged hits of both tracks, globally sorted by (r, z, module_key).
/// Contains module tokens only — no specials.
inline std::vector<TokenId> build_input(const Track& a, const Track& b, const Vocabulary& v) {
    if (a.points.empty() || b.points.empty())
        throw std::invalid_argument("build_input: tracks must be nonempty");
    std::vector<SpacePoint> merged = a.points;
    merged.insert(merged.end(), b.points.begin(), b.points.end());
    std::sort(merged.begin(), merged.end(), point_order);
    std::vector<TokenId> tokens;
    tokens.reserve(merged.size());
    detail::encode_points(merged, v, tokens);
    return tokens;
}

/// Hits grouped per track, each group r-sorted and closed with [SEP].
/// The track whose innermost point has smaller r comes first (tie: smaller
/// particle id).
inline std::vector<TokenId> build_target(const Track& a, const Track& b, const Vocabulary& v) {
    if (a.points.empty() || b.points.empty())
        throw std::invalid_argument("build_target: tracks must be nonempty");
    auto pa = detail::sorted_points(a);
    auto pb = detail::sorted_points(b);
    bool a_first = pa.front().r < pb.front().r ||
                   (pa.front().r == pb.front().r && a.particle_id < b.particle_id);
    if (!a_first) std::swap(pa, pb);

    std::vector<TokenId> tokens;
    tokens.reserve(pa.size() + pb.size() + 2);
    detail::encode_points(pa, v, tokens);
    tokens.push_back(kSepToken);
    detail::encode_points(pb, v, tokens);
    tokens.push_back(kSepToken);
    return tokens;
}

/// One sentence per pair, content identical to the training target.
inline std::vector<std::vector<TokenId>>
build_cbow_corpus(const std::vector<Track>& tracks, const std::vector<TrackPair>& pairs,
                  const Vocabulary& v) {
    if (pairs.empty()) throw std::invalid_argument("build_cbow_corpus: no pairs");
    std::vector<std::vector<TokenId>> corpus;
    corpus.reserve(pairs.size());
    for (const TrackPair& p : pairs)
        corpus.push_back(build_target(tracks.at(p.a), tracks.at(p.b), v));
    return corpus;
}

/// One input/target sample, as stored in dataset files.
struct SeqRecord {
    std::vector<TokenId> input;
    std::vector<TokenId> target;
};

inline SeqRecord build_record(const Track& a, const Track& b, const Vocabulary& v) {
    return {build_input(a, b, v), build_target(a, b, v)};
}

/// `input_tokens|target_tokens`, space-separated integers, one pair per line.
inline void write_dataset(const std::filesystem::path& path,
                          const std::vector<SeqRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_dataset: cannot open " + path.string());
    for (const SeqRecord& rec : records) {
        for (std::size_t i = 0; i < rec.input.size(); ++i)
            out << (i ? " " : "") << rec.input[i];
        out << '|';
        for (std::size_t i = 0; i < rec.target.size(); ++i)
            out << (i ? " " : "") << rec.target[i];
        out << '\n';
    }
    if (!out) throw std::runtime_error("write_dataset: write failed for " + path.string());
}

inline std::vector<SeqRecord> read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_dataset: cannot open " + path.string());
    std::vector<SeqRecord> records;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw std::runtime_error(path.string() + ':' + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto bar = line.find('|');
        if (bar == std::string::npos) fail("missing '|' separator");
        if (line.find('|', bar + 1) != std::string::npos) fail("more than one '|' separator");
        SeqRecord rec;
        for (int part = 0; part < 2; ++part) {
            std::istringstream ss(part == 0 ? line.substr(0, bar) : line.substr(bar + 1));
            auto& dst = part == 0 ? rec.input : rec.target;
            TokenId tok;
            while (ss >> tok) {
                if (tok < 0) fail("negative token id");
                dst.push_back(tok);
            }
            if (!ss.eof()) fail("malformed token list");
        }
        if (rec.input.empty() || rec.target.empty()) fail("empty token list");
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace tracksort
