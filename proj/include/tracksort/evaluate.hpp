#pragma once

#include "tracksort/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracksort {

struct MatchCriteria {
    double threshold = 0.75; ///< required in both directions

    void validate() const {
        if (!(threshold > 0.0 && threshold <= 1.0))
            throw std::invalid_argument("MatchCriteria: threshold must be in (0, 1]");
    }
};

/// Size of the multiset intersection (duplicated tokens count once per copy).
inline std::size_t multiset_intersection_size(const std::vector<TokenId>& a,
                                              const std::vector<TokenId>& b) {
    std::map<TokenId, std::size_t> counts;
    for (TokenId t : a) ++counts[t];
    std::size_t shared = 0;
    for (TokenId t : b) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++shared;
        }
    }
    return shared;
}

/// Double-majority test: the shared fraction must reach the threshold of the
/// candidate AND of the truth track (boundary inclusive).
inline bool match(const std::vector<TokenId>& candidate, const std::vector<TokenId>& truth,
                  const MatchCriteria& c = {}) {
    c.validate();
    if (candidate.empty() || truth.empty())
        throw std::invalid_argument("match: empty candidate or truth track");
    const auto shared = static_cast<double>(multiset_intersection_size(candidate, truth));
    return shared >= c.threshold * static_cast<double>(candidate.size()) &&
           shared >= c.threshold * static_cast<double>(truth.size());
}

struct TruthTrack {
    std::vector<TokenId> tokens;
    double pt = 0.0;
};

/// One event's ground truth next to what the decoder produced for it.
struct EvalEvent {
    std::vector<TruthTrack> truths;
    std::vector<std::vector<TokenId>> candidates;
};

struct EfficiencyBins {
    int length_min = 6;
    int length_max = 20; ///< inclusive; one bin per integer
    std::vector<double> pt_edges{0.0, 0.5, 1.0, 2.0, 3.0, 5.0};

    void validate() const {
        if (length_min > length_max)
            throw std::invalid_argument("EfficiencyBins: length_min > length_max");
        if (pt_edges.size() < 2)
            throw std::invalid_argument("EfficiencyBins: need at least two pT edges");
        for (std::size_t i = 1; i < pt_edges.size(); ++i)
            if (!(pt_edges[i - 1] < pt_edges[i]))
                throw std::invalid_argument("EfficiencyBins: pT edges must strictly increase");
    }
};

struct BinStat {
    double low = 0.0;
    double high = 0.0;
    std::size_t total = 0;
    std::size_t matched = 0;

    double efficiency() const {
        return total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total);
    }
};

struct EfficiencyTable {
    std::vector<BinStat> by_length; ///< [n, n+1) per integer n
    BinStat length_overflow;        ///< lengths outside [length_min, length_max]
    std::vector<BinStat> by_pt;     ///< [edge_i, edge_{i+1})
    BinStat pt_overflow;            ///< pT outside [first_edge, last_edge)
    BinStat all;
};

/// A truth track is matched when at least one candidate in its event passes
/// the double-majority test. Every truth lands in exactly one length bin and
/// one pT bin (overflow included), and in the overall row.
inline EfficiencyTable efficiency(const std::vector<EvalEvent>& events,
                                  const MatchCriteria& c = {},
                                  const EfficiencyBins& bins = {}) {
    c.validate();
    bins.validate();
    EfficiencyTable table;
    for (int n = bins.length_min; n <= bins.length_max; ++n)
        table.by_length.push_back({static_cast<double>(n), static_cast<double>(n + 1), 0, 0});
    for (std::size_t i = 0; i + 1 < bins.pt_edges.size(); ++i)
        table.by_pt.push_back({bins.pt_edges[i], bins.pt_edges[i + 1], 0, 0});

    const auto tally = [](BinStat& bin, bool matched) {
        ++bin.total;
        if (matched) ++bin.matched;
    };

    for (const auto& ev : events) {
        for (const auto& truth : ev.truths) {
            if (truth.tokens.empty())
                throw std::invalid_argument("efficiency: empty truth track");
            bool matched = false;
            for (const auto& cand : ev.candidates)
                if (!cand.empty() && match(cand, truth.tokens, c)) {
                    matched = true;
                    break;
                }

            const auto len = static_cast<long>(truth.tokens.size());
            if (len >= bins.length_min && len <= bins.length_max)
                tally(table.by_length[static_cast<std::size_t>(len - bins.length_min)],
                      matched);
            else
                tally(table.length_overflow, matched);

            const auto upper = std::upper_bound(bins.pt_edges.begin(), bins.pt_edges.end(),
                                                truth.pt);
            if (upper == bins.pt_edges.begin() || upper == bins.pt_edges.end())
                tally(table.pt_overflow, matched);
            else
                tally(table.by_pt[static_cast<std::size_t>(
                          std::distance(bins.pt_edges.begin(), upper) - 1)],
                      matched);

            tally(table.all, matched);
        }
    }
    return table;
}

/// `bin_type,bin_low,bin_high,total,matched,efficiency` rows; overflow and
/// overall rows use 0,0 as their bin bounds.
inline void write_efficiency_csv(std::ostream& out, const EfficiencyTable& table) {
    out << "bin_type,bin_low,bin_high,total,matched,efficiency\n";
    out.precision(10);
    const auto row = [&out](const char* type, const BinStat& bin) {
        out << type << ',' << bin.low << ',' << bin.high << ',' << bin.total << ','
            << bin.matched << ',' << bin.efficiency() << '\n';
    };
    for (const auto& bin : table.by_length) row("length", bin);
    row("length_overflow", table.length_overflow);
    for (const auto& bin : table.by_pt) row("pt", bin);
    row("pt_overflow", table.pt_overflow);
    row("all", table.all);
}

inline void write_efficiency_csv(const std::filesystem::path& path,
                                 const EfficiencyTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_efficiency_csv: cannot open " + path.string());
    write_efficiency_csv(out, table);
}

} // namespace tracksort
