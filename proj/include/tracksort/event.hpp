#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <tuple>
#include <vector>

namespace tracksort {

/// (volume, layer, module) triple identifying one silicon sensor.
struct ModuleKey {
    int volume = 0;
    int layer = 0;
    int module = 0;

    auto operator<=>(const ModuleKey&) const = default;
};

struct SpacePoint {
    long long hit_id = 0;
    ModuleKey module_key;
    double r = 0.0;  ///< transverse distance sqrt(x^2+y^2), mm
    double z = 0.0;  ///< mm
    double pt = 0.0; ///< per-hit truth transverse momentum sqrt(tpx^2+tpy^2), GeV
    long long particle_id = 0;
};

/// Deterministic point order: ascending r, ties by z then module key.
inline bool point_order(const SpacePoint& a, const SpacePoint& b) {
    return std::tie(a.r, a.z, a.module_key) < std::tie(b.r, b.z, b.module_key);
}

struct Track {
    long long particle_id = 0;
    std::vector<SpacePoint> points; ///< sorted with point_order
    double pt = 0.0;                ///< mean per-hit truth transverse momentum, GeV
    int n_unique_layers = 0;        ///< distinct (volume, layer) pairs

    double min_r() const { return points.empty() ? 0.0 : points.front().r; }
};

inline int count_unique_layers(const std::vector<SpacePoint>& points) {
    std::set<std::pair<int, int>> layers;
    for (const auto& p : points) layers.insert({p.module_key.volume, p.module_key.layer});
    return static_cast<int>(layers.size());
}

/// Sorts points and refreshes every derived track field from them.
inline void finalize_track(Track& t) {
    std::sort(t.points.begin(), t.points.end(), point_order);
    t.n_unique_layers = count_unique_layers(t.points);
    double sum = 0.0;
    for (const auto& p : t.points) sum += p.pt;
    t.pt = t.points.empty() ? 0.0 : sum / static_cast<double>(t.points.size());
}

struct Event {
    long long event_id = 0;
    std::vector<Track> tracks;          ///< one per particle_id, ascending id
    std::set<ModuleKey> all_modules;    ///< every module seen in the hits file
};

} // namespace tracksort
