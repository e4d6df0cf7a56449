#pragma once

#include "tracksort/event.hpp"
#include "tracksort/rng.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracksort {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Barrel-only toy detector: concentric layers split into equal azimuthal
/// sectors. Module ids are layer*M + sector under volume 0.
struct ToyDetector {
    int n_layers = 8;
    std::vector<double> layer_radii; ///< mm, strictly increasing
    int sectors_per_layer = 16;

    void validate() const {
        if (n_layers < 1 || sectors_per_layer < 1)
            throw std::invalid_argument("ToyDetector: layers and sectors must be positive");
        if (static_cast<int>(layer_radii.size()) != n_layers)
            throw std::invalid_argument("ToyDetector: one radius per layer required");
        for (std::size_t i = 1; i < layer_radii.size(); ++i)
            if (!(layer_radii[i] > layer_radii[i - 1]))
                throw std::invalid_argument("ToyDetector: radii must be strictly increasing");
        if (layer_radii.front() <= 0.0)
            throw std::invalid_argument("ToyDetector: radii must be positive");
    }

    ModuleKey module_key(int layer, int sector) const {
        return {0, layer, layer * sectors_per_layer + sector};
    }

    int sector_at(double phi) const {
        double w = std::fmod(phi, kTwoPi);
        if (w < 0) w += kTwoPi;
        int s = static_cast<int>(w / (kTwoPi / sectors_per_layer));
        return s >= sectors_per_layer ? sectors_per_layer - 1 : s;
    }

    std::set<ModuleKey> all_modules() const {
        std::set<ModuleKey> keys;
        for (int l = 0; l < n_layers; ++l)
            for (int s = 0; s < sectors_per_layer; ++s) keys.insert(module_key(l, s));
        return keys;
    }

    /// Equally spaced default geometry, innermost layer at 30 mm.
    static ToyDetector make(int n_layers, int sectors_per_layer) {
        ToyDetector det;
        det.n_layers = n_layers;
        det.sectors_per_layer = sectors_per_layer;
        for (int l = 0; l < n_layers; ++l) det.layer_radii.push_back(30.0 + 36.0 * l);
        det.validate();
        return det;
    }
};

/// Azimuth advances linearly with radius: phi(R) = phi0 + curvature * R.
struct ToyTrackParams {
    double phi0 = 0.0;      ///< radians
    double curvature = 0.0; ///< 1/mm, signed
    double pt = 1.0;        ///< GeV
};

struct ToyGenConfig {
    double pt_min = 0.3;
    double pt_max = 5.0;
    double curvature_k = 0.0006; ///< pt = curvature_k / |curvature|
};

/// One space point per layer at the sector crossed by phi(R).
inline Track generate_track(const ToyDetector& det, const ToyTrackParams& params,
                            long long particle_id = 1, long long first_hit_id = 1) {
    det.validate();
    if (std::abs(params.curvature) * det.layer_radii.back() >= kTwoPi)
        throw std::invalid_argument("generate_track: curvature too large, track loops before "
                                    "the outer layer");
    Track t;
    t.particle_id = particle_id;
    for (int l = 0; l < det.n_layers; ++l) {
        double radius = det.layer_radii[l];
        double phi = params.phi0 + params.curvature * radius;
        int sector = det.sector_at(phi);
        SpacePoint p;
        p.hit_id = first_hit_id + l;
        p.module_key = det.module_key(l, sector);
        p.r = radius;
        p.z = 0.0;
        p.pt = params.pt;
        p.particle_id = particle_id;
        t.points.push_back(p);
    }
    finalize_track(t);
    return t;
}

inline ToyTrackParams sample_track_params(const ToyGenConfig& cfg, Rng& rng) {
    ToyTrackParams p;
    p.phi0 = rng.uniform(0.0, kTwoPi);
    p.pt = rng.uniform(cfg.pt_min, cfg.pt_max);
    double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    p.curvature = sign * cfg.curvature_k / p.pt;
    return p;
}

/// Deterministic under (det, n_tracks, seed, cfg); particle ids 1..n.
/// all_modules covers the whole detector, not just the sectors hit.
inline Event generate_event(const ToyDetector& det, int n_tracks, std::uint64_t seed,
                            const ToyGenConfig& cfg = {}, long long event_id = 0) {
    if (n_tracks < 1) throw std::invalid_argument("generate_event: n_tracks must be >= 1");
    det.validate();
    if (cfg.pt_min <= 0 || cfg.pt_max < cfg.pt_min)
        throw std::invalid_argument("generate_event: bad pt range");
    Rng rng(seed * 0x100000001b3ull + 0x9e3779b9ull + static_cast<std::uint64_t>(event_id));
    Event ev;
    ev.event_id = event_id;
    ev.all_modules = det.all_modules();
    long long next_hit = 1;
    for (int i = 0; i < n_tracks; ++i) {
        auto params = sample_track_params(cfg, rng);
        ev.tracks.push_back(generate_track(det, params, i + 1, next_hit));
        next_hit += det.n_layers;
    }
    return ev;
}

/// Writes an event in the three-file CSV layout consumed by load_event.
/// Points sit mid-sector in azimuth; truth momenta are tangential with
/// magnitude pt, so ingestion recovers r and per-hit pt exactly.
inline void write_event_csv(const std::filesystem::path& dir, const Event& ev,
                            const ToyDetector& det) {
    det.validate();
    std::filesystem::create_directories(dir);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "event%09lld", ev.event_id);
    const auto base = dir / stem;

    std::ofstream hits(base.string() + "-hits.csv");
    std::ofstream truth(base.string() + "-truth.csv");
    std::ofstream particles(base.string() + "-particles.csv");
    if (!hits || !truth || !particles)
        throw std::runtime_error("write_event_csv: cannot create files under " + dir.string());
    hits << "hit_id,x,y,z,volume_id,layer_id,module_id\n";
    truth << "hit_id,particle_id,tx,ty,tz,tpx,tpy,tpz,weight\n";
    particles << "particle_id,vx,vy,vz,px,py,pz,q,nhits\n";
    hits.precision(17);
    truth.precision(17);
    particles.precision(17);

    const double sector_width = kTwoPi / det.sectors_per_layer;
    for (const Track& t : ev.tracks) {
        for (const SpacePoint& p : t.points) {
            int sector = p.module_key.module - p.module_key.layer * det.sectors_per_layer;
            double phi = (sector + 0.5) * sector_width;
            double x = p.r * std::cos(phi);
            double y = p.r * std::sin(phi);
            hits << p.hit_id << ',' << x << ',' << y << ',' << p.z << ','
                 << p.module_key.volume << ',' << p.module_key.layer << ','
                 << p.module_key.module << '\n';
            double dir = phi + kTwoPi / 4.0;
            truth << p.hit_id << ',' << p.particle_id << ',' << x << ',' << y << ',' << p.z
                  << ',' << p.pt * std::cos(dir) << ',' << p.pt * std::sin(dir) << ",0,"
                  << 1.0 / static_cast<double>(ev.tracks.size()) << '\n';
        }
        particles << t.particle_id << ",0,0,0," << t.pt << ",0,0,1," << t.points.size() << '\n';
    }
}

} // namespace tracksort
