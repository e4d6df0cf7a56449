#pragma once

#include "tracksort/csv.hpp"
#include "tracksort/event.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace tracksort {

/// Reads one event in the standard three-file CSV layout:
///   hits:      hit_id,x,y,z,volume_id,layer_id,module_id
///   truth:     hit_id,particle_id,tx,ty,tz,tpx,tpy,tpz,weight
///   particles: particle_id,vx,vy,vz,px,py,pz,q,nhits
/// Extra columns are ignored; column order is free. Hits with truth
/// particle_id 0 are noise and dropped. Track pt is the mean over the
/// track's hits of sqrt(tpx^2+tpy^2).
inline Event load_event(const std::string& hits_path, const std::string& truth_path,
                        const std::string& particles_path, long long event_id = 0) {
    struct HitRow {
        double x, y, z;
        ModuleKey key;
    };
    std::unordered_map<long long, HitRow> hits;
    Event event;
    event.event_id = event_id;

    {
        csv::Reader r(hits_path);
        const auto c_id = r.column("hit_id"), c_x = r.column("x"), c_y = r.column("y"),
                   c_z = r.column("z"), c_vol = r.column("volume_id"), c_lay = r.column("layer_id"),
                   c_mod = r.column("module_id");
        std::vector<std::string> f;
        while (r.next(f)) {
            HitRow h;
            long long id = r.as_int(f, c_id);
            h.x = r.as_double(f, c_x);
            h.y = r.as_double(f, c_y);
            h.z = r.as_double(f, c_z);
            h.key = {static_cast<int>(r.as_int(f, c_vol)), static_cast<int>(r.as_int(f, c_lay)),
                     static_cast<int>(r.as_int(f, c_mod))};
            if (h.key.module < 0)
                throw std::runtime_error(hits_path + ":" + std::to_string(r.line_number()) +
                                         ": negative module_id");
            if (!hits.emplace(id, h).second)
                throw std::runtime_error(hits_path + ":" + std::to_string(r.line_number()) +
                                         ": duplicate hit_id " + std::to_string(id));
            event.all_modules.insert(h.key);
        }
    }

    std::unordered_set<long long> particle_ids;
    {
        csv::Reader r(particles_path);
        const auto c_pid = r.column("particle_id");
        std::vector<std::string> f;
        while (r.next(f)) particle_ids.insert(r.as_int(f, c_pid));
    }

    std::map<long long, Track> by_particle;
    std::unordered_set<long long> seen_hits;
    {
        csv::Reader r(truth_path);
        const auto c_id = r.column("hit_id"), c_pid = r.column("particle_id"),
                   c_tpx = r.column("tpx"), c_tpy = r.column("tpy");
        std::vector<std::string> f;
        while (r.next(f)) {
            long long hit_id = r.as_int(f, c_id);
            long long pid = r.as_int(f, c_pid);
            if (pid == 0) continue; // noise
            auto it = hits.find(hit_id);
            if (it == hits.end())
                throw std::runtime_error(truth_path + ":" + std::to_string(r.line_number()) +
                                         ": hit_id " + std::to_string(hit_id) +
                                         " present in truth but absent in hits");
            if (!seen_hits.insert(hit_id).second)
                throw std::runtime_error(truth_path + ":" + std::to_string(r.line_number()) +
                                         ": duplicate truth row for hit_id " + std::to_string(hit_id));
            if (!particle_ids.count(pid))
                throw std::runtime_error(truth_path + ":" + std::to_string(r.line_number()) +
                                         ": particle_id " + std::to_string(pid) +
                                         " missing from particles file");
            const HitRow& h = it->second;
            SpacePoint p;
            p.hit_id = hit_id;
            p.module_key = h.key;
            p.r = std::hypot(h.x, h.y);
            p.z = h.z;
            p.pt = std::hypot(r.as_double(f, c_tpx), r.as_double(f, c_tpy));
            p.particle_id = pid;
            Track& t = by_particle[pid];
            t.particle_id = pid;
            t.points.push_back(p);
        }
    }

    event.tracks.reserve(by_particle.size());
    for (auto& [pid, track] : by_particle) {
        finalize_track(track);
        event.tracks.push_back(std::move(track));
    }
    return event;
}

/// Keeps only space points whose volume is listed; tracks left empty are
/// dropped and derived track fields are refreshed from the survivors.
inline Event filter_volumes(const Event& event, const std::set<int>& volumes) {
    if (volumes.empty()) throw std::invalid_argument("filter_volumes: empty volume set");
    Event out;
    out.event_id = event.event_id;
    for (const auto& key : event.all_modules)
        if (volumes.count(key.volume)) out.all_modules.insert(key);
    for (const Track& t : event.tracks) {
        Track kept;
        kept.particle_id = t.particle_id;
        for (const SpacePoint& p : t.points)
            if (volumes.count(p.module_key.volume)) kept.points.push_back(p);
        if (kept.points.empty()) continue;
        finalize_track(kept);
        out.tracks.push_back(std::move(kept));
    }
    return out;
}

/// Tracks with at least `min_unique_layers` distinct (volume,layer) pairs
/// and, when the cap is set, truth pt strictly below it.
inline std::vector<Track> select_tracks(const Event& event, int min_unique_layers,
                                        std::optional<double> max_avg_pt = std::nullopt) {
    if (min_unique_layers < 1)
        throw std::invalid_argument("select_tracks: min_unique_layers must be >= 1");
    std::vector<Track> out;
    for (const Track& t : event.tracks) {
        if (t.n_unique_layers < min_unique_layers) continue;
        if (max_avg_pt && !(t.pt < *max_avg_pt)) continue;
        out.push_back(t);
    }
    return out;
}

} // namespace tracksort
