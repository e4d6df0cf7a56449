#pragma once

#include "tracksort/cbow.hpp"
#include "tracksort/checkpoint.hpp"
#include "tracksort/config.hpp"
#include "tracksort/csv.hpp"
#include "tracksort/decode.hpp"
#include "tracksort/evaluate.hpp"
#include "tracksort/sequence.hpp"
#include "tracksort/svg.hpp"
#include "tracksort/toygen.hpp"
#include "tracksort/trackml_io.hpp"
#include "tracksort/trainer.hpp"
#include "tracksort/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace tracksort {

/// Artifact names inside a run directory. Stages communicate only through
/// these files, so each one can be rerun in isolation.
struct RunPaths {
    std::filesystem::path out;

    std::filesystem::path events_dir() const { return out / "events"; }
    std::filesystem::path tracks_csv() const { return out / "tracks.csv"; }
    std::filesystem::path modules_csv() const { return out / "modules.csv"; }
    std::filesystem::path vocab_csv() const { return out / "vocab.csv"; }
    std::filesystem::path embeddings_bin() const { return out / "embeddings.bin"; }
    std::filesystem::path embed_log_csv() const { return out / "embed_log.csv"; }
    std::filesystem::path train_txt() const { return out / "train.txt"; }
    std::filesystem::path val_txt() const { return out / "val.txt"; }
    std::filesystem::path eval_pairs_txt() const { return out / "eval_pairs.txt"; }
    std::filesystem::path checkpoint() const { return out / "model.ckpt"; }
    std::filesystem::path train_log_csv() const { return out / "train_log.csv"; }
    std::filesystem::path decodes_txt() const { return out / "decodes.txt"; }
    std::filesystem::path efficiency_csv() const { return out / "efficiency.csv"; }
    std::filesystem::path length_svg() const { return out / "efficiency_by_length.svg"; }
    std::filesystem::path pt_svg() const { return out / "efficiency_by_pt.svg"; }

    std::filesystem::path echo_for(const std::string& stage) const {
        return out / (stage + ".config");
    }
};

namespace detail {

constexpr std::uint64_t kSplitSeed = 0x6461746173706c74ull; // "datasplt"
constexpr std::uint64_t kEventPairStride = 0x9e3779b97f4a7c15ull;

inline void start_stage(const RunConfig& cfg, const RunPaths& paths,
                        const std::string& stage) {
    std::filesystem::create_directories(paths.out);
    cfg.write_echo(paths.echo_for(stage));
}

inline void require_artifact(const std::filesystem::path& path, const std::string& producer) {
    if (!std::filesystem::exists(path))
        throw std::runtime_error("missing " + path.string() + " (run " + producer + " first)");
}

} // namespace detail

/// One held-out pair for inference: the merged input plus the true grouping
/// with per-track pT for binned scoring.
struct EvalPair {
    std::vector<TokenId> input;
    std::vector<TruthTrack> truths;
};

/// `input|pt tokens...|pt tokens...` per line.
inline void write_eval_pairs(const std::filesystem::path& path,
                             const std::vector<EvalPair>& pairs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_eval_pairs: cannot open " + path.string());
    out.precision(17);
    for (const auto& pair : pairs) {
        for (std::size_t i = 0; i < pair.input.size(); ++i) {
            if (i) out << ' ';
            out << pair.input[i];
        }
        for (const auto& truth : pair.truths) {
            out << '|' << truth.pt;
            for (TokenId t : truth.tokens) out << ' ' << t;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write_eval_pairs: write failed for " + path.string());
}

inline std::vector<EvalPair> read_eval_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_eval_pairs: cannot open " + path.string());
    std::vector<EvalPair> pairs;
    std::string line;
    int line_no = 0;
    const auto fail = [&](const std::string& what) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream fields(line);
        std::string field;
        EvalPair pair;
        bool first = true;
        while (std::getline(fields, field, '|')) {
            std::stringstream ss(field);
            if (first) {
                TokenId t;
                while (ss >> t) pair.input.push_back(t);
                if (!ss.eof() || pair.input.empty()) fail("bad input token list");
                first = false;
            } else {
                TruthTrack truth;
                if (!(ss >> truth.pt)) fail("bad pt");
                TokenId t;
                while (ss >> t) truth.tokens.push_back(t);
                if (!ss.eof() || truth.tokens.empty()) fail("bad truth token list");
                pair.truths.push_back(std::move(truth));
            }
        }
        if (pair.truths.size() < 2) fail("expected at least two truth tracks");
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

/// Flat per-point track table, one row per space point.
inline void write_tracks_csv(const std::filesystem::path& path,
                             const std::vector<Event>& events) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_tracks_csv: cannot open " + path.string());
    out.precision(17);
    out << "event_id,particle_id,hit_id,volume_id,layer_id,module_id,r,z,pt\n";
    for (const auto& ev : events)
        for (const auto& track : ev.tracks)
            for (const auto& sp : track.points)
                out << ev.event_id << ',' << track.particle_id << ',' << sp.hit_id << ','
                    << sp.module_key.volume << ',' << sp.module_key.layer << ','
                    << sp.module_key.module << ',' << sp.r << ',' << sp.z << ',' << sp.pt
                    << '\n';
    if (!out) throw std::runtime_error("write_tracks_csv: write failed for " + path.string());
}

inline std::vector<Event> read_tracks_csv(const std::filesystem::path& path) {
    csv::Reader reader(path.string());
    const auto c_event = reader.column("event_id");
    const auto c_pid = reader.column("particle_id");
    const auto c_hit = reader.column("hit_id");
    const auto c_vol = reader.column("volume_id");
    const auto c_layer = reader.column("layer_id");
    const auto c_mod = reader.column("module_id");
    const auto c_r = reader.column("r");
    const auto c_z = reader.column("z");
    const auto c_pt = reader.column("pt");

    std::map<long long, std::map<long long, Track>> by_event;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        SpacePoint sp;
        sp.hit_id = reader.as_int(fields, c_hit);
        sp.module_key = {static_cast<int>(reader.as_int(fields, c_vol)),
                         static_cast<int>(reader.as_int(fields, c_layer)),
                         static_cast<int>(reader.as_int(fields, c_mod))};
        sp.r = reader.as_double(fields, c_r);
        sp.z = reader.as_double(fields, c_z);
        sp.pt = reader.as_double(fields, c_pt);
        const long long event_id = reader.as_int(fields, c_event);
        const long long pid = reader.as_int(fields, c_pid);
        sp.particle_id = pid;
        auto& track = by_event[event_id][pid];
        track.particle_id = pid;
        track.points.push_back(sp);
    }

    std::vector<Event> events;
    for (auto& [event_id, tracks] : by_event) {
        Event ev;
        ev.event_id = event_id;
        for (auto& [pid, track] : tracks) {
            finalize_track(track);
            for (const auto& sp : track.points) ev.all_modules.insert(sp.module_key);
            ev.tracks.push_back(std::move(track));
        }
        events.push_back(std::move(ev));
    }
    return events;
}

inline void write_modules_csv(const std::filesystem::path& path,
                              const std::set<ModuleKey>& modules) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_modules_csv: cannot open " + path.string());
    out << "volume_id,layer_id,module_id\n";
    for (const auto& key : modules)
        out << key.volume << ',' << key.layer << ',' << key.module << '\n';
    if (!out) throw std::runtime_error("write_modules_csv: write failed for " + path.string());
}

inline std::set<ModuleKey> read_modules_csv(const std::filesystem::path& path) {
    csv::Reader reader(path.string());
    const auto c_vol = reader.column("volume_id");
    const auto c_layer = reader.column("layer_id");
    const auto c_mod = reader.column("module_id");
    std::set<ModuleKey> modules;
    std::vector<std::string> fields;
    while (reader.next(fields))
        modules.insert({static_cast<int>(reader.as_int(fields, c_vol)),
                        static_cast<int>(reader.as_int(fields, c_layer)),
                        static_cast<int>(reader.as_int(fields, c_mod))});
    return modules;
}

/// Writes synthetic events in the TrackML file layout under out/events.
inline void run_toy_gen(const RunConfig& cfg, const RunPaths& paths) {
    detail::start_stage(cfg, paths, "toy-gen");
    auto det = ToyDetector::make(static_cast<int>(cfg.get_int("toy.n_layers")),
                                 static_cast<int>(cfg.get_int("toy.sectors")));
    ToyGenConfig gen;
    gen.pt_min = cfg.get_double("toy.pt_min");
    gen.pt_max = cfg.get_double("toy.pt_max");
    gen.curvature_k = cfg.get_double("toy.curvature_k");

    std::filesystem::create_directories(paths.events_dir());
    const long n_events = cfg.get_int("toy.n_events");
    const int per_event = static_cast<int>(cfg.get_int("toy.tracks_per_event"));
    const std::uint64_t seed = cfg.get_u64("seed");
    for (long long e = 0; e < n_events; ++e) {
        auto ev = generate_event(det, per_event, seed, gen, e);
        write_event_csv(paths.events_dir(), ev, det);
    }
}

/// Parses every event triple under events_dir, applies the volume filter and
/// analysis cuts, and writes the flat track table plus the surviving module
/// set.
inline void run_ingest(const RunConfig& cfg, const RunPaths& paths) {
    detail::start_stage(cfg, paths, "ingest");
    std::filesystem::path events_dir = cfg.get("ingest.events_dir");
    if (events_dir.empty()) events_dir = paths.events_dir();
    if (!std::filesystem::is_directory(events_dir))
        throw std::runtime_error("ingest: no event directory at " + events_dir.string());

    std::vector<std::filesystem::path> hits_files;
    for (const auto& entry : std::filesystem::directory_iterator(events_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > 9 && name.substr(name.size() - 9) == "-hits.csv")
            hits_files.push_back(entry.path());
    }
    if (hits_files.empty())
        throw std::runtime_error("ingest: no *-hits.csv files in " + events_dir.string());
    std::sort(hits_files.begin(), hits_files.end());

    std::set<int> volumes;
    for (long v : cfg.get_ints("ingest.volumes")) volumes.insert(static_cast<int>(v));
    const long min_layers = cfg.get_int("ingest.min_layers");
    const double max_pt = cfg.get_double("ingest.max_pt");
    std::optional<double> pt_cut;
    if (max_pt > 0) pt_cut = max_pt;

    std::vector<Event> events;
    std::set<ModuleKey> modules;
    long long fallback_id = 0;
    for (const auto& hits_path : hits_files) {
        const std::string stem = hits_path.filename().string();
        const std::string base = stem.substr(0, stem.size() - 9); // strip -hits.csv
        // eventNNNNNNNNN prefix carries the id; otherwise use file order
        long long event_id = fallback_id++;
        if (base.size() > 5 && base.substr(0, 5) == "event") {
            try {
                event_id = std::stoll(base.substr(5));
            } catch (const std::exception&) {
            }
        }
        const auto dir = hits_path.parent_path();
        Event ev = load_event(hits_path.string(), (dir / (base + "-truth.csv")).string(),
                              (dir / (base + "-particles.csv")).string(), event_id);
        ev = filter_volumes(ev, volumes);
        ev.tracks = select_tracks(ev, static_cast<int>(min_layers), pt_cut);
        modules.insert(ev.all_modules.begin(), ev.all_modules.end());
        events.push_back(std::move(ev));
    }
    write_tracks_csv(paths.tracks_csv(), events);
    write_modules_csv(paths.modules_csv(), modules);
}

inline void run_build_vocab(const RunConfig& cfg, const RunPaths& paths) {
    detail::start_stage(cfg, paths, "build-vocab");
    detail::require_artifact(paths.modules_csv(), "ingest");
    Vocabulary vocab(read_modules_csv(paths.modules_csv()));
    vocab.save(paths.vocab_csv());
}

/// Builds the train/val/eval split once; later stages reuse the files, so a
/// rerun with unchanged inputs is a no-op.
inline void ensure_datasets(const RunConfig& cfg, const RunPaths& paths) {
    if (std::filesystem::exists(paths.train_txt()) &&
        std::filesystem::exists(paths.val_txt()) &&
        std::filesystem::exists(paths.eval_pairs_txt()))
        return;
    detail::require_artifact(paths.tracks_csv(), "ingest");
    detail::require_artifact(paths.vocab_csv(), "build-vocab");

    const Vocabulary vocab = Vocabulary::load(paths.vocab_csv());
    const auto events = read_tracks_csv(paths.tracks_csv());
    const std::uint64_t seed = cfg.get_u64("seed");

    std::vector<SeqRecord> records;
    std::vector<EvalPair> pairs_with_truth;
    for (const auto& ev : events) {
        if (ev.tracks.size() < 2) continue; // nothing to merge
        const auto pairs = pair_tracks(
            ev.tracks, seed + static_cast<std::uint64_t>(ev.event_id) *
                                  detail::kEventPairStride);
        for (const auto& pr : pairs) {
            const Track& a = ev.tracks[pr.a];
            const Track& b = ev.tracks[pr.b];
            SeqRecord rec = build_record(a, b, vocab);
            EvalPair pair;
            pair.input = rec.input;
            const auto groups = split_tracks(rec.target);
            if (groups.size() != 2)
                throw std::logic_error("ensure_datasets: target without two groups");
            const bool a_first = a.min_r() < b.min_r() ||
                                 (a.min_r() == b.min_r() && a.particle_id < b.particle_id);
            const Track& first = a_first ? a : b;
            const Track& second = a_first ? b : a;
            pair.truths.push_back({groups[0], first.pt});
            pair.truths.push_back({groups[1], second.pt});
            records.push_back(std::move(rec));
            pairs_with_truth.push_back(std::move(pair));
        }
    }
    if (records.empty()) throw std::runtime_error("ensure_datasets: no usable track pairs");

    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed ^ detail::kSplitSeed);
    shuffle(order, rng);

    const auto n_eval = static_cast<std::size_t>(cfg.get_int("dataset.eval_pairs"));
    const double val_fraction = cfg.get_double("dataset.val_fraction");
    if (n_eval + 2 > records.size())
        throw std::runtime_error("ensure_datasets: only " + std::to_string(records.size()) +
                                 " pairs; cannot hold out " + std::to_string(n_eval));
    const std::size_t n_rest = records.size() - n_eval;
    std::size_t n_val = static_cast<std::size_t>(
        std::max(1.0, std::floor(val_fraction * static_cast<double>(n_rest))));
    if (n_val >= n_rest) n_val = n_rest - 1;

    std::vector<EvalPair> eval_pairs;
    std::vector<SeqRecord> val_set, train_set;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t idx = order[i];
        if (i < n_eval)
            eval_pairs.push_back(std::move(pairs_with_truth[idx]));
        else if (i < n_eval + n_val)
            val_set.push_back(std::move(records[idx]));
        else
            train_set.push_back(std::move(records[idx]));
    }
    write_dataset(paths.train_txt(), train_set);
    write_dataset(paths.val_txt(), val_set);
    write_eval_pairs(paths.eval_pairs_txt(), eval_pairs);
}

inline void run_train_embed(const RunConfig& cfg, const RunPaths& paths) {
    detail::start_stage(cfg, paths, "train-embed");
    ensure_datasets(cfg, paths);
    const Vocabulary vocab = Vocabulary::load(paths.vocab_csv());
    const auto train_set = read_dataset(paths.train_txt());
    std::vector<std::vector<TokenId>> corpus;
    corpus.reserve(train_set.size());
    for (const auto& rec : train_set) corpus.push_back(rec.target);

    CbowConfig cc;
    cc.dim = static_cast<int>(cfg.get_int("cbow.dim"));
    cc.window = static_cast<int>(cfg.get_int("cbow.window"));
    cc.epochs = static_cast<int>(cfg.get_int("cbow.epochs"));
    cc.negatives = static_cast<int>(cfg.get_int("cbow.negatives"));
    cc.learning_rate = cfg.get_double("cbow.lr");
    cc.seed = cfg.get_u64("seed");
    auto result = train_cbow(corpus, vocab.size(), cc);
    save_embeddings(paths.embeddings_bin(), result.embeddings);

    std::ofstream log(paths.embed_log_csv());
    if (!log) throw std::runtime_error("train-embed: cannot write embed log");
    log << "epoch,loss\n";
    log.precision(10);
    for (std::size_t e = 0; e < result.stats.epoch_loss.size(); ++e)
        log << e << ',' << result.stats.epoch_loss[e] << '\n';
}

inline ModelConfig model_config_from(const RunConfig& cfg, int vocab_size) {
    ModelConfig mc;
    mc.d_model = static_cast<int>(cfg.get_int("model.d_model"));
    mc.n_heads = static_cast<int>(cfg.get_int("model.heads"));
    mc.d_ff = static_cast<int>(cfg.get_int("model.d_ff"));
    mc.n_encoder_layers = static_cast<int>(cfg.get_int("model.enc_layers"));
    mc.n_decoder_layers = static_cast<int>(cfg.get_int("model.dec_layers"));
    mc.max_len = static_cast<int>(cfg.get_int("model.max_len"));
    mc.tie_output_to_embedding = cfg.get_bool("model.tied");
    mc.vocab_size = vocab_size;
    return mc;
}

inline void run_train(const RunConfig& cfg, const RunPaths& paths) {
    detail::start_stage(cfg, paths, "train");
    ensure_datasets(cfg, paths);
    const Vocabulary vocab = Vocabulary::load(paths.vocab_csv());
    const auto train_set = read_dataset(paths.train_txt());
    const auto val_set = read_dataset(paths.val_txt());

    const ModelConfig mc = model_config_from(cfg, vocab.size());
    std::optional<EmbeddingMatrix> embeddings;
    if (cfg.get_bool("model.use_embeddings")) {
        detail::require_artifact(paths.embeddings_bin(), "train-embed");
        embeddings = load_embeddings(paths.embeddings_bin());
    }
    auto model = init_model<float>(mc, embeddings ? &*embeddings : nullptr,
                                   cfg.get_u64("seed"));

    TrainConfig tc;
    tc.epochs = static_cast<int>(cfg.get_int("train.epochs"));
    tc.base_lr = cfg.get_double("train.base_lr");
    tc.min_lr = cfg.get_double("train.min_lr");
    tc.batch_size = static_cast<int>(cfg.get_int("train.batch"));
    tc.grad_clip = cfg.get_double("train.grad_clip");
    tc.seed = cfg.get_u64("seed");
    auto result = train(model, train_set, val_set, tc);
    save_checkpoint(paths.checkpoint(), result.best);
    write_train_log(paths.train_log_csv(), result.log);
}

inline void run_decode(const RunConfig& cfg, const RunPaths& paths) {
    detail::start_stage(cfg, paths, "decode");
    detail::require_artifact(paths.checkpoint(), "train");
    detail::require_artifact(paths.eval_pairs_txt(), "train");
    const auto pairs = read_eval_pairs(paths.eval_pairs_txt());
    const auto model = model_from_checkpoint(load_checkpoint(paths.checkpoint()));

    DecodeConfig dc;
    dc.sep_budget = static_cast<int>(cfg.get_int("decode.sep_budget"));
    dc.max_steps = cfg.get_int("decode.max_steps");

    std::vector<std::string> lines(pairs.size());
    const auto n_workers = std::max<long>(1, cfg.get_int("workers"));
    const auto decode_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            lines[i] = format_decode_line(greedy_decode(model, pairs[i].input, dc));
    };
    if (n_workers == 1 || pairs.size() < 2) {
        decode_range(0, pairs.size());
    } else {
        // disjoint slots per worker: output is independent of the thread count
        std::vector<std::thread> threads;
        const std::size_t chunk =
            (pairs.size() + static_cast<std::size_t>(n_workers) - 1) /
            static_cast<std::size_t>(n_workers);
        for (std::size_t begin = 0; begin < pairs.size(); begin += chunk)
            threads.emplace_back(decode_range, begin, std::min(begin + chunk, pairs.size()));
        for (auto& t : threads) t.join();
    }

    std::ofstream out(paths.decodes_txt());
    if (!out) throw std::runtime_error("decode: cannot open " + paths.decodes_txt().string());
    for (const auto& line : lines) out << line << '\n';
    if (!out)
        throw std::runtime_error("decode: write failed for " + paths.decodes_txt().string());
}

inline EfficiencyTable eval_table(const RunConfig& cfg, const RunPaths& paths) {
    detail::require_artifact(paths.eval_pairs_txt(), "train");
    detail::require_artifact(paths.decodes_txt(), "decode");
    const auto pairs = read_eval_pairs(paths.eval_pairs_txt());

    std::ifstream in(paths.decodes_txt());
    std::vector<EvalEvent> events;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (static_cast<std::size_t>(line_no) > pairs.size())
            throw std::runtime_error("eval: more decode lines than eval pairs");
        auto parsed = parse_decode_line(line, line_no);
        EvalEvent ev;
        ev.truths = pairs[static_cast<std::size_t>(line_no - 1)].truths;
        ev.candidates = std::move(parsed.first);
        events.push_back(std::move(ev));
    }
    if (static_cast<std::size_t>(line_no) != pairs.size())
        throw std::runtime_error("eval: decode lines (" + std::to_string(line_no) +
                                 ") do not cover eval pairs (" + std::to_string(pairs.size()) +
                                 ")");

    MatchCriteria criteria;
    criteria.threshold = cfg.get_double("eval.threshold");
    EfficiencyBins bins;
    bins.length_min = static_cast<int>(cfg.get_int("eval.length_min"));
    bins.length_max = static_cast<int>(cfg.get_int("eval.length_max"));
    bins.pt_edges = cfg.get_doubles("eval.pt_edges");
    return efficiency(events, criteria, bins);
}

inline void run_eval(const RunConfig& cfg, const RunPaths& paths) {
    detail::start_stage(cfg, paths, "eval");
    write_efficiency_csv(paths.efficiency_csv(), eval_table(cfg, paths));
}

inline void run_plot(const RunConfig& cfg, const RunPaths& paths) {
    detail::start_stage(cfg, paths, "plot");
    detail::require_artifact(paths.efficiency_csv(), "eval");

    csv::Reader reader(paths.efficiency_csv().string());
    const auto c_type = reader.column("bin_type");
    const auto c_low = reader.column("bin_low");
    const auto c_high = reader.column("bin_high");
    const auto c_total = reader.column("total");
    const auto c_eff = reader.column("efficiency");

    BarChartSeries by_length{"Efficiency vs track length", {}, {}};
    BarChartSeries by_pt{"Efficiency vs pT [GeV]", {}, {}};
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        const std::string& type = fields[c_type];
        if (reader.as_int(fields, c_total) == 0) continue; // unpopulated bin
        if (type == "length") {
            by_length.labels.push_back(std::to_string(reader.as_int(fields, c_low)));
            by_length.values.push_back(reader.as_double(fields, c_eff));
        } else if (type == "pt") {
            std::ostringstream label;
            label << reader.as_double(fields, c_low) << '-'
                  << reader.as_double(fields, c_high);
            by_pt.labels.push_back(label.str());
            by_pt.values.push_back(reader.as_double(fields, c_eff));
        }
    }
    write_svg(paths.length_svg(), by_length);
    write_svg(paths.pt_svg(), by_pt);
}

} // namespace tracksort
