#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracksort {

/// Flat key=value run configuration. Every key ships a default; anything
/// else is rejected so typos fail loudly instead of silently using defaults.
class RunConfig {
public:
    /// The full key registry with defaults. Paper-scale model/training
    /// values; toy-scale runs override via file or --set.
    static const std::map<std::string, std::string>& defaults() {
        static const std::map<std::string, std::string> kDefaults = {
            {"seed", "1"},
            {"workers", "1"},

            {"toy.n_layers", "8"},
            {"toy.sectors", "32"},
            {"toy.n_events", "125"},
            {"toy.tracks_per_event", "16"},
            {"toy.pt_min", "0.3"},
            {"toy.pt_max", "5.0"},
            {"toy.curvature_k", "0.0006"},

            {"ingest.events_dir", ""}, // empty: <out>/events (toy-gen output)
            {"ingest.volumes", "8,13,17"},
            {"ingest.min_layers", "6"},
            {"ingest.max_pt", "5.0"},

            {"dataset.val_fraction", "0.1"},
            {"dataset.eval_pairs", "200"},

            {"cbow.dim", "64"},
            {"cbow.window", "20"},
            {"cbow.epochs", "100"},
            {"cbow.negatives", "5"},
            {"cbow.lr", "0.025"},

            {"model.d_model", "64"},
            {"model.heads", "1"},
            {"model.d_ff", "256"},
            {"model.enc_layers", "6"},
            {"model.dec_layers", "6"},
            {"model.max_len", "256"},
            {"model.tied", "true"},
            {"model.use_embeddings", "true"},

            {"train.epochs", "371"},
            {"train.base_lr", "0.001"},
            {"train.min_lr", "0.00001"},
            {"train.batch", "32"},
            {"train.grad_clip", "0"},

            {"decode.sep_budget", "100"},
            {"decode.max_steps", "0"},

            {"eval.threshold", "0.75"},
            {"eval.length_min", "6"},
            {"eval.length_max", "20"},
            {"eval.pt_edges", "0,0.5,1,2,3,5"},
        };
        return kDefaults;
    }

    RunConfig() : values_(defaults()) {}

    /// Merges `key = value` lines into this config ('#' comments, blank
    /// lines allowed).
    void load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path.string());
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string stripped = strip(line.substr(0, line.find('#')));
            if (stripped.empty()) continue;
            const auto eq = stripped.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                         ": expected key=value");
            set(strip(stripped.substr(0, eq)), strip(stripped.substr(eq + 1)));
        }
    }

    static RunConfig from_file(const std::filesystem::path& path) {
        RunConfig cfg;
        cfg.load_file(path);
        return cfg;
    }

    /// `key=value` as given on the command line.
    void set_from_arg(const std::string& arg) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("--set expects key=value, got '" + arg + "'");
        set(strip(arg.substr(0, eq)), strip(arg.substr(eq + 1)));
    }

    void set(const std::string& key, const std::string& value) {
        if (defaults().find(key) == defaults().end())
            throw std::runtime_error("config: unknown key '" + key + "'");
        values_[key] = value;
    }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end())
            throw std::runtime_error("config: unknown key '" + key + "'");
        return it->second;
    }

    long get_int(const std::string& key) const {
        return parse<long>(key, "integer");
    }

    std::uint64_t get_u64(const std::string& key) const {
        return parse<std::uint64_t>(key, "unsigned integer");
    }

    double get_double(const std::string& key) const {
        return parse<double>(key, "number");
    }

    bool get_bool(const std::string& key) const {
        const std::string& v = get(key);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw std::runtime_error("config: key '" + key + "' expects true/false, got '" + v +
                                 "'");
    }

    /// Comma-separated doubles (e.g. pT bin edges).
    std::vector<double> get_doubles(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(get(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = strip(item);
            if (item.empty())
                throw std::runtime_error("config: empty element in list key '" + key + "'");
            std::size_t used = 0;
            double parsed = 0;
            try {
                parsed = std::stod(item, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != item.size())
                throw std::runtime_error("config: bad number '" + item + "' in key '" + key +
                                         "'");
            out.push_back(parsed);
        }
        if (out.empty()) throw std::runtime_error("config: empty list for key '" + key + "'");
        return out;
    }

    std::vector<long> get_ints(const std::string& key) const {
        std::vector<long> out;
        for (double v : get_doubles(key)) {
            const auto i = static_cast<long>(v);
            if (static_cast<double>(i) != v)
                throw std::runtime_error("config: key '" + key + "' expects integers");
            out.push_back(i);
        }
        return out;
    }

    /// Every effective key=value pair, sorted; written next to stage outputs.
    void echo(std::ostream& out) const {
        for (const auto& [key, value] : values_) out << key << " = " << value << '\n';
    }

    void write_echo(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("config: cannot write echo to " + path.string());
        echo(out);
    }

private:
    static std::string strip(const std::string& s) {
        const auto begin = s.find_first_not_of(" \t\r");
        if (begin == std::string::npos) return "";
        const auto end = s.find_last_not_of(" \t\r");
        return s.substr(begin, end - begin + 1);
    }

    template <typename T>
    T parse(const std::string& key, const char* what) const {
        const std::string& v = get(key);
        std::stringstream ss(v);
        T out{};
        if (!(ss >> out) || !ss.eof())
            throw std::runtime_error("config: key '" + key + "' expects " + what + ", got '" +
                                     v + "'");
        return out;
    }

    std::map<std::string, std::string> values_;
};

} // namespace tracksort
