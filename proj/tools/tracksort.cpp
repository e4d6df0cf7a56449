// Command-line driver for the track-sorting pipeline. Each subcommand runs
// one stage against a run directory; stages talk to each other only through
// files, so any stage can be rerun in isolation.

#include "tracksort/pipeline.hpp"

#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

constexpr const char* kUsage = R"(usage: tracksort <stage> [options]

stages (in pipeline order):
  toy-gen       generate synthetic events into <out>/events
  ingest        parse event CSVs into tracks.csv + modules.csv
  build-vocab   modules.csv -> vocab.csv
  train-embed   CBOW embeddings from the training split -> embeddings.bin
  train         train the sorter -> model.ckpt + train_log.csv
  decode        run greedy decoding on the held-out pairs -> decodes.txt
  eval          score decodes -> efficiency.csv
  plot          efficiency.csv -> SVG bar charts

options:
  --config PATH    read key=value settings from PATH
  --set KEY=VALUE  override one setting (repeatable, applied in order)
  --seed N         shorthand for --set seed=N
  --out DIR        run directory (default: run)
  --workers N      shorthand for --set workers=N

Every key has a default; the full resolved configuration is echoed to
<out>/<stage>.config next to the stage's outputs. See README.md for the
key reference. Exit status is 0 on success; failures print a single
"error: ..." line on stderr.
)";

using tracksort::RunConfig;
using tracksort::RunPaths;

int run(int argc, char** argv) {
    if (argc < 2) {
        std::fputs(kUsage, stderr);
        return 2;
    }
    const std::string stage = argv[1];
    if (stage == "-h" || stage == "--help" || stage == "help") {
        std::fputs(kUsage, stdout);
        return 0;
    }

    const std::map<std::string, void (*)(const RunConfig&, const RunPaths&)> stages = {
        {"toy-gen", tracksort::run_toy_gen},
        {"ingest", tracksort::run_ingest},
        {"build-vocab", tracksort::run_build_vocab},
        {"train-embed", tracksort::run_train_embed},
        {"train", tracksort::run_train},
        {"decode", tracksort::run_decode},
        {"eval", tracksort::run_eval},
        {"plot", tracksort::run_plot},
    };
    const auto it = stages.find(stage);
    if (it == stages.end()) {
        std::cerr << "error: unknown stage '" << stage << "' (try --help)\n";
        return 2;
    }

    RunConfig cfg;
    RunPaths paths{"run"};
    const auto value_of = [&](int& i, const std::string& flag) {
        if (i + 1 >= argc) throw std::runtime_error(flag + " needs a value");
        return std::string(argv[++i]);
    };
    for (int i = 2; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config")
            cfg.load_file(value_of(i, arg));
        else if (arg == "--set")
            cfg.set_from_arg(value_of(i, arg));
        else if (arg == "--seed")
            cfg.set("seed", value_of(i, arg));
        else if (arg == "--workers")
            cfg.set("workers", value_of(i, arg));
        else if (arg == "--out")
            paths.out = value_of(i, arg);
        else
            throw std::runtime_error("unknown option '" + arg + "' (try --help)");
    }

    it->second(cfg, paths);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
