// SPDX-License-Identifier: Apache-2.0
#include "hetfl/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hetfl/experiment.hpp"
#include "hetfl/metrics.hpp"
#include "hetfl/text.hpp"

namespace hetfl {

namespace {

struct CliArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::size_t> rounds;
    std::optional<std::string> out_dir;
    int threads = 1;
    bool quiet = false;
    bool export_reps = false;
};

int run_experiment_command(const CliArgs& args) {
    ExperimentConfig config = parse_config(args.config_path);
    // Flag overrides beat the file, which beats built-in defaults.
    if (args.seed) config.seed = *args.seed;
    if (args.mode) config.mode = train_mode_from_string(*args.mode);
    if (args.rounds) config.rounds = *args.rounds;
    if (args.out_dir) config.out_dir = *args.out_dir;
    config.validate();

    // Rounds are collected as they finish so an aborted run still leaves its
    // partial metrics on disk.
    RunLog partial;
    partial.config = config;
    RunOptions options;
    options.threads = args.threads;
    options.on_round = [&](const RoundMetrics& m) {
        partial.rounds.push_back(m);
        if (!args.quiet)
            std::cout << "round " << m.round << ": avg_accuracy = "
                      << format_double(m.avg_accuracy) << '\n';
    };

    std::filesystem::create_directories(config.out_dir);
    const std::filesystem::path out(config.out_dir);
    const auto flush = [&] {
        write_metrics_csv(partial, (out / "metrics.csv").string());
        write_config_snapshot(partial, (out / "config.txt").string());
    };

    ExperimentState final_state;
    try {
        (void)run_experiment(config, options, &final_state);
    } catch (...) {
        flush();
        throw;
    }
    flush();
    if (args.export_reps)
        for (const ClientState& client : final_state.clients)
            export_representations(
                client, (out / ("reps_client_" + std::to_string(client.id) + ".csv")).string());

    if (!args.quiet)
        std::cout << "done: " << partial.rounds.size() << " rounds, final avg_accuracy = "
                  << format_double(partial.rounds.back().avg_accuracy) << '\n';
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Desk-scale federated learning simulator: heterogeneous client models "
                 "coupled through a shared low-rank adapter head."};
    app.name("hetfl");

    CliArgs parsed;
    app.add_option("--config", parsed.config_path, "Experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Override run.seed");
    std::string mode_value;
    auto* mode_opt = app.add_option(
        "--mode", mode_value, "Override run.mode (iterative|simultaneous|standalone|fedavg)");
    std::size_t rounds_value = 0;
    auto* rounds_opt = app.add_option("--rounds", rounds_value, "Override run.rounds");
    std::string out_value;
    auto* out_opt = app.add_option("--out", out_value, "Override run.out_dir");
    app.add_option("--threads", parsed.threads,
                   "Client-parallel workers (1 = serial, 0 = OpenMP default)");
    app.add_flag("--quiet", parsed.quiet, "Suppress per-round progress output");
    app.add_flag("--export-reps", parsed.export_reps,
                 "Write per-client test-set representations");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    if (*seed_opt) parsed.seed = seed_value;
    if (*mode_opt) parsed.mode = mode_value;
    if (*rounds_opt) parsed.rounds = rounds_value;
    if (*out_opt) parsed.out_dir = out_value;

    try {
        return run_experiment_command(parsed);
    } catch (const std::exception& e) {
        // Single-line, machine-parseable diagnostics.
        std::string message = e.what();
        for (char& c : message)
            if (c == '\n') c = ';';
        std::cerr << "error: " << message << std::endl;
        return 1;
    }
}

}  // namespace hetfl
