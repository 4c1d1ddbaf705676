// SPDX-License-Identifier: Apache-2.0
//
// Compares the serial reference path (threads = 1) against the OpenMP
// client-parallel path on one synthetic workload, and checks that both
// produce identical metrics.

#include <chrono>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hetfl/experiment.hpp"
#include "hetfl/parallel.hpp"
#include "hetfl/text.hpp"

namespace {

hetfl::ExperimentConfig bench_config(std::size_t clients, std::size_t rounds,
                                     std::size_t per_class) {
    hetfl::ExperimentConfig config;
    config.rounds = rounds;
    config.num_clients = clients;
    config.participation = 1.0;
    config.mode = hetfl::TrainMode::kIterative;
    config.round = {.local_epochs = 1, .batch_size = 32, .lr_model = 0.01,
                    .lr_adapter = 0.01, .mu = 0.9};
    config.data.source = hetfl::DataConfig::Source::kSynthetic;
    config.data.synthetic = {.num_classes = 10, .dim = 20, .per_class = per_class,
                             .separation = 8.0};
    config.data.classes_per_client = 2;
    config.seed = 7;

    const std::vector<std::size_t> head_widths = {200, 200, 100, 80, 50};
    for (std::size_t m = 0; m < head_widths.size(); ++m) {
        hetfl::ModelSpec spec;
        spec.extractor_widths = {20, m == 1 ? std::size_t{16} : std::size_t{32}, 50};
        spec.head_widths = {50, head_widths[m], 10};
        spec.num_classes = 10;
        config.models.push_back(spec);
    }
    config.adapter = hetfl::shape_matrix_decomposition(50, 10, 8);
    return config;
}

bool logs_equal(const hetfl::RunLog& a, const hetfl::RunLog& b) {
    if (a.rounds.size() != b.rounds.size()) return false;
    for (std::size_t t = 0; t < a.rounds.size(); ++t) {
        const auto& ra = a.rounds[t];
        const auto& rb = b.rounds[t];
        if (ra.avg_accuracy != rb.avg_accuracy || ra.mean_train_loss != rb.mean_train_loss ||
            ra.cum_comm_params != rb.cum_comm_params || ra.cum_flops != rb.cum_flops ||
            ra.per_client_accuracy != rb.per_client_accuracy)
            return false;
    }
    return true;
}

double time_run(const hetfl::ExperimentConfig& config, int threads, hetfl::RunLog& log) {
    hetfl::RunOptions options;
    options.threads = threads;
    const auto start = std::chrono::steady_clock::now();
    log = hetfl::run_experiment(config, options);
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(stop - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hetfl serial vs OpenMP benchmark"};
    std::size_t clients = 20;
    std::size_t rounds = 10;
    std::size_t per_class = 200;
    int threads = 0;  // OpenMP default
    app.add_option("--clients", clients, "Number of simulated clients");
    app.add_option("--rounds", rounds, "Communication rounds");
    app.add_option("--per-class", per_class, "Synthetic samples per class");
    app.add_option("--threads", threads, "Parallel worker count (0 = OpenMP default)");
    CLI11_PARSE(app, argc, argv);

    const hetfl::ExperimentConfig config = bench_config(clients, rounds, per_class);

    std::cout << "workload: " << clients << " clients, " << rounds << " rounds, "
              << per_class << " samples/class\n";
    if (!hetfl::parallel_available())
        std::cout << "note: built without OpenMP; both runs are serial\n";

    hetfl::RunLog serial_log;
    const double serial_s = time_run(config, 1, serial_log);
    std::cout << "serial reference: " << hetfl::format_double(serial_s) << " s\n";

    hetfl::RunLog parallel_log;
    const double parallel_s = time_run(config, threads, parallel_log);
    const int workers = threads == 0 ? hetfl::hardware_workers() : threads;
    std::cout << "openmp x" << workers << ":       " << hetfl::format_double(parallel_s)
              << " s\n";
    std::cout << "speedup: " << hetfl::format_double(serial_s / parallel_s) << "x\n";

    if (!logs_equal(serial_log, parallel_log)) {
        std::cerr << "error: parallel run diverged from the serial reference" << std::endl;
        return 1;
    }
    std::cout << "metrics identical across paths\n";
    return 0;
}
