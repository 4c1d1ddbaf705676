// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "hetfl/config.hpp"
#include "hetfl/metrics.hpp"
#include "hetfl/protocol.hpp"

namespace hetfl {

/// Runtime knobs that must not influence results: worker count for the
/// client-parallel loops and an optional per-round observer. Excluded from
/// config snapshots on purpose.
struct RunOptions {
    int threads = 1;  // 1 = serial reference path, 0 = OpenMP default
    std::function<void(const RoundMetrics&)> on_round;
};

struct ExperimentState {
    std::vector<ClientState> clients;
    ServerState server;
};

/// Datasets, partition, splits, models, adapters — everything as it stands
/// before round 0. Deterministic in config.seed alone.
ExperimentState build_experiment(const ExperimentConfig& config);

/// One full communication round: sample, broadcast, local training on each
/// sampled client (parallel across clients), aggregation, then evaluation of
/// all clients. Unsampled clients are untouched.
RoundMetrics run_round(ServerState& server, std::vector<ClientState>& clients,
                       const RoundConfig& cfg, TrainMode mode, double participation,
                       std::uint64_t master_seed, int threads);

/// Runs all configured rounds. When final_state is non-null it receives the
/// post-run clients and server (for representation export and inspection).
RunLog run_experiment(const ExperimentConfig& config, const RunOptions& options = {},
                      ExperimentState* final_state = nullptr);

}  // namespace hetfl
