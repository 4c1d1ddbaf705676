// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hetfl/config.hpp"
#include "hetfl/protocol.hpp"

namespace hetfl {

/// One row of the metrics table. Counters are cumulative over the run and
/// never decrease.
struct RoundMetrics {
    std::size_t round = 0;
    std::vector<double> per_client_accuracy;  // all N clients, sampled or not
    double avg_accuracy = 0.0;
    std::uint64_t cum_comm_params = 0;
    std::uint64_t cum_flops = 0;
    double mean_train_loss = 0.0;
};

struct RunLog {
    ExperimentConfig config;
    std::vector<RoundMetrics> rounds;
};

/// Fraction of test rows whose head-logit argmax matches the label. Ties go
/// to the lowest class index. Read-only.
double evaluate_model_on(const HeteroModel& model, const Dataset& test);
double evaluate_client(const ClientState& client);

/// Parameters moved in one round: one broadcast down plus one return up per
/// participant.
std::uint64_t communication_cost_per_round(std::size_t participants,
                                           std::size_t unit_param_count);

/// Closed-form training FLOPs one client spends in one round. Forward costs
/// 2 * d_in * d_out per layer; a backward pass costs twice a forward; every
/// phase processes local_epochs * n_k samples.
std::uint64_t client_round_flops(const HeteroModel& model, const LowRankAdapter& adapter,
                                 const RoundConfig& cfg, std::size_t n_k, TrainMode mode);

void write_metrics_csv(const RunLog& log, const std::string& path);
std::vector<RoundMetrics> read_metrics_csv(const std::string& path);

void write_config_snapshot(const RunLog& log, const std::string& path);

/// One `label,r1,...,r_repdim` row per test sample of this client.
void export_representations(const ClientState& client, const std::string& path);

}  // namespace hetfl
