// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hetfl/adapter.hpp"
#include "hetfl/data.hpp"
#include "hetfl/model.hpp"
#include "hetfl/rng.hpp"

namespace hetfl {

enum class TrainMode { kIterative, kSimultaneous, kStandalone, kHomogeneousFedAvg };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

/// Local-training hyperparameters for one round. mu weighs the local head's
/// loss against the adapter branch during model training and must stay in
/// [0.5, 1).
struct RoundConfig {
    std::size_t local_epochs = 1;
    std::size_t batch_size = 32;
    double lr_model = 0.01;
    double lr_adapter = 0.01;
    double mu = 0.9;

    void validate() const;

    bool operator==(const RoundConfig&) const = default;
};

/// (1 - mu) * adapter_branch_loss + mu * head_branch_loss.
double dual_loss(double adapter_branch_loss, double head_branch_loss, double mu);

struct ClientState {
    int id = 0;
    HeteroModel model;
    LowRankAdapter adapter;
    Dataset train;
    Dataset val;
    Dataset test;
    std::uint64_t seed = 0;  // derive_seed(master_seed, id)

    std::size_t train_count() const { return train.size(); }
};

struct ServerState {
    LowRankAdapter global_adapter;
    std::optional<HeteroModel> global_model;  // HomogeneousFedAvg only
    std::size_t round = 0;
    std::size_t total_n = 0;  // sum of n_k over the last sampled set
    std::uint64_t cum_comm_params = 0;
    std::uint64_t cum_flops = 0;
};

/// floor(participation * num_clients) distinct ids, uniform without
/// replacement, returned sorted. Throws when the floor is zero.
std::vector<int> sample_clients(std::size_t num_clients, double participation, Rng& rng);

/// Replaces the client's local adapter with a value copy of the broadcast.
void client_receive(ClientState& client, const LowRankAdapter& global_adapter);

// --- batch gradient kernels -------------------------------------------------
// Each computes mean-over-batch gradients for one parameter subset, leaving
// all parameters untouched. They are the building blocks of the training
// phases below and are exposed so tests can probe them directly.

struct ModelBatchGrads {
    GradBundle extractor;
    GradBundle head;
    double mean_loss = 0.0;
};

struct JointBatchGrads {
    GradBundle extractor;
    GradBundle head;
    GradBundle adapter;
    double mean_loss = 0.0;
};

struct AdapterBatchGrads {
    GradBundle adapter;
    double mean_loss = 0.0;
};

/// Dual-branch loss w1 * CE(adapter(R), y) + w2 * CE(head(R), y) with the
/// adapter frozen; its branch still back-propagates into the extractor.
ModelBatchGrads dual_branch_gradients(const HeteroModel& model, const LowRankAdapter& adapter,
                                      const Dataset& data,
                                      const std::vector<std::size_t>& batch, double w_adapter,
                                      double w_head);

/// Head-only loss CE(head(R), y); no adapter involved.
ModelBatchGrads head_only_gradients(const HeteroModel& model, const Dataset& data,
                                    const std::vector<std::size_t>& batch);

/// Summed-logit loss CE(adapter(R) + head(R), y), every parameter live.
JointBatchGrads summed_logit_gradients(const HeteroModel& model, const LowRankAdapter& adapter,
                                       const Dataset& data,
                                       const std::vector<std::size_t>& batch);

/// Adapter loss CE(adapter(R), y) with the whole model frozen.
AdapterBatchGrads adapter_only_gradients(const HeteroModel& model,
                                         const LowRankAdapter& adapter, const Dataset& data,
                                         const std::vector<std::size_t>& batch);

// --- local training phases ---------------------------------------------------

/// Freeze the adapter, train extractor + head for cfg.local_epochs epochs on
/// the mu-weighted dual loss. Returns the mean per-sample loss seen.
double phase1_train_model(ClientState& client, const RoundConfig& cfg, Rng& rng);

/// Freeze the model, train the adapter on its own cross-entropy against the
/// updated representations. Returns the mean per-sample loss seen.
double phase2_train_adapter(ClientState& client, const RoundConfig& cfg, Rng& rng);

/// What a client hands back to the server after local work.
struct ClientUpdate {
    std::optional<LowRankAdapter> adapter;  // Iterative / Simultaneous
    std::optional<HeteroModel> model;       // HomogeneousFedAvg
    std::size_t sample_count = 0;
    double mean_train_loss = 0.0;
};

ClientUpdate client_update(ClientState& client, const ServerState& server,
                           const RoundConfig& cfg, TrainMode mode, Rng& rng);

/// Sample-count weighted element-wise mean; weights must be positive and
/// shapes identical.
LowRankAdapter aggregate(const std::vector<LowRankAdapter>& adapters,
                         const std::vector<std::size_t>& weights);
HeteroModel aggregate_models(const std::vector<HeteroModel>& models,
                             const std::vector<std::size_t>& weights);

}  // namespace hetfl
