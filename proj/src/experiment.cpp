// SPDX-License-Identifier: Apache-2.0
#include "hetfl/experiment.hpp"

#include <stdexcept>
#include <string>

#include "hetfl/parallel.hpp"

namespace hetfl {

namespace {

// Domain tags for seed derivation. Per-round streams use the raw round
// index, so purpose tags stay far away from small integers.
constexpr std::uint64_t kDataTag = 0xD47A5E7ull;
constexpr std::uint64_t kPartitionTag = 0x9A657ull;
constexpr std::uint64_t kSplitTag = 0x5917Bull;
constexpr std::uint64_t kModelInitTag = 0x40DE11ull;
constexpr std::uint64_t kGlobalAdapterTag = 0x6ADA97ull;
constexpr std::uint64_t kGlobalModelTag = 0x640DE1ull;
constexpr std::uint64_t kSamplingTag = 0x5A4911ull;

std::uint64_t client_seed(std::uint64_t master_seed, int client_id) {
    return derive_seed(master_seed, static_cast<std::uint64_t>(client_id));
}

}  // namespace

ExperimentState build_experiment(const ExperimentConfig& config) {
    config.validate();

    Dataset dataset;
    if (config.data.source == DataConfig::Source::kSynthetic) {
        Rng rng(derive_seed(config.seed, kDataTag));
        dataset = generate_synthetic(config.data.synthetic.num_classes,
                                     config.data.synthetic.dim, config.data.synthetic.per_class,
                                     config.data.synthetic.separation, rng);
    } else {
        dataset = load_csv_dataset(config.data.csv_path);
        if (dataset.dim() != config.models.front().input_dim())
            throw std::invalid_argument(
                "dataset dim " + std::to_string(dataset.dim()) +
                " does not match model input width " +
                std::to_string(config.models.front().input_dim()));
        if (static_cast<std::size_t>(dataset.num_classes) != config.models.front().num_classes)
            throw std::invalid_argument(
                "dataset has " + std::to_string(dataset.num_classes) +
                " classes but models expect " +
                std::to_string(config.models.front().num_classes));
        if (config.data.classes_per_client > static_cast<std::size_t>(dataset.num_classes))
            throw std::invalid_argument("data.classes_per_client exceeds dataset classes");
    }

    Rng partition_rng(derive_seed(config.seed, kPartitionTag));
    const PartitionPlan plan =
        partition_noniid(dataset, config.num_clients, config.data.classes_per_client,
                         partition_rng);

    ExperimentState state;
    state.clients.reserve(config.num_clients);

    Rng adapter_rng(derive_seed(config.seed, kGlobalAdapterTag));
    state.server.global_adapter = build_adapter(config.adapter, adapter_rng);
    if (config.mode == TrainMode::kHomogeneousFedAvg) {
        Rng model_rng(derive_seed(config.seed, kGlobalModelTag));
        state.server.global_model = build_model(config.models.front(), model_rng);
    }

    const std::uint64_t split_base = derive_seed(config.seed, kSplitTag);
    for (std::size_t k = 0; k < config.num_clients; ++k) {
        ClientState client;
        client.id = static_cast<int>(k);
        client.seed = client_seed(config.seed, client.id);

        Rng split_rng(derive_seed(split_base, static_cast<std::uint64_t>(k)));
        DataSplit split;
        try {
            split = split_811(dataset, plan.client_indices[k], split_rng);
        } catch (const std::exception& e) {
            throw std::runtime_error("client " + std::to_string(k) + ": " + e.what());
        }
        client.train = subset(dataset, split.train);
        client.val = subset(dataset, split.val);
        client.test = subset(dataset, split.test);

        Rng model_rng(derive_seed(client.seed, kModelInitTag));
        client.model = build_model(config.model_for_client(k), model_rng);
        client.adapter = state.server.global_adapter;  // round-0 value copy

        state.clients.push_back(std::move(client));
    }
    return state;
}

RoundMetrics run_round(ServerState& server, std::vector<ClientState>& clients,
                       const RoundConfig& cfg, TrainMode mode, double participation,
                       std::uint64_t master_seed, int threads) {
    const std::size_t round_index = server.round;
    Rng sampling_rng(derive_seed(derive_seed(master_seed, kSamplingTag),
                                 static_cast<std::uint64_t>(round_index)));
    const std::vector<int> sampled =
        sample_clients(clients.size(), participation, sampling_rng);

    // Local updates are independent; each worker owns one client's state and
    // one result slot. RNG streams depend on (master seed, client, round)
    // only, so the schedule cannot leak into the results.
    std::vector<ClientUpdate> updates(sampled.size());
    parallel_for(sampled.size(), threads, [&](std::size_t i) {
        ClientState& client = clients[static_cast<std::size_t>(sampled[i])];
        Rng stream(derive_seed(client.seed, static_cast<std::uint64_t>(round_index)));
        updates[i] = client_update(client, server, cfg, mode, stream);
    });

    std::size_t total_n = 0;
    double loss_weighted = 0.0;
    for (const ClientUpdate& update : updates) {
        total_n += update.sample_count;
        loss_weighted += update.mean_train_loss * static_cast<double>(update.sample_count);
    }
    server.total_n = total_n;

    switch (mode) {
        case TrainMode::kIterative:
        case TrainMode::kSimultaneous: {
            std::vector<LowRankAdapter> adapters;
            std::vector<std::size_t> weights;
            for (const ClientUpdate& update : updates) {
                adapters.push_back(*update.adapter);
                weights.push_back(update.sample_count);
            }
            server.global_adapter = aggregate(adapters, weights);
            server.cum_comm_params += communication_cost_per_round(
                sampled.size(), adapter_param_count(server.global_adapter));
            break;
        }
        case TrainMode::kHomogeneousFedAvg: {
            std::vector<HeteroModel> models;
            std::vector<std::size_t> weights;
            for (const ClientUpdate& update : updates) {
                models.push_back(*update.model);
                weights.push_back(update.sample_count);
            }
            server.global_model = aggregate_models(models, weights);
            server.cum_comm_params += communication_cost_per_round(
                sampled.size(), model_param_count(*server.global_model));
            break;
        }
        case TrainMode::kStandalone:
            break;  // no exchange, no aggregation
    }

    for (std::size_t i = 0; i < sampled.size(); ++i) {
        const ClientState& client = clients[static_cast<std::size_t>(sampled[i])];
        server.cum_flops +=
            client_round_flops(client.model, client.adapter, cfg, updates[i].sample_count, mode);
    }

    server.round = round_index + 1;

    RoundMetrics metrics;
    metrics.round = round_index;
    metrics.per_client_accuracy.assign(clients.size(), 0.0);
    parallel_for(clients.size(), threads, [&](std::size_t k) {
        metrics.per_client_accuracy[k] =
            mode == TrainMode::kHomogeneousFedAvg
                ? evaluate_model_on(*server.global_model, clients[k].test)
                : evaluate_client(clients[k]);
    });
    double acc_sum = 0.0;
    for (double acc : metrics.per_client_accuracy) acc_sum += acc;
    metrics.avg_accuracy = acc_sum / static_cast<double>(clients.size());
    metrics.cum_comm_params = server.cum_comm_params;
    metrics.cum_flops = server.cum_flops;
    metrics.mean_train_loss = loss_weighted / static_cast<double>(total_n);
    return metrics;
}

RunLog run_experiment(const ExperimentConfig& config, const RunOptions& options,
                      ExperimentState* final_state) {
    ExperimentState state = build_experiment(config);

    RunLog log;
    log.config = config;
    log.rounds.reserve(config.rounds);
    for (std::size_t t = 0; t < config.rounds; ++t) {
        RoundMetrics metrics = run_round(state.server, state.clients, config.round, config.mode,
                                         config.participation, config.seed, options.threads);
        if (options.on_round) options.on_round(metrics);
        log.rounds.push_back(std::move(metrics));
    }
    if (final_state) *final_state = std::move(state);
    return log;
}

}  // namespace hetfl
