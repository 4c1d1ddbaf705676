// SPDX-License-Identifier: Apache-2.0
#include "hetfl/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hetfl {

std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::kIterative: return "iterative";
        case TrainMode::kSimultaneous: return "simultaneous";
        case TrainMode::kStandalone: return "standalone";
        case TrainMode::kHomogeneousFedAvg: return "fedavg";
    }
    return "iterative";
}

TrainMode train_mode_from_string(const std::string& name) {
    if (name == "iterative") return TrainMode::kIterative;
    if (name == "simultaneous") return TrainMode::kSimultaneous;
    if (name == "standalone") return TrainMode::kStandalone;
    if (name == "fedavg") return TrainMode::kHomogeneousFedAvg;
    throw std::invalid_argument(
        "unknown mode '" + name +
        "' (expected iterative, simultaneous, standalone or fedavg)");
}

void RoundConfig::validate() const {
    if (local_epochs < 1) throw std::invalid_argument("local_epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(lr_model > 0.0)) throw std::invalid_argument("lr_model must be > 0");
    if (!(lr_adapter > 0.0)) throw std::invalid_argument("lr_adapter must be > 0");
    if (!(mu >= 0.5 && mu < 1.0))
        throw std::invalid_argument("mu must lie in [0.5, 1), got " + std::to_string(mu));
}

double dual_loss(double adapter_branch_loss, double head_branch_loss, double mu) {
    return (1.0 - mu) * adapter_branch_loss + mu * head_branch_loss;
}

std::vector<int> sample_clients(std::size_t num_clients, double participation, Rng& rng) {
    if (num_clients < 1) throw std::invalid_argument("need at least one client");
    if (!(participation > 0.0) || participation > 1.0)
        throw std::invalid_argument("participation must lie in (0, 1]");
    // Nudge before flooring so exact products like 0.3 * 10 do not round down.
    const std::size_t k = static_cast<std::size_t>(
        std::floor(participation * static_cast<double>(num_clients) + 1e-9));
    if (k == 0)
        throw std::invalid_argument("participation " + std::to_string(participation) +
                                    " of " + std::to_string(num_clients) +
                                    " clients selects nobody");

    std::vector<int> pool(num_clients);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(num_clients - i));
        std::swap(pool[i], pool[j]);
    }
    std::vector<int> sampled(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(sampled.begin(), sampled.end());
    return sampled;
}

void client_receive(ClientState& client, const LowRankAdapter& global_adapter) {
    if (client.adapter.rep_dim() != global_adapter.rep_dim() ||
        client.adapter.hidden_dim() != global_adapter.hidden_dim() ||
        client.adapter.num_classes() != global_adapter.num_classes() ||
        client.adapter.mode != global_adapter.mode)
        throw std::runtime_error("client " + std::to_string(client.id) +
                                 ": broadcast adapter shape does not match local adapter");
    client.adapter = global_adapter;
}

namespace {

void add_scaled(std::vector<double>& dst, const std::vector<double>& a,
                const std::vector<double>& b) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = a[i] + b[i];
}

// Shuffled mini-batch sweep shared by every training mode. step() consumes
// one batch, applies its updates, and returns the batch-mean loss. Returns
// the sample-weighted mean loss over all epochs.
template <typename StepFn>
double run_epochs(const Dataset& train, std::size_t epochs, std::size_t batch_size, Rng& rng,
                  StepFn step) {
    if (train.size() == 0) throw std::runtime_error("training set is empty");
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t stop = std::min(start + batch_size, order.size());
            const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                 order.begin() + static_cast<std::ptrdiff_t>(stop));
            const double batch_loss = step(batch);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("non-finite training loss; aborting round");
            loss_sum += batch_loss * static_cast<double>(batch.size());
            seen += batch.size();
        }
    }
    return loss_sum / static_cast<double>(seen);
}

}  // namespace

ModelBatchGrads dual_branch_gradients(const HeteroModel& model, const LowRankAdapter& adapter,
                                      const Dataset& data,
                                      const std::vector<std::size_t>& batch, double w_adapter,
                                      double w_head) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    ModelBatchGrads out;
    out.extractor = GradBundle::zeros_like(model.extractor);
    out.head = GradBundle::zeros_like(model.head);

    for (std::size_t idx : batch) {
        const int label = data.labels[idx];
        const ForwardTrace ext_trace = stack_forward(model.extractor, data.row(idx));
        const ForwardTrace adp_trace = stack_forward(adapter.stack, ext_trace.output);
        const ForwardTrace head_trace = stack_forward(model.head, ext_trace.output);

        out.mean_loss += w_adapter * cross_entropy(adp_trace.output, label) +
                         w_head * cross_entropy(head_trace.output, label);

        std::vector<double> up_adapter = cross_entropy_grad(adp_trace.output, label);
        for (double& g : up_adapter) g *= w_adapter;
        std::vector<double> up_head = cross_entropy_grad(head_trace.output, label);
        for (double& g : up_head) g *= w_head;

        BackwardResult head_back = stack_backward(model.head, head_trace, up_head);
        out.head.add(head_back.grads);
        // The adapter is frozen: its parameter gradients are dropped, but the
        // branch still contributes to the representation gradient.
        BackwardResult adp_back = stack_backward(adapter.stack, adp_trace, up_adapter);

        std::vector<double> rep_grad(ext_trace.output.size());
        add_scaled(rep_grad, head_back.input_grad, adp_back.input_grad);
        BackwardResult ext_back = stack_backward(model.extractor, ext_trace, rep_grad);
        out.extractor.add(ext_back.grads);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.extractor.scale(inv);
    out.head.scale(inv);
    out.mean_loss *= inv;
    return out;
}

ModelBatchGrads head_only_gradients(const HeteroModel& model, const Dataset& data,
                                    const std::vector<std::size_t>& batch) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    ModelBatchGrads out;
    out.extractor = GradBundle::zeros_like(model.extractor);
    out.head = GradBundle::zeros_like(model.head);

    for (std::size_t idx : batch) {
        const int label = data.labels[idx];
        const ForwardTrace ext_trace = stack_forward(model.extractor, data.row(idx));
        const ForwardTrace head_trace = stack_forward(model.head, ext_trace.output);
        out.mean_loss += cross_entropy(head_trace.output, label);

        const std::vector<double> up = cross_entropy_grad(head_trace.output, label);
        BackwardResult head_back = stack_backward(model.head, head_trace, up);
        out.head.add(head_back.grads);
        BackwardResult ext_back =
            stack_backward(model.extractor, ext_trace, head_back.input_grad);
        out.extractor.add(ext_back.grads);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.extractor.scale(inv);
    out.head.scale(inv);
    out.mean_loss *= inv;
    return out;
}

JointBatchGrads summed_logit_gradients(const HeteroModel& model, const LowRankAdapter& adapter,
                                       const Dataset& data,
                                       const std::vector<std::size_t>& batch) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    JointBatchGrads out;
    out.extractor = GradBundle::zeros_like(model.extractor);
    out.head = GradBundle::zeros_like(model.head);
    out.adapter = GradBundle::zeros_like(adapter.stack);

    for (std::size_t idx : batch) {
        const int label = data.labels[idx];
        const ForwardTrace ext_trace = stack_forward(model.extractor, data.row(idx));
        const ForwardTrace adp_trace = stack_forward(adapter.stack, ext_trace.output);
        const ForwardTrace head_trace = stack_forward(model.head, ext_trace.output);

        std::vector<double> summed(head_trace.output.size());
        add_scaled(summed, head_trace.output, adp_trace.output);
        out.mean_loss += cross_entropy(summed, label);

        // d loss / d (summed logits) feeds both branches unchanged.
        const std::vector<double> up = cross_entropy_grad(summed, label);
        BackwardResult head_back = stack_backward(model.head, head_trace, up);
        out.head.add(head_back.grads);
        BackwardResult adp_back = stack_backward(adapter.stack, adp_trace, up);
        out.adapter.add(adp_back.grads);

        std::vector<double> rep_grad(ext_trace.output.size());
        add_scaled(rep_grad, head_back.input_grad, adp_back.input_grad);
        BackwardResult ext_back = stack_backward(model.extractor, ext_trace, rep_grad);
        out.extractor.add(ext_back.grads);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.extractor.scale(inv);
    out.head.scale(inv);
    out.adapter.scale(inv);
    out.mean_loss *= inv;
    return out;
}

AdapterBatchGrads adapter_only_gradients(const HeteroModel& model,
                                         const LowRankAdapter& adapter, const Dataset& data,
                                         const std::vector<std::size_t>& batch) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    AdapterBatchGrads out;
    out.adapter = GradBundle::zeros_like(adapter.stack);

    for (std::size_t idx : batch) {
        const int label = data.labels[idx];
        const RepVector rep = extract_representation(model, data.row(idx));
        const ForwardTrace adp_trace = stack_forward(adapter.stack, rep);
        out.mean_loss += cross_entropy(adp_trace.output, label);
        const std::vector<double> up = cross_entropy_grad(adp_trace.output, label);
        BackwardResult adp_back = stack_backward(adapter.stack, adp_trace, up);
        out.adapter.add(adp_back.grads);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.adapter.scale(inv);
    out.mean_loss *= inv;
    return out;
}

double phase1_train_model(ClientState& client, const RoundConfig& cfg, Rng& rng) {
    cfg.validate();
    return run_epochs(client.train, cfg.local_epochs, cfg.batch_size, rng,
                      [&](const std::vector<std::size_t>& batch) {
                          ModelBatchGrads grads =
                              dual_branch_gradients(client.model, client.adapter, client.train,
                                                    batch, 1.0 - cfg.mu, cfg.mu);
                          sgd_step(client.model.extractor, grads.extractor, cfg.lr_model);
                          sgd_step(client.model.head, grads.head, cfg.lr_model);
                          return grads.mean_loss;
                      });
}

double phase2_train_adapter(ClientState& client, const RoundConfig& cfg, Rng& rng) {
    cfg.validate();
    return run_epochs(client.train, cfg.local_epochs, cfg.batch_size, rng,
                      [&](const std::vector<std::size_t>& batch) {
                          AdapterBatchGrads grads = adapter_only_gradients(
                              client.model, client.adapter, client.train, batch);
                          sgd_step(client.adapter.stack, grads.adapter, cfg.lr_adapter);
                          return grads.mean_loss;
                      });
}

ClientUpdate client_update(ClientState& client, const ServerState& server,
                           const RoundConfig& cfg, TrainMode mode, Rng& rng) {
    ClientUpdate update;
    update.sample_count = client.train_count();

    switch (mode) {
        case TrainMode::kIterative: {
            client_receive(client, server.global_adapter);
            update.mean_train_loss = phase1_train_model(client, cfg, rng);
            phase2_train_adapter(client, cfg, rng);
            update.adapter = client.adapter;
            break;
        }
        case TrainMode::kSimultaneous: {
            client_receive(client, server.global_adapter);
            update.mean_train_loss = run_epochs(
                client.train, cfg.local_epochs, cfg.batch_size, rng,
                [&](const std::vector<std::size_t>& batch) {
                    JointBatchGrads grads = summed_logit_gradients(client.model, client.adapter,
                                                                   client.train, batch);
                    sgd_step(client.model.extractor, grads.extractor, cfg.lr_model);
                    sgd_step(client.model.head, grads.head, cfg.lr_model);
                    sgd_step(client.adapter.stack, grads.adapter, cfg.lr_adapter);
                    return grads.mean_loss;
                });
            update.adapter = client.adapter;
            break;
        }
        case TrainMode::kStandalone: {
            update.mean_train_loss = run_epochs(
                client.train, cfg.local_epochs, cfg.batch_size, rng,
                [&](const std::vector<std::size_t>& batch) {
                    ModelBatchGrads grads = head_only_gradients(client.model, client.train, batch);
                    sgd_step(client.model.extractor, grads.extractor, cfg.lr_model);
                    sgd_step(client.model.head, grads.head, cfg.lr_model);
                    return grads.mean_loss;
                });
            break;
        }
        case TrainMode::kHomogeneousFedAvg: {
            if (!server.global_model)
                throw std::runtime_error("fedavg mode requires a global model on the server");
            if (!(client.model.spec == server.global_model->spec))
                throw std::runtime_error("fedavg mode requires homogeneous model specs");
            client.model = *server.global_model;
            update.mean_train_loss = run_epochs(
                client.train, cfg.local_epochs, cfg.batch_size, rng,
                [&](const std::vector<std::size_t>& batch) {
                    ModelBatchGrads grads = head_only_gradients(client.model, client.train, batch);
                    sgd_step(client.model.extractor, grads.extractor, cfg.lr_model);
                    sgd_step(client.model.head, grads.head, cfg.lr_model);
                    return grads.mean_loss;
                });
            update.model = client.model;
            break;
        }
    }
    return update;
}

namespace {

// Weighted mean accumulated in long double so every averaged entry stays
// inside the convex hull of its inputs after rounding back to double.
DenseStack weighted_average_stacks(const std::vector<const DenseStack*>& stacks,
                                   const std::vector<std::size_t>& weights) {
    if (stacks.empty()) throw std::invalid_argument("aggregate: empty input");
    if (stacks.size() != weights.size())
        throw std::invalid_argument("aggregate: weight count mismatch");
    long double total = 0.0L;
    for (std::size_t w : weights) {
        if (w == 0) throw std::invalid_argument("aggregate: weights must be positive");
        total += static_cast<long double>(w);
    }

    const DenseStack& first = *stacks[0];
    for (const DenseStack* stack : stacks) {
        if (stack->layers.size() != first.layers.size())
            throw std::invalid_argument("aggregate: layer count mismatch");
        for (std::size_t l = 0; l < first.layers.size(); ++l) {
            if (stack->layers[l].weights.rows != first.layers[l].weights.rows ||
                stack->layers[l].weights.cols != first.layers[l].weights.cols ||
                stack->layers[l].bias.size() != first.layers[l].bias.size())
                throw std::invalid_argument("aggregate: shape mismatch at layer " +
                                            std::to_string(l));
        }
    }

    DenseStack result = first;
    auto average_into = [&](std::vector<double>& dst, auto entry_of) {
        for (std::size_t i = 0; i < dst.size(); ++i) {
            long double acc = 0.0L;
            for (std::size_t k = 0; k < stacks.size(); ++k)
                acc += (static_cast<long double>(weights[k]) / total) *
                       static_cast<long double>(entry_of(*stacks[k], i));
            dst[i] = static_cast<double>(acc);
        }
    };
    for (std::size_t l = 0; l < result.layers.size(); ++l) {
        average_into(result.layers[l].weights.data,
                     [l](const DenseStack& s, std::size_t i) -> double {
                         return s.layers[l].weights.data[i];
                     });
        average_into(result.layers[l].bias, [l](const DenseStack& s, std::size_t i) -> double {
            return s.layers[l].bias[i];
        });
    }
    return result;
}

}  // namespace

LowRankAdapter aggregate(const std::vector<LowRankAdapter>& adapters,
                         const std::vector<std::size_t>& weights) {
    if (adapters.empty()) throw std::invalid_argument("aggregate: no adapters");
    for (const LowRankAdapter& adapter : adapters)
        if (adapter.mode != adapters.front().mode)
            throw std::invalid_argument("aggregate: adapter mode mismatch");
    std::vector<const DenseStack*> stacks;
    stacks.reserve(adapters.size());
    for (const LowRankAdapter& adapter : adapters) stacks.push_back(&adapter.stack);
    LowRankAdapter result = adapters.front();
    result.stack = weighted_average_stacks(stacks, weights);
    return result;
}

HeteroModel aggregate_models(const std::vector<HeteroModel>& models,
                             const std::vector<std::size_t>& weights) {
    if (models.empty()) throw std::invalid_argument("aggregate: no models");
    for (const HeteroModel& model : models)
        if (!(model.spec == models.front().spec))
            throw std::invalid_argument("aggregate: model spec mismatch");
    std::vector<const DenseStack*> extractors;
    std::vector<const DenseStack*> heads;
    for (const HeteroModel& model : models) {
        extractors.push_back(&model.extractor);
        heads.push_back(&model.head);
    }
    HeteroModel result = models.front();
    result.extractor = weighted_average_stacks(extractors, weights);
    result.head = weighted_average_stacks(heads, weights);
    return result;
}

}  // namespace hetfl
