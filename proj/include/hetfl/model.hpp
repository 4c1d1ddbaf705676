// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hetfl/nn.hpp"
#include "hetfl/rng.hpp"

namespace hetfl {

/// Width profile of one client model. The extractor runs input -> ... ->
/// rep_dim; the head runs rep_dim -> ... -> num_classes. Clients may differ
/// in every interior width as long as rep_dim and num_classes agree.
struct ModelSpec {
    std::vector<std::size_t> extractor_widths;
    std::vector<std::size_t> head_widths;
    std::size_t num_classes = 0;

    std::size_t input_dim() const { return extractor_widths.front(); }
    std::size_t rep_dim() const { return extractor_widths.back(); }
    void validate() const;

    bool operator==(const ModelSpec&) const = default;
};

/// A client's personalized network, split at the shared representation
/// boundary. Extractor layers are ReLU; head layers are ReLU except the
/// identity output layer.
struct HeteroModel {
    DenseStack extractor;
    DenseStack head;
    ModelSpec spec;
};

using RepVector = std::vector<double>;

HeteroModel build_model(const ModelSpec& spec, Rng& rng);

/// R = extractor(x); the vector every client exposes at the common width.
RepVector extract_representation(const HeteroModel& model, std::span<const double> x);

/// Class logits from the personalized head.
std::vector<double> head_forward(const HeteroModel& model, std::span<const double> rep);

std::size_t model_param_count(const HeteroModel& model);

/// Per-sample forward cost; a backward pass costs exactly twice this.
std::uint64_t model_forward_flops(const HeteroModel& model);
std::uint64_t model_backward_flops(const HeteroModel& model);

std::uint64_t model_param_hash(const HeteroModel& model);

}  // namespace hetfl
