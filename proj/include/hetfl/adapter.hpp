// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hetfl/nn.hpp"
#include "hetfl/rng.hpp"

namespace hetfl {

/// The two adapter constructions. DirectReduction mirrors a narrowed copy of
/// the head's fully-connected block and keeps a ReLU between its layers;
/// MatrixDecomposition is a purely linear two-factor map.
enum class AdapterMode { kDirectReduction, kMatrixDecomposition };

struct AdapterSpec {
    AdapterMode mode = AdapterMode::kMatrixDecomposition;
    std::size_t rep_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t num_classes = 0;
    double init_sigma = 0.01;

    void validate() const;  // enforces hidden_dim < rep_dim, num_classes >= 2

    bool operator==(const AdapterSpec&) const = default;
};

/// The shared-shape low-rank head every client trains and exchanges.
/// layer_a carries Gaussian N(0, sigma^2) weights; layer_b starts at exactly
/// zero, so a fresh adapter outputs the zero logit vector for any input.
struct LowRankAdapter {
    DenseStack stack;  // [0] = layer_a (rep -> hidden), [1] = layer_b (hidden -> classes)
    AdapterMode mode = AdapterMode::kMatrixDecomposition;

    DenseLayer& layer_a() { return stack.layers[0]; }
    DenseLayer& layer_b() { return stack.layers[1]; }
    const DenseLayer& layer_a() const { return stack.layers[0]; }
    const DenseLayer& layer_b() const { return stack.layers[1]; }

    std::size_t rep_dim() const { return stack.layers[0].in_dim(); }
    std::size_t hidden_dim() const { return stack.layers[0].out_dim(); }
    std::size_t num_classes() const { return stack.layers[1].out_dim(); }
};

LowRankAdapter build_adapter(const AdapterSpec& spec, Rng& rng);

std::vector<double> adapter_forward(const LowRankAdapter& adapter,
                                    std::span<const double> rep);

/// Narrow an (in -> out_final) fully-connected block down to rank `hidden`.
AdapterSpec shape_direct_reduction(std::size_t head_in, std::size_t out_final,
                                   std::size_t hidden);

/// Factor a rep_dim-wide map into (rep_dim x hidden) + (hidden x classes).
AdapterSpec shape_matrix_decomposition(std::size_t rep_dim, std::size_t num_classes,
                                       std::size_t hidden);

std::size_t adapter_param_count(const AdapterSpec& spec);
std::size_t adapter_param_count(const LowRankAdapter& adapter);

std::uint64_t adapter_forward_flops(const LowRankAdapter& adapter);

std::uint64_t adapter_param_hash(const LowRankAdapter& adapter);

std::string to_string(AdapterMode mode);
AdapterMode adapter_mode_from_string(const std::string& name);

}  // namespace hetfl
