// SPDX-License-Identifier: Apache-2.0
#include "hetfl/adapter.hpp"

#include <stdexcept>

namespace hetfl {

void AdapterSpec::validate() const {
    if (hidden_dim < 1) throw std::invalid_argument("adapter hidden_dim must be >= 1");
    if (num_classes < 2) throw std::invalid_argument("adapter num_classes must be >= 2");
    if (hidden_dim >= rep_dim)
        throw std::invalid_argument("adapter hidden_dim " + std::to_string(hidden_dim) +
                                    " must be strictly smaller than rep_dim " +
                                    std::to_string(rep_dim) + " (not low-rank otherwise)");
    if (!(init_sigma > 0.0))
        throw std::invalid_argument("adapter init_sigma must be > 0");
}

LowRankAdapter build_adapter(const AdapterSpec& spec, Rng& rng) {
    spec.validate();
    LowRankAdapter adapter;
    adapter.mode = spec.mode;

    DenseLayer a;
    a.weights = Tensor2(spec.rep_dim, spec.hidden_dim);
    a.bias.assign(spec.hidden_dim, 0.0);
    a.activation = spec.mode == AdapterMode::kDirectReduction ? ActivationKind::kReLU
                                                              : ActivationKind::kIdentity;
    for (double& w : a.weights.data) w = rng.normal(0.0, spec.init_sigma);

    DenseLayer b;
    b.weights = Tensor2(spec.hidden_dim, spec.num_classes);  // all zero
    b.bias.assign(spec.num_classes, 0.0);
    b.activation = ActivationKind::kIdentity;

    adapter.stack.layers = {std::move(a), std::move(b)};
    return adapter;
}

std::vector<double> adapter_forward(const LowRankAdapter& adapter,
                                    std::span<const double> rep) {
    return stack_forward(adapter.stack, rep).output;
}

AdapterSpec shape_direct_reduction(std::size_t head_in, std::size_t out_final,
                                   std::size_t hidden) {
    AdapterSpec spec;
    spec.mode = AdapterMode::kDirectReduction;
    spec.rep_dim = head_in;
    spec.hidden_dim = hidden;
    spec.num_classes = out_final;
    spec.validate();
    return spec;
}

AdapterSpec shape_matrix_decomposition(std::size_t rep_dim, std::size_t num_classes,
                                       std::size_t hidden) {
    AdapterSpec spec;
    spec.mode = AdapterMode::kMatrixDecomposition;
    spec.rep_dim = rep_dim;
    spec.hidden_dim = hidden;
    spec.num_classes = num_classes;
    spec.validate();
    return spec;
}

std::size_t adapter_param_count(const AdapterSpec& spec) {
    return spec.rep_dim * spec.hidden_dim + spec.hidden_dim +
           spec.hidden_dim * spec.num_classes + spec.num_classes;
}

std::size_t adapter_param_count(const LowRankAdapter& adapter) {
    return stack_param_count(adapter.stack);
}

std::uint64_t adapter_forward_flops(const LowRankAdapter& adapter) {
    return stack_forward_flops(adapter.stack);
}

std::uint64_t adapter_param_hash(const LowRankAdapter& adapter) {
    return param_hash(adapter.stack);
}

std::string to_string(AdapterMode mode) {
    return mode == AdapterMode::kDirectReduction ? "direct_reduction" : "matrix_decomposition";
}

AdapterMode adapter_mode_from_string(const std::string& name) {
    if (name == "direct_reduction") return AdapterMode::kDirectReduction;
    if (name == "matrix_decomposition") return AdapterMode::kMatrixDecomposition;
    throw std::invalid_argument("unknown adapter mode '" + name +
                                "' (expected direct_reduction or matrix_decomposition)");
}

}  // namespace hetfl
