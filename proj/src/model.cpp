// SPDX-License-Identifier: Apache-2.0
#include "hetfl/model.hpp"

#include <stdexcept>
#include <string>

namespace hetfl {

namespace {

DenseStack make_stack(const std::vector<std::size_t>& widths, bool identity_output) {
    DenseStack stack;
    stack.layers.reserve(widths.size() - 1);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        DenseLayer layer;
        layer.weights = Tensor2(widths[i], widths[i + 1]);
        layer.bias.assign(widths[i + 1], 0.0);
        const bool is_last = (i + 2 == widths.size());
        layer.activation = (identity_output && is_last) ? ActivationKind::kIdentity
                                                        : ActivationKind::kReLU;
        stack.layers.push_back(std::move(layer));
    }
    return stack;
}

}  // namespace

void ModelSpec::validate() const {
    if (extractor_widths.size() < 2)
        throw std::invalid_argument("model spec needs at least input and rep widths");
    if (head_widths.size() < 2)
        throw std::invalid_argument("model spec needs at least rep and class widths");
    for (std::size_t w : extractor_widths)
        if (w < 1) throw std::invalid_argument("extractor width must be >= 1");
    for (std::size_t w : head_widths)
        if (w < 1) throw std::invalid_argument("head width must be >= 1");
    if (extractor_widths.back() != head_widths.front())
        throw std::invalid_argument(
            "extractor output width " + std::to_string(extractor_widths.back()) +
            " does not match head input width " + std::to_string(head_widths.front()));
    if (head_widths.back() != num_classes)
        throw std::invalid_argument("last head width " + std::to_string(head_widths.back()) +
                                    " does not match num_classes " +
                                    std::to_string(num_classes));
}

HeteroModel build_model(const ModelSpec& spec, Rng& rng) {
    spec.validate();
    HeteroModel model;
    model.spec = spec;
    model.extractor = make_stack(spec.extractor_widths, /*identity_output=*/false);
    model.head = make_stack(spec.head_widths, /*identity_output=*/true);
    init_fan_uniform(model.extractor, rng);
    init_fan_uniform(model.head, rng);
    return model;
}

RepVector extract_representation(const HeteroModel& model, std::span<const double> x) {
    return stack_forward(model.extractor, x).output;
}

std::vector<double> head_forward(const HeteroModel& model, std::span<const double> rep) {
    return stack_forward(model.head, rep).output;
}

std::size_t model_param_count(const HeteroModel& model) {
    return stack_param_count(model.extractor) + stack_param_count(model.head);
}

std::uint64_t model_forward_flops(const HeteroModel& model) {
    return stack_forward_flops(model.extractor) + stack_forward_flops(model.head);
}

std::uint64_t model_backward_flops(const HeteroModel& model) {
    return 2ull * model_forward_flops(model);
}

std::uint64_t model_param_hash(const HeteroModel& model) {
    return param_hash(model.extractor) ^ (param_hash(model.head) * 0x9E3779B97F4A7C15ull);
}

}  // namespace hetfl
