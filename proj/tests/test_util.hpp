// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetfl/config.hpp"
#include "hetfl/nn.hpp"
#include "hetfl/rng.hpp"

namespace hetfl::test {

inline DenseLayer make_layer(std::size_t in, std::size_t out, ActivationKind act) {
    DenseLayer layer;
    layer.weights = Tensor2(in, out);
    layer.bias.assign(out, 0.0);
    layer.activation = act;
    return layer;
}

/// Random stack of 1..max_layers layers with widths in [1, max_width];
/// hidden layers ReLU, output layer identity, small weights.
inline DenseStack random_stack(Rng& rng, std::size_t max_layers, std::size_t max_width) {
    const std::size_t num_layers = 1 + static_cast<std::size_t>(rng.uniform_int(max_layers));
    std::vector<std::size_t> widths(num_layers + 1);
    for (std::size_t& w : widths) w = 1 + static_cast<std::size_t>(rng.uniform_int(max_width));

    DenseStack stack;
    for (std::size_t l = 0; l < num_layers; ++l) {
        DenseLayer layer = make_layer(widths[l], widths[l + 1],
                                      l + 1 == num_layers ? ActivationKind::kIdentity
                                                          : ActivationKind::kReLU);
        for (double& w : layer.weights.data) w = rng.uniform(-0.8, 0.8);
        // Biases stay clear of the ReLU kink band: a unit whose inputs are all
        // clamped to zero sees exactly its bias, which no input resampling can
        // move off the kink.
        for (double& b : layer.bias)
            b = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.08, 0.35);
        stack.layers.push_back(std::move(layer));
    }
    return stack;
}

/// Draws inputs until every pre-activation sits at least `margin` away from
/// the ReLU kink, so finite differences stay on one linear piece.
inline std::vector<double> kink_safe_input(const DenseStack& stack, Rng& rng,
                                           double margin = 0.05, int max_attempts = 5000) {
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<double> x(stack.input_dim());
        for (double& v : x) v = rng.uniform(-1.5, 1.5);
        const ForwardTrace trace = stack_forward(stack, x);
        bool safe = true;
        for (const auto& preact : trace.preacts)
            for (double z : preact)
                if (std::abs(z) <= margin) safe = false;
        if (safe) return x;
    }
    throw std::runtime_error("no kink-safe input found");
}

struct GradInstance {
    DenseStack stack;
    std::vector<double> input;
};

/// (stack, input) pairs filtered jointly: stacks for which no drawn input
/// clears the kink margin are themselves redrawn.
inline GradInstance random_grad_instance(Rng& rng, std::size_t max_layers,
                                         std::size_t max_width, double margin = 0.05) {
    for (;;) {
        DenseStack stack = random_stack(rng, max_layers, max_width);
        try {
            std::vector<double> x = kink_safe_input(stack, rng, margin, 300);
            return {std::move(stack), std::move(x)};
        } catch (const std::runtime_error&) {
            // this stack pins some unit to the kink; draw another
        }
    }
}

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("hetfl_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

/// The width-scaled five-model family used by the end-to-end tests:
/// shared rep width 50, head interior widths {200, 200, 100, 80, 50}.
inline std::vector<ModelSpec> scaled_model_family(std::size_t input_dim = 20,
                                                  std::size_t num_classes = 10) {
    const std::vector<std::size_t> head_interior = {200, 200, 100, 80, 50};
    std::vector<ModelSpec> specs;
    for (std::size_t m = 0; m < head_interior.size(); ++m) {
        ModelSpec spec;
        spec.extractor_widths = {input_dim, m == 1 ? std::size_t{16} : std::size_t{32}, 50};
        spec.head_widths = {50, head_interior[m], num_classes};
        spec.num_classes = num_classes;
        specs.push_back(std::move(spec));
    }
    return specs;
}

/// The desk benchmark setup shared by the end-to-end tests.
inline ExperimentConfig benchmark_config() {
    ExperimentConfig config;
    config.rounds = 50;
    config.num_clients = 10;
    config.participation = 1.0;
    config.mode = TrainMode::kIterative;
    config.round = {.local_epochs = 1, .batch_size = 32, .lr_model = 0.01,
                    .lr_adapter = 0.01, .mu = 0.9};
    config.models = scaled_model_family();
    config.adapter = shape_matrix_decomposition(50, 10, 8);
    config.data.source = DataConfig::Source::kSynthetic;
    config.data.synthetic = {.num_classes = 10, .dim = 20, .per_class = 200, .separation = 8.0};
    config.data.classes_per_client = 2;
    config.seed = 20240913;
    return config;
}

}  // namespace hetfl::test
