// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hetfl/rng.hpp"

namespace hetfl {

enum class ActivationKind { kReLU, kIdentity };

/// Row-major dense matrix of doubles. All simulator parameters live in these.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// One fully-connected layer: y = act(x W + b), W is in_dim x out_dim.
struct DenseLayer {
    Tensor2 weights;
    std::vector<double> bias;
    ActivationKind activation = ActivationKind::kIdentity;

    std::size_t in_dim() const { return weights.rows; }
    std::size_t out_dim() const { return weights.cols; }
};

/// An ordered pipeline of dense layers. Consecutive layers must be
/// dimension-compatible (checked by validate()).
struct DenseStack {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }
    void validate() const;  // throws std::invalid_argument on shape breaks
};

/// Per-layer gradients, shape-congruent with the stack they were taken from.
struct GradBundle {
    std::vector<Tensor2> weight_grads;
    std::vector<std::vector<double>> bias_grads;

    static GradBundle zeros_like(const DenseStack& stack);
    void add(const GradBundle& other);
    void scale(double factor);
};

/// Everything stack_backward needs from the forward pass: the input and the
/// pre-activation of each layer, plus the final output.
struct ForwardTrace {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> preacts;
    std::vector<double> output;
};

struct BackwardResult {
    GradBundle grads;
    std::vector<double> input_grad;
};

ForwardTrace stack_forward(const DenseStack& stack, std::span<const double> x);

/// Exact gradients of a scalar loss w.r.t. every weight, bias and the stack
/// input, given d(loss)/d(output). The trace must come from a matching
/// stack_forward call.
BackwardResult stack_backward(const DenseStack& stack, const ForwardTrace& trace,
                              std::span<const double> output_grad);

/// loss = -log softmax(logits)[label]; always >= 0.
double cross_entropy(std::span<const double> logits, int label);

std::vector<double> softmax(std::span<const double> logits);

/// d(cross_entropy)/d(logits) = softmax(logits) - onehot(label).
std::vector<double> cross_entropy_grad(std::span<const double> logits, int label);

/// In-place p <- p - lr * g. Throws on non-finite gradient entries.
void sgd_step(DenseStack& stack, const GradBundle& grads, double lr);

/// Central finite differences of cross_entropy(stack_forward(x), label) with
/// respect to every parameter. Test oracle; independent of stack_backward.
GradBundle fd_gradients(const DenseStack& stack, std::span<const double> x, int label,
                        double epsilon);

/// Max over parameters of |analytic - fd| / max(1, |analytic|, |fd|).
double grad_rel_error(const GradBundle& analytic, const GradBundle& fd);

/// Runs both gradient routes on one (x, label) instance and reports the
/// worst relative disagreement. fd_epsilon must lie in (0, 1e-2].
double grad_check(const DenseStack& stack, std::span<const double> x, int label,
                  double fd_epsilon);

/// Fills weights uniformly in +-sqrt(6 / (in + out)), biases with zero.
void init_fan_uniform(DenseStack& stack, Rng& rng);

std::size_t stack_param_count(const DenseStack& stack);

/// Forward cost convention: 2 * in_dim * out_dim per layer. Backward passes
/// are accounted as exactly twice a forward.
std::uint64_t stack_forward_flops(const DenseStack& stack);

/// FNV-1a over the raw bytes of all parameters; bit-exact change detector.
std::uint64_t param_hash(const DenseStack& stack);

}  // namespace hetfl
