// SPDX-License-Identifier: Apache-2.0
#include "hetfl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace hetfl {

namespace {

double activate(double z, ActivationKind kind) {
    return kind == ActivationKind::kReLU ? (z > 0.0 ? z : 0.0) : z;
}

double activate_grad(double z, ActivationKind kind) {
    return kind == ActivationKind::kReLU ? (z > 0.0 ? 1.0 : 0.0) : 1.0;
}

[[noreturn]] void dim_error(const std::string& what) {
    throw std::invalid_argument("dimension mismatch: " + what);
}

}  // namespace

void DenseStack::validate() const {
    if (layers.empty()) throw std::invalid_argument("dense stack has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const DenseLayer& layer = layers[i];
        if (layer.weights.data.size() != layer.weights.rows * layer.weights.cols)
            dim_error("weight buffer size at layer " + std::to_string(i));
        if (layer.bias.size() != layer.out_dim())
            dim_error("bias length at layer " + std::to_string(i));
        if (i + 1 < layers.size() && layer.out_dim() != layers[i + 1].in_dim())
            dim_error("layer " + std::to_string(i) + " output vs layer " +
                      std::to_string(i + 1) + " input");
    }
}

GradBundle GradBundle::zeros_like(const DenseStack& stack) {
    GradBundle bundle;
    bundle.weight_grads.reserve(stack.layers.size());
    bundle.bias_grads.reserve(stack.layers.size());
    for (const DenseLayer& layer : stack.layers) {
        bundle.weight_grads.emplace_back(layer.weights.rows, layer.weights.cols);
        bundle.bias_grads.emplace_back(layer.bias.size(), 0.0);
    }
    return bundle;
}

void GradBundle::add(const GradBundle& other) {
    if (weight_grads.size() != other.weight_grads.size())
        dim_error("grad bundle layer counts");
    for (std::size_t l = 0; l < weight_grads.size(); ++l) {
        auto& w = weight_grads[l].data;
        const auto& ow = other.weight_grads[l].data;
        if (w.size() != ow.size()) dim_error("grad bundle weight shapes");
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += ow[i];
        auto& b = bias_grads[l];
        const auto& ob = other.bias_grads[l];
        if (b.size() != ob.size()) dim_error("grad bundle bias shapes");
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += ob[i];
    }
}

void GradBundle::scale(double factor) {
    for (auto& w : weight_grads)
        for (double& v : w.data) v *= factor;
    for (auto& b : bias_grads)
        for (double& v : b) v *= factor;
}

ForwardTrace stack_forward(const DenseStack& stack, std::span<const double> x) {
    if (stack.layers.empty()) throw std::invalid_argument("forward through empty stack");
    if (x.size() != stack.input_dim())
        dim_error("input length " + std::to_string(x.size()) + " vs stack input dim " +
                  std::to_string(stack.input_dim()));

    ForwardTrace trace;
    trace.inputs.reserve(stack.layers.size());
    trace.preacts.reserve(stack.layers.size());

    std::vector<double> current(x.begin(), x.end());
    for (const DenseLayer& layer : stack.layers) {
        trace.inputs.push_back(current);
        std::vector<double> z = layer.bias;
        for (std::size_t i = 0; i < layer.in_dim(); ++i) {
            const double xi = current[i];
            if (xi == 0.0) continue;
            const double* wrow = &layer.weights.data[i * layer.out_dim()];
            for (std::size_t j = 0; j < layer.out_dim(); ++j) z[j] += xi * wrow[j];
        }
        trace.preacts.push_back(z);
        current.resize(z.size());
        for (std::size_t j = 0; j < z.size(); ++j) current[j] = activate(z[j], layer.activation);
    }
    trace.output = std::move(current);
    return trace;
}

BackwardResult stack_backward(const DenseStack& stack, const ForwardTrace& trace,
                              std::span<const double> output_grad) {
    if (trace.inputs.size() != stack.layers.size())
        dim_error("trace layer count vs stack");
    if (output_grad.size() != stack.output_dim())
        dim_error("output grad length vs stack output dim");

    BackwardResult result;
    result.grads = GradBundle::zeros_like(stack);
    std::vector<double> upstream(output_grad.begin(), output_grad.end());

    for (std::size_t l = stack.layers.size(); l-- > 0;) {
        const DenseLayer& layer = stack.layers[l];
        const std::vector<double>& input = trace.inputs[l];
        const std::vector<double>& preact = trace.preacts[l];
        if (input.size() != layer.in_dim() || preact.size() != layer.out_dim())
            dim_error("trace shapes at layer " + std::to_string(l));

        std::vector<double> dz(layer.out_dim());
        for (std::size_t j = 0; j < dz.size(); ++j)
            dz[j] = upstream[j] * activate_grad(preact[j], layer.activation);

        Tensor2& dw = result.grads.weight_grads[l];
        std::vector<double>& db = result.grads.bias_grads[l];
        for (std::size_t j = 0; j < dz.size(); ++j) db[j] = dz[j];

        std::vector<double> dinput(layer.in_dim(), 0.0);
        for (std::size_t i = 0; i < layer.in_dim(); ++i) {
            const double* wrow = &layer.weights.data[i * layer.out_dim()];
            double* dwrow = &dw.data[i * layer.out_dim()];
            double acc = 0.0;
            const double xi = input[i];
            for (std::size_t j = 0; j < layer.out_dim(); ++j) {
                dwrow[j] = xi * dz[j];
                acc += wrow[j] * dz[j];
            }
            dinput[i] = acc;
        }
        upstream = std::move(dinput);
    }
    result.input_grad = std::move(upstream);
    return result;
}

double cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw std::invalid_argument("cross_entropy label " + std::to_string(label) +
                                    " out of range for " + std::to_string(logits.size()) +
                                    " classes");
    double max_logit = logits[0];
    for (double v : logits) max_logit = std::max(max_logit, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - max_logit);
    const double loss = std::log(sum) + max_logit - logits[static_cast<std::size_t>(label)];
    return std::max(loss, 0.0);
}

std::vector<double> softmax(std::span<const double> logits) {
    double max_logit = logits[0];
    for (double v : logits) max_logit = std::max(max_logit, v);
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max_logit);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

std::vector<double> cross_entropy_grad(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw std::invalid_argument("cross_entropy_grad label out of range");
    std::vector<double> grad = softmax(logits);
    grad[static_cast<std::size_t>(label)] -= 1.0;
    return grad;
}

void sgd_step(DenseStack& stack, const GradBundle& grads, double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("sgd_step requires lr > 0");
    if (grads.weight_grads.size() != stack.layers.size())
        dim_error("grad bundle vs stack layer count");
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        DenseLayer& layer = stack.layers[l];
        const Tensor2& dw = grads.weight_grads[l];
        const std::vector<double>& db = grads.bias_grads[l];
        if (dw.rows != layer.weights.rows || dw.cols != layer.weights.cols ||
            db.size() != layer.bias.size())
            dim_error("grad shapes at layer " + std::to_string(l));
        for (std::size_t i = 0; i < dw.data.size(); ++i) {
            if (!std::isfinite(dw.data[i]))
                throw std::runtime_error("non-finite weight gradient at layer " +
                                         std::to_string(l) + ", entry " + std::to_string(i));
            layer.weights.data[i] -= lr * dw.data[i];
        }
        for (std::size_t j = 0; j < db.size(); ++j) {
            if (!std::isfinite(db[j]))
                throw std::runtime_error("non-finite bias gradient at layer " +
                                         std::to_string(l) + ", entry " + std::to_string(j));
            layer.bias[j] -= lr * db[j];
        }
    }
}

namespace {

double loss_at(const DenseStack& stack, std::span<const double> x, int label) {
    const ForwardTrace trace = stack_forward(stack, x);
    return cross_entropy(trace.output, label);
}

}  // namespace

GradBundle fd_gradients(const DenseStack& stack, std::span<const double> x, int label,
                        double epsilon) {
    if (!(epsilon > 0.0) || epsilon > 1e-2)
        throw std::invalid_argument("fd epsilon must lie in (0, 1e-2]");
    DenseStack probe = stack;
    GradBundle fd = GradBundle::zeros_like(stack);
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        auto& weights = probe.layers[l].weights.data;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            const double saved = weights[i];
            weights[i] = saved + epsilon;
            const double plus = loss_at(probe, x, label);
            weights[i] = saved - epsilon;
            const double minus = loss_at(probe, x, label);
            weights[i] = saved;
            fd.weight_grads[l].data[i] = (plus - minus) / (2.0 * epsilon);
        }
        auto& bias = probe.layers[l].bias;
        for (std::size_t j = 0; j < bias.size(); ++j) {
            const double saved = bias[j];
            bias[j] = saved + epsilon;
            const double plus = loss_at(probe, x, label);
            bias[j] = saved - epsilon;
            const double minus = loss_at(probe, x, label);
            bias[j] = saved;
            fd.bias_grads[l][j] = (plus - minus) / (2.0 * epsilon);
        }
    }
    return fd;
}

double grad_rel_error(const GradBundle& analytic, const GradBundle& fd) {
    double worst = 0.0;
    auto compare = [&worst](double a, double f) {
        const double denom = std::max({1.0, std::abs(a), std::abs(f)});
        worst = std::max(worst, std::abs(a - f) / denom);
    };
    for (std::size_t l = 0; l < analytic.weight_grads.size(); ++l) {
        for (std::size_t i = 0; i < analytic.weight_grads[l].data.size(); ++i)
            compare(analytic.weight_grads[l].data[i], fd.weight_grads[l].data[i]);
        for (std::size_t j = 0; j < analytic.bias_grads[l].size(); ++j)
            compare(analytic.bias_grads[l][j], fd.bias_grads[l][j]);
    }
    return worst;
}

double grad_check(const DenseStack& stack, std::span<const double> x, int label,
                  double fd_epsilon) {
    const ForwardTrace trace = stack_forward(stack, x);
    const std::vector<double> upstream = cross_entropy_grad(trace.output, label);
    const BackwardResult analytic = stack_backward(stack, trace, upstream);
    const GradBundle fd = fd_gradients(stack, x, label, fd_epsilon);
    return grad_rel_error(analytic.grads, fd);
}

void init_fan_uniform(DenseStack& stack, Rng& rng) {
    for (DenseLayer& layer : stack.layers) {
        const double bound =
            std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
        for (double& w : layer.weights.data) w = rng.uniform(-bound, bound);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
}

std::size_t stack_param_count(const DenseStack& stack) {
    std::size_t count = 0;
    for (const DenseLayer& layer : stack.layers)
        count += layer.weights.data.size() + layer.bias.size();
    return count;
}

std::uint64_t stack_forward_flops(const DenseStack& stack) {
    std::uint64_t flops = 0;
    for (const DenseLayer& layer : stack.layers)
        flops += 2ull * layer.in_dim() * layer.out_dim();
    return flops;
}

std::uint64_t param_hash(const DenseStack& stack) {
    std::uint64_t hash = 0xCBF29CE484222325ull;
    auto feed = [&hash](const double* values, std::size_t count) {
        const unsigned char* bytes = reinterpret_cast<const unsigned char*>(values);
        for (std::size_t i = 0; i < count * sizeof(double); ++i) {
            hash ^= bytes[i];
            hash *= 0x100000001B3ull;
        }
    };
    for (const DenseLayer& layer : stack.layers) {
        feed(layer.weights.data.data(), layer.weights.data.size());
        feed(layer.bias.data(), layer.bias.size());
    }
    return hash;
}

}  // namespace hetfl
