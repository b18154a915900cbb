#pragma once

// Fully connected tanh network (tanh hidden layers, linear output) with
// exact backpropagation. Batched operations take one sample per column.
//
// Flat parameter ordering (version 1): layers from input to output; within a
// layer the weight matrix in column-major order followed by the bias vector.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "atl/core.hpp"
#include "atl/rng.hpp"

namespace atl::nn {

struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
};

struct MlpParams {
    std::vector<Layer> layers;

    int input_size() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
    int output_size() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }

    std::vector<int> sizes() const {
        std::vector<int> out;
        if (layers.empty()) return out;
        out.push_back(input_size());
        for (const auto& l : layers) out.push_back(static_cast<int>(l.weight.rows()));
        return out;
    }

    Eigen::Index parameter_count() const {
        Eigen::Index n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }

    bool shapes_chain() const {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (layers[i].bias.size() != layers[i].weight.rows()) return false;
            if (i > 0 && layers[i].weight.cols() != layers[i - 1].weight.rows()) return false;
        }
        return !layers.empty();
    }
};

/// Zero-initialized network with the given layer sizes (input, hidden..., output).
inline MlpParams make_mlp(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output sizes");
    MlpParams p;
    for (std::size_t i = 1; i < sizes.size(); ++i) {
        if (sizes[i] < 1 || sizes[i - 1] < 1) throw std::invalid_argument("make_mlp: layer sizes must be positive");
        p.layers.push_back({Matrix::Zero(sizes[i], sizes[i - 1]), Vector::Zero(sizes[i])});
    }
    return p;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases; the output
/// layer is additionally multiplied by `output_scale`.
inline MlpParams init_mlp(const std::vector<int>& sizes, Rng& rng, double output_scale = 1.0) {
    MlpParams p = make_mlp(sizes);
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        auto& l = p.layers[li];
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
        const double scale = li + 1 == p.layers.size() ? output_scale : 1.0;
        for (Eigen::Index j = 0; j < l.weight.cols(); ++j)
            for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = scale * uniform(rng, -bound, bound);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = scale * uniform(rng, -bound, bound);
    }
    return p;
}

inline Vector flatten(const MlpParams& p) {
    Vector out(p.parameter_count());
    Eigen::Index k = 0;
    for (const auto& l : p.layers) {
        out.segment(k, l.weight.size()) = l.weight.reshaped();
        k += l.weight.size();
        out.segment(k, l.bias.size()) = l.bias;
        k += l.bias.size();
    }
    return out;
}

/// Writes `flat` into a network of the same shape as `p`.
inline void unflatten(MlpParams& p, const Eigen::Ref<const Vector>& flat) {
    if (flat.size() != p.parameter_count()) throw std::invalid_argument("unflatten: size mismatch");
    Eigen::Index k = 0;
    for (auto& l : p.layers) {
        l.weight.reshaped() = flat.segment(k, l.weight.size());
        k += l.weight.size();
        l.bias = flat.segment(k, l.bias.size());
        k += l.bias.size();
    }
}

/// Activations cached by a batched forward pass. activations[0] is the input.
struct ForwardCache {
    std::vector<Matrix> activations;
    const Matrix& output() const { return activations.back(); }
};

inline ForwardCache forward_batch(const MlpParams& p, const Matrix& x) {
    if (x.rows() != p.input_size()) throw std::invalid_argument("mlp_forward: input dimension mismatch");
    ForwardCache cache;
    cache.activations.reserve(p.layers.size() + 1);
    cache.activations.push_back(x);
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        const auto& l = p.layers[li];
        Matrix z = l.weight * cache.activations.back();
        z.colwise() += l.bias;
        if (li + 1 < p.layers.size()) z = z.array().tanh().matrix();
        cache.activations.push_back(std::move(z));
    }
    return cache;
}

inline Vector mlp_forward(const MlpParams& p, const Vector& x) {
    if (x.size() != p.input_size()) throw std::invalid_argument("mlp_forward: input dimension mismatch");
    Vector h = x;
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        const auto& l = p.layers[li];
        Vector z = l.weight * h + l.bias;
        h = li + 1 < p.layers.size() ? Vector(z.array().tanh()) : z;
    }
    return h;
}

/// Given dL/d(output) for every column, returns the flat gradient of the sum
/// over columns, in flatten() ordering.
inline Vector backward_batch(const MlpParams& p, const ForwardCache& cache, const Matrix& grad_output) {
    Vector grad(p.parameter_count());
    // Offsets of each layer's block in the flat vector.
    std::vector<Eigen::Index> offset(p.layers.size());
    Eigen::Index k = 0;
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        offset[li] = k;
        k += p.layers[li].weight.size() + p.layers[li].bias.size();
    }
    Matrix delta = grad_output;
    for (std::size_t li = p.layers.size(); li-- > 0;) {
        const auto& l = p.layers[li];
        const Matrix& input = cache.activations[li];
        Matrix gw = delta * input.transpose();
        grad.segment(offset[li], gw.size()) = gw.reshaped();
        grad.segment(offset[li] + gw.size(), l.bias.size()) = delta.rowwise().sum();
        if (li > 0) {
            Matrix back = l.weight.transpose() * delta;
            // input is tanh(z) of the previous layer: d tanh = 1 - tanh^2
            delta = back.array() * (1.0 - input.array().square());
        }
    }
    return grad;
}

/// Adam optimizer state over a flat parameter vector.
struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    Vector m;
    Vector v;
    long step_count = 0;

    /// Returns the ascent step to add to the parameters for gradient `g`.
    Vector step(const Vector& g, double lr) {
        if (m.size() != g.size()) {
            m = Vector::Zero(g.size());
            v = Vector::Zero(g.size());
            step_count = 0;
        }
        ++step_count;
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        return lr * (m / c1).array() / ((v / c2).array().sqrt() + eps);
    }
};

}  // namespace atl::nn
