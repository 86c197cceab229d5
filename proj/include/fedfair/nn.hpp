// SPDX-License-Identifier: Apache-2.0
//
// Minimal feedforward classifier with manual backpropagation. Hidden layers
// use tanh, the output layer is softmax with cross-entropy loss. Parameters
// live in a flat index space of length l shared with the aggregation
// protocol; flatten/unflatten is a bijection.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedfair/common.hpp"

namespace fedfair::nn {

struct Dataset {
    std::size_t n_features = 0;
    std::size_t n_classes = 0;
    std::vector<double> features;  // row-major, size() == n_samples * n_features
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }

    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * n_features, n_features};
    }

    void validate() const {
        if (n_features == 0 || n_classes == 0)
            throw std::invalid_argument("Dataset: empty shape");
        if (features.size() != labels.size() * n_features)
            throw std::invalid_argument("Dataset: feature/label count mismatch");
        for (int y : labels)
            if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
                throw std::invalid_argument("Dataset: label out of range");
    }
};

struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> bias;     // out
};

/// Position of a flat index inside the layered parameter layout.
struct FlatIndexRef {
    std::size_t layer;
    bool is_bias;
    std::size_t row;
    std::size_t col;  // unused for bias entries
};

class ModelParams {
public:
    ModelParams() = default;

    explicit ModelParams(std::vector<Layer> layers) : layers_(std::move(layers)) {
        for (std::size_t i = 1; i < layers_.size(); ++i)
            if (layers_[i].in != layers_[i - 1].out)
                throw std::invalid_argument("ModelParams: inconsistent layer shapes");
    }

    /// Uniform init in [-s, s] with s = 1/sqrt(fan_in), deterministic by seed.
    static ModelParams init(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
        if (sizes.size() < 2) throw std::invalid_argument("ModelParams: need >= 2 layer sizes");
        Rng rng(seed);
        std::vector<Layer> layers;
        for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
            Layer layer;
            layer.in = sizes[i];
            layer.out = sizes[i + 1];
            const double s = 1.0 / std::sqrt(static_cast<double>(layer.in));
            std::uniform_real_distribution<double> dist(-s, s);
            layer.weights.resize(layer.out * layer.in);
            layer.bias.resize(layer.out);
            for (auto& w : layer.weights) w = dist(rng);
            for (auto& b : layer.bias) b = dist(rng);
            layers.push_back(std::move(layer));
        }
        return ModelParams(std::move(layers));
    }

    const std::vector<Layer>& layers() const { return layers_; }

    std::vector<std::size_t> layer_sizes() const {
        std::vector<std::size_t> s;
        if (layers_.empty()) return s;
        s.push_back(layers_.front().in);
        for (const auto& layer : layers_) s.push_back(layer.out);
        return s;
    }

    /// l: total number of weight and bias entries.
    std::size_t flat_size() const {
        std::size_t l = 0;
        for (const auto& layer : layers_) l += layer.weights.size() + layer.bias.size();
        return l;
    }

    GradientVector flatten() const {
        GradientVector v;
        v.reserve(flat_size());
        for (const auto& layer : layers_) {
            v.insert(v.end(), layer.weights.begin(), layer.weights.end());
            v.insert(v.end(), layer.bias.begin(), layer.bias.end());
        }
        return v;
    }

    /// Inverse of flatten() for a model of this shape.
    ModelParams unflatten(const GradientVector& v) const {
        if (v.size() != flat_size())
            throw std::invalid_argument("unflatten: length mismatch");
        ModelParams out = *this;
        std::size_t pos = 0;
        for (auto& layer : out.layers_) {
            std::copy_n(v.begin() + pos, layer.weights.size(), layer.weights.begin());
            pos += layer.weights.size();
            std::copy_n(v.begin() + pos, layer.bias.size(), layer.bias.begin());
            pos += layer.bias.size();
        }
        return out;
    }

    FlatIndexRef locate(std::size_t flat_index) const {
        std::size_t pos = flat_index;
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            const auto& layer = layers_[li];
            if (pos < layer.weights.size())
                return {li, false, pos / layer.in, pos % layer.in};
            pos -= layer.weights.size();
            if (pos < layer.bias.size()) return {li, true, pos, 0};
            pos -= layer.bias.size();
        }
        throw std::out_of_range("locate: flat index out of range");
    }

private:
    std::vector<Layer> layers_;
};

namespace detail {

inline void affine(const Layer& layer, std::span<const double> x, std::vector<double>& z) {
    z.assign(layer.out, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
        const double* w = layer.weights.data() + r * layer.in;
        double acc = layer.bias[r];
        for (std::size_t c = 0; c < layer.in; ++c) acc += w[c] * x[c];
        z[r] = acc;
    }
}

inline void softmax_inplace(std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - m);
        sum += v;
    }
    for (auto& v : z) v /= sum;
}

}  // namespace detail

/// Raw class scores (pre-softmax logits) for one sample.
inline std::vector<double> class_scores(const ModelParams& params, std::span<const double> x) {
    const auto& layers = params.layers();
    if (layers.empty()) throw std::invalid_argument("class_scores: empty model");
    if (x.size() != layers.front().in)
        throw std::invalid_argument("class_scores: feature dimension mismatch");
    std::vector<double> cur(x.begin(), x.end()), next;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        detail::affine(layers[li], cur, next);
        if (li + 1 < layers.size())
            for (auto& v : next) v = std::tanh(v);
        cur.swap(next);
    }
    return cur;
}

/// Mean cross-entropy gradient over the batch, flattened to length l.
inline GradientVector local_gradient(const ModelParams& params, const Dataset& data,
                                     std::span<const std::size_t> batch) {
    if (batch.empty()) throw std::invalid_argument("local_gradient: empty batch");
    const auto& layers = params.layers();
    if (layers.empty()) throw std::invalid_argument("local_gradient: empty model");
    if (data.n_features != layers.front().in || data.n_classes != layers.back().out)
        throw std::invalid_argument("local_gradient: dataset/model dimension mismatch");
    for (std::size_t idx : batch)
        if (idx >= data.size()) throw std::invalid_argument("local_gradient: batch index out of range");

    const std::size_t depth = layers.size();
    std::vector<std::vector<double>> grad_w(depth), grad_b(depth);
    for (std::size_t li = 0; li < depth; ++li) {
        grad_w[li].assign(layers[li].weights.size(), 0.0);
        grad_b[li].assign(layers[li].bias.size(), 0.0);
    }

    std::vector<std::vector<double>> acts(depth + 1);  // acts[0] = input
    std::vector<double> z, delta, delta_prev;
    for (std::size_t idx : batch) {
        const auto x = data.row(idx);
        acts[0].assign(x.begin(), x.end());
        for (std::size_t li = 0; li < depth; ++li) {
            detail::affine(layers[li], acts[li], z);
            if (li + 1 < depth)
                for (auto& v : z) v = std::tanh(v);
            else
                detail::softmax_inplace(z);
            acts[li + 1] = z;
        }

        // delta at output: p - onehot(y)
        delta = acts[depth];
        delta[static_cast<std::size_t>(data.labels[idx])] -= 1.0;

        for (std::size_t li = depth; li-- > 0;) {
            const Layer& layer = layers[li];
            const auto& a_in = acts[li];
            for (std::size_t r = 0; r < layer.out; ++r) {
                double* gw = grad_w[li].data() + r * layer.in;
                const double d = delta[r];
                for (std::size_t c = 0; c < layer.in; ++c) gw[c] += d * a_in[c];
                grad_b[li][r] += d;
            }
            if (li > 0) {
                delta_prev.assign(layer.in, 0.0);
                for (std::size_t r = 0; r < layer.out; ++r) {
                    const double* w = layer.weights.data() + r * layer.in;
                    const double d = delta[r];
                    for (std::size_t c = 0; c < layer.in; ++c) delta_prev[c] += w[c] * d;
                }
                // tanh'(z) = 1 - tanh(z)^2, and acts[li] already stores tanh(z)
                for (std::size_t c = 0; c < layer.in; ++c)
                    delta_prev[c] *= 1.0 - acts[li][c] * acts[li][c];
                delta.swap(delta_prev);
            }
        }
    }

    GradientVector flat;
    flat.reserve(params.flat_size());
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (std::size_t li = 0; li < depth; ++li) {
        for (double g : grad_w[li]) flat.push_back(g * inv_n);
        for (double g : grad_b[li]) flat.push_back(g * inv_n);
    }
    return flat;
}

/// Gradient-descent step: params <- params - learning_rate * update.
inline ModelParams apply_update(const ModelParams& params, const GradientVector& update,
                                double learning_rate) {
    if (update.size() != params.flat_size())
        throw std::invalid_argument("apply_update: length mismatch");
    if (learning_rate < 0.0) throw std::invalid_argument("apply_update: negative learning rate");
    GradientVector flat = params.flatten();
    for (std::size_t k = 0; k < flat.size(); ++k) flat[k] -= learning_rate * update[k];
    return params.unflatten(flat);
}

/// Fraction of test samples whose argmax score matches the label.
/// Ties break toward the lowest class index.
inline double evaluate_accuracy(const ModelParams& params, const Dataset& test) {
    if (test.size() == 0) throw std::invalid_argument("evaluate_accuracy: empty test set");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto scores = class_scores(params, test.row(i));
        std::size_t best = 0;
        for (std::size_t c = 1; c < scores.size(); ++c)
            if (scores[c] > scores[best]) best = c;
        if (best == static_cast<std::size_t>(test.labels[i])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

}  // namespace fedfair::nn
