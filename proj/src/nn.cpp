#include "shardnet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "shardnet/errors.hpp"
#include "shardnet/rng.hpp"

namespace shardnet {

LayerParams::LayerParams(size_t in_dim, size_t out_dim)
    : weights(in_dim, out_dim), biases(out_dim, 0.0f) {}

LayerParams LayerParams::glorot(size_t in_dim, size_t out_dim, uint64_t seed) {
    LayerParams p(in_dim, out_dim);
    Rng rng(seed);
    const float limit =
        std::sqrt(6.0f / static_cast<float>(in_dim + out_dim));
    for (float& w : p.weights.values) {
        w = rng.uniform_range(-limit, limit);
    }
    return p;
}

std::vector<size_t> DeepModel::hidden_dims() const {
    std::vector<size_t> dims;
    dims.reserve(hidden.size());
    for (const auto& h : hidden) dims.push_back(h.out_dim());
    return dims;
}

size_t DeepModel::parameter_count() const {
    size_t total = 0;
    for (const auto& h : hidden) {
        total += h.in_dim() * h.out_dim() + h.out_dim();
    }
    total += head.in_dim() * head.out_dim() + head.out_dim();
    return total;
}

void DeepModel::validate() const {
    if (hidden.empty()) {
        throw ShapeError("model must have at least one hidden layer");
    }
    for (size_t i = 0; i < hidden.size(); ++i) {
        if (hidden[i].biases.size() != hidden[i].out_dim()) {
            throw ShapeError("hidden layer " + std::to_string(i) +
                             ": bias length does not match out_dim");
        }
        if (i + 1 < hidden.size() &&
            hidden[i].out_dim() != hidden[i + 1].in_dim()) {
            throw ShapeError("hidden layer " + std::to_string(i + 1) +
                             ": in_dim does not chain from layer " +
                             std::to_string(i));
        }
    }
    if (head.in_dim() != hidden.back().out_dim()) {
        throw ShapeError("head: in_dim does not chain from last hidden layer");
    }
    if (head.biases.size() != head.out_dim()) {
        throw ShapeError("head: bias length does not match out_dim");
    }
    if (head.out_dim() != label_count) {
        throw ShapeError("head: out_dim does not equal label_count");
    }
}

DeepModel DeepModel::init(size_t input_dim, std::span<const size_t> hidden_dims,
                          uint32_t label_count, uint64_t seed) {
    if (hidden_dims.empty()) {
        throw ShapeError("model must have at least one hidden layer");
    }
    if (label_count == 0) {
        throw DomainError("label_count must be positive");
    }
    DeepModel m;
    size_t in = input_dim;
    for (size_t i = 0; i < hidden_dims.size(); ++i) {
        m.hidden.push_back(
            LayerParams::glorot(in, hidden_dims[i], mix_seed(seed, i)));
        in = hidden_dims[i];
    }
    m.head = LayerParams::glorot(in, label_count,
                                 mix_seed(seed, 0x4845414444ULL + hidden_dims.size()));
    m.label_count = label_count;
    return m;
}

namespace {

void check_layer_input(const Matrix& x, const LayerParams& layer,
                       const std::string& layer_name) {
    if (x.cols != layer.in_dim()) {
        throw ShapeError(layer_name + ": input has " + std::to_string(x.cols) +
                         " cols, expected " + std::to_string(layer.in_dim()));
    }
}

Matrix affine(const Matrix& x, const LayerParams& layer) {
    Matrix z = matmul(x, layer.weights);
    add_row_vector(z, layer.biases);
    return z;
}

} // namespace

ForwardTrace forward_trace(const DeepModel& model, const Matrix& batch) {
    ForwardTrace trace;
    trace.hidden_acts.reserve(model.hidden.size());
    const Matrix* cur = &batch;
    for (size_t i = 0; i < model.hidden.size(); ++i) {
        check_layer_input(*cur, model.hidden[i],
                          "hidden layer " + std::to_string(i));
        Matrix a = affine(*cur, model.hidden[i]);
        sigmoid_inplace(a);
        trace.hidden_acts.push_back(std::move(a));
        cur = &trace.hidden_acts.back();
    }
    check_layer_input(*cur, model.head, "head");
    trace.probs = affine(*cur, model.head);
    softmax_rows_inplace(trace.probs);
    return trace;
}

Matrix forward(const DeepModel& model, const Matrix& batch) {
    return forward_trace(model, batch).probs;
}

double cross_entropy(const Matrix& probs, std::span<const int32_t> labels) {
    if (labels.size() != probs.rows) {
        throw ShapeError("cross_entropy: one label per row required");
    }
    double acc = 0.0;
    for (size_t i = 0; i < probs.rows; ++i) {
        const int32_t y = labels[i];
        if (y < 0 || static_cast<size_t>(y) >= probs.cols) {
            throw DomainError("label " + std::to_string(y) +
                              " outside 0.." + std::to_string(probs.cols - 1));
        }
        acc -= std::log(std::max(
            static_cast<double>(probs(i, static_cast<size_t>(y))), 1e-12));
    }
    return probs.rows == 0 ? 0.0 : acc / static_cast<double>(probs.rows);
}

double reconstruction_loss(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) {
        throw ShapeError("reconstruction_loss: shapes differ");
    }
    double acc = 0.0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        const double d = static_cast<double>(pred.values[i]) -
                         static_cast<double>(target.values[i]);
        acc += d * d;
    }
    return pred.values.empty() ? 0.0
                               : acc / static_cast<double>(pred.values.size());
}

double loss(const DeepModel& model, const Matrix& batch,
            std::span<const int32_t> labels, LossKind kind) {
    if (kind != LossKind::SoftmaxCrossEntropy) {
        throw DomainError("label targets require SoftmaxCrossEntropy");
    }
    return cross_entropy(forward(model, batch), labels);
}

double loss(const Matrix& prediction, const Matrix& target, LossKind kind) {
    if (kind != LossKind::SquaredReconstruction) {
        throw DomainError("matrix targets require SquaredReconstruction");
    }
    return reconstruction_loss(prediction, target);
}

BackpropResult backprop(const DeepModel& model, const Matrix& batch,
                        std::span<const int32_t> labels) {
    if (batch.rows == 0) {
        throw ShapeError("backprop: empty batch");
    }
    ForwardTrace trace = forward_trace(model, batch);
    const size_t b = batch.rows;
    const float inv_b = 1.0f / static_cast<float>(b);

    BackpropResult out;
    out.loss = cross_entropy(trace.probs, labels);
    out.grads.layers.resize(model.hidden.size() + 1);

    // d(mean CE)/d(logits) = (p - onehot(y)) / B
    Matrix delta = trace.probs;
    for (size_t i = 0; i < b; ++i) {
        delta(i, static_cast<size_t>(labels[i])) -= 1.0f;
    }
    for (float& v : delta.values) v *= inv_b;

    const Matrix& head_in =
        model.hidden.empty() ? batch : trace.hidden_acts.back();
    LayerGrads& head_g = out.grads.layers.back();
    head_g.weights = matmul_tn(head_in, delta);
    head_g.biases = column_sums(delta);

    Matrix grad_act = matmul_nt(delta, model.head.weights);
    for (size_t layer = model.hidden.size(); layer-- > 0;) {
        const Matrix& act = trace.hidden_acts[layer];
        // sigmoid' = a (1 - a)
        Matrix d = std::move(grad_act);
        for (size_t i = 0; i < d.values.size(); ++i) {
            const float a = act.values[i];
            d.values[i] *= a * (1.0f - a);
        }
        const Matrix& layer_in =
            layer == 0 ? batch : trace.hidden_acts[layer - 1];
        LayerGrads& g = out.grads.layers[layer];
        g.weights = matmul_tn(layer_in, d);
        g.biases = column_sums(d);
        if (layer > 0) {
            grad_act = matmul_nt(d, model.hidden[layer].weights);
        }
    }
    return out;
}

void sgd_step(LayerParams& params, const LayerGrads& grads, float learning_rate) {
    if (!params.weights.same_shape(grads.weights) ||
        params.biases.size() != grads.biases.size()) {
        throw ShapeError("sgd_step: gradient shape does not match parameters");
    }
    if (!grads.weights.all_finite() || !all_finite(grads.biases)) {
        throw NumericError("sgd_step: non-finite gradient");
    }
    for (size_t i = 0; i < params.weights.values.size(); ++i) {
        params.weights.values[i] -= learning_rate * grads.weights.values[i];
    }
    for (size_t i = 0; i < params.biases.size(); ++i) {
        params.biases[i] -= learning_rate * grads.biases[i];
    }
}

void sgd_step(DeepModel& model, const Gradients& grads, float learning_rate) {
    if (grads.layers.size() != model.hidden.size() + 1) {
        throw ShapeError("sgd_step: gradient layer count does not match model");
    }
    for (size_t i = 0; i < model.hidden.size(); ++i) {
        sgd_step(model.hidden[i], grads.layers[i], learning_rate);
    }
    sgd_step(model.head, grads.layers.back(), learning_rate);
}

int32_t argmax_row(std::span<const float> row) {
    size_t best = 0;
    for (size_t j = 1; j < row.size(); ++j) {
        if (row[j] > row[best]) best = j;
    }
    return static_cast<int32_t>(best);
}

std::vector<int32_t> predict(const DeepModel& model, const Matrix& batch) {
    const Matrix probs = forward(model, batch);
    std::vector<int32_t> labels(probs.rows);
    for (size_t i = 0; i < probs.rows; ++i) {
        labels[i] = argmax_row(probs.row(i));
    }
    return labels;
}

bool shape_congruent(const DeepModel& a, const DeepModel& b) {
    if (a.hidden.size() != b.hidden.size() || a.label_count != b.label_count) {
        return false;
    }
    for (size_t i = 0; i < a.hidden.size(); ++i) {
        if (!a.hidden[i].weights.same_shape(b.hidden[i].weights) ||
            a.hidden[i].biases.size() != b.hidden[i].biases.size()) {
            return false;
        }
    }
    return a.head.weights.same_shape(b.head.weights) &&
           a.head.biases.size() == b.head.biases.size();
}

std::vector<std::span<float>> param_spans(DeepModel& m) {
    std::vector<std::span<float>> spans;
    spans.reserve(2 * (m.hidden.size() + 1));
    for (auto& h : m.hidden) {
        spans.emplace_back(h.weights.values);
        spans.emplace_back(h.biases);
    }
    spans.emplace_back(m.head.weights.values);
    spans.emplace_back(m.head.biases);
    return spans;
}

std::vector<std::span<const float>> param_spans(const DeepModel& m) {
    std::vector<std::span<const float>> spans;
    spans.reserve(2 * (m.hidden.size() + 1));
    for (const auto& h : m.hidden) {
        spans.emplace_back(h.weights.values);
        spans.emplace_back(h.biases);
    }
    spans.emplace_back(m.head.weights.values);
    spans.emplace_back(m.head.biases);
    return spans;
}

bool bit_equal(const DeepModel& a, const DeepModel& b) {
    if (!shape_congruent(a, b)) return false;
    auto sa = param_spans(a);
    auto sb = param_spans(b);
    for (size_t t = 0; t < sa.size(); ++t) {
        if (std::memcmp(sa[t].data(), sb[t].data(),
                        sa[t].size() * sizeof(float)) != 0) {
            return false;
        }
    }
    return true;
}

} // namespace shardnet
