#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "shardnet/matrix.hpp"

namespace shardnet {

enum class LossKind {
    SoftmaxCrossEntropy,
    SquaredReconstruction,
};

// Weights and biases of one dense layer. weights is in_dim x out_dim,
// biases has length out_dim.
struct LayerParams {
    Matrix weights;
    std::vector<float> biases;

    LayerParams() = default;
    LayerParams(size_t in_dim, size_t out_dim);

    size_t in_dim() const { return weights.rows; }
    size_t out_dim() const { return weights.cols; }

    // Glorot-style init: weights uniform in +-sqrt(6/(in+out)), biases zero.
    static LayerParams glorot(size_t in_dim, size_t out_dim, uint64_t seed);
};

struct LayerGrads {
    Matrix weights;
    std::vector<float> biases;
};

// Gradient tree congruent with a DeepModel: hidden layers first, head last.
struct Gradients {
    std::vector<LayerGrads> layers;
};

// Sigmoid hidden layers stacked under a softmax output head.
struct DeepModel {
    std::vector<LayerParams> hidden;
    LayerParams head;
    uint32_t label_count = 0;

    size_t input_dim() const {
        return hidden.empty() ? head.in_dim() : hidden.front().in_dim();
    }
    std::vector<size_t> hidden_dims() const;
    size_t parameter_count() const;

    // Checks the dimension chain and bias lengths; throws ShapeError.
    void validate() const;

    static DeepModel init(size_t input_dim, std::span<const size_t> hidden_dims,
                          uint32_t label_count, uint64_t seed);
};

// Class probabilities, one row per batch row. Rows sum to 1.
Matrix forward(const DeepModel& model, const Matrix& batch);

// Hidden activations kept around for the backward pass (and for feature
// inspection). probs is the softmax output.
struct ForwardTrace {
    std::vector<Matrix> hidden_acts;
    Matrix probs;
};

ForwardTrace forward_trace(const DeepModel& model, const Matrix& batch);

// Mean cross-entropy of the model's predictions against integer labels,
// accumulated in 64-bit.
double cross_entropy(const Matrix& probs, std::span<const int32_t> labels);

// Mean over all entries of (pred - target)^2, accumulated in 64-bit.
double reconstruction_loss(const Matrix& pred, const Matrix& target);

// Loss dispatchers. The supervised form expects one label per batch row
// and kind SoftmaxCrossEntropy; the reconstruction form expects a target
// shaped like the prediction and kind SquaredReconstruction.
double loss(const DeepModel& model, const Matrix& batch,
            std::span<const int32_t> labels, LossKind kind);
double loss(const Matrix& prediction, const Matrix& target, LossKind kind);

struct BackpropResult {
    Gradients grads;
    double loss = 0.0;
};

// Gradient of the mean cross-entropy over the batch, for every parameter.
BackpropResult backprop(const DeepModel& model, const Matrix& batch,
                        std::span<const int32_t> labels);

// p' = p - lr * g, elementwise. Throws NumericError on non-finite gradients.
void sgd_step(LayerParams& params, const LayerGrads& grads, float learning_rate);
void sgd_step(DeepModel& model, const Gradients& grads, float learning_rate);

// Argmax of forward() per row; ties break to the lowest index.
std::vector<int32_t> predict(const DeepModel& model, const Matrix& batch);
int32_t argmax_row(std::span<const float> row);

// True when every tensor in both models has identical shape.
bool shape_congruent(const DeepModel& a, const DeepModel& b);

// Flat views over all parameter tensors, hidden layers first, head last,
// each layer contributing weights then biases. Order is part of the
// averaging and serialization contracts.
std::vector<std::span<float>> param_spans(DeepModel& m);
std::vector<std::span<const float>> param_spans(const DeepModel& m);

bool bit_equal(const DeepModel& a, const DeepModel& b);

} // namespace shardnet
