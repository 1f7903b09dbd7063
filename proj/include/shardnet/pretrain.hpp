#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "shardnet/matrix.hpp"
#include "shardnet/nn.hpp"
#include "shardnet/rng.hpp"

namespace shardnet {

// Denoising autoencoder layer with tied weights: the decoder uses the
// transpose of the encoder weight matrix plus its own bias vector.
struct AutoencoderLayer {
    LayerParams encoder;
    std::vector<float> decoder_bias;

    size_t d_in() const { return encoder.in_dim(); }
    size_t d_hidden() const { return encoder.out_dim(); }

    static AutoencoderLayer init(size_t d_in, size_t d_hidden, uint64_t seed);
};

struct PretrainConfig {
    float corruption_prob = 0.3f;
    uint32_t epochs = 15;
    float learning_rate = 0.1f;
    uint32_t batch_size = 100;
    uint64_t seed = 0;

    void validate() const;
};

// h = sigmoid(x W + b), one row per input row.
Matrix encode(const AutoencoderLayer& layer, const Matrix& x);

// r = sigmoid(h W^T + b_dec), one row per code row.
Matrix decode(const AutoencoderLayer& layer, const Matrix& h);

// Masking noise: each entry is zeroed independently with probability prob.
// The rng overload consumes exactly rows*cols uniform draws in row-major
// order, which makes in-training corruption reproducible.
Matrix corrupt(const Matrix& x, float prob, Rng& rng);
Matrix corrupt(const Matrix& x, float prob, uint64_t seed);

// Gradients of the tied layer: d/dW collects both encoder and decoder
// contributions.
struct AeGrads {
    Matrix weights;
    std::vector<float> encoder_bias;
    std::vector<float> decoder_bias;
};

struct AeBackpropResult {
    AeGrads grads;
    double loss = 0.0; // mean squared reconstruction error vs clean input
};

AeBackpropResult ae_backprop(const AutoencoderLayer& layer, const Matrix& clean,
                             const Matrix& corrupted);

void ae_sgd_step(AutoencoderLayer& layer, const AeGrads& grads,
                 float learning_rate);

// Seed-derivation tags shared by the sequential trainers and the
// distributed engine; with these, a one-worker distributed run replays
// exactly the sequential batch schedule.
inline constexpr uint32_t kStagePretrain = 1;
inline constexpr uint32_t kStageFineTune = 2;

// Seed of the batch/corruption stream for (round, shard) of a stage.
uint64_t schedule_seed(uint64_t base_seed, uint32_t stage, uint32_t layer,
                       uint32_t round, uint32_t shard);

// Seed used to initialize the parameters a stage trains from.
uint64_t init_seed(uint64_t base_seed, uint32_t stage, uint32_t layer);

// Deterministic batch index stream: each pass is a fresh shuffle of
// 0..n-1 cut into consecutive chunks of batch_size; a short tail chunk
// is kept. Consumes rng only when reshuffling.
class BatchStream {
public:
    BatchStream(size_t n, uint32_t batch_size, Rng& rng);
    std::span<const uint32_t> next();

private:
    uint32_t batch_size_;
    Rng& rng_;
    std::vector<uint32_t> perm_;
    size_t pos_;
};

// Runs `steps` denoising SGD steps on `layer` against `data`, drawing
// batches and corruption masks from `rng`. Returns the mean in-training
// reconstruction loss over the executed steps (0 when steps == 0).
double run_denoising_steps(AutoencoderLayer& layer, const Matrix& data,
                           uint32_t steps, uint32_t batch_size,
                           float corruption_prob, float learning_rate,
                           Rng& rng);

// Runs `steps` supervised SGD steps on `model`; same scheduling contract.
double run_supervised_steps(DeepModel& model, const Matrix& features,
                            std::span<const int32_t> labels, uint32_t steps,
                            uint32_t batch_size, float learning_rate, Rng& rng);

inline uint32_t steps_per_pass(size_t n, uint32_t batch_size) {
    return static_cast<uint32_t>((n + batch_size - 1) / batch_size);
}

struct PretrainResult {
    AutoencoderLayer layer;
    // Clean-data reconstruction loss before training, then after each epoch.
    std::vector<double> epoch_losses;
};

// Trains one denoising layer for cfg.epochs full passes over `data`.
PretrainResult pretrain_layer(const Matrix& data, size_t d_hidden,
                              const PretrainConfig& cfg,
                              uint32_t layer_index = 0);

// Greedy bottom-up pretraining: layer i trains on the encodings of the
// data through layers 0..i-1.
std::vector<PretrainResult> stack_pretrain(const Matrix& unlabeled,
                                           std::span<const size_t> layer_dims,
                                           const PretrainConfig& cfg);

std::vector<AutoencoderLayer> extract_layers(std::vector<PretrainResult> results);

struct FineTuneConfig {
    uint32_t epochs = 30;
    float learning_rate = 0.1f;
    uint32_t batch_size = 100;
    uint64_t seed = 0;
    // Fraction of the labeled data held out to pick the best snapshot;
    // 0 disables early stopping and returns the final epoch.
    float val_fraction = 0.1f;
    uint32_t patience = 5;

    void validate() const;
};

struct FineTuneResult {
    DeepModel model;
    std::vector<double> epoch_val_errors; // empty when val_fraction == 0
    uint32_t best_epoch = 0;
};

// Builds a model whose hidden layers start from the pretrained encoders,
// adds a fresh softmax head, and trains the whole stack on labeled data.
// With epochs == 0 the encoders are returned untouched under an
// initialized head.
FineTuneResult fine_tune(const std::vector<AutoencoderLayer>& pretrained,
                         const Matrix& features, std::span<const int32_t> labels,
                         uint32_t label_count, const FineTuneConfig& cfg);

// Averaging support, mirroring the DeepModel spans.
std::vector<std::span<float>> param_spans(AutoencoderLayer& l);
std::vector<std::span<const float>> param_spans(const AutoencoderLayer& l);
bool bit_equal(const AutoencoderLayer& a, const AutoencoderLayer& b);

} // namespace shardnet
