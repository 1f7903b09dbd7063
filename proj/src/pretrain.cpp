#include "shardnet/pretrain.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "shardnet/early_stop.hpp"
#include "shardnet/errors.hpp"

namespace shardnet {

AutoencoderLayer AutoencoderLayer::init(size_t d_in, size_t d_hidden,
                                        uint64_t seed) {
    AutoencoderLayer layer;
    layer.encoder = LayerParams::glorot(d_in, d_hidden, seed);
    layer.decoder_bias.assign(d_in, 0.0f);
    return layer;
}

void PretrainConfig::validate() const {
    if (corruption_prob < 0.0f || corruption_prob >= 1.0f) {
        throw ConfigError("corruption_prob must be in [0, 1)");
    }
    if (learning_rate <= 0.0f) {
        throw ConfigError("learning_rate must be positive");
    }
    if (batch_size == 0) {
        throw ConfigError("batch_size must be positive");
    }
}

void FineTuneConfig::validate() const {
    if (learning_rate <= 0.0f) {
        throw ConfigError("learning_rate must be positive");
    }
    if (batch_size == 0) {
        throw ConfigError("batch_size must be positive");
    }
    if (val_fraction < 0.0f || val_fraction >= 1.0f) {
        throw ConfigError("val_fraction must be in [0, 1)");
    }
}

Matrix encode(const AutoencoderLayer& layer, const Matrix& x) {
    if (x.cols != layer.d_in()) {
        throw ShapeError("encode: input has " + std::to_string(x.cols) +
                         " cols, expected " + std::to_string(layer.d_in()));
    }
    Matrix h = matmul(x, layer.encoder.weights);
    add_row_vector(h, layer.encoder.biases);
    sigmoid_inplace(h);
    return h;
}

Matrix decode(const AutoencoderLayer& layer, const Matrix& h) {
    if (h.cols != layer.d_hidden()) {
        throw ShapeError("decode: input has " + std::to_string(h.cols) +
                         " cols, expected " + std::to_string(layer.d_hidden()));
    }
    Matrix r = matmul_nt(h, layer.encoder.weights);
    add_row_vector(r, layer.decoder_bias);
    sigmoid_inplace(r);
    return r;
}

Matrix corrupt(const Matrix& x, float prob, Rng& rng) {
    if (prob < 0.0f || prob >= 1.0f) {
        throw DomainError("corruption probability must be in [0, 1)");
    }
    Matrix out = x;
    if (prob == 0.0f) return out;
    for (float& v : out.values) {
        if (rng.uniform_float() < prob) v = 0.0f;
    }
    return out;
}

Matrix corrupt(const Matrix& x, float prob, uint64_t seed) {
    Rng rng(seed);
    return corrupt(x, prob, rng);
}

AeBackpropResult ae_backprop(const AutoencoderLayer& layer, const Matrix& clean,
                             const Matrix& corrupted) {
    if (!clean.same_shape(corrupted)) {
        throw ShapeError("ae_backprop: clean and corrupted shapes differ");
    }
    const Matrix h = encode(layer, corrupted);
    const Matrix r = decode(layer, h);

    AeBackpropResult out;
    out.loss = reconstruction_loss(r, clean);

    // d(mean sq err)/dr = 2 (r - x) / (B * d_in), then through the sigmoids.
    const float scale =
        2.0f / static_cast<float>(clean.rows * clean.cols);
    Matrix delta_rec = r;
    for (size_t i = 0; i < delta_rec.values.size(); ++i) {
        const float ri = r.values[i];
        delta_rec.values[i] =
            scale * (ri - clean.values[i]) * ri * (1.0f - ri);
    }

    Matrix grad_h = matmul(delta_rec, layer.encoder.weights);
    Matrix delta_h = std::move(grad_h);
    for (size_t i = 0; i < delta_h.values.size(); ++i) {
        const float hi = h.values[i];
        delta_h.values[i] *= hi * (1.0f - hi);
    }

    // Tied weights: W collects the encoder term X~^T d_h plus the decoder
    // term d_rec^T H.
    out.grads.weights = matmul_tn(corrupted, delta_h);
    const Matrix dec_term = matmul_tn(delta_rec, h);
    for (size_t i = 0; i < out.grads.weights.values.size(); ++i) {
        out.grads.weights.values[i] += dec_term.values[i];
    }
    out.grads.encoder_bias = column_sums(delta_h);
    out.grads.decoder_bias = column_sums(delta_rec);
    return out;
}

void ae_sgd_step(AutoencoderLayer& layer, const AeGrads& grads,
                 float learning_rate) {
    if (!layer.encoder.weights.same_shape(grads.weights) ||
        layer.encoder.biases.size() != grads.encoder_bias.size() ||
        layer.decoder_bias.size() != grads.decoder_bias.size()) {
        throw ShapeError("ae_sgd_step: gradient shape does not match layer");
    }
    if (!grads.weights.all_finite() || !all_finite(grads.encoder_bias) ||
        !all_finite(grads.decoder_bias)) {
        throw NumericError("ae_sgd_step: non-finite gradient");
    }
    for (size_t i = 0; i < layer.encoder.weights.values.size(); ++i) {
        layer.encoder.weights.values[i] -= learning_rate * grads.weights.values[i];
    }
    for (size_t i = 0; i < layer.encoder.biases.size(); ++i) {
        layer.encoder.biases[i] -= learning_rate * grads.encoder_bias[i];
    }
    for (size_t i = 0; i < layer.decoder_bias.size(); ++i) {
        layer.decoder_bias[i] -= learning_rate * grads.decoder_bias[i];
    }
}

uint64_t schedule_seed(uint64_t base_seed, uint32_t stage, uint32_t layer,
                       uint32_t round, uint32_t shard) {
    uint64_t s = mix_seed(base_seed, stage);
    s = mix_seed(s, layer);
    s = mix_seed(s, round);
    return mix_seed(s, shard);
}

uint64_t init_seed(uint64_t base_seed, uint32_t stage, uint32_t layer) {
    return mix_seed(mix_seed(mix_seed(base_seed, 0x494e4954ULL), stage), layer);
}

BatchStream::BatchStream(size_t n, uint32_t batch_size, Rng& rng)
    : batch_size_(batch_size), rng_(rng), perm_(n), pos_(n) {
    if (n == 0) {
        throw DomainError("batch stream over empty data");
    }
    for (size_t i = 0; i < n; ++i) perm_[i] = static_cast<uint32_t>(i);
}

std::span<const uint32_t> BatchStream::next() {
    if (pos_ >= perm_.size()) {
        rng_.shuffle(perm_);
        pos_ = 0;
    }
    const size_t take = std::min<size_t>(batch_size_, perm_.size() - pos_);
    std::span<const uint32_t> out(perm_.data() + pos_, take);
    pos_ += take;
    return out;
}

double run_denoising_steps(AutoencoderLayer& layer, const Matrix& data,
                           uint32_t steps, uint32_t batch_size,
                           float corruption_prob, float learning_rate,
                           Rng& rng) {
    if (steps == 0) return 0.0;
    BatchStream stream(data.rows, batch_size, rng);
    double loss_acc = 0.0;
    for (uint32_t it = 0; it < steps; ++it) {
        const auto idx = stream.next();
        const Matrix clean = gather_rows(data, idx);
        const Matrix noisy = corrupt(clean, corruption_prob, rng);
        AeBackpropResult res = ae_backprop(layer, clean, noisy);
        if (!std::isfinite(res.loss)) {
            throw NumericError("denoising training diverged at step " +
                               std::to_string(it));
        }
        ae_sgd_step(layer, res.grads, learning_rate);
        loss_acc += res.loss;
    }
    return loss_acc / static_cast<double>(steps);
}

double run_supervised_steps(DeepModel& model, const Matrix& features,
                            std::span<const int32_t> labels, uint32_t steps,
                            uint32_t batch_size, float learning_rate, Rng& rng) {
    if (steps == 0) return 0.0;
    BatchStream stream(features.rows, batch_size, rng);
    double loss_acc = 0.0;
    for (uint32_t it = 0; it < steps; ++it) {
        const auto idx = stream.next();
        const Matrix batch = gather_rows(features, idx);
        std::vector<int32_t> y(idx.size());
        for (size_t i = 0; i < idx.size(); ++i) y[i] = labels[idx[i]];
        BackpropResult res = backprop(model, batch, y);
        if (!std::isfinite(res.loss)) {
            throw NumericError("supervised training diverged at step " +
                               std::to_string(it));
        }
        sgd_step(model, res.grads, learning_rate);
        loss_acc += res.loss;
    }
    return loss_acc / static_cast<double>(steps);
}

PretrainResult pretrain_layer(const Matrix& data, size_t d_hidden,
                              const PretrainConfig& cfg, uint32_t layer_index) {
    cfg.validate();
    if (data.rows == 0) {
        throw DomainError("pretrain_layer: empty data");
    }
    PretrainResult result;
    result.layer = AutoencoderLayer::init(
        data.cols, d_hidden, init_seed(cfg.seed, kStagePretrain, layer_index));

    auto clean_loss = [&]() {
        return reconstruction_loss(decode(result.layer, encode(result.layer, data)),
                                   data);
    };
    result.epoch_losses.push_back(clean_loss());
    const uint32_t steps = steps_per_pass(data.rows, cfg.batch_size);
    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(schedule_seed(cfg.seed, kStagePretrain, layer_index, epoch, 0));
        try {
            run_denoising_steps(result.layer, data, steps, cfg.batch_size,
                                cfg.corruption_prob, cfg.learning_rate, rng);
        } catch (const NumericError& e) {
            throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
        }
        result.epoch_losses.push_back(clean_loss());
    }
    return result;
}

std::vector<PretrainResult> stack_pretrain(const Matrix& unlabeled,
                                           std::span<const size_t> layer_dims,
                                           const PretrainConfig& cfg) {
    if (layer_dims.empty()) {
        throw ConfigError("stack_pretrain: layer_dims must be non-empty");
    }
    std::vector<PretrainResult> results;
    results.reserve(layer_dims.size());
    Matrix current = unlabeled;
    for (uint32_t i = 0; i < layer_dims.size(); ++i) {
        results.push_back(pretrain_layer(current, layer_dims[i], cfg, i));
        if (i + 1 < layer_dims.size()) {
            current = encode(results.back().layer, current);
        }
    }
    return results;
}

std::vector<AutoencoderLayer> extract_layers(std::vector<PretrainResult> results) {
    std::vector<AutoencoderLayer> layers;
    layers.reserve(results.size());
    for (auto& r : results) layers.push_back(std::move(r.layer));
    return layers;
}

FineTuneResult fine_tune(const std::vector<AutoencoderLayer>& pretrained,
                         const Matrix& features, std::span<const int32_t> labels,
                         uint32_t label_count, const FineTuneConfig& cfg) {
    cfg.validate();
    if (pretrained.empty()) {
        throw ConfigError("fine_tune: no pretrained layers");
    }
    if (features.rows == 0 || labels.size() != features.rows) {
        throw ShapeError("fine_tune: features and labels must align");
    }
    for (int32_t y : labels) {
        if (y < 0 || static_cast<uint32_t>(y) >= label_count) {
            throw DomainError("fine_tune: label " + std::to_string(y) +
                              " outside 0.." + std::to_string(label_count - 1));
        }
    }

    DeepModel model;
    for (const auto& layer : pretrained) {
        model.hidden.push_back(layer.encoder);
    }
    model.head = LayerParams::glorot(
        pretrained.back().d_hidden(), label_count,
        init_seed(cfg.seed, kStageFineTune, static_cast<uint32_t>(pretrained.size())));
    model.label_count = label_count;
    model.validate();

    FineTuneResult result;
    if (cfg.epochs == 0) {
        result.model = std::move(model);
        return result;
    }

    // Hold out a validation slice to pick the best snapshot.
    std::vector<uint32_t> order(features.rows);
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);
    Rng split_rng(mix_seed(cfg.seed, 0x56414cULL));
    split_rng.shuffle(order);
    const size_t val_n = static_cast<size_t>(
        std::llround(cfg.val_fraction * static_cast<double>(features.rows)));
    std::span<const uint32_t> val_idx(order.data(), val_n);
    std::span<const uint32_t> train_idx(order.data() + val_n,
                                        order.size() - val_n);
    if (train_idx.empty()) {
        throw ConfigError("fine_tune: validation split leaves no training rows");
    }
    const Matrix train_x = gather_rows(features, train_idx);
    std::vector<int32_t> train_y(train_idx.size());
    for (size_t i = 0; i < train_idx.size(); ++i) train_y[i] = labels[train_idx[i]];
    const Matrix val_x = gather_rows(features, val_idx);
    std::vector<int32_t> val_y(val_idx.size());
    for (size_t i = 0; i < val_idx.size(); ++i) val_y[i] = labels[val_idx[i]];

    auto val_error = [&]() {
        if (val_y.empty()) return 0.0;
        const auto preds = predict(model, val_x);
        size_t wrong = 0;
        for (size_t i = 0; i < preds.size(); ++i) {
            if (preds[i] != val_y[i]) ++wrong;
        }
        return static_cast<double>(wrong) / static_cast<double>(preds.size());
    };

    DeepModel best = model;
    uint32_t best_epoch = 0;
    EarlyStopMonitor monitor(cfg.patience);
    const uint32_t steps = steps_per_pass(train_x.rows, cfg.batch_size);
    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(schedule_seed(cfg.seed, kStageFineTune, 0, epoch, 0));
        run_supervised_steps(model, train_x, train_y, steps, cfg.batch_size,
                             cfg.learning_rate, rng);
        if (val_n == 0) {
            best = model;
            best_epoch = epoch;
            continue;
        }
        const double err = val_error();
        result.epoch_val_errors.push_back(err);
        const StopDecision decision = monitor.update(epoch, err);
        if (monitor.improved_last_update) {
            best = model;
            best_epoch = epoch;
        }
        if (decision == StopDecision::Stop) break;
    }
    result.model = std::move(best);
    result.best_epoch = best_epoch;
    return result;
}

std::vector<std::span<float>> param_spans(AutoencoderLayer& l) {
    return {std::span<float>(l.encoder.weights.values),
            std::span<float>(l.encoder.biases),
            std::span<float>(l.decoder_bias)};
}

std::vector<std::span<const float>> param_spans(const AutoencoderLayer& l) {
    return {std::span<const float>(l.encoder.weights.values),
            std::span<const float>(l.encoder.biases),
            std::span<const float>(l.decoder_bias)};
}

bool bit_equal(const AutoencoderLayer& a, const AutoencoderLayer& b) {
    if (a.d_in() != b.d_in() || a.d_hidden() != b.d_hidden()) return false;
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
