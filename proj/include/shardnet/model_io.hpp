#pragma once

#include <string>
#include <vector>

#include "shardnet/data.hpp"
#include "shardnet/nn.hpp"

namespace shardnet {

// A trained model plus everything needed to serve it: the feature scaler,
// framing parameters and label names travel inside the model file so the
// inference service is self-contained.
struct ModelBundle {
    // 0 = pretrained-only encoder stack (no head), 1 = fine-tuned model.
    uint8_t stage = 1;
    std::vector<LayerParams> layers; // hidden layers; head last when stage==1
    uint32_t label_count = 0;

    Scaler scaler;
    uint32_t window_len = kDefaultWindowLen;
    uint32_t step = 100;
    float sampling_hz = 20.0f;
    std::vector<std::string> label_names;

    bool fine_tuned() const { return stage == 1; }
    DeepModel to_deep_model() const;
    static ModelBundle from_model(const DeepModel& model);
};

// Core model block: magic, layer count, per-layer dims + weights + biases,
// label count. Byte-exact round trip.
void save_model(const DeepModel& model, const std::string& path);
DeepModel load_model(const std::string& path);

// Core block followed by the stage flag and serving metadata.
void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

} // namespace shardnet
