#include "shardnet/model_io.hpp"

#include <string>

#include "binio.hpp"
#include "shardnet/errors.hpp"

namespace shardnet {

namespace {

constexpr const char* kModelMagic = "SHARDNET1";

void write_layer(binio::Writer& w, const LayerParams& layer) {
    w.u32(static_cast<uint32_t>(layer.in_dim()));
    w.u32(static_cast<uint32_t>(layer.out_dim()));
    w.f32_span(layer.weights.values);
    w.f32_span(layer.biases);
}

LayerParams read_layer(binio::Reader& r) {
    const uint32_t in_dim = r.u32();
    const uint32_t out_dim = r.u32();
    if (in_dim == 0 || out_dim == 0) {
        throw FormatError("model layer with zero dimension");
    }
    LayerParams layer(in_dim, out_dim);
    r.f32_span(layer.weights.values);
    r.f32_span(layer.biases);
    return layer;
}

void write_core(binio::Writer& w, const std::vector<LayerParams>& layers,
                uint32_t label_count) {
    w.magic(kModelMagic);
    w.u32(static_cast<uint32_t>(layers.size()));
    for (const auto& layer : layers) write_layer(w, layer);
    w.u32(label_count);
}

struct CoreBlock {
    std::vector<LayerParams> layers;
    uint32_t label_count = 0;
};

CoreBlock read_core(binio::Reader& r) {
    r.expect_magic(kModelMagic);
    const uint32_t count = r.u32();
    CoreBlock core;
    core.layers.reserve(count);
    for (uint32_t i = 0; i < count; ++i) core.layers.push_back(read_layer(r));
    core.label_count = r.u32();
    return core;
}

DeepModel assemble_model(std::vector<LayerParams> layers, uint32_t label_count) {
    if (layers.size() < 2) {
        throw FormatError("fine-tuned model needs at least one hidden layer "
                          "and a head");
    }
    DeepModel model;
    model.head = std::move(layers.back());
    layers.pop_back();
    model.hidden = std::move(layers);
    model.label_count = label_count;
    model.validate();
    return model;
}

} // namespace

DeepModel ModelBundle::to_deep_model() const {
    if (!fine_tuned()) {
        throw DomainError("model file holds a pretrained-only snapshot; "
                          "fine-tune it before serving or evaluating");
    }
    return assemble_model(layers, label_count);
}

ModelBundle ModelBundle::from_model(const DeepModel& model) {
    model.validate();
    ModelBundle b;
    b.stage = 1;
    b.layers = model.hidden;
    b.layers.push_back(model.head);
    b.label_count = model.label_count;
    return b;
}

void save_model(const DeepModel& model, const std::string& path) {
    model.validate();
    binio::Writer w(path);
    std::vector<LayerParams> layers = model.hidden;
    layers.push_back(model.head);
    write_core(w, layers, model.label_count);
    w.close();
}

DeepModel load_model(const std::string& path) {
    binio::Reader r(path);
    CoreBlock core = read_core(r);
    return assemble_model(std::move(core.layers), core.label_count);
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
    if (bundle.fine_tuned() && bundle.label_names.size() != bundle.label_count) {
        throw ConfigError("bundle label names must match label_count");
    }
    binio::Writer w(path);
    write_core(w, bundle.layers, bundle.label_count);
    w.u8(bundle.stage);
    w.u32(bundle.window_len);
    w.u32(bundle.step);
    w.f32(bundle.sampling_hz);
    w.u32(static_cast<uint32_t>(bundle.scaler.size()));
    w.f32_span(bundle.scaler.mins);
    w.f32_span(bundle.scaler.maxs);
    w.u32(static_cast<uint32_t>(bundle.label_names.size()));
    for (const auto& name : bundle.label_names) w.str(name);
    w.close();
}

ModelBundle load_bundle(const std::string& path) {
    binio::Reader r(path);
    CoreBlock core = read_core(r);
    ModelBundle b;
    b.layers = std::move(core.layers);
    b.label_count = core.label_count;
    b.stage = r.u8();
    if (b.stage > 1) {
        throw FormatError("unknown model stage flag");
    }
    b.window_len = r.u32();
    b.step = r.u32();
    b.sampling_hz = r.f32();
    const uint32_t scaler_len = r.u32();
    b.scaler.mins.resize(scaler_len);
    b.scaler.maxs.resize(scaler_len);
    r.f32_span(b.scaler.mins);
    r.f32_span(b.scaler.maxs);
    const uint32_t name_count = r.u32();
    b.label_names.reserve(name_count);
    for (uint32_t i = 0; i < name_count; ++i) b.label_names.push_back(r.str());
    if (b.fine_tuned() && b.label_names.size() != b.label_count) {
        throw FormatError("bundle label names do not match label_count");
    }
    return b;
}

} // namespace shardnet
