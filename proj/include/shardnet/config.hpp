#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shardnet/engine.hpp"

namespace shardnet {

// Full training-run configuration. Parsed from a flat key=value file with
// [section] headers; every key has a default except the dataset source.
struct RunConfig {
    struct Data {
        std::string cache;           // SHARDSET1 cache path; empty with synth
        bool synth = false;
        uint32_t synth_per_class = 500;
        float synth_sigma = 0.1f;
        uint32_t window_len = 200;
        uint32_t step = 100;
        float test_fraction = 0.2f;
        std::string test_cache_out; // when set, the held-out split is cached
    } data;

    struct Model {
        std::vector<size_t> layer_dims = {128, 128};
    } model;

    struct Pretrain {
        bool enabled = true;
        float corruption = 0.3f;
        float learning_rate = 0.1f;
        uint32_t batch_size = 100;
        uint32_t iterations = 100;
        bool full_pass = false;
        uint32_t rounds = 15;
        float holdout_fraction = 0.1f;
    } pretrain;

    struct FineTune {
        float learning_rate = 0.1f;
        uint32_t batch_size = 100;
        uint32_t iterations = 100;
        bool full_pass = false;
        uint32_t max_rounds = 30;
        uint32_t patience = 5;
        float val_fraction = 0.1f;
        std::string weighting = "uniform"; // or by_sample_count
    } finetune;

    struct Run {
        uint32_t workers = 1;
        uint64_t seed = 42;
        std::string model_out = "model.shardnet";
        std::string log_out = "run.log";
    } run;

    void validate() const;
    std::string render() const; // fully resolved key=value text

    RoundConfig finetune_round_config() const;
    DistPretrainConfig pretrain_config() const;

    static RunConfig defaults();
    // Throws ConfigError on unknown sections/keys or unparsable values.
    static RunConfig load(const std::string& path);
};

Weighting parse_weighting(const std::string& name);

} // namespace shardnet
