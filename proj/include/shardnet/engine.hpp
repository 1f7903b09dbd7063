#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "shardnet/data.hpp"
#include "shardnet/nn.hpp"
#include "shardnet/pretrain.hpp"

namespace shardnet {

// Immutable partition of the training set owned by one worker for the
// whole run.
struct DataShard {
    uint32_t shard_id = 0;
    Matrix features;
    std::vector<int32_t> labels;

    size_t sample_count() const { return features.rows; }
};

enum class Weighting {
    Uniform,
    BySampleCount,
};

struct RoundConfig {
    uint32_t batch_size = 100;
    uint32_t iterations_per_map = 100;
    // When set, each map task makes one full pass over its shard per round
    // instead of the fixed iteration count; total work then stays constant
    // as workers are added.
    bool full_pass = false;
    float learning_rate = 0.1f;
    uint32_t max_rounds = 30;
    uint32_t patience = 5;
    // Labeled fraction held at the master for early stopping; never sharded.
    float val_fraction = 0.1f;
    Weighting weighting = Weighting::Uniform;
    uint64_t seed = 0;

    void validate() const;
};

// Full-shape parameter snapshot trained by one worker in one round.
struct PartialModel {
    DeepModel params;
    uint64_t trained_on = 0;
    uint32_t shard_id = 0;
    uint32_t round = 0;
};

struct RoundRecord {
    uint32_t round = 0;
    double wall_ms = 0.0;
    std::vector<double> shard_losses; // mean training loss per shard
    double val_loss = 0.0;
    double val_error = 0.0;
};

struct TrainRun {
    std::vector<RoundRecord> rounds;
    int64_t best_round = -1;
    double best_val_error = 0.0;
    double loop_wall_ms = 0.0; // map+reduce loop only, excludes data prep
    uint64_t total_steps = 0;  // gradient steps summed over all workers
};

// Test and instrumentation hooks; all optional.
struct EngineHooks {
    // Replaces the computed validation error fed to the early-stop monitor.
    std::function<double(uint32_t round, double computed)> val_metric_override;
    // Return true to make (shard, round, attempt) fail, exercising the
    // retry path.
    std::function<bool(uint32_t shard_id, uint32_t round, uint32_t attempt)>
        fault_injector;
    std::function<void(const RoundRecord&)> on_round;
    // When set, receives the averaged master model after every round.
    std::vector<DeepModel>* round_snapshots = nullptr;
};

// Label-stratified shuffle, then round-robin assignment: per label, shard
// sizes differ by at most one. Shards are disjoint and exhaustive.
std::vector<DataShard> partition(const Dataset& dataset, uint32_t n_shards,
                                 uint64_t seed);

// The validation split used by train_distributed, exposed so reference
// trainers can reproduce the exact train/validation division.
SplitResult validation_split(const Dataset& labeled, double fraction,
                             uint64_t seed);

struct MapOutcome {
    PartialModel partial;
    double mean_loss = 0.0;
};

// One Map task: starting from the master snapshot, runs the round's SGD
// steps on batches drawn from the shard (reshuffled each pass) and returns
// the resulting parameters. Deterministic in (shard, master, cfg, round,
// worker_seed).
MapOutcome map_train(const DataShard& shard, const DeepModel& master,
                     const RoundConfig& cfg, uint32_t round,
                     uint64_t worker_seed);

// The Reduce step: elementwise weighted mean of every parameter over the
// partials, reduced in a fixed order (shard_id ascending, pairwise tree)
// so the result is independent of input order.
DeepModel reduce_average(const std::vector<PartialModel>& partials,
                         Weighting weighting);

struct TrainResult {
    DeepModel model; // best-validation snapshot
    TrainRun run;
};

// The iterative map/reduce training loop: broadcast the master snapshot,
// train partial models on all shards in parallel, barrier, average,
// evaluate on the held-out validation split, repeat until max_rounds or
// until the validation error stops improving for `patience` rounds.
// A failed map task is retried once with the same inputs; a second
// failure aborts the run.
TrainResult train_distributed(const Dataset& labeled, const DeepModel& init,
                              const RoundConfig& cfg, uint32_t n_workers,
                              const EngineHooks& hooks = {});

struct DistPretrainConfig {
    float corruption_prob = 0.3f;
    float learning_rate = 0.1f;
    uint32_t batch_size = 100;
    uint32_t iterations_per_map = 100;
    bool full_pass = false;
    uint32_t rounds = 10; // per layer
    // Unlabeled fraction held back for reconstruction telemetry; 0 measures
    // on the training shards' own data.
    float holdout_fraction = 0.1f;
    Weighting weighting = Weighting::Uniform;
    uint64_t seed = 0;

    void validate() const;
};

struct PretrainRoundRecord {
    uint32_t layer = 0;
    uint32_t round = 0;
    double wall_ms = 0.0;
    std::vector<double> shard_losses;
    double holdout_loss = 0.0; // clean reconstruction loss of the averaged layer
};

struct DistPretrainResult {
    std::vector<AutoencoderLayer> layers;
    std::vector<PretrainRoundRecord> rounds;
};

// Greedy layer-wise pretraining under the same map/reduce protocol: each
// worker trains the current denoising layer on its shard-local encodings,
// the master averages encoder and decoder parameters every round, and
// layers are trained bottom-up.
DistPretrainResult pretrain_distributed(const Matrix& unlabeled,
                                        std::span<const size_t> layer_dims,
                                        const DistPretrainConfig& cfg,
                                        uint32_t n_workers,
                                        const EngineHooks& hooks = {});

} // namespace shardnet
