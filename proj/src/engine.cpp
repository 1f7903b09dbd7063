#include "shardnet/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <string>
#include <thread>

#include "shardnet/errors.hpp"
#include "shardnet/eval.hpp"
#include "shardnet/rng.hpp"

namespace shardnet {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

constexpr uint64_t kPartitionTag = 0x5348415244ULL;
constexpr uint64_t kValSplitTag = 0x56414c4944ULL;
constexpr uint64_t kHoldoutTag = 0x484f4c44ULL;

} // namespace

void RoundConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (learning_rate <= 0.0f) throw ConfigError("learning_rate must be positive");
    if (val_fraction < 0.0f || val_fraction >= 1.0f) {
        throw ConfigError("val_fraction must be in [0, 1)");
    }
}

void DistPretrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (learning_rate <= 0.0f) throw ConfigError("learning_rate must be positive");
    if (corruption_prob < 0.0f || corruption_prob >= 1.0f) {
        throw ConfigError("corruption_prob must be in [0, 1)");
    }
    if (holdout_fraction < 0.0f || holdout_fraction >= 1.0f) {
        throw ConfigError("holdout_fraction must be in [0, 1)");
    }
}

std::vector<DataShard> partition(const Dataset& dataset, uint32_t n_shards,
                                 uint64_t seed) {
    if (n_shards == 0) throw ConfigError("n_shards must be >= 1");
    if (dataset.rows() < n_shards) {
        throw ConfigError("cannot cut " + std::to_string(dataset.rows()) +
                          " rows into " + std::to_string(n_shards) + " shards");
    }
    // Stratified shuffle: per label, shuffle then deal round-robin. The
    // starting shard rotates per label so totals stay even.
    std::map<int32_t, std::vector<uint32_t>> by_label;
    for (size_t i = 0; i < dataset.rows(); ++i) {
        by_label[dataset.labels[i]].push_back(static_cast<uint32_t>(i));
    }
    std::vector<std::vector<uint32_t>> shard_rows(n_shards);
    size_t label_index = 0;
    for (auto& [label, rows] : by_label) {
        Rng rng(mix_seed(mix_seed(seed, kPartitionTag),
                         static_cast<uint64_t>(static_cast<int64_t>(label)) +
                             0x100));
        rng.shuffle(rows);
        const size_t start = label_index % n_shards;
        for (size_t j = 0; j < rows.size(); ++j) {
            shard_rows[(start + j) % n_shards].push_back(rows[j]);
        }
        ++label_index;
    }
    // A shard can come up empty when every label group is smaller than the
    // shard count; repair by moving rows from the largest shard.
    for (size_t s = 0; s < n_shards; ++s) {
        while (shard_rows[s].empty()) {
            size_t donor = 0;
            for (size_t d = 1; d < n_shards; ++d) {
                if (shard_rows[d].size() > shard_rows[donor].size()) donor = d;
            }
            if (shard_rows[donor].size() <= 1) {
                throw ConfigError("cannot populate every shard");
            }
            shard_rows[s].push_back(shard_rows[donor].back());
            shard_rows[donor].pop_back();
        }
    }
    std::vector<DataShard> shards;
    shards.reserve(n_shards);
    for (uint32_t s = 0; s < n_shards; ++s) {
        DataShard shard;
        shard.shard_id = s;
        shard.features = gather_rows(dataset.features, shard_rows[s]);
        shard.labels.resize(shard_rows[s].size());
        for (size_t i = 0; i < shard_rows[s].size(); ++i) {
            shard.labels[i] = dataset.labels[shard_rows[s][i]];
        }
        shards.push_back(std::move(shard));
    }
    return shards;
}

SplitResult validation_split(const Dataset& labeled, double fraction,
                             uint64_t seed) {
    return split_dataset(labeled, fraction, mix_seed(seed, kValSplitTag));
}

MapOutcome map_train(const DataShard& shard, const DeepModel& master,
                     const RoundConfig& cfg, uint32_t round,
                     uint64_t worker_seed) {
    cfg.validate();
    MapOutcome out;
    out.partial.params = master;
    out.partial.trained_on = shard.sample_count();
    out.partial.shard_id = shard.shard_id;
    out.partial.round = round;
    const uint32_t steps =
        cfg.full_pass ? steps_per_pass(shard.sample_count(), cfg.batch_size)
                      : cfg.iterations_per_map;
    if (steps == 0) return out;
    Rng rng(worker_seed);
    try {
        out.mean_loss =
            run_supervised_steps(out.partial.params, shard.features,
                                 shard.labels, steps, cfg.batch_size,
                                 cfg.learning_rate, rng);
    } catch (const NumericError& e) {
        throw WorkerError("shard " + std::to_string(shard.shard_id) +
                          ", round " + std::to_string(round) + ": " + e.what());
    }
    return out;
}

namespace {

// Pairwise (adjacent halving) tree sum; exact up to 1 ulp for identical
// inputs and independent of the original partial order once sorted.
float tree_sum(float* buf, size_t n) {
    while (n > 1) {
        const size_t half = n / 2;
        for (size_t i = 0; i < half; ++i) {
            buf[i] = buf[2 * i] + buf[2 * i + 1];
        }
        if (n % 2 == 1) {
            buf[half] = buf[n - 1];
            n = half + 1;
        } else {
            n = half;
        }
    }
    return buf[0];
}

double tree_sum(double* buf, size_t n) {
    while (n > 1) {
        const size_t half = n / 2;
        for (size_t i = 0; i < half; ++i) {
            buf[i] = buf[2 * i] + buf[2 * i + 1];
        }
        if (n % 2 == 1) {
            buf[half] = buf[n - 1];
            n = half + 1;
        } else {
            n = half;
        }
    }
    return buf[0];
}

// Averages parameter tensors over models already sorted into reduction
// order. Uniform averaging stays entirely in 32-bit so that averaging K
// copies of a model reproduces it to the last bit (power-of-two K) or
// within 1 ulp; weighted averaging accumulates in 64-bit.
template <typename SpanLists>
void average_spans(const SpanLists& sources, std::vector<std::span<float>>& dst,
                   std::span<const uint64_t> weights, Weighting weighting) {
    const size_t k = sources.size();
    std::vector<float> buf(k);
    std::vector<double> dbuf(k);
    double total_weight = 0.0;
    if (weighting == Weighting::BySampleCount) {
        for (size_t m = 0; m < k; ++m) {
            dbuf[m] = static_cast<double>(weights[m]);
        }
        total_weight = tree_sum(dbuf.data(), k);
        if (total_weight <= 0.0) {
            throw ProtocolError("reduce: total sample weight is zero");
        }
    }
    for (size_t t = 0; t < dst.size(); ++t) {
        const size_t len = dst[t].size();
        for (size_t i = 0; i < len; ++i) {
            if (weighting == Weighting::Uniform) {
                for (size_t m = 0; m < k; ++m) buf[m] = sources[m][t][i];
                dst[t][i] = tree_sum(buf.data(), k) / static_cast<float>(k);
            } else {
                for (size_t m = 0; m < k; ++m) {
                    dbuf[m] = static_cast<double>(weights[m]) *
                              static_cast<double>(sources[m][t][i]);
                }
                dst[t][i] =
                    static_cast<float>(tree_sum(dbuf.data(), k) / total_weight);
            }
        }
    }
}

} // namespace

DeepModel reduce_average(const std::vector<PartialModel>& partials,
                         Weighting weighting) {
    if (partials.empty()) {
        throw ProtocolError("reduce: no partial models");
    }
    std::vector<const PartialModel*> sorted;
    sorted.reserve(partials.size());
    for (const auto& p : partials) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(),
              [](const PartialModel* a, const PartialModel* b) {
                  return a->shard_id < b->shard_id;
              });
    for (const auto* p : sorted) {
        if (!shape_congruent(p->params, sorted.front()->params)) {
            throw ProtocolError("reduce: partial model shapes differ");
        }
        if (p->round != sorted.front()->round) {
            throw ProtocolError("reduce: partial models from different rounds");
        }
    }
    DeepModel result = sorted.front()->params;
    auto dst = param_spans(result);
    std::vector<std::vector<std::span<const float>>> sources;
    std::vector<uint64_t> weights;
    sources.reserve(sorted.size());
    weights.reserve(sorted.size());
    for (const auto* p : sorted) {
        sources.push_back(param_spans(p->params));
        weights.push_back(p->trained_on);
    }
    average_spans(sources, dst, weights, weighting);
    return result;
}

namespace {

// Runs one map task per worker on its own thread, retrying a failed task
// once with identical inputs. Joining every thread is the round barrier.
template <typename Fn>
void run_round(uint32_t n_workers, const EngineHooks& hooks, uint32_t round,
               Fn&& task) {
    std::vector<std::exception_ptr> errors(n_workers);
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (uint32_t w = 0; w < n_workers; ++w) {
        threads.emplace_back([&, w]() {
            for (uint32_t attempt = 0; attempt < 2; ++attempt) {
                try {
                    if (hooks.fault_injector &&
                        hooks.fault_injector(w, round, attempt)) {
                        throw WorkerError("injected fault at shard " +
                                          std::to_string(w) + ", round " +
                                          std::to_string(round));
                    }
                    task(w);
                    errors[w] = nullptr;
                    return;
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    for (uint32_t w = 0; w < n_workers; ++w) {
        if (errors[w]) {
            try {
                std::rethrow_exception(errors[w]);
            } catch (const std::exception& e) {
                throw WorkerError(
                    "worker " + std::to_string(w) + " failed twice in round " +
                    std::to_string(round) + ": " + e.what());
            }
        }
    }
}

} // namespace

TrainResult train_distributed(const Dataset& labeled, const DeepModel& init,
                              const RoundConfig& cfg, uint32_t n_workers,
                              const EngineHooks& hooks) {
    cfg.validate();
    init.validate();
    if (n_workers == 0) throw ConfigError("n_workers must be >= 1");
    if (labeled.rows() == 0) throw DomainError("train_distributed: empty dataset");
    for (int32_t y : labeled.labels) {
        if (y < 0 || static_cast<uint32_t>(y) >= init.label_count) {
            throw DomainError("train_distributed: label " + std::to_string(y) +
                              " outside 0.." +
                              std::to_string(init.label_count - 1));
        }
    }

    TrainResult result;
    result.model = init;
    if (cfg.max_rounds == 0) return result;

    Dataset train_part;
    Dataset val_part;
    if (cfg.val_fraction > 0.0f) {
        SplitResult split = validation_split(labeled, cfg.val_fraction, cfg.seed);
        train_part = std::move(split.train);
        val_part = std::move(split.test);
    } else {
        train_part = labeled;
    }
    const std::vector<DataShard> shards =
        partition(train_part, n_workers, cfg.seed);

    DeepModel master = init;
    DeepModel best = init;
    EarlyStopMonitor monitor(cfg.patience);
    const auto loop_start = Clock::now();
    for (uint32_t round = 0; round < cfg.max_rounds; ++round) {
        const auto round_start = Clock::now();
        std::vector<MapOutcome> outcomes(n_workers);
        run_round(n_workers, hooks, round, [&](uint32_t w) {
            outcomes[w] = map_train(
                shards[w], master, cfg, round,
                schedule_seed(cfg.seed, kStageFineTune, 0, round, w));
        });
        std::vector<PartialModel> partials;
        partials.reserve(n_workers);
        RoundRecord record;
        record.round = round;
        for (auto& o : outcomes) {
            record.shard_losses.push_back(o.mean_loss);
            result.run.total_steps +=
                cfg.full_pass
                    ? steps_per_pass(o.partial.trained_on, cfg.batch_size)
                    : cfg.iterations_per_map;
            partials.push_back(std::move(o.partial));
        }
        master = reduce_average(partials, cfg.weighting);

        double val_error = 0.0;
        double val_loss = 0.0;
        if (val_part.rows() > 0) {
            val_error = evaluate(master, val_part).error_rate;
            val_loss = loss(master, val_part.features, val_part.labels,
                            LossKind::SoftmaxCrossEntropy);
        }
        if (hooks.val_metric_override) {
            val_error = hooks.val_metric_override(round, val_error);
        }
        record.val_loss = val_loss;
        record.val_error = val_error;
        record.wall_ms = ms_since(round_start);
        if (hooks.round_snapshots) hooks.round_snapshots->push_back(master);
        result.run.rounds.push_back(record);
        if (hooks.on_round) hooks.on_round(result.run.rounds.back());

        if (val_part.rows() > 0) {
            const StopDecision decision = monitor.update(round, val_error);
            if (monitor.improved_last_update) best = master;
            if (decision == StopDecision::Stop) break;
        } else {
            best = master;
        }
    }
    result.run.loop_wall_ms = ms_since(loop_start);
    result.run.best_round =
        val_part.rows() > 0 ? monitor.best_round
                            : static_cast<int64_t>(result.run.rounds.size()) - 1;
    result.run.best_val_error = val_part.rows() > 0 ? monitor.best_metric : 0.0;
    result.model = std::move(best);
    return result;
}

namespace {

struct AePartial {
    AutoencoderLayer layer;
    uint64_t trained_on = 0;
    uint32_t shard_id = 0;
    uint32_t round = 0;
};

AutoencoderLayer reduce_ae(const std::vector<AePartial>& partials,
                           Weighting weighting) {
    if (partials.empty()) throw ProtocolError("reduce: no partial layers");
    std::vector<const AePartial*> sorted;
    for (const auto& p : partials) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(),
              [](const AePartial* a, const AePartial* b) {
                  return a->shard_id < b->shard_id;
              });
    for (const auto* p : sorted) {
        if (p->layer.d_in() != sorted.front()->layer.d_in() ||
            p->layer.d_hidden() != sorted.front()->layer.d_hidden()) {
            throw ProtocolError("reduce: partial layer shapes differ");
        }
        if (p->round != sorted.front()->round) {
            throw ProtocolError("reduce: partial layers from different rounds");
        }
    }
    AutoencoderLayer result = sorted.front()->layer;
    auto dst = param_spans(result);
    std::vector<std::vector<std::span<const float>>> sources;
    std::vector<uint64_t> weights;
    for (const auto* p : sorted) {
        sources.push_back(param_spans(p->layer));
        weights.push_back(p->trained_on);
    }
    average_spans(sources, dst, weights, weighting);
    return result;
}

} // namespace

DistPretrainResult pretrain_distributed(const Matrix& unlabeled,
                                        std::span<const size_t> layer_dims,
                                        const DistPretrainConfig& cfg,
                                        uint32_t n_workers,
                                        const EngineHooks& hooks) {
    cfg.validate();
    if (layer_dims.empty()) throw ConfigError("layer_dims must be non-empty");
    if (n_workers == 0) throw ConfigError("n_workers must be >= 1");
    if (unlabeled.rows == 0) {
        throw DomainError("pretrain_distributed: empty dataset");
    }

    Dataset pool;
    pool.features = unlabeled;
    pool.labels.assign(unlabeled.rows, kUnlabeled);

    Matrix holdout;
    if (cfg.holdout_fraction > 0.0f && pool.rows() >= 2) {
        SplitResult split = split_dataset(pool, cfg.holdout_fraction,
                                          mix_seed(cfg.seed, kHoldoutTag));
        holdout = std::move(split.test.features);
        pool = std::move(split.train);
    }
    const std::vector<DataShard> shards = partition(pool, n_workers, cfg.seed);

    // Worker-local encodings of the shard through the already-averaged
    // lower layers; refreshed after each layer is finalized.
    std::vector<Matrix> encodings;
    encodings.reserve(n_workers);
    for (const auto& s : shards) encodings.push_back(s.features);
    Matrix holdout_enc = holdout;

    DistPretrainResult result;
    for (uint32_t layer_idx = 0; layer_idx < layer_dims.size(); ++layer_idx) {
        AutoencoderLayer master = AutoencoderLayer::init(
            encodings.front().cols, layer_dims[layer_idx],
            init_seed(cfg.seed, kStagePretrain, layer_idx));
        for (uint32_t round = 0; round < cfg.rounds; ++round) {
            const auto round_start = Clock::now();
            std::vector<AePartial> partials(n_workers);
            std::vector<double> losses(n_workers, 0.0);
            run_round(n_workers, hooks, round, [&](uint32_t w) {
                AePartial partial;
                partial.layer = master;
                partial.trained_on = encodings[w].rows;
                partial.shard_id = w;
                partial.round = round;
                const uint32_t steps =
                    cfg.full_pass
                        ? steps_per_pass(encodings[w].rows, cfg.batch_size)
                        : cfg.iterations_per_map;
                Rng rng(schedule_seed(cfg.seed, kStagePretrain, layer_idx,
                                      round, w));
                try {
                    losses[w] = run_denoising_steps(
                        partial.layer, encodings[w], steps, cfg.batch_size,
                        cfg.corruption_prob, cfg.learning_rate, rng);
                } catch (const NumericError& e) {
                    throw WorkerError("shard " + std::to_string(w) +
                                      ", layer " + std::to_string(layer_idx) +
                                      ", round " + std::to_string(round) +
                                      ": " + e.what());
                }
                partials[w] = std::move(partial);
            });
            master = reduce_ae(partials, cfg.weighting);

            PretrainRoundRecord record;
            record.layer = layer_idx;
            record.round = round;
            record.shard_losses = losses;
            const Matrix& probe = holdout_enc.rows > 0 ? holdout_enc
                                                       : encodings.front();
            record.holdout_loss =
                reconstruction_loss(decode(master, encode(master, probe)), probe);
            record.wall_ms = ms_since(round_start);
            result.rounds.push_back(std::move(record));
        }
        for (auto& enc : encodings) enc = encode(master, enc);
        if (holdout_enc.rows > 0) holdout_enc = encode(master, holdout_enc);
        result.layers.push_back(std::move(master));
    }
    return result;
}

} // namespace shardnet
