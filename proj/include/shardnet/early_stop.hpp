#pragma once

#include <cstdint>
#include <limits>

#include "shardnet/errors.hpp"

namespace shardnet {

enum class StopDecision {
    Continue,
    Stop,
};

// Tracks the best validation metric seen so far and decides when training
// should stop: after more than `patience` consecutive rounds without an
// improvement of at least 1e-6.
struct EarlyStopMonitor {
    double best_metric = std::numeric_limits<double>::infinity();
    int64_t best_round = -1;
    uint32_t patience = 5;
    uint32_t rounds_since_improvement = 0;

    EarlyStopMonitor() = default;
    explicit EarlyStopMonitor(uint32_t patience_rounds) : patience(patience_rounds) {}

    bool improved_last_update = false;

    StopDecision update(int64_t round, double metric) {
        if (round <= last_round_) {
            throw DomainError("early stop rounds must be strictly increasing");
        }
        last_round_ = round;
        if (metric < best_metric - 1e-6) {
            best_metric = metric;
            best_round = round;
            rounds_since_improvement = 0;
            improved_last_update = true;
        } else {
            ++rounds_since_improvement;
            improved_last_update = false;
        }
        return rounds_since_improvement > patience ? StopDecision::Stop
                                                   : StopDecision::Continue;
    }

private:
    int64_t last_round_ = -1;
};

} // namespace shardnet
