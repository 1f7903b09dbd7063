#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shardnet/engine.hpp"

namespace shardnet {

// A fixed training job: identical data, model init, schedule and seed
// across every measured worker count.
struct SpeedupJob {
    Dataset data;
    DeepModel init;
    RoundConfig cfg;
};

struct SpeedupEntry {
    uint32_t workers = 0;
    double median_wall_s = 0.0;
    double speedup = 1.0; // T_base / T_workers
    std::vector<double> rep_wall_s;
    uint64_t total_steps = 0; // gradient steps per repetition, all workers
};

struct SpeedupReport {
    std::vector<SpeedupEntry> entries;
    uint32_t base_workers = 1;
    uint32_t repetitions = 1;
    std::vector<std::string> warnings;
};

// Runs the job once per repetition at every worker count (sequentially, so
// timings do not contend), timing only the map+reduce loop. The median
// wall time per count feeds the speedup ratio against the base count.
// Early stopping is disabled so every run executes the same rounds.
SpeedupReport benchmark_speedup(const SpeedupJob& job,
                                const std::vector<uint32_t>& worker_counts,
                                uint32_t repetitions);

// worker_count,median_wall_s,speedup rows for external plotting.
void write_speedup_csv(const SpeedupReport& report, const std::string& path);
// Human-readable table including repetitions, step accounting and warnings.
std::string speedup_table(const SpeedupReport& report);

} // namespace shardnet
