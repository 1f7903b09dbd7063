#include "shardnet/bench.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include "shardnet/errors.hpp"

namespace shardnet {

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t mid = v.size() / 2;
    if (v.size() % 2 == 1) return v[mid];
    return 0.5 * (v[mid - 1] + v[mid]);
}

} // namespace

SpeedupReport benchmark_speedup(const SpeedupJob& job,
                                const std::vector<uint32_t>& worker_counts,
                                uint32_t repetitions) {
    if (worker_counts.empty()) {
        throw ConfigError("benchmark: need at least one worker count");
    }
    if (repetitions == 0) {
        throw ConfigError("benchmark: repetitions must be >= 1");
    }
    SpeedupReport report;
    report.base_workers = worker_counts.front();
    report.repetitions = repetitions;

    const uint32_t capacity = std::thread::hardware_concurrency();
    RoundConfig cfg = job.cfg;
    cfg.patience = cfg.max_rounds; // fixed round count for comparable timings

    for (uint32_t workers : worker_counts) {
        if (capacity > 0 && workers > capacity) {
            report.warnings.push_back(
                "worker count " + std::to_string(workers) +
                " exceeds hardware concurrency " + std::to_string(capacity) +
                "; timings reflect oversubscription");
        }
        SpeedupEntry entry;
        entry.workers = workers;
        for (uint32_t rep = 0; rep < repetitions; ++rep) {
            const TrainResult result =
                train_distributed(job.data, job.init, cfg, workers);
            entry.rep_wall_s.push_back(result.run.loop_wall_ms / 1000.0);
            entry.total_steps = result.run.total_steps;
        }
        entry.median_wall_s = median(entry.rep_wall_s);
        report.entries.push_back(std::move(entry));
    }
    const double base = report.entries.front().median_wall_s;
    for (auto& entry : report.entries) {
        entry.speedup = entry.median_wall_s > 0.0 ? base / entry.median_wall_s
                                                  : 1.0;
    }
    return report;
}

void write_speedup_csv(const SpeedupReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "worker_count,median_wall_s,speedup\n";
    for (const auto& e : report.entries) {
        out << e.workers << ',' << e.median_wall_s << ',' << e.speedup << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

std::string speedup_table(const SpeedupReport& report) {
    std::ostringstream out;
    out << "speedup benchmark (base = " << report.base_workers
        << " worker(s), median of " << report.repetitions << " repetition(s))\n";
    out << "workers   median_wall_s   speedup   steps_per_run\n";
    for (const auto& e : report.entries) {
        out << e.workers << "         " << e.median_wall_s << "        "
            << e.speedup << "      " << e.total_steps << '\n';
    }
    for (const auto& w : report.warnings) {
        out << "warning: " << w << '\n';
    }
    return out.str();
}

} // namespace shardnet
