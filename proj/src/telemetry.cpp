#include "shardnet/telemetry.hpp"

#include <fstream>

#include <json.hpp>

#include "shardnet/errors.hpp"

namespace shardnet {

using nlohmann::json;

std::string round_record_to_json(const RoundRecord& record) {
    json j;
    j["round"] = record.round;
    j["wall_ms"] = record.wall_ms;
    j["shard_losses"] = record.shard_losses;
    j["val_loss"] = record.val_loss;
    j["val_error"] = record.val_error;
    return j.dump();
}

RoundRecord round_record_from_json(const std::string& line) {
    RoundRecord record;
    try {
        const json j = json::parse(line);
        record.round = j.at("round").get<uint32_t>();
        record.wall_ms = j.at("wall_ms").get<double>();
        record.shard_losses = j.at("shard_losses").get<std::vector<double>>();
        record.val_loss = j.at("val_loss").get<double>();
        record.val_error = j.at("val_error").get<double>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad run-log line: ") + e.what());
    }
    return record;
}

void append_run_log(const std::string& path, const RoundRecord& record) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot open run log: " + path);
    out << round_record_to_json(record) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

void write_run_log(const std::string& path, const TrainRun& run) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open run log: " + path);
    for (const auto& record : run.rounds) {
        out << round_record_to_json(record) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<RoundRecord> read_run_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open run log: " + path);
    std::vector<RoundRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(round_record_from_json(line));
    }
    return records;
}

} // namespace shardnet
