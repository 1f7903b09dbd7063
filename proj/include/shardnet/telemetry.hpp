#pragma once

#include <string>
#include <vector>

#include "shardnet/engine.hpp"

namespace shardnet {

// Round records as line-delimited JSON, one object per line:
//   {"round":0,"wall_ms":12.5,"shard_losses":[...],"val_loss":..,"val_error":..}
// The format is stable; the benchmark harness and log replay read it back.
std::string round_record_to_json(const RoundRecord& record);
RoundRecord round_record_from_json(const std::string& line);

void append_run_log(const std::string& path, const RoundRecord& record);
void write_run_log(const std::string& path, const TrainRun& run);
std::vector<RoundRecord> read_run_log(const std::string& path);

} // namespace shardnet
