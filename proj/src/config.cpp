#include "shardnet/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "shardnet/errors.hpp"

namespace shardnet {

namespace {

std::string trim(const std::string& s) {
    size_t begin = 0;
    size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) {
        ++begin;
    }
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) {
        --end;
    }
    return s.substr(begin, end - begin);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (errno != 0 || v.empty() || end != v.c_str() + v.size()) {
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    }
    return x;
}

uint32_t parse_u32(const std::string& key, const std::string& v) {
    const uint64_t x = parse_u64(key, v);
    if (x > UINT32_MAX) throw ConfigError(key + ": value too large");
    return static_cast<uint32_t>(x);
}

float parse_f32(const std::string& key, const std::string& v) {
    char* end = nullptr;
    errno = 0;
    const float x = std::strtof(v.c_str(), &end);
    if (errno != 0 || v.empty() || end != v.c_str() + v.size()) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return x;
}

std::vector<size_t> parse_dims(const std::string& key, const std::string& v) {
    std::vector<size_t> dims;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const uint64_t d = parse_u64(key, item);
        if (d == 0) throw ConfigError(key + ": layer width must be positive");
        dims.push_back(static_cast<size_t>(d));
    }
    if (dims.empty()) throw ConfigError(key + ": expected a list of widths");
    return dims;
}

} // namespace

Weighting parse_weighting(const std::string& name) {
    if (name == "uniform") return Weighting::Uniform;
    if (name == "by_sample_count") return Weighting::BySampleCount;
    throw ConfigError("weighting: expected 'uniform' or 'by_sample_count', got '" +
                      name + "'");
}

RunConfig RunConfig::defaults() { return RunConfig{}; }

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    RunConfig cfg;
    std::string section;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        if (text.front() == '[' && text.back() == ']') {
            section = trim(text.substr(1, text.size() - 2));
            if (section != "data" && section != "model" &&
                section != "pretrain" && section != "finetune" &&
                section != "run") {
                throw ConfigError(path + ":" + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
            }
            continue;
        }
        const size_t eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key=value");
        }
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        const std::string qual = section.empty() ? key : section + "." + key;

        if (qual == "data.cache") {
            cfg.data.cache = value;
        } else if (qual == "data.synth") {
            cfg.data.synth = parse_bool(qual, value);
        } else if (qual == "data.synth_per_class") {
            cfg.data.synth_per_class = parse_u32(qual, value);
        } else if (qual == "data.synth_sigma") {
            cfg.data.synth_sigma = parse_f32(qual, value);
        } else if (qual == "data.window_len") {
            cfg.data.window_len = parse_u32(qual, value);
        } else if (qual == "data.step") {
            cfg.data.step = parse_u32(qual, value);
        } else if (qual == "data.test_fraction") {
            cfg.data.test_fraction = parse_f32(qual, value);
        } else if (qual == "data.test_cache_out") {
            cfg.data.test_cache_out = value;
        } else if (qual == "model.layer_dims") {
            cfg.model.layer_dims = parse_dims(qual, value);
        } else if (qual == "pretrain.enabled") {
            cfg.pretrain.enabled = parse_bool(qual, value);
        } else if (qual == "pretrain.corruption") {
            cfg.pretrain.corruption = parse_f32(qual, value);
        } else if (qual == "pretrain.learning_rate") {
            cfg.pretrain.learning_rate = parse_f32(qual, value);
        } else if (qual == "pretrain.batch_size") {
            cfg.pretrain.batch_size = parse_u32(qual, value);
        } else if (qual == "pretrain.iterations") {
            cfg.pretrain.iterations = parse_u32(qual, value);
        } else if (qual == "pretrain.full_pass") {
            cfg.pretrain.full_pass = parse_bool(qual, value);
        } else if (qual == "pretrain.rounds") {
            cfg.pretrain.rounds = parse_u32(qual, value);
        } else if (qual == "pretrain.holdout_fraction") {
            cfg.pretrain.holdout_fraction = parse_f32(qual, value);
        } else if (qual == "finetune.learning_rate") {
            cfg.finetune.learning_rate = parse_f32(qual, value);
        } else if (qual == "finetune.batch_size") {
            cfg.finetune.batch_size = parse_u32(qual, value);
        } else if (qual == "finetune.iterations") {
            cfg.finetune.iterations = parse_u32(qual, value);
        } else if (qual == "finetune.full_pass") {
            cfg.finetune.full_pass = parse_bool(qual, value);
        } else if (qual == "finetune.max_rounds") {
            cfg.finetune.max_rounds = parse_u32(qual, value);
        } else if (qual == "finetune.patience") {
            cfg.finetune.patience = parse_u32(qual, value);
        } else if (qual == "finetune.val_fraction") {
            cfg.finetune.val_fraction = parse_f32(qual, value);
        } else if (qual == "finetune.weighting") {
            parse_weighting(value);
            cfg.finetune.weighting = value;
        } else if (qual == "run.workers") {
            cfg.run.workers = parse_u32(qual, value);
        } else if (qual == "run.seed") {
            cfg.run.seed = parse_u64(qual, value);
        } else if (qual == "run.model_out") {
            cfg.run.model_out = value;
        } else if (qual == "run.log_out") {
            cfg.run.log_out = value;
        } else {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": unknown key '" + qual + "'");
        }
    }
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    if (!data.synth && data.cache.empty()) {
        throw ConfigError("data.cache: a dataset source is required "
                          "(set data.cache or data.synth=true)");
    }
    if (data.synth && data.synth_per_class == 0) {
        throw ConfigError("data.synth_per_class: must be >= 1");
    }
    if (data.test_fraction <= 0.0f || data.test_fraction >= 1.0f) {
        throw ConfigError("data.test_fraction: must be in (0, 1)");
    }
    if (data.window_len < 2) throw ConfigError("data.window_len: must be >= 2");
    if (data.step == 0) throw ConfigError("data.step: must be >= 1");
    if (model.layer_dims.empty()) {
        throw ConfigError("model.layer_dims: must name at least one layer");
    }
    if (run.workers == 0) throw ConfigError("run.workers: must be >= 1");
    if (run.model_out.empty()) throw ConfigError("run.model_out: required");
    pretrain_config().validate();
    finetune_round_config().validate();
}

RoundConfig RunConfig::finetune_round_config() const {
    RoundConfig cfg;
    cfg.batch_size = finetune.batch_size;
    cfg.iterations_per_map = finetune.iterations;
    cfg.full_pass = finetune.full_pass;
    cfg.learning_rate = finetune.learning_rate;
    cfg.max_rounds = finetune.max_rounds;
    cfg.patience = finetune.patience;
    cfg.val_fraction = finetune.val_fraction;
    cfg.weighting = parse_weighting(finetune.weighting);
    cfg.seed = run.seed;
    return cfg;
}

DistPretrainConfig RunConfig::pretrain_config() const {
    DistPretrainConfig cfg;
    cfg.corruption_prob = pretrain.corruption;
    cfg.learning_rate = pretrain.learning_rate;
    cfg.batch_size = pretrain.batch_size;
    cfg.iterations_per_map = pretrain.iterations;
    cfg.full_pass = pretrain.full_pass;
    cfg.rounds = pretrain.rounds;
    cfg.holdout_fraction = pretrain.holdout_fraction;
    cfg.weighting = parse_weighting(finetune.weighting);
    cfg.seed = run.seed;
    return cfg;
}

std::string RunConfig::render() const {
    std::ostringstream out;
    out << "[data]\n";
    out << "cache = " << data.cache << '\n';
    out << "synth = " << (data.synth ? "true" : "false") << '\n';
    out << "synth_per_class = " << data.synth_per_class << '\n';
    out << "synth_sigma = " << data.synth_sigma << '\n';
    out << "window_len = " << data.window_len << '\n';
    out << "step = " << data.step << '\n';
    out << "test_fraction = " << data.test_fraction << '\n';
    out << "test_cache_out = " << data.test_cache_out << '\n';
    out << "\n[model]\n";
    out << "layer_dims = ";
    for (size_t i = 0; i < model.layer_dims.size(); ++i) {
        if (i) out << ',';
        out << model.layer_dims[i];
    }
    out << '\n';
    out << "\n[pretrain]\n";
    out << "enabled = " << (pretrain.enabled ? "true" : "false") << '\n';
    out << "corruption = " << pretrain.corruption << '\n';
    out << "learning_rate = " << pretrain.learning_rate << '\n';
    out << "batch_size = " << pretrain.batch_size << '\n';
    out << "iterations = " << pretrain.iterations << '\n';
    out << "full_pass = " << (pretrain.full_pass ? "true" : "false") << '\n';
    out << "rounds = " << pretrain.rounds << '\n';
    out << "holdout_fraction = " << pretrain.holdout_fraction << '\n';
    out << "\n[finetune]\n";
    out << "learning_rate = " << finetune.learning_rate << '\n';
    out << "batch_size = " << finetune.batch_size << '\n';
    out << "iterations = " << finetune.iterations << '\n';
    out << "full_pass = " << (finetune.full_pass ? "true" : "false") << '\n';
    out << "max_rounds = " << finetune.max_rounds << '\n';
    out << "patience = " << finetune.patience << '\n';
    out << "val_fraction = " << finetune.val_fraction << '\n';
    out << "weighting = " << finetune.weighting << '\n';
    out << "\n[run]\n";
    out << "workers = " << run.workers << '\n';
    out << "seed = " << run.seed << '\n';
    out << "model_out = " << run.model_out << '\n';
    out << "log_out = " << run.log_out << '\n';
    return out.str();
}

} // namespace shardnet
