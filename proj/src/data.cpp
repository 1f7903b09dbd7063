#include "shardnet/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numbers>
#include <string>

#include <zlib.h>

#include "binio.hpp"
#include "shardnet/errors.hpp"
#include "shardnet/rng.hpp"

namespace shardnet {

namespace {

std::string canonical_key(const std::string& s) {
    std::string key;
    key.reserve(s.size());
    for (char c : s) {
        if (c == ' ' || c == '_' || c == '-') continue;
        key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return key;
}

} // namespace

LabelSet LabelSet::default_activities() {
    return LabelSet{{"walking", "jogging", "climbing stairs", "sitting",
                     "standing", "lying down"}};
}

int32_t LabelSet::resolve(const std::string& activity) const {
    const std::string key = canonical_key(activity);
    if (key.empty()) return kUnlabeled;
    for (size_t i = 0; i < names.size(); ++i) {
        if (canonical_key(names[i]) == key) return static_cast<int32_t>(i);
    }
    // Aliases seen in the public Actitracker/WISDM files.
    static const std::map<std::string, std::string> aliases = {
        {"stairs", "climbing stairs"},    {"upstairs", "climbing stairs"},
        {"downstairs", "climbing stairs"}, {"climbstairs", "climbing stairs"},
        {"lying", "lying down"},           {"lyingdown", "lying down"},
    };
    const auto it = aliases.find(key);
    if (it == aliases.end()) return kUnlabeled;
    for (size_t i = 0; i < names.size(); ++i) {
        if (canonical_key(names[i]) == canonical_key(it->second)) {
            return static_cast<int32_t>(i);
        }
    }
    return kUnlabeled;
}

namespace {

// Splits a CSV row; a trailing ';' (with or without content after it) and
// trailing '\r' are tolerated.
std::vector<std::string> split_csv_row(std::string line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
        line.pop_back();
    }
    if (!line.empty() && line.back() == ';') line.pop_back();
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        const size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

bool parse_i64(const std::string& s, int64_t& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size()) return false;
    out = v;
    return true;
}

bool parse_i32(const std::string& s, int32_t& out) {
    int64_t v;
    if (!parse_i64(s, v)) return false;
    if (v < INT32_MIN || v > INT32_MAX) return false;
    out = static_cast<int32_t>(v);
    return true;
}

bool parse_f32(const std::string& s, float& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    const float v = std::strtof(s.c_str(), &end);
    if (errno != 0 || end != s.c_str() + s.size()) return false;
    if (!std::isfinite(v)) return false;
    out = v;
    return true;
}

} // namespace

CsvLoadResult load_actitracker_csv(const std::string& path,
                                   const LabelSet& labels) {
    // gzopen reads plain files transparently, so one code path covers both.
    gzFile file = gzopen(path.c_str(), "rb");
    if (file == nullptr) {
        throw IoError("cannot open dataset file: " + path);
    }
    CsvLoadResult result;
    std::string line;
    char buf[4096];
    bool pending = false;
    auto consume_line = [&](const std::string& text) {
        bool blank = true;
        for (char c : text) {
            if (!std::isspace(static_cast<unsigned char>(c))) {
                blank = false;
                break;
            }
        }
        if (blank) return;
        ++result.parsed_rows;
        const auto fields = split_csv_row(text);
        AccelSample s;
        if (fields.size() != 6 || !parse_i32(fields[0], s.user_id) ||
            !parse_i64(fields[2], s.timestamp) || !parse_f32(fields[3], s.x) ||
            !parse_f32(fields[4], s.y) || !parse_f32(fields[5], s.z)) {
            ++result.malformed_rows;
            return;
        }
        s.label = labels.resolve(fields[1]);
        result.samples.push_back(s);
    };
    while (gzgets(file, buf, sizeof(buf)) != nullptr) {
        line += buf;
        if (!line.empty() && line.back() == '\n') {
            consume_line(line);
            line.clear();
            pending = false;
        } else {
            pending = true;
        }
    }
    const bool read_error = !gzeof(file);
    gzclose(file);
    if (read_error) {
        throw IoError("read error in dataset file: " + path);
    }
    if (pending && !line.empty()) consume_line(line);
    if (result.parsed_rows > 0 &&
        result.malformed_rows * 2 > result.parsed_rows) {
        throw FormatError(path + ": " + std::to_string(result.malformed_rows) +
                          " of " + std::to_string(result.parsed_rows) +
                          " rows malformed; not a supported layout");
    }
    return result;
}

namespace {

int64_t median_positive_delta(const std::vector<const AccelSample*>& stream) {
    std::vector<int64_t> deltas;
    deltas.reserve(stream.size());
    for (size_t i = 1; i < stream.size(); ++i) {
        const int64_t d = stream[i]->timestamp - stream[i - 1]->timestamp;
        if (d > 0) deltas.push_back(d);
    }
    if (deltas.empty()) return 0;
    const size_t mid = deltas.size() / 2;
    std::nth_element(deltas.begin(), deltas.begin() + static_cast<long>(mid),
                     deltas.end());
    return deltas[mid];
}

} // namespace

std::vector<ActivityWindow> frame(const std::vector<AccelSample>& samples,
                                  const FrameOptions& opts) {
    if (opts.step == 0) {
        throw ConfigError("frame: step must be >= 1");
    }
    if (opts.window_len == 0) {
        throw ConfigError("frame: window_len must be >= 1");
    }
    // Group per user in order of first appearance, preserving sample order.
    std::vector<int32_t> user_order;
    std::map<int32_t, std::vector<const AccelSample*>> per_user;
    for (const auto& s : samples) {
        auto [it, inserted] = per_user.try_emplace(s.user_id);
        if (inserted) user_order.push_back(s.user_id);
        it->second.push_back(&s);
    }

    std::vector<ActivityWindow> windows;
    for (int32_t user : user_order) {
        const auto& stream = per_user[user];
        const int64_t period = opts.nominal_period > 0
                                   ? opts.nominal_period
                                   : median_positive_delta(stream);
        // Runs of one label with continuous timestamps.
        size_t run_start = 0;
        auto flush_run = [&](size_t begin, size_t end) {
            const size_t len = end - begin;
            if (len < opts.window_len) return;
            for (size_t off = 0; off + opts.window_len <= len;
                 off += opts.step) {
                ActivityWindow w;
                w.label = stream[begin]->label;
                w.user_id = user;
                for (auto& ch : w.channels) ch.resize(opts.window_len);
                for (size_t i = 0; i < opts.window_len; ++i) {
                    const AccelSample& s = *stream[begin + off + i];
                    w.channels[0][i] = s.x;
                    w.channels[1][i] = s.y;
                    w.channels[2][i] = s.z;
                }
                windows.push_back(std::move(w));
            }
        };
        for (size_t i = 1; i < stream.size(); ++i) {
            const int64_t delta = stream[i]->timestamp - stream[i - 1]->timestamp;
            const bool gap = delta <= 0 || (period > 0 && delta > 2 * period);
            if (stream[i]->label != stream[run_start]->label || gap) {
                flush_run(run_start, i);
                run_start = i;
            }
        }
        flush_run(run_start, stream.size());
    }
    return windows;
}

namespace {

// Hann window and DFT basis tables for one window length, built once per
// length per thread.
struct DftTables {
    size_t n = 0;
    std::vector<double> hann;
    std::vector<double> cos_table; // [k * n + i]
    std::vector<double> sin_table;
};

const DftTables& dft_tables(size_t n) {
    thread_local DftTables tables;
    if (tables.n == n) return tables;
    tables.n = n;
    tables.hann.resize(n);
    for (size_t i = 0; i < n; ++i) {
        tables.hann[i] =
            n == 1 ? 1.0
                   : 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi *
                                           static_cast<double>(i) /
                                           static_cast<double>(n - 1)));
    }
    const size_t bins = spectrogram_bins(n);
    tables.cos_table.resize(bins * n);
    tables.sin_table.resize(bins * n);
    for (size_t k = 0; k < bins; ++k) {
        for (size_t i = 0; i < n; ++i) {
            const double angle = 2.0 * std::numbers::pi *
                                 static_cast<double>(k) *
                                 static_cast<double>(i) /
                                 static_cast<double>(n);
            tables.cos_table[k * n + i] = std::cos(angle);
            tables.sin_table[k * n + i] = std::sin(angle);
        }
    }
    return tables;
}

} // namespace

std::vector<float> spectrogram_channel(std::span<const float> samples) {
    const size_t n = samples.size();
    if (n == 0) {
        throw ShapeError("spectrogram: empty channel");
    }
    const DftTables& t = dft_tables(n);
    double mean = 0.0;
    for (float v : samples) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> d(n);
    for (size_t i = 0; i < n; ++i) {
        d[i] = (static_cast<double>(samples[i]) - mean) * t.hann[i];
    }
    const size_t bins = spectrogram_bins(n);
    std::vector<float> out(bins);
    for (size_t k = 0; k < bins; ++k) {
        const double* ck = t.cos_table.data() + k * n;
        const double* sk = t.sin_table.data() + k * n;
        double re = 0.0;
        double im = 0.0;
        for (size_t i = 0; i < n; ++i) {
            re += d[i] * ck[i];
            im -= d[i] * sk[i];
        }
        out[k] = static_cast<float>(std::log1p(std::sqrt(re * re + im * im)));
    }
    return out;
}

std::vector<float> spectrogram(const ActivityWindow& w) {
    const size_t n = w.window_len();
    for (const auto& ch : w.channels) {
        if (ch.size() != n) {
            throw ShapeError("spectrogram: channels have unequal lengths");
        }
    }
    std::vector<float> features;
    features.reserve(3 * spectrogram_bins(n));
    for (const auto& ch : w.channels) {
        const auto part = spectrogram_channel(ch);
        features.insert(features.end(), part.begin(), part.end());
    }
    return features;
}

std::array<float, 9> stat_features(const ActivityWindow& w) {
    std::array<float, 9> out{};
    for (size_t c = 0; c < 3; ++c) {
        const auto& ch = w.channels[c];
        double mean = 0.0;
        double energy = 0.0;
        for (float v : ch) {
            mean += v;
            energy += static_cast<double>(v) * v;
        }
        const double n = static_cast<double>(ch.size());
        mean /= n;
        energy /= n;
        double var = 0.0;
        for (float v : ch) {
            const double d = v - mean;
            var += d * d;
        }
        var /= n;
        out[c * 3 + 0] = static_cast<float>(mean);
        out[c * 3 + 1] = static_cast<float>(std::sqrt(var));
        out[c * 3 + 2] = static_cast<float>(energy);
    }
    return out;
}

Dataset windows_to_dataset(const std::vector<ActivityWindow>& windows,
                           uint32_t label_count) {
    Dataset ds;
    ds.label_count = label_count;
    if (windows.empty()) return ds;
    const size_t n = windows.front().window_len();
    const size_t feat_len = 3 * spectrogram_bins(n);
    ds.features = Matrix(windows.size(), feat_len);
    ds.labels.resize(windows.size());
    ds.user_ids.resize(windows.size());
    for (size_t i = 0; i < windows.size(); ++i) {
        if (windows[i].window_len() != n) {
            throw ShapeError("windows_to_dataset: mixed window lengths");
        }
        const auto feat = spectrogram(windows[i]);
        std::copy(feat.begin(), feat.end(),
                  ds.features.values.begin() + static_cast<long>(i * feat_len));
        ds.labels[i] = windows[i].label;
        ds.user_ids[i] = windows[i].user_id;
    }
    return ds;
}

Scaler fit_scaler(const Matrix& train_features) {
    if (train_features.rows == 0) {
        throw DomainError("fit_scaler: empty training features");
    }
    Scaler s;
    s.mins.assign(train_features.cols, std::numeric_limits<float>::infinity());
    s.maxs.assign(train_features.cols, -std::numeric_limits<float>::infinity());
    for (size_t i = 0; i < train_features.rows; ++i) {
        const float* row = train_features.values.data() + i * train_features.cols;
        for (size_t j = 0; j < train_features.cols; ++j) {
            s.mins[j] = std::min(s.mins[j], row[j]);
            s.maxs[j] = std::max(s.maxs[j], row[j]);
        }
    }
    return s;
}

void apply_scaler(const Scaler& s, Matrix& features) {
    if (s.size() != features.cols) {
        throw ShapeError("apply_scaler: scaler has " + std::to_string(s.size()) +
                         " dims, features have " + std::to_string(features.cols));
    }
    for (size_t i = 0; i < features.rows; ++i) {
        float* row = features.values.data() + i * features.cols;
        for (size_t j = 0; j < features.cols; ++j) {
            const float range = s.maxs[j] - s.mins[j];
            if (range <= 0.0f) {
                row[j] = 0.5f;
            } else {
                row[j] = std::clamp((row[j] - s.mins[j]) / range, 0.0f, 1.0f);
            }
        }
    }
}

namespace {

Dataset take_rows(const Dataset& ds, std::span<const uint32_t> idx) {
    Dataset out;
    out.label_count = ds.label_count;
    out.features = gather_rows(ds.features, idx);
    out.labels.resize(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) out.labels[i] = ds.labels[idx[i]];
    if (!ds.user_ids.empty()) {
        out.user_ids.resize(idx.size());
        for (size_t i = 0; i < idx.size(); ++i) {
            out.user_ids[i] = ds.user_ids[idx[i]];
        }
    }
    return out;
}

} // namespace

SplitResult split_dataset(const Dataset& ds, double test_fraction,
                          uint64_t seed) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0) {
        throw ConfigError("test_fraction must be in (0, 1)");
    }
    std::vector<uint32_t> order(ds.rows());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);
    Rng rng(mix_seed(seed, 0x53504c4954ULL));
    rng.shuffle(order);
    const size_t n_test = static_cast<size_t>(
        std::llround(test_fraction * static_cast<double>(ds.rows())));
    SplitResult result;
    result.test = take_rows(ds, std::span<const uint32_t>(order.data(), n_test));
    result.train = take_rows(
        ds, std::span<const uint32_t>(order.data() + n_test, order.size() - n_test));
    return result;
}

WindowSplitResult split_windows(const std::vector<ActivityWindow>& windows,
                                double test_fraction, uint64_t seed,
                                bool by_user) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0) {
        throw ConfigError("test_fraction must be in (0, 1)");
    }
    WindowSplitResult result;
    if (by_user) {
        std::vector<int32_t> users;
        for (const auto& w : windows) {
            if (std::find(users.begin(), users.end(), w.user_id) == users.end()) {
                users.push_back(w.user_id);
            }
        }
        if (users.size() < 2) {
            throw ConfigError("by_user split requires at least 2 users");
        }
        Rng rng(mix_seed(seed, 0x55534552ULL));
        rng.shuffle(users);
        const size_t target = static_cast<size_t>(
            std::llround(test_fraction * static_cast<double>(windows.size())));
        std::vector<int32_t> test_users;
        size_t assigned = 0;
        for (int32_t u : users) {
            if (assigned >= target || test_users.size() + 1 >= users.size()) break;
            test_users.push_back(u);
            for (const auto& w : windows) {
                if (w.user_id == u) ++assigned;
            }
        }
        for (const auto& w : windows) {
            const bool in_test = std::find(test_users.begin(), test_users.end(),
                                           w.user_id) != test_users.end();
            (in_test ? result.test : result.train).push_back(w);
        }
        return result;
    }
    std::vector<uint32_t> order(windows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);
    Rng rng(mix_seed(seed, 0x53504c4954ULL));
    rng.shuffle(order);
    const size_t n_test = static_cast<size_t>(
        std::llround(test_fraction * static_cast<double>(windows.size())));
    for (size_t i = 0; i < order.size(); ++i) {
        (i < n_test ? result.test : result.train).push_back(windows[order[i]]);
    }
    return result;
}

namespace {

struct SynthClass {
    size_t bin;        // dominant tone bin within a 200-sample window
    float amplitude;   // x-channel amplitude; y and z are scaled copies
};

// Active classes carry high-frequency, high-amplitude tones; static
// classes low-frequency, low-amplitude ones. Sitting and standing are
// nearly identical in amplitude but far apart in frequency, so frequency
// features separate them while plain statistics struggle once noise is
// added.
constexpr SynthClass kSynthClasses[6] = {
    {15, 1.4f}, // walking
    {25, 2.2f}, // jogging
    {35, 1.8f}, // climbing stairs
    {2, 0.40f}, // sitting
    {6, 0.44f}, // standing
    {10, 0.7f}, // lying down
};

constexpr int64_t kSynthPeriodNs = 50'000'000; // 20 Hz
constexpr float kGravity = 9.80665f;

} // namespace

size_t synth_class_bin(size_t klass) {
    if (klass >= 6) throw DomainError("synthetic class index must be 0..5");
    return kSynthClasses[klass].bin;
}

std::vector<AccelSample> synth_generate(size_t n_per_class, uint64_t seed,
                                        float noise_sigma) {
    if (n_per_class == 0) {
        throw DomainError("n_per_class must be >= 1");
    }
    if (noise_sigma < 0.0f) {
        throw DomainError("noise_sigma must be >= 0");
    }
    Rng rng(mix_seed(seed, 0x53594e5448ULL));
    std::vector<AccelSample> samples;
    samples.reserve(n_per_class * 6 * kDefaultWindowLen);
    const double n = static_cast<double>(kDefaultWindowLen);
    for (size_t klass = 0; klass < 6; ++klass) {
        const SynthClass& sc = kSynthClasses[klass];
        const int64_t user_base =
            static_cast<int64_t>(klass) * 1'000'000'000'000'000LL;
        // An 11-period pause between bursts keeps windows from spanning
        // two bursts when framed with the default gap rule.
        const int64_t burst_stride =
            static_cast<int64_t>(kDefaultWindowLen + 11) * kSynthPeriodNs;
        for (size_t burst = 0; burst < n_per_class; ++burst) {
            const float phase =
                rng.uniform_float() * 2.0f * std::numbers::pi_v<float>;
            const int64_t t0 =
                user_base + static_cast<int64_t>(burst) * burst_stride;
            for (size_t i = 0; i < kDefaultWindowLen; ++i) {
                const double omega = 2.0 * std::numbers::pi *
                                     static_cast<double>(sc.bin) *
                                     static_cast<double>(i) / n;
                const double omega2 = 2.0 * omega;
                AccelSample s;
                s.timestamp = t0 + static_cast<int64_t>(i) * kSynthPeriodNs;
                s.user_id = static_cast<int32_t>(klass);
                s.label = static_cast<int32_t>(klass);
                s.x = sc.amplitude * static_cast<float>(std::sin(omega + phase));
                s.y = 0.8f * sc.amplitude *
                      static_cast<float>(std::sin(omega + phase + 1.3));
                s.z = kGravity + 0.6f * sc.amplitude *
                                     static_cast<float>(std::sin(omega2 + phase + 2.1));
                if (noise_sigma > 0.0f) {
                    s.x += noise_sigma * rng.normal();
                    s.y += noise_sigma * rng.normal();
                    s.z += noise_sigma * rng.normal();
                }
                samples.push_back(s);
            }
        }
    }
    return samples;
}

void save_dataset_cache(const Dataset& ds, const std::string& path) {
    binio::Writer w(path);
    w.magic("SHARDSET1");
    w.u32(static_cast<uint32_t>(ds.feature_len()));
    w.u64(ds.rows());
    w.u32(ds.label_count);
    for (size_t i = 0; i < ds.rows(); ++i) {
        w.f32_span(ds.features.row(i));
        w.i32(ds.labels[i]);
    }
    w.close();
}

Dataset load_dataset_cache(const std::string& path) {
    binio::Reader r(path);
    r.expect_magic("SHARDSET1");
    const uint32_t feature_len = r.u32();
    const uint64_t rows = r.u64();
    const uint32_t label_count = r.u32();
    Dataset ds;
    ds.label_count = label_count;
    ds.features = Matrix(rows, feature_len);
    ds.labels.resize(rows);
    for (size_t i = 0; i < rows; ++i) {
        r.f32_span(ds.features.row(i));
        ds.labels[i] = r.i32();
    }
    return ds;
}

} // namespace shardnet
