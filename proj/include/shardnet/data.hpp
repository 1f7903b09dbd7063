#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shardnet/matrix.hpp"

namespace shardnet {

inline constexpr int32_t kUnlabeled = -1;

// One triaxial accelerometer reading. label is kUnlabeled when the source
// row carried no recognizable activity.
struct AccelSample {
    int64_t timestamp = 0;
    float x = 0.0f;
    float y = 0.0f;
    float z = 0.0f;
    int32_t user_id = 0;
    int32_t label = kUnlabeled;
};

// A framed stretch of window_len samples per channel, never spanning two
// users or a label change.
struct ActivityWindow {
    std::array<std::vector<float>, 3> channels; // x, y, z
    int32_t label = kUnlabeled;
    int32_t user_id = 0;

    size_t window_len() const { return channels[0].size(); }
};

// Ordered activity names; index is the label value.
struct LabelSet {
    std::vector<std::string> names;

    size_t size() const { return names.size(); }
    // Case-insensitive match on names and common aliases; kUnlabeled when
    // the string is unknown.
    int32_t resolve(const std::string& activity) const;

    static LabelSet default_activities();
};

// Featurized rows ready for training. labels[i] == kUnlabeled marks rows
// usable for pretraining only. user_ids is carried only for in-memory
// datasets built from windows; it is empty after a cache reload.
struct Dataset {
    Matrix features;
    std::vector<int32_t> labels;
    uint32_t label_count = 0;
    std::vector<int32_t> user_ids;

    size_t rows() const { return features.rows; }
    size_t feature_len() const { return features.cols; }
};

struct CsvLoadResult {
    std::vector<AccelSample> samples;
    size_t malformed_rows = 0;
    size_t parsed_rows = 0;
};

// Reads user,activity,timestamp,x,y,z rows (a trailing ';' is tolerated,
// .gz input is handled transparently). Malformed rows are counted and
// skipped; more than 50% malformed raises FormatError.
CsvLoadResult load_actitracker_csv(const std::string& path,
                                   const LabelSet& labels = LabelSet::default_activities());

struct FrameOptions {
    size_t window_len = 200;
    size_t step = 100;
    // Nominal sample period in timestamp units; runs are split at gaps
    // larger than twice this. 0 derives it per user from the median delta.
    int64_t nominal_period = 0;
};

// Sliding windows over per-user runs of uniform label and continuous time.
std::vector<ActivityWindow> frame(const std::vector<AccelSample>& samples,
                                  const FrameOptions& opts = {});

inline constexpr size_t kDefaultWindowLen = 200;
inline size_t spectrogram_bins(size_t window_len) { return window_len / 2 + 1; }

// Per channel: mean-subtract, Hann window, real DFT magnitudes for bins
// 0..window_len/2, log(1+m); channels concatenated. Length 3*(n/2+1).
std::vector<float> spectrogram(const ActivityWindow& w);
std::vector<float> spectrogram_channel(std::span<const float> samples);

// Per-axis mean, standard deviation and mean-square energy (9 values);
// the handcrafted-feature stand-in used by the shallow baselines.
std::array<float, 9> stat_features(const ActivityWindow& w);

// Spectrogram features for every window; preserves labels and user ids.
Dataset windows_to_dataset(const std::vector<ActivityWindow>& windows,
                           uint32_t label_count);

// Per-dimension min-max scaling to [0,1]; fit on training data only.
struct Scaler {
    std::vector<float> mins;
    std::vector<float> maxs;

    size_t size() const { return mins.size(); }
};

Scaler fit_scaler(const Matrix& train_features);
// (x-min)/(max-min) clamped to [0,1]; a degenerate dimension maps to 0.5.
void apply_scaler(const Scaler& s, Matrix& features);

struct SplitResult {
    Dataset train;
    Dataset test;
};

// Seeded shuffle split; test gets round(fraction * rows) rows.
SplitResult split_dataset(const Dataset& ds, double test_fraction, uint64_t seed);

struct WindowSplitResult {
    std::vector<ActivityWindow> train;
    std::vector<ActivityWindow> test;
};

// Window-level split. With by_user no user appears on both sides; requires
// at least two distinct users.
WindowSplitResult split_windows(const std::vector<ActivityWindow>& windows,
                                double test_fraction, uint64_t seed,
                                bool by_user = false);

// Synthetic 6-class accelerometer stream at 20 Hz: each class is a
// distinct sinusoid frequency/amplitude mix plus Gaussian noise, emitted
// as bursts of exactly one window so framing yields n_per_class windows
// per class. Classes are separable in spectrogram space by construction.
std::vector<AccelSample> synth_generate(size_t n_per_class, uint64_t seed,
                                        float noise_sigma = 0.1f);

// The spectrogram bin carrying class k's dominant tone.
size_t synth_class_bin(size_t klass);
inline constexpr float kSynthSamplingHz = 20.0f;

// Dataset cache file I/O; byte-exact round trip.
void save_dataset_cache(const Dataset& ds, const std::string& path);
Dataset load_dataset_cache(const std::string& path);

} // namespace shardnet
