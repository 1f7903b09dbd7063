#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shardnet/data.hpp"
#include "shardnet/early_stop.hpp"
#include "shardnet/matrix.hpp"
#include "shardnet/nn.hpp"

namespace shardnet {

// Row = true label, column = predicted label.
struct ConfusionMatrix {
    uint32_t n = 0;
    std::vector<int64_t> counts;

    explicit ConfusionMatrix(uint32_t labels = 0)
        : n(labels), counts(static_cast<size_t>(labels) * labels, 0) {}

    int64_t& at(uint32_t truth, uint32_t pred) {
        return counts[static_cast<size_t>(truth) * n + pred];
    }
    int64_t at(uint32_t truth, uint32_t pred) const {
        return counts[static_cast<size_t>(truth) * n + pred];
    }
    int64_t total() const;
    int64_t trace() const;
};

struct EvalResult {
    double error_rate = 0.0;
    ConfusionMatrix confusion;
};

// Misclassification rate and confusion counts of the model on a labeled
// test set. Rows with labels outside 0..N-1 raise DomainError.
EvalResult evaluate(const DeepModel& model, const Dataset& test);

struct NormalizedConfusion {
    Matrix values;                 // each nonzero row divided by its sum
    std::vector<uint8_t> zero_rows; // rows with no observations, left at zero
};

NormalizedConfusion normalize(const ConfusionMatrix& cm);

// Writes the normalized matrix as CSV with a header row of label names.
void write_confusion_csv(const ConfusionMatrix& cm,
                         const std::vector<std::string>& label_names,
                         const std::string& path);

struct BaselineReport {
    double perceptron_error = 0.0; // one hidden layer on spectrogram features
    double centroid_error = 0.0;   // nearest centroid on statistical features
    size_t test_size = 0;
};

// Lightweight conventional-method baselines trained and scored on the
// given window splits.
BaselineReport shallow_baselines(const std::vector<ActivityWindow>& train,
                                 const std::vector<ActivityWindow>& test,
                                 uint32_t label_count, uint64_t seed);

} // namespace shardnet
