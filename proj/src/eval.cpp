#include "shardnet/eval.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "shardnet/errors.hpp"
#include "shardnet/pretrain.hpp"
#include "shardnet/rng.hpp"

namespace shardnet {

int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), int64_t{0});
}

int64_t ConfusionMatrix::trace() const {
    int64_t t = 0;
    for (uint32_t i = 0; i < n; ++i) t += at(i, i);
    return t;
}

EvalResult evaluate(const DeepModel& model, const Dataset& test) {
    if (test.rows() == 0) {
        throw DomainError("evaluate: empty test set");
    }
    const uint32_t n = model.label_count;
    EvalResult result;
    result.confusion = ConfusionMatrix(n);

    // Chunked forward pass to bound activation memory.
    constexpr size_t kChunk = 512;
    size_t wrong = 0;
    for (size_t begin = 0; begin < test.rows(); begin += kChunk) {
        const size_t end = std::min(test.rows(), begin + kChunk);
        std::vector<uint32_t> idx(end - begin);
        for (size_t i = 0; i < idx.size(); ++i) {
            idx[i] = static_cast<uint32_t>(begin + i);
        }
        const Matrix chunk = gather_rows(test.features, idx);
        const auto preds = predict(model, chunk);
        for (size_t i = 0; i < preds.size(); ++i) {
            const int32_t truth = test.labels[begin + i];
            if (truth < 0 || static_cast<uint32_t>(truth) >= n) {
                throw DomainError("evaluate: label " + std::to_string(truth) +
                                  " outside 0.." + std::to_string(n - 1));
            }
            result.confusion.at(static_cast<uint32_t>(truth),
                                static_cast<uint32_t>(preds[i])) += 1;
            if (preds[i] != truth) ++wrong;
        }
    }
    result.error_rate =
        static_cast<double>(wrong) / static_cast<double>(test.rows());
    return result;
}

NormalizedConfusion normalize(const ConfusionMatrix& cm) {
    NormalizedConfusion out;
    out.values = Matrix(cm.n, cm.n);
    out.zero_rows.assign(cm.n, 0);
    for (uint32_t i = 0; i < cm.n; ++i) {
        int64_t row_sum = 0;
        for (uint32_t j = 0; j < cm.n; ++j) row_sum += cm.at(i, j);
        if (row_sum == 0) {
            out.zero_rows[i] = 1;
            continue;
        }
        for (uint32_t j = 0; j < cm.n; ++j) {
            out.values(i, j) = static_cast<float>(
                static_cast<double>(cm.at(i, j)) / static_cast<double>(row_sum));
        }
    }
    return out;
}

void write_confusion_csv(const ConfusionMatrix& cm,
                         const std::vector<std::string>& label_names,
                         const std::string& path) {
    if (label_names.size() != cm.n) {
        throw ConfigError("confusion CSV: label name count does not match");
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "label";
    for (const auto& name : label_names) out << ',' << name;
    out << '\n';
    const NormalizedConfusion norm = normalize(cm);
    out.precision(6);
    out << std::fixed;
    for (uint32_t i = 0; i < cm.n; ++i) {
        out << label_names[i];
        for (uint32_t j = 0; j < cm.n; ++j) out << ',' << norm.values(i, j);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace {

struct FeatureTable {
    Matrix features;
    std::vector<int32_t> labels;
};

FeatureTable spectro_table(const std::vector<ActivityWindow>& windows) {
    FeatureTable t;
    if (windows.empty()) return t;
    const size_t feat_len = 3 * spectrogram_bins(windows.front().window_len());
    t.features = Matrix(windows.size(), feat_len);
    t.labels.resize(windows.size());
    for (size_t i = 0; i < windows.size(); ++i) {
        const auto f = spectrogram(windows[i]);
        std::copy(f.begin(), f.end(),
                  t.features.values.begin() + static_cast<long>(i * feat_len));
        t.labels[i] = windows[i].label;
    }
    return t;
}

FeatureTable stat_table(const std::vector<ActivityWindow>& windows) {
    FeatureTable t;
    t.features = Matrix(windows.size(), 9);
    t.labels.resize(windows.size());
    for (size_t i = 0; i < windows.size(); ++i) {
        const auto f = stat_features(windows[i]);
        std::copy(f.begin(), f.end(),
                  t.features.values.begin() + static_cast<long>(i * 9));
        t.labels[i] = windows[i].label;
    }
    return t;
}

double misclassification(std::span<const int32_t> preds,
                         std::span<const int32_t> truth) {
    size_t wrong = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] != truth[i]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(preds.size());
}

} // namespace

BaselineReport shallow_baselines(const std::vector<ActivityWindow>& train,
                                 const std::vector<ActivityWindow>& test,
                                 uint32_t label_count, uint64_t seed) {
    if (train.empty() || test.empty()) {
        throw DomainError("shallow_baselines: empty split");
    }
    BaselineReport report;
    report.test_size = test.size();

    // (a) Single-hidden-layer perceptron on the spectrogram features.
    FeatureTable tr = spectro_table(train);
    FeatureTable te = spectro_table(test);
    const Scaler scaler = fit_scaler(tr.features);
    apply_scaler(scaler, tr.features);
    apply_scaler(scaler, te.features);

    const size_t width = 64;
    DeepModel mlp = DeepModel::init(tr.features.cols,
                                    std::vector<size_t>{width}, label_count,
                                    mix_seed(seed, 0x4d4c50ULL));
    const uint32_t batch = 100;
    const uint32_t epochs = 30;
    const uint32_t steps = steps_per_pass(tr.features.rows, batch);
    for (uint32_t epoch = 0; epoch < epochs; ++epoch) {
        Rng rng(schedule_seed(mix_seed(seed, 0x4d4c50ULL), kStageFineTune, 0,
                              epoch, 0));
        run_supervised_steps(mlp, tr.features, tr.labels, steps, batch, 0.3f,
                             rng);
    }
    report.perceptron_error = misclassification(predict(mlp, te.features),
                                                te.labels);

    // (b) Nearest centroid on per-axis mean/std/energy, z-scored on train.
    FeatureTable str = stat_table(train);
    FeatureTable ste = stat_table(test);
    std::vector<double> mean(9, 0.0);
    std::vector<double> sd(9, 0.0);
    for (size_t i = 0; i < str.features.rows; ++i) {
        for (size_t j = 0; j < 9; ++j) mean[j] += str.features(i, j);
    }
    for (auto& m : mean) m /= static_cast<double>(str.features.rows);
    for (size_t i = 0; i < str.features.rows; ++i) {
        for (size_t j = 0; j < 9; ++j) {
            const double d = str.features(i, j) - mean[j];
            sd[j] += d * d;
        }
    }
    for (auto& v : sd) {
        v = std::sqrt(v / static_cast<double>(str.features.rows));
        if (v <= 0.0) v = 1.0;
    }
    auto zscore = [&](Matrix& m) {
        for (size_t i = 0; i < m.rows; ++i) {
            for (size_t j = 0; j < 9; ++j) {
                m(i, j) = static_cast<float>((m(i, j) - mean[j]) / sd[j]);
            }
        }
    };
    zscore(str.features);
    zscore(ste.features);

    Matrix centroids(label_count, 9);
    std::vector<size_t> class_counts(label_count, 0);
    for (size_t i = 0; i < str.features.rows; ++i) {
        const int32_t y = str.labels[i];
        if (y < 0 || static_cast<uint32_t>(y) >= label_count) {
            throw DomainError("shallow_baselines: label outside range");
        }
        ++class_counts[static_cast<size_t>(y)];
        for (size_t j = 0; j < 9; ++j) {
            centroids(static_cast<size_t>(y), j) += str.features(i, j);
        }
    }
    for (uint32_t k = 0; k < label_count; ++k) {
        if (class_counts[k] == 0) continue;
        for (size_t j = 0; j < 9; ++j) {
            centroids(k, j) /= static_cast<float>(class_counts[k]);
        }
    }
    std::vector<int32_t> preds(ste.features.rows);
    for (size_t i = 0; i < ste.features.rows; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int32_t best_k = 0;
        for (uint32_t k = 0; k < label_count; ++k) {
            if (class_counts[k] == 0) continue;
            double dist = 0.0;
            for (size_t j = 0; j < 9; ++j) {
                const double d = ste.features(i, j) - centroids(k, j);
                dist += d * d;
            }
            if (dist < best) {
                best = dist;
                best_k = static_cast<int32_t>(k);
            }
        }
        preds[i] = best_k;
    }
    report.centroid_error = misclassification(preds, ste.labels);
    return report;
}

} // namespace shardnet
