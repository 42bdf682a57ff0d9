#ifndef AOISIM_PREDICTOR_DATASET_HPP
#define AOISIM_PREDICTOR_DATASET_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "aoisim/channel.hpp"
#include "aoisim/core.hpp"

namespace aoisim {

/// One predictor input: the last W cycles of (timestamp, relative speed,
/// observed AoI) for a node, oldest first.
struct WindowEntry {
    Millis timestamp = 0.0;
    double relative_speed = 0.0;
    Millis aoi = 0.0;
};

struct FeatureWindow {
    std::vector<WindowEntry> entries;

    void validate() const {
        for (std::size_t i = 1; i < entries.size(); ++i)
            if (entries[i].timestamp <= entries[i - 1].timestamp)
                throw SimError("feature window: timestamps must be strictly increasing");
    }
};

constexpr int kFeaturesPerStep = 3;

/// Flattens a window into the (t, v, aoi)*W feature layout shared by every
/// model kind.
inline std::vector<double> flatten_window(const FeatureWindow& window) {
    std::vector<double> out;
    out.reserve(window.entries.size() * kFeaturesPerStep);
    for (const auto& e : window.entries) {
        out.push_back(e.timestamp);
        out.push_back(e.relative_speed);
        out.push_back(e.aoi);
    }
    return out;
}

/// Supervised examples: window -> AoI observed `horizon` cycles after the
/// window's end. Split is chronological.
struct SupervisedDataset {
    int window = 0;
    int horizon = 0;
    std::vector<FeatureWindow> train_inputs;
    std::vector<double> train_targets;
    std::vector<FeatureWindow> test_inputs;
    std::vector<double> test_targets;

    std::size_t train_size() const { return train_inputs.size(); }
    std::size_t test_size() const { return test_inputs.size(); }
};

/// Per-feature standardization constants, fit on training data only.
struct FeatureScaler {
    std::vector<double> mean;  // per flattened feature
    std::vector<double> stdev;
    double target_mean = 0.0;
    double target_stdev = 1.0;

    static FeatureScaler fit(const std::vector<FeatureWindow>& inputs,
                             const std::vector<double>& targets) {
        if (inputs.empty()) throw SimError("scaler: empty dataset");
        const std::size_t dim = inputs.front().entries.size() * kFeaturesPerStep;
        FeatureScaler s;
        s.mean.assign(dim, 0.0);
        s.stdev.assign(dim, 0.0);
        for (const auto& w : inputs) {
            const auto f = flatten_window(w);
            for (std::size_t j = 0; j < dim; ++j) s.mean[j] += f[j];
        }
        for (double& m : s.mean) m /= static_cast<double>(inputs.size());
        for (const auto& w : inputs) {
            const auto f = flatten_window(w);
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = f[j] - s.mean[j];
                s.stdev[j] += d * d;
            }
        }
        for (double& v : s.stdev) {
            v = std::sqrt(v / static_cast<double>(inputs.size()));
            if (v < 1e-12) v = 1.0;  // constant feature
        }
        double tm = 0.0;
        for (double t : targets) tm += t;
        tm /= static_cast<double>(targets.size());
        double tv = 0.0;
        for (double t : targets) tv += (t - tm) * (t - tm);
        s.target_mean = tm;
        s.target_stdev = std::sqrt(tv / static_cast<double>(targets.size()));
        if (s.target_stdev < 1e-12) s.target_stdev = 1.0;
        return s;
    }

    std::vector<double> transform(const FeatureWindow& w) const {
        auto f = flatten_window(w);
        if (f.size() != mean.size()) throw SimError("scaler: window length mismatch");
        for (std::size_t j = 0; j < f.size(); ++j) f[j] = (f[j] - mean[j]) / stdev[j];
        return f;
    }

    double scale_target(double y) const { return (y - target_mean) / target_stdev; }
    double unscale_target(double y) const { return y * target_stdev + target_mean; }
};

/// Builds sliding-window examples from per-node trace rows and splits them
/// chronologically. `train_ratio` 8 means 8:1 train:test (the last ninth of
/// each node's timeline is held out).
inline SupervisedDataset make_dataset(const std::vector<TraceRow>& rows, int window,
                                      int horizon, double train_ratio = 8.0) {
    if (window < 1) throw SimError("make_dataset: window must be >= 1");
    if (horizon < 1) throw SimError("make_dataset: horizon must be >= 1");
    if (train_ratio <= 0.0) throw SimError("make_dataset: train ratio must be > 0");

    std::map<NodeId, std::vector<TraceRow>> per_node;
    for (const auto& r : rows) per_node[r.node_id].push_back(r);

    SupervisedDataset ds;
    ds.window = window;
    ds.horizon = horizon;
    bool any = false;
    for (auto& [id, series] : per_node) {
        std::stable_sort(series.begin(), series.end(),
                         [](const TraceRow& a, const TraceRow& b) { return a.cycle < b.cycle; });
        const int n = static_cast<int>(series.size());
        if (n < window + horizon) continue;
        any = true;
        const int examples = n - window - horizon + 1;
        // Chronological split on the node's timeline: the first
        // ratio/(ratio+1) of its timestamps train, the rest test. An
        // example lands where its target timestamp lands.
        const int split_row = static_cast<int>(
            std::floor(static_cast<double>(n) * train_ratio / (train_ratio + 1.0) + 1e-9));
        for (int i = 0; i < examples; ++i) {
            FeatureWindow w;
            w.entries.reserve(window);
            for (int k = 0; k < window; ++k) {
                const TraceRow& r = series[i + k];
                w.entries.push_back({r.time_ms, r.rel_speed_mps, r.aoi_ms});
            }
            const int target_row = i + window + horizon - 1;
            const double target = series[target_row].aoi_ms;
            if (target_row < split_row) {
                ds.train_inputs.push_back(std::move(w));
                ds.train_targets.push_back(target);
            } else {
                ds.test_inputs.push_back(std::move(w));
                ds.test_targets.push_back(target);
            }
        }
    }
    if (!any) throw SimError("make_dataset: no node trace is long enough for window + horizon");
    return ds;
}

}  // namespace aoisim

#endif  // AOISIM_PREDICTOR_DATASET_HPP
