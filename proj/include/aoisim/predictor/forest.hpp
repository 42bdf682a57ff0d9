#ifndef AOISIM_PREDICTOR_FOREST_HPP
#define AOISIM_PREDICTOR_FOREST_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "aoisim/predictor/dataset.hpp"

namespace aoisim {

struct ForestConfig {
    int trees = 50;
    int max_depth = 10;
    int min_samples_split = 4;
    bool bootstrap = true;
    /// Features tried per split; 0 means all (exhaustive search).
    int features_per_split = 0;
    std::uint64_t seed = 1;
};

/// Bootstrap-aggregated regression trees. Splits minimize the summed
/// child variance (SSE); leaves predict the sample mean.
class RegressionForest {
public:
    struct Node {
        bool leaf = true;
        int feature = -1;
        double threshold = 0.0;
        double value = 0.0;   // leaf mean
        int left = -1;
        int right = -1;
    };

    struct Tree {
        std::vector<Node> nodes;

        double predict(const std::vector<double>& f) const {
            int idx = 0;
            while (!nodes[static_cast<std::size_t>(idx)].leaf) {
                const Node& n = nodes[static_cast<std::size_t>(idx)];
                idx = f[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
            }
            return nodes[static_cast<std::size_t>(idx)].value;
        }
    };

    static RegressionForest train(const std::vector<FeatureWindow>& inputs,
                                  const std::vector<double>& targets,
                                  const ForestConfig& config) {
        if (inputs.empty() || inputs.size() != targets.size())
            throw SimError("forest: empty or mismatched dataset");
        if (config.trees < 1) throw SimError("forest: tree count must be >= 1");

        RegressionForest forest;
        forest.config_ = config;
        const std::size_t n = inputs.size();
        std::vector<std::vector<double>> features(n);
        for (std::size_t i = 0; i < n; ++i) features[i] = flatten_window(inputs[i]);

        std::mt19937_64 rng(config.seed);
        forest.trees_.reserve(static_cast<std::size_t>(config.trees));
        for (int t = 0; t < config.trees; ++t) {
            std::vector<std::size_t> sample(n);
            if (config.bootstrap) {
                std::uniform_int_distribution<std::size_t> pick(0, n - 1);
                for (auto& s : sample) s = pick(rng);
            } else {
                std::iota(sample.begin(), sample.end(), std::size_t{0});
            }
            Tree tree;
            grow(tree, features, targets, std::move(sample), 0, config, rng);
            forest.trees_.push_back(std::move(tree));
        }
        return forest;
    }

    /// Forest prediction is the mean of the individual tree predictions.
    double predict(const FeatureWindow& window) const {
        const auto f = flatten_window(window);
        double acc = 0.0;
        for (const auto& t : trees_) acc += t.predict(f);
        return acc / static_cast<double>(trees_.size());
    }

    const std::vector<Tree>& trees() const { return trees_; }
    const ForestConfig& config() const { return config_; }

    std::size_t parameter_count() const {
        std::size_t count = 0;
        for (const auto& t : trees_) count += t.nodes.size() * 2;  // threshold + value
        return count;
    }

    std::vector<Tree>& mutable_trees() { return trees_; }
    ForestConfig& mutable_config() { return config_; }

private:
    static int grow(Tree& tree, const std::vector<std::vector<double>>& features,
                    const std::vector<double>& targets, std::vector<std::size_t> idx,
                    int depth, const ForestConfig& config, std::mt19937_64& rng) {
        const int node_index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        double mean = 0.0;
        for (std::size_t i : idx) mean += targets[i];
        mean /= static_cast<double>(idx.size());
        tree.nodes.back().value = mean;

        if (depth >= config.max_depth ||
            static_cast<int>(idx.size()) < config.min_samples_split)
            return node_index;

        const std::size_t dim = features.front().size();
        std::vector<int> candidates(dim);
        std::iota(candidates.begin(), candidates.end(), 0);
        if (config.features_per_split > 0 &&
            config.features_per_split < static_cast<int>(dim)) {
            std::shuffle(candidates.begin(), candidates.end(), rng);
            candidates.resize(static_cast<std::size_t>(config.features_per_split));
            std::sort(candidates.begin(), candidates.end());
        }

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_sse = std::numeric_limits<double>::infinity();

        std::vector<std::size_t> order = idx;
        for (int feature : candidates) {
            const auto f = static_cast<std::size_t>(feature);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) {
                                 return features[a][f] < features[b][f];
                             });
            // Prefix sums let each candidate threshold be scored in O(1).
            double left_sum = 0.0, left_sq = 0.0;
            double right_sum = 0.0, right_sq = 0.0;
            for (std::size_t i : order) {
                right_sum += targets[i];
                right_sq += targets[i] * targets[i];
            }
            const std::size_t m = order.size();
            for (std::size_t k = 0; k + 1 < m; ++k) {
                const double y = targets[order[k]];
                left_sum += y;
                left_sq += y * y;
                right_sum -= y;
                right_sq -= y * y;
                const double a = features[order[k]][f];
                const double b = features[order[k + 1]][f];
                if (b <= a) continue;  // no separating threshold here
                const double nl = static_cast<double>(k + 1);
                const double nr = static_cast<double>(m - k - 1);
                const double sse = (left_sq - left_sum * left_sum / nl) +
                                   (right_sq - right_sum * right_sum / nr);
                if (sse < best_sse - 1e-12) {
                    best_sse = sse;
                    best_feature = feature;
                    best_threshold = 0.5 * (a + b);
                }
            }
        }

        if (best_feature < 0) return node_index;  // no variance-reducing split

        std::vector<std::size_t> left, right;
        for (std::size_t i : idx) {
            if (features[i][static_cast<std::size_t>(best_feature)] <= best_threshold)
                left.push_back(i);
            else
                right.push_back(i);
        }
        if (left.empty() || right.empty()) return node_index;

        const int l = grow(tree, features, targets, std::move(left), depth + 1, config, rng);
        const int r = grow(tree, features, targets, std::move(right), depth + 1, config, rng);
        Node& node = tree.nodes[static_cast<std::size_t>(node_index)];
        node.leaf = false;
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return node_index;
    }

    std::vector<Tree> trees_;
    ForestConfig config_;
};

}  // namespace aoisim

#endif  // AOISIM_PREDICTOR_FOREST_HPP
