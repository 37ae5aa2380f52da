#ifndef RPLCIL_GBDT_HPP
#define RPLCIL_GBDT_HPP

#include <array>
#include <vector>

#include "rplcil/features.hpp"
#include "rplcil/losses.hpp"
#include "rplcil/train_config.hpp"

namespace rplcil {

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0; // leaf payload

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    double predict(const std::array<double, kNumFeatures>& x) const;
    bool operator==(const RegressionTree&) const = default;
};

// Logistic-loss gradient boosting over exact greedy variance-gain trees.
// The tree list is append-only across warm starts.
struct GbdtModel {
    double base_score = 0.0; // initial log-odds
    double learning_rate = 0.1;
    int max_depth = 4;
    std::vector<RegressionTree> trees;

    double margin(const std::array<double, kNumFeatures>& x) const;
};

struct Prediction {
    double prob_malicious = 0.5;
    LogitPair logits;
};

GbdtModel gbdt_train(const WindowedDataset& data, const TrainConfig& cfg);
Prediction gbdt_predict(const GbdtModel& model, const FeatureVector& x);

// Appends cfg.n_rounds trees fit to the current ensemble's residuals on
// new_data; existing trees and base_score are untouched.
GbdtModel gbdt_warm_start(const GbdtModel& model, const WindowedDataset& new_data,
                          const TrainConfig& cfg);

} // namespace rplcil

#endif
