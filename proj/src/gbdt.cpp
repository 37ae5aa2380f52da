#include "rplcil/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rplcil {

namespace {

constexpr int kMinLeafSamples = 2;
constexpr double kHessianEps = 1e-6;
constexpr double kMaxLeafValue = 10.0;
constexpr double kMinGain = 1e-12;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct BuildContext {
    const std::vector<std::array<double, kNumFeatures>>& x;
    const std::vector<double>& grad; // negative gradients (residuals)
    const std::vector<double>& hess;
    int max_depth;
    std::vector<std::pair<double, int>> scratch; // reused sort buffer
};

double leaf_value(const BuildContext& ctx, const std::vector<int>& idx) {
    double g = 0.0, h = 0.0;
    for (int i : idx) {
        g += ctx.grad[i];
        h += ctx.hess[i];
    }
    const double v = g / (h + kHessianEps);
    return std::clamp(v, -kMaxLeafValue, kMaxLeafValue);
}

struct SplitChoice {
    bool found = false;
    int feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

// Exact greedy search maximizing the variance gain of the residuals,
// sum_L^2/n_L + sum_R^2/n_R - sum^2/n. Ties prefer the lower feature index,
// then the lower threshold.
SplitChoice best_split(BuildContext& ctx, const std::vector<int>& idx) {
    SplitChoice best;
    const auto n = idx.size();
    if (n < 2 * kMinLeafSamples) return best;

    double total = 0.0;
    for (int i : idx) total += ctx.grad[i];
    const double parent_score = total * total / static_cast<double>(n);

    auto& order = ctx.scratch;
    order.resize(n);
    for (int f = 0; f < kNumFeatures; ++f) {
        for (std::size_t k = 0; k < n; ++k) order[k] = {ctx.x[idx[k]][f], idx[k]};
        std::sort(order.begin(), order.end());

        double left_sum = 0.0;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            left_sum += ctx.grad[order[k].second];
            if (order[k].first == order[k + 1].first) continue; // no boundary here
            const auto n_left = k + 1;
            const auto n_right = n - n_left;
            if (n_left < kMinLeafSamples || n_right < kMinLeafSamples) continue;
            const double right_sum = total - left_sum;
            const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                                right_sum * right_sum / static_cast<double>(n_right) - parent_score;
            // Candidates arrive in (feature, threshold) ascending order, so
            // requiring a strict improvement realizes the tie-breaking rule.
            if (gain > best.gain + kMinGain) {
                best.found = true;
                best.feature = f;
                best.threshold = 0.5 * (order[k].first + order[k + 1].first);
                best.gain = gain;
            }
        }
    }
    return best;
}

int build_node(RegressionTree& tree, BuildContext& ctx, std::vector<int> idx, int depth) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    SplitChoice split;
    if (depth < ctx.max_depth) split = best_split(ctx, idx);
    if (!split.found) {
        tree.nodes[node_id].value = leaf_value(ctx, idx);
        return node_id;
    }

    std::vector<int> left_idx, right_idx;
    left_idx.reserve(idx.size());
    for (int i : idx) (ctx.x[i][split.feature] <= split.threshold ? left_idx : right_idx).push_back(i);
    idx.clear();

    const int left = build_node(tree, ctx, std::move(left_idx), depth + 1);
    const int right = build_node(tree, ctx, std::move(right_idx), depth + 1);
    tree.nodes[node_id].feature = split.feature;
    tree.nodes[node_id].threshold = split.threshold;
    tree.nodes[node_id].left = left;
    tree.nodes[node_id].right = right;
    return node_id;
}

void boost_rounds(GbdtModel& model, const std::vector<std::array<double, kNumFeatures>>& x,
                  const std::vector<double>& y, int rounds) {
    const auto n = x.size();
    std::vector<double> margin(n);
    for (std::size_t i = 0; i < n; ++i) margin[i] = model.margin(x[i]);

    std::vector<double> grad(n), hess(n);
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (int round = 0; round < rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margin[i]);
            grad[i] = y[i] - p;
            hess[i] = std::max(p * (1.0 - p), 1e-12);
        }
        RegressionTree tree;
        BuildContext ctx{x, grad, hess, model.max_depth, {}};
        build_node(tree, ctx, all, 0);
        for (std::size_t i = 0; i < n; ++i) margin[i] += model.learning_rate * tree.predict(x[i]);
        model.trees.push_back(std::move(tree));
    }
}

std::vector<std::array<double, kNumFeatures>> to_matrix(const WindowedDataset& data) {
    std::vector<std::array<double, kNumFeatures>> x;
    x.reserve(data.rows.size());
    for (const DatasetRow& row : data.rows) x.push_back(row.features.to_array());
    return x;
}

std::vector<double> to_targets(const WindowedDataset& data) {
    std::vector<double> y;
    y.reserve(data.rows.size());
    for (const DatasetRow& row : data.rows) y.push_back(row.label);
    return y;
}

} // namespace

double RegressionTree::predict(const std::array<double, kNumFeatures>& x) const {
    int node = 0;
    while (!nodes[node].is_leaf())
        node = x[nodes[node].feature] <= nodes[node].threshold ? nodes[node].left : nodes[node].right;
    return nodes[node].value;
}

double GbdtModel::margin(const std::array<double, kNumFeatures>& x) const {
    double acc = 0.0;
    for (const RegressionTree& tree : trees) acc += tree.predict(x);
    return base_score + learning_rate * acc;
}

GbdtModel gbdt_train(const WindowedDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.rows.size() < 2) throw DataError("gbdt_train needs at least 2 rows");
    std::size_t n_pos = 0;
    for (const DatasetRow& row : data.rows) n_pos += row.label == 1;
    if (n_pos == 0 || n_pos == data.rows.size())
        throw DataError("gbdt_train needs both classes present");

    GbdtModel model;
    model.learning_rate = cfg.learning_rate_gbdt;
    model.max_depth = cfg.max_depth;
    const double prevalence = static_cast<double>(n_pos) / static_cast<double>(data.rows.size());
    model.base_score = std::log(prevalence / (1.0 - prevalence));

    boost_rounds(model, to_matrix(data), to_targets(data), cfg.n_rounds);
    return model;
}

Prediction gbdt_predict(const GbdtModel& model, const FeatureVector& x) {
    const double z = model.margin(x.to_array());
    Prediction pred;
    pred.prob_malicious = sigmoid(z);
    pred.logits = LogitPair{0.0, z};
    return pred;
}

GbdtModel gbdt_warm_start(const GbdtModel& model, const WindowedDataset& new_data,
                          const TrainConfig& cfg) {
    cfg.validate();
    if (new_data.rows.empty()) throw DataError("gbdt_warm_start needs nonempty data");
    GbdtModel updated = model;
    boost_rounds(updated, to_matrix(new_data), to_targets(new_data), cfg.n_rounds);
    return updated;
}

} // namespace rplcil
