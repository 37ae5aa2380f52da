#ifndef RPLCIL_TESTS_ORACLES_HPP
#define RPLCIL_TESTS_ORACLES_HPP

// Independent reference implementations used to pin expected values. These
// deliberately avoid the library's code paths.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <vector>

namespace oracle {

// Plain BFS reachability count from node 0.
inline std::size_t reachable_from_root(const std::vector<std::vector<int>>& adj) {
    if (adj.empty()) return 0;
    std::vector<bool> seen(adj.size(), false);
    std::deque<int> q{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop_front();
        for (int v : adj[u]) {
            if (!seen[v]) {
                seen[v] = true;
                ++count;
                q.push_back(v);
            }
        }
    }
    return count;
}

// Follows parent pointers; true when every node reaches the root within
// max_steps hops.
inline bool all_reach_root(const std::vector<int>& parents, int root, int max_steps) {
    for (std::size_t i = 0; i < parents.size(); ++i) {
        int cur = static_cast<int>(i);
        int steps = 0;
        while (cur != root) {
            if (steps++ > max_steps) return false;
            cur = parents[static_cast<std::size_t>(cur)];
            if (cur < 0) return false;
        }
    }
    return true;
}

// O(n^2) pairwise AUC with half-credit ties.
inline double pairwise_auc(const std::vector<int>& labels, const std::vector<double>& probs) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (probs[i] > probs[j]) wins += 1.0;
            else if (probs[i] == probs[j]) wins += 0.5;
        }
    }
    return pairs > 0 ? wins / static_cast<double>(pairs) : 0.5;
}

// Central finite differences of f over a parameter vector.
template <class F>
std::vector<double> finite_difference_gradient(std::vector<double> params, F&& f, double h) {
    std::vector<double> grad(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double saved = params[k];
        params[k] = saved + h;
        const double up = f(params);
        params[k] = saved - h;
        const double down = f(params);
        params[k] = saved;
        grad[k] = (up - down) / (2.0 * h);
    }
    return grad;
}

// k-center objective: max over points of the distance to the nearest center.
inline double kcenter_objective(const std::vector<std::array<double, 2>>& pts,
                                const std::vector<std::size_t>& centers) {
    double worst = 0.0;
    for (const auto& p : pts) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c : centers) {
            const double dx = p[0] - pts[c][0];
            const double dy = p[1] - pts[c][1];
            best = std::min(best, dx * dx + dy * dy);
        }
        worst = std::max(worst, best);
    }
    return worst;
}

// Exhaustively searches the best k-subset containing `anchor`.
inline std::vector<std::size_t> best_kcenter_subset(const std::vector<std::array<double, 2>>& pts,
                                                    std::size_t anchor, std::size_t k) {
    const std::size_t n = pts.size();
    std::vector<std::size_t> best;
    double best_obj = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> pick;
    // enumerate subsets via bitmask; n is tiny in tests
    for (std::size_t mask = 0; mask < (1u << n); ++mask) {
        if (!(mask & (1u << anchor))) continue;
        pick.clear();
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) pick.push_back(i);
        if (pick.size() != k) continue;
        const double obj = kcenter_objective(pts, pick);
        if (obj < best_obj) {
            best_obj = obj;
            best = pick;
        }
    }
    return best;
}

} // namespace oracle

#endif
