#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "geoconform/datamodel.hpp"
#include "geoconform/features.hpp"
#include "geoconform/rng.hpp"

namespace geoconform {

struct GbtConfig {
    int n_estimators = 200;
    int max_depth = 8;
    double learning_rate = 0.1;
    double feature_fraction = 0.9;
    int min_samples_leaf = 20;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_estimators < 0) throw ContractError("gbt: n_estimators must be >= 0");
        if (max_depth < 1) throw ContractError("gbt: max_depth must be >= 1");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw ContractError("gbt: learning_rate must be positive");
        if (!(feature_fraction > 0.0) || feature_fraction > 1.0)
            throw ContractError("gbt: feature_fraction must be in (0, 1]");
        if (min_samples_leaf < 1) throw ContractError("gbt: min_samples_leaf must be >= 1");
    }

    bool operator==(const GbtConfig&) const = default;
};

struct GbtNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;  // leaf prediction
    int left = -1;
    int right = -1;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const GbtNode&) const = default;
};

struct GbtTree {
    std::vector<GbtNode> nodes;

    double predict_row(const double* row) const {
        int i = 0;
        while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
            const GbtNode& n = nodes[static_cast<std::size_t>(i)];
            i = row[n.feature] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }

    bool operator==(const GbtTree&) const = default;
};

struct GbtModel {
    double base_score = 0.0;
    GbtConfig config;
    std::vector<GbtTree> trees;
    std::vector<std::string> feature_names;
    std::size_t train_rows = 0;

    double predict_row(const double* row) const {
        double v = base_score;
        for (const auto& t : trees) v += config.learning_rate * t.predict_row(row);
        return v;
    }

    bool operator==(const GbtModel&) const = default;
};

namespace detail {

// One tree is fit level-by-level on residuals. Split search is exact greedy
// over sorted unique values, maximising the variance-reduction gain
//   sumL^2/nL + sumR^2/nR - sumT^2/nT,
// ties broken toward the lowest column index, then the lowest threshold
// (guaranteed by the strict ascending scan order).
class TreeBuilder {
public:
    TreeBuilder(const FeatureMatrix& x, const std::vector<double>& residual,
                const GbtConfig& cfg)
        : x_(x), residual_(residual), cfg_(cfg) {}

    // `columns` must be sorted ascending; `sorted` holds, per column, the
    // row indices ordered by that column's value.
    GbtTree build(const std::vector<int>& columns,
                  std::vector<std::vector<std::uint32_t>> sorted, std::vector<double>& f_train) {
        GbtTree tree;
        grow(tree, columns, std::move(sorted), 0, f_train);
        return tree;
    }

private:
    struct Split {
        double gain = 0.0;
        int column = -1;
        double threshold = 0.0;
        std::size_t feature_slot = 0;
    };

    int grow(GbtTree& tree, const std::vector<int>& columns,
             std::vector<std::vector<std::uint32_t>> sorted, int depth,
             std::vector<double>& f_train) {
        const auto& rows = sorted[0];
        const auto n = static_cast<double>(rows.size());
        double total = 0.0;
        for (auto r : rows) total += residual_[r];

        Split best;
        if (depth < cfg_.max_depth &&
            rows.size() >= 2 * static_cast<std::size_t>(cfg_.min_samples_leaf))
            best = find_split(columns, sorted, total);

        const int node_index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        if (best.column < 0) {
            const double value = total / n;
            tree.nodes[static_cast<std::size_t>(node_index)].value = value;
            for (auto r : rows) f_train[r] += cfg_.learning_rate * value;
            return node_index;
        }

        // Stable partition of every per-column ordering keeps children sorted.
        std::vector<std::vector<std::uint32_t>> left(sorted.size()), right(sorted.size());
        for (std::size_t s = 0; s < sorted.size(); ++s) {
            left[s].reserve(sorted[s].size());
            right[s].reserve(sorted[s].size());
            for (auto r : sorted[s]) {
                if (x_.at(r, static_cast<std::size_t>(best.column)) <= best.threshold)
                    left[s].push_back(r);
                else
                    right[s].push_back(r);
            }
        }
        sorted.clear();

        tree.nodes[static_cast<std::size_t>(node_index)].feature = best.column;
        tree.nodes[static_cast<std::size_t>(node_index)].threshold = best.threshold;
        const int l = grow(tree, columns, std::move(left), depth + 1, f_train);
        const int r = grow(tree, columns, std::move(right), depth + 1, f_train);
        tree.nodes[static_cast<std::size_t>(node_index)].left = l;
        tree.nodes[static_cast<std::size_t>(node_index)].right = r;
        return node_index;
    }

    Split find_split(const std::vector<int>& columns,
                     const std::vector<std::vector<std::uint32_t>>& sorted, double total) const {
        Split best;
        const std::size_t n = sorted[0].size();
        const auto min_leaf = static_cast<std::size_t>(cfg_.min_samples_leaf);
        const double nt = static_cast<double>(n);
        const double parent_score = total * total / nt;

        for (std::size_t s = 0; s < columns.size(); ++s) {
            const int col = columns[s];
            const auto& idx = sorted[s];
            double left_sum = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_sum += residual_[idx[i]];
                const double v = x_.at(idx[i], static_cast<std::size_t>(col));
                const double v_next = x_.at(idx[i + 1], static_cast<std::size_t>(col));
                if (!(v_next > v)) continue;
                const std::size_t nl = i + 1;
                const std::size_t nr = n - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(nl) +
                                    right_sum * right_sum / static_cast<double>(nr) -
                                    parent_score;
                if (gain > best.gain + 1e-12 && gain > 1e-12) {
                    best.gain = gain;
                    best.column = col;
                    best.threshold = v + 0.5 * (v_next - v);
                    best.feature_slot = s;
                }
            }
        }
        return best;
    }

    const FeatureMatrix& x_;
    const std::vector<double>& residual_;
    const GbtConfig& cfg_;
};

}  // namespace detail

/// Least-squares gradient boosting: F0 = mean(y), then each stage fits a
/// depth-limited regression tree to the residuals over a per-tree random
/// column subset of ceil(feature_fraction * n_features) features.
/// Deterministic given the config seed.
inline GbtModel train_gbt(const FeatureMatrix& x, const std::vector<double>& y,
                          const GbtConfig& config) {
    config.validate();
    if (x.n_rows != y.size()) throw ContractError("train_gbt: row/target length mismatch");
    if (x.n_rows < 2 * static_cast<std::size_t>(config.min_samples_leaf))
        throw ContractError("train_gbt: fewer rows than 2*min_samples_leaf");
    for (double v : x.data)
        if (!std::isfinite(v)) throw ContractError("train_gbt: non-finite feature");
    for (double v : y)
        if (!std::isfinite(v)) throw ContractError("train_gbt: non-finite target");

    const std::size_t n = x.n_rows;
    const std::size_t m = x.n_cols;

    GbtModel model;
    model.config = config;
    model.feature_names = x.column_names;
    model.train_rows = n;
    model.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

    // Column orderings depend only on X; computed once and reused per tree.
    std::vector<std::vector<std::uint32_t>> col_order(m);
    for (std::size_t c = 0; c < m; ++c) {
        auto& idx = col_order[c];
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), 0u);
        std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double va = x.at(a, c), vb = x.at(b, c);
            return va < vb || (va == vb && a < b);
        });
    }

    const auto n_sub = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(m),
                         std::ceil(config.feature_fraction * static_cast<double>(m))));

    std::vector<double> f_train(n, model.base_score);
    std::vector<double> residual(n);
    std::vector<int> all_cols(m);
    std::iota(all_cols.begin(), all_cols.end(), 0);

    model.trees.reserve(static_cast<std::size_t>(config.n_estimators));
    for (int t = 0; t < config.n_estimators; ++t) {
        for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - f_train[i];

        std::vector<int> cols = all_cols;
        if (n_sub < m) {
            rng::Engine eng(rng::mix(config.seed, 0x6274ULL * 1000003ULL +
                                                      static_cast<std::uint64_t>(t)));
            for (std::size_t i = 0; i < n_sub; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(eng.below(m - i));
                std::swap(cols[i], cols[j]);
            }
            cols.resize(n_sub);
            std::sort(cols.begin(), cols.end());
        }

        std::vector<std::vector<std::uint32_t>> sorted(cols.size());
        for (std::size_t s = 0; s < cols.size(); ++s)
            sorted[s] = col_order[static_cast<std::size_t>(cols[s])];

        detail::TreeBuilder builder(x, residual, config);
        model.trees.push_back(builder.build(cols, std::move(sorted), f_train));
    }
    return model;
}

}  // namespace geoconform
