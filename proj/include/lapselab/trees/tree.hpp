#pragma once

#include "lapselab/rng.hpp"
#include "lapselab/trees/binning.hpp"

#include "json.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>
#include <vector>

namespace lapselab::trees {

/// Internal node when feature >= 0: rows with x[feature] <= threshold (bin <=
/// split_bin on the training matrix) go left. Leaves carry `value`.
struct Node {
    int feature = -1;
    std::uint16_t split_bin = 0;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
};

/// Per-row sufficient statistics. Least squares: a = gradient, h = hessian.
/// Gini: a = label, h unused. w counts the row.
struct RowStat {
    double a = 0.0;
    double h = 0.0;
    double w = 1.0;
};

enum class Criterion { LeastSquares, Gini };

struct GrowOptions {
    int max_depth = 3;
    std::size_t min_leaf = 1;
    std::size_t features_per_split = 0;  // 0 = all
    /// Accept zero-gain splits of impure nodes (needed for XOR-like targets).
    bool allow_zero_gain = false;
};

using LeafValue = std::function<double(double sum_a, double sum_h, double sum_w)>;

/// Greedy depth-first growth on histogram bins. `rows` may repeat (bootstrap).
/// `stats` is indexed by row id. Node 0 is the root.
std::vector<Node> grow_tree(const BinnedMatrix& x, std::vector<std::size_t> rows, std::span<const RowStat> stats,
                            Criterion criterion, const GrowOptions& options, Rng* rng, const LeafValue& leaf_value);

int leaf_index(std::span<const Node> nodes, std::span<const double> x);
int leaf_index(std::span<const Node> nodes, const Eigen::MatrixXd& x, Eigen::Index row);
int leaf_index(std::span<const Node> nodes, const BinnedMatrix& x, std::size_t row);

inline double tree_value(std::span<const Node> nodes, std::span<const double> x) {
    return nodes[static_cast<std::size_t>(leaf_index(nodes, x))].value;
}

int tree_depth(std::span<const Node> nodes);
std::size_t leaf_count(std::span<const Node> nodes);

nlohmann::json nodes_to_json(std::span<const Node> nodes);
std::vector<Node> nodes_from_json(const nlohmann::json& j);

}  // namespace lapselab::trees
