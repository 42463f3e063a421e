#include "lapselab/trees/tree.hpp"

#include "lapselab/error.hpp"

#include <algorithm>
#include <numeric>

namespace lapselab::trees {
namespace {

struct Sums {
    double a = 0.0, h = 0.0, w = 0.0;
    std::size_t n = 0;

    void add(const RowStat& s) {
        a += s.a;
        h += s.h;
        w += s.w;
        ++n;
    }
};

// Criterion score of a node; the gain of a split is score(L) + score(R) - score(parent).
double score(Criterion c, const Sums& s) {
    if (s.w <= 0.0) return 0.0;
    if (c == Criterion::LeastSquares) return s.a * s.a / s.w;
    // Negated weighted Gini impurity w * 2p(1-p).
    return -2.0 * s.a * (s.w - s.a) / s.w;
}

bool pure(Criterion c, const Sums& s) {
    if (c != Criterion::Gini) return false;
    return s.a <= 0.0 || s.a >= s.w;
}

class Grower {
public:
    Grower(const BinnedMatrix& x, std::span<const RowStat> stats, Criterion criterion, const GrowOptions& options,
           Rng* rng, const LeafValue& leaf_value)
        : x_(x), stats_(stats), criterion_(criterion), options_(options), rng_(rng), leaf_value_(leaf_value) {
        features_.resize(x.cols());
        std::iota(features_.begin(), features_.end(), std::size_t{0});
    }

    std::vector<Node> run(std::vector<std::size_t> rows) {
        rows_ = std::move(rows);
        build(0, rows_.size(), 0);
        return std::move(nodes_);
    }

private:
    struct Split {
        int feature = -1;
        std::uint16_t bin = 0;
        double gain = 0.0;
    };

    int build(std::size_t begin, std::size_t end, int depth) {
        Sums total;
        for (std::size_t i = begin; i < end; ++i) total.add(stats_[rows_[i]]);
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(Node{});
        nodes_[static_cast<std::size_t>(id)].value = leaf_value_(total.a, total.h, total.w);

        if (depth >= options_.max_depth || total.n < 2 * options_.min_leaf || pure(criterion_, total)) return id;
        const Split best = find_split(begin, end, total);
        if (best.feature < 0) return id;

        const auto f = static_cast<std::size_t>(best.feature);
        const std::uint16_t* col = x_.column(f);
        const auto mid_it = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                                  rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                                  [&](std::size_t r) { return col[r] <= best.bin; });
        const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());

        Node& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = best.feature;
        node.split_bin = best.bin;
        node.threshold = x_.threshold(f, best.bin);
        const int left = build(begin, mid, depth + 1);
        const int right = build(mid, end, depth + 1);
        nodes_[static_cast<std::size_t>(id)].left = left;
        nodes_[static_cast<std::size_t>(id)].right = right;
        return id;
    }

    Split find_split(std::size_t begin, std::size_t end, const Sums& total) {
        const std::size_t p = features_.size();
        std::size_t m = options_.features_per_split == 0 ? p : std::min(options_.features_per_split, p);
        if (m < p && rng_ != nullptr) {
            // Partial Fisher-Yates; candidates then scanned in feature order so
            // ties resolve the same way regardless of draw order.
            for (std::size_t i = 0; i < m; ++i) std::swap(features_[i], features_[i + rng_->below(p - i)]);
            std::sort(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(m));
        } else {
            m = p;
            std::iota(features_.begin(), features_.end(), std::size_t{0});
        }

        const double parent = score(criterion_, total);
        const double tolerance = 1e-12 * (1.0 + std::abs(parent));
        Split best;
        double best_gain = options_.allow_zero_gain && !pure(criterion_, total) ? -tolerance : tolerance;
        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t f = features_[k];
            const std::size_t nb = x_.n_bins(f);
            if (nb < 2) continue;
            hist_.assign(nb, Sums{});
            const std::uint16_t* col = x_.column(f);
            for (std::size_t i = begin; i < end; ++i) hist_[col[rows_[i]]].add(stats_[rows_[i]]);

            Sums left;
            for (std::size_t b = 0; b + 1 < nb; ++b) {
                left.a += hist_[b].a;
                left.h += hist_[b].h;
                left.w += hist_[b].w;
                left.n += hist_[b].n;
                if (hist_[b].n == 0) continue;
                if (left.n < options_.min_leaf) continue;
                if (total.n - left.n < options_.min_leaf) break;
                Sums right{total.a - left.a, total.h - left.h, total.w - left.w, total.n - left.n};
                const double gain = score(criterion_, left) + score(criterion_, right) - parent;
                if (gain > best_gain) {
                    best_gain = gain;
                    best = {static_cast<int>(f), static_cast<std::uint16_t>(b), gain};
                }
            }
        }
        return best;
    }

    const BinnedMatrix& x_;
    std::span<const RowStat> stats_;
    Criterion criterion_;
    GrowOptions options_;
    Rng* rng_;
    const LeafValue& leaf_value_;
    std::vector<std::size_t> features_;
    std::vector<std::size_t> rows_;
    std::vector<Sums> hist_;
    std::vector<Node> nodes_;
};

}  // namespace

std::vector<Node> grow_tree(const BinnedMatrix& x, std::vector<std::size_t> rows, std::span<const RowStat> stats,
                            Criterion criterion, const GrowOptions& options, Rng* rng, const LeafValue& leaf_value) {
    if (rows.empty()) throw Error(ErrorCode::TooFewSamples, "cannot grow a tree on zero rows");
    if (options.min_leaf < 1 || options.max_depth < 0) throw Error(ErrorCode::InvalidConfig, "tree options out of range");
    return Grower(x, stats, criterion, options, rng, leaf_value).run(std::move(rows));
}

int leaf_index(std::span<const Node> nodes, std::span<const double> x) {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const Node& n = nodes[static_cast<std::size_t>(i)];
        i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return i;
}

int leaf_index(std::span<const Node> nodes, const Eigen::MatrixXd& x, Eigen::Index row) {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const Node& n = nodes[static_cast<std::size_t>(i)];
        i = x(row, n.feature) <= n.threshold ? n.left : n.right;
    }
    return i;
}

int leaf_index(std::span<const Node> nodes, const BinnedMatrix& x, std::size_t row) {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const Node& n = nodes[static_cast<std::size_t>(i)];
        i = x.bin(row, static_cast<std::size_t>(n.feature)) <= n.split_bin ? n.left : n.right;
    }
    return i;
}

int tree_depth(std::span<const Node> nodes) {
    if (nodes.empty()) return 0;
    std::vector<int> depth(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, depth[i]);
        if (!nodes[i].is_leaf()) {
            depth[static_cast<std::size_t>(nodes[i].left)] = depth[i] + 1;
            depth[static_cast<std::size_t>(nodes[i].right)] = depth[i] + 1;
        }
    }
    return best;
}

std::size_t leaf_count(std::span<const Node> nodes) {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.is_leaf(); }));
}

nlohmann::json nodes_to_json(std::span<const Node> nodes) {
    nlohmann::json out = nlohmann::json::array();
    for (const Node& n : nodes) {
        if (n.is_leaf())
            out.push_back({{"value", n.value}});
        else
            out.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                           {"value", n.value}});
    }
    return out;
}

std::vector<Node> nodes_from_json(const nlohmann::json& j) {
    std::vector<Node> nodes;
    for (const auto& e : j) {
        Node n;
        n.value = e.at("value").get<double>();
        if (e.contains("feature")) {
            n.feature = e.at("feature").get<int>();
            n.threshold = e.at("threshold").get<double>();
            n.left = e.at("left").get<int>();
            n.right = e.at("right").get<int>();
        }
        nodes.push_back(n);
    }
    const int size = static_cast<int>(nodes.size());
    for (const Node& n : nodes)
        if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size))
            throw Error(ErrorCode::SchemaMismatch, "tree node child index out of range");
    return nodes;
}

}  // namespace lapselab::trees
