#include "lapselab/survival/forest.hpp"

#include "lapselab/error.hpp"
#include "lapselab/parallel.hpp"
#include "lapselab/rng.hpp"

#include <cmath>
#include <numeric>

namespace lapselab::survival {

SurvivalForest::SurvivalForest(std::vector<SurvivalTree> trees, std::vector<std::uint64_t> tree_seeds,
                               std::size_t features_per_split)
    : trees_(std::move(trees)), seeds_(std::move(tree_seeds)), features_per_split_(features_per_split) {
    if (seeds_.size() != trees_.size()) throw Error(ErrorCode::LengthMismatch, "one seed per tree expected");
}

const std::vector<std::string>& SurvivalForest::feature_names() const {
    detail::check_fitted(*this);
    return trees_.front().feature_names();
}

double SurvivalForest::max_training_time() const {
    double t = 0.0;
    for (const auto& tree : trees_) t = std::max(t, tree.max_training_time());
    return t;
}

std::vector<double> SurvivalForest::survival_curve(std::span<const double> x, std::span<const double> grid) const {
    detail::check_fitted(*this);
    std::vector<double> out(grid.size(), 0.0);
    for (const auto& tree : trees_) {
        const SurvivalLeaf& leaf = tree.leaf(x);
        for (std::size_t k = 0; k < grid.size(); ++k) out[k] += grid[k] <= 0.0 ? 1.0 : leaf.km(grid[k]);
    }
    const double inv = 1.0 / static_cast<double>(trees_.size());
    for (double& v : out) v *= inv;
    return out;
}

double SurvivalForest::risk_score(std::span<const double> x) const {
    detail::check_fitted(*this);
    double r = 0.0;
    for (const auto& tree : trees_) r += tree.leaf(x).mortality;
    return r / static_cast<double>(trees_.size());
}

nlohmann::json SurvivalForest::to_json() const {
    detail::check_fitted(*this);
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json());
    return {{"schema", kModelSchemaVersion},
            {"family", family()},
            {"features_per_split", features_per_split_},
            {"tree_seeds", seeds_},
            {"trees", std::move(trees)}};
}

SurvivalForest SurvivalForest::from_json(const nlohmann::json& j) {
    std::vector<SurvivalTree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(SurvivalTree::from_json(t));
    return SurvivalForest(std::move(trees), j.at("tree_seeds").get<std::vector<std::uint64_t>>(),
                          j.at("features_per_split").get<std::size_t>());
}

SurvivalForest fit_rsf(const SurvivalData& data, const ForestOptions& options) {
    data.validate();
    if (options.n_trees < 1) throw Error(ErrorCode::InvalidConfig, "n_trees must be >= 1");
    const std::size_t n = data.size();
    if (n < 2 * options.min_leaf)
        throw Error(ErrorCode::TooFewSamples, "need at least 2 * min_leaf samples");

    const std::size_t p = data.n_features();
    const std::size_t mtry = options.features_per_split == 0
                                 ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))))
                                 : options.features_per_split;

    const trees::BinnedMatrix binned(data.covariates, options.max_bins);
    const auto event_times = detail::distinct_event_times(data);

    std::vector<SurvivalTree> trees(options.n_trees);
    std::vector<std::uint64_t> seeds(options.n_trees);
    for (std::size_t k = 0; k < options.n_trees; ++k) seeds[k] = derive_seed(options.seed, k);

    parallel_for(options.n_trees, [&](std::size_t k) {
        std::vector<std::size_t> rows(n);
        if (options.bootstrap) {
            Rng rng(derive_seed(seeds[k], "bootstrap"));
            for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        SurvivalTreeOptions tree_options{options.min_leaf, options.max_depth, mtry, seeds[k], options.max_bins};
        trees[k] = detail::grow_survival_tree(binned, data, std::move(rows), tree_options, event_times);
    });
    return SurvivalForest(std::move(trees), std::move(seeds), mtry);
}

SurvivalForest fit_rsf(std::span<const PolicyRecord> records, const CauseRecoding& recoding,
                       const ForestOptions& options) {
    return fit_rsf(recode(records, recoding), options);
}

}  // namespace lapselab::survival
