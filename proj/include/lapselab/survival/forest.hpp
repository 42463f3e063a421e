#pragma once

#include "lapselab/survival/tree.hpp"

namespace lapselab::survival {

struct ForestOptions {
    std::size_t n_trees = 100;
    std::size_t min_leaf = 15;
    int max_depth = 12;
    std::size_t features_per_split = 0;  // 0 = ceil(sqrt(p))
    bool bootstrap = true;
    std::uint64_t seed = 0;
    std::size_t max_bins = 256;
};

/// Survival and risk are pointwise means over member trees.
class SurvivalForest final : public SurvivalModel {
public:
    SurvivalForest() = default;
    SurvivalForest(std::vector<SurvivalTree> trees, std::vector<std::uint64_t> tree_seeds, std::size_t features_per_split);

    std::string family() const override { return "rsf"; }
    std::vector<double> survival_curve(std::span<const double> x, std::span<const double> grid) const override;
    double risk_score(std::span<const double> x) const override;
    const std::vector<std::string>& feature_names() const override;
    double max_training_time() const override;
    bool fitted() const override { return !trees_.empty(); }
    nlohmann::json to_json() const override;
    static SurvivalForest from_json(const nlohmann::json& j);

    const std::vector<SurvivalTree>& trees() const noexcept { return trees_; }
    const std::vector<std::uint64_t>& tree_seeds() const noexcept { return seeds_; }
    std::size_t features_per_split() const noexcept { return features_per_split_; }

private:
    std::vector<SurvivalTree> trees_;
    std::vector<std::uint64_t> seeds_;
    std::size_t features_per_split_ = 0;
};

/// Trees are grown in parallel; tree k uses derive_seed(seed, k) for both its
/// bootstrap draw and its feature sampling, so results do not depend on the
/// number of workers.
SurvivalForest fit_rsf(const SurvivalData& data, const ForestOptions& options = {});
SurvivalForest fit_rsf(std::span<const PolicyRecord> records, const CauseRecoding& recoding,
                       const ForestOptions& options = {});

}  // namespace lapselab::survival
