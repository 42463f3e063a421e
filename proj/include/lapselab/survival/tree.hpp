#pragma once

#include "lapselab/survival/data.hpp"
#include "lapselab/survival/model.hpp"
#include "lapselab/survival/step_function.hpp"
#include "lapselab/trees/binning.hpp"
#include "lapselab/trees/tree.hpp"

#include <cstdint>
#include <vector>

namespace lapselab::survival {

struct SurvivalTreeOptions {
    std::size_t min_leaf = 15;
    int max_depth = 12;
    std::size_t features_per_split = 0;  // 0 = all
    std::uint64_t seed = 0;
    std::size_t max_bins = 256;
};

struct SurvivalLeaf {
    StepFunction km;
    StepFunction na;
    /// Sum of the leaf cumulative hazard over the training event times; the
    /// leaf's risk score.
    double mortality = 0.0;
    std::size_t n = 0;
};

/// Leaves' `Node::value` holds the index into leaves().
class SurvivalTree final : public SurvivalModel {
public:
    SurvivalTree() = default;
    SurvivalTree(std::vector<trees::Node> nodes, std::vector<SurvivalLeaf> leaves, std::vector<std::string> feature_names,
                 double max_time);

    std::string family() const override { return "tree"; }
    std::vector<double> survival_curve(std::span<const double> x, std::span<const double> grid) const override;
    double risk_score(std::span<const double> x) const override;
    const std::vector<std::string>& feature_names() const override { return names_; }
    double max_training_time() const override { return max_time_; }
    bool fitted() const override { return !nodes_.empty(); }
    nlohmann::json to_json() const override;
    static SurvivalTree from_json(const nlohmann::json& j);

    const SurvivalLeaf& leaf(std::span<const double> x) const;
    const std::vector<trees::Node>& nodes() const noexcept { return nodes_; }
    const std::vector<SurvivalLeaf>& leaves() const noexcept { return leaves_; }

private:
    std::vector<trees::Node> nodes_;
    std::vector<SurvivalLeaf> leaves_;
    std::vector<std::string> names_;
    double max_time_ = 0.0;
};

/// Greedy partitioning maximizing the two-sample log-rank statistic; a node is
/// split only when some admissible split has a statistic > 0.
/// Throws TooFewSamples when n < 2 * min_leaf.
SurvivalTree fit_survival_tree(const SurvivalData& data, const SurvivalTreeOptions& options = {});
SurvivalTree fit_survival_tree(std::span<const PolicyRecord> records, const CauseRecoding& recoding,
                               const SurvivalTreeOptions& options = {});

namespace detail {
/// Grows on `rows` of data (repeats allowed) with a prebuilt binning of data.
/// Leaf mortality sums over `event_times`.
SurvivalTree grow_survival_tree(const trees::BinnedMatrix& binned, const SurvivalData& data,
                                std::vector<std::size_t> rows, const SurvivalTreeOptions& options,
                                std::span<const double> event_times);

std::vector<double> distinct_event_times(const SurvivalData& data);
}  // namespace detail

}  // namespace lapselab::survival
