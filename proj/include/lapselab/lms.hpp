#pragma once

#include "lapselab/classify.hpp"
#include "lapselab/portfolio.hpp"
#include "lapselab/survival/retention.hpp"
#include "lapselab/valuation.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lapselab::lms {

using survival::RetentionMatrices;
using valuation::StrategyParams;

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

struct Scenario {
    std::string name;
    StrategyParams strategy;
};

struct ScenarioTable {
    std::vector<Scenario> scenarios;

    /// Unique, nonempty names (InvalidConfig) and valid strategies
    /// (InvalidStrategy with the scenario name in the message).
    void validate() const;
    int max_horizon() const;

    nlohmann::json to_json() const;
    /// Accepts {"scenarios": [...]} or a bare array of {"name", p, delta, ...}.
    static ScenarioTable from_json(const nlohmann::json& j);
};

/// The 64 strategies A-1 .. A-32, B-1 .. B-32.
ScenarioTable standard_scenarios();

// ---------------------------------------------------------------------------
// Two-pipeline comparison
// ---------------------------------------------------------------------------

/// One classifier family within a scenario. Accuracies and retention gains
/// are means over validation folds; per-target gains pool all folds.
struct FamilyResult {
    classify::Family family = classify::Family::CART;
    double accuracy_y = 0.0;
    double accuracy_ytilde = 0.0;
    double rg_y = 0.0;
    double rg_ytilde = 0.0;
    std::size_t targets_y = 0;
    std::size_t targets_ytilde = 0;
    std::optional<double> rg_per_target_y;       // nullopt when nobody is targeted
    std::optional<double> rg_per_target_ytilde;
    std::optional<double> improvement;           // nullopt when rg_y == 0
    bool zero_classifier_ytilde = false;         // the all-zeros candidate won
    nlohmann::json chosen_y;                     // hyperparameters
    nlohmann::json chosen_ytilde;
};

struct ScenarioResult {
    std::string name;
    StrategyParams strategy;
    double target_diff_share = 0.0;
    double ones_share_y = 0.0;
    double ones_share_ytilde = 0.0;
    double optimal_gain = 0.0;  // sum of max(z, 0) over the whole portfolio
    std::vector<FamilyResult> families;
    double wall_time = 0.0;  // seconds

    nlohmann::json to_json() const;
    static ScenarioResult from_json(const nlohmann::json& j);
};

struct LmsOptions {
    std::vector<classify::Family> families{classify::Family::CART, classify::Family::RandomForest,
                                           classify::Family::GradientBoosted};
    std::size_t k = 10;
    std::uint64_t seed = 0;
    std::size_t max_bins = 256;
    /// Families without an entry use classify::default_grid.
    std::map<classify::Family, std::vector<classify::Hyperparameters>> grids;

    std::vector<classify::Hyperparameters> grid_for(classify::Family f) const;
};

/// Inputs shared by every scenario on one portfolio: classifier features,
/// lapse labels, fold assignment and the accuracy-tuned models on y, which
/// do not depend on the strategy.
class Workspace {
public:
    Workspace(std::span<const PolicyRecord> records, const RetentionMatrices& matrices, const LmsOptions& options);

    std::span<const PolicyRecord> records() const noexcept { return records_; }
    const RetentionMatrices& matrices() const noexcept { return matrices_; }
    const LmsOptions& options() const noexcept { return options_; }
    const Eigen::MatrixXd& features() const noexcept { return features_.values; }
    const std::vector<std::uint8_t>& labels() const noexcept { return y_; }
    const std::vector<Fold>& folds() const noexcept { return folds_; }

    /// Tuned on y by accuracy; computed on first use.
    const classify::TunedModel& baseline(classify::Family f) const;

private:
    std::span<const PolicyRecord> records_;
    const RetentionMatrices& matrices_;
    LmsOptions options_;
    FeatureMatrix features_;
    std::vector<std::uint8_t> y_;
    std::vector<Fold> folds_;
    mutable std::map<classify::Family, classify::TunedModel> baselines_;
    mutable std::mutex mutex_;
};

/// Pipeline A (y, tuned by accuracy) against pipeline B (y_tilde, tuned by
/// retention gain with the all-zeros candidate) on shared folds.
/// Throws InvalidStrategy before any fitting and HorizonMismatch when the
/// matrices are shorter than the strategy horizon.
ScenarioResult run_scenario(const Workspace& workspace, const Scenario& scenario);
ScenarioResult run_scenario(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                            const Scenario& scenario, const LmsOptions& options);

struct GridOptions {
    /// One <name>.json per finished scenario; existing files with a matching
    /// strategy are loaded instead of recomputed.
    std::optional<std::filesystem::path> checkpoint_dir;
    bool parallel_scenarios = true;
};

/// Results in table order. The matrices need a horizon of at least
/// table.max_horizon(); each scenario uses the first T+1 columns.
std::vector<ScenarioResult> run_grid(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                                     const ScenarioTable& table, const LmsOptions& options,
                                     const GridOptions& grid_options = {});

/// One row per (scenario, family). Wall time stays in the JSON so that the
/// CSV is reproducible byte for byte.
void write_results_csv(std::ostream& out, std::span<const ScenarioResult> results);
nlohmann::json results_json(std::span<const ScenarioResult> results);

// ---------------------------------------------------------------------------
// Comparison statistics
// ---------------------------------------------------------------------------

/// (rg_ytilde - rg_y) / |rg_y| * 100; nullopt when rg_y == 0.
std::optional<double> improvement(double rg_y, double rg_ytilde);

/// Share of subjects with y = 1 and y_tilde = 0. Throws ImplicationViolated
/// when some y_tilde = 1 has y = 0.
double target_diff_share(std::span<const std::uint8_t> y, std::span<const std::uint8_t> y_tilde);

/// nullopt when either side has zero variance or fewer than two points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct NontargetedProfile {
    std::size_t count = 0;
    SummaryStats subset;      // lapsers not worth targeting
    SummaryStats population;  // every subject

    nlohmann::json to_json() const;
};

/// Throws EmptySubset when no subject has y = 1 and y_tilde = 0.
NontargetedProfile profile_nontargeted(std::span<const PolicyRecord> records, std::span<const std::uint8_t> y,
                                       std::span<const std::uint8_t> y_tilde);

// ---------------------------------------------------------------------------
// Sensitivity surfaces
// ---------------------------------------------------------------------------

/// Parameter names: p, delta, gamma, c, d, T.
struct Axis {
    std::string param;
    std::vector<double> values;
};

/// Optional slow path: pipeline B retrained at every grid point.
struct ClassifierSurface {
    classify::Family family = classify::Family::GradientBoosted;
    std::vector<classify::Hyperparameters> grid;  // default grid when empty
    std::size_t k = 5;
    std::uint64_t seed = 0;
};

struct SensitivityGrid {
    Axis axis1;
    Axis axis2;
    StrategyParams base;
    Eigen::MatrixXd rg;                           // optimal relabeled gain; rows follow axis1
    std::optional<Eigen::MatrixXd> rg_classifier;  // cross-validated pipeline B gain

    /// Long format: <axis1>,<axis2>,rg[,rg_classifier].
    void write_csv(std::ostream& out) const;
};

/// Copy of `base` with one parameter replaced. Throws InvalidAxis for an
/// unknown name or a non-integral horizon.
StrategyParams with_param(StrategyParams base, const std::string& param, double value);

/// Throws InvalidAxis for unknown or repeated parameters, empty axes, or a
/// grid point that is not a valid strategy; HorizonMismatch when a horizon
/// exceeds the matrices.
SensitivityGrid sensitivity_surface(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                                    const StrategyParams& base, const Axis& axis1, const Axis& axis2,
                                    const std::optional<ClassifierSurface>& classifier = std::nullopt);

}  // namespace lapselab::lms
