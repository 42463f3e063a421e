#pragma once

#include "lapselab/survival/data.hpp"
#include "lapselab/survival/model.hpp"
#include "lapselab/survival/step_function.hpp"
#include "lapselab/trees/tree.hpp"

#include <cstdint>
#include <vector>

namespace lapselab::survival {

struct GbsmOptions {
    std::size_t n_stages = 100;
    double learning_rate = 0.1;
    int max_depth = 3;
    std::size_t min_leaf = 10;
    double subsample = 1.0;  // fraction of rows per stage, drawn without replacement
    double l2 = 1.0;         // added to the leaf hessian sum
    std::size_t features_per_split = 0;
    std::uint64_t seed = 0;
    std::size_t max_bins = 256;
};

/// Mean negative Cox log partial likelihood (Breslow ties) of risk scores f:
/// (1/n) sum over events i of [log sum_{j: T_j >= T_i} exp(f_j) - f_i].
double cox_loss(std::span<const double> durations, std::span<const std::uint8_t> events, std::span<const double> scores);

/// Gradient and Hessian diagonal of cox_loss in the scores. Either output may be null.
void cox_loss_derivatives(std::span<const double> durations, std::span<const std::uint8_t> events,
                          std::span<const double> scores, std::vector<double>* gradient,
                          std::vector<double>* hessian_diag);

struct GbsmStage {
    std::vector<trees::Node> tree;
    double scale = 0.0;  // learning rate after line search
};

/// f(x) = base_score + sum of scaled stage trees; S(t|x) = exp(-L0(t) exp(f(x)))
/// with L0 the Breslow baseline at the training scores.
class GradientBoostedSurvival final : public SurvivalModel {
public:
    GradientBoostedSurvival() = default;
    GradientBoostedSurvival(double base_score, std::vector<GbsmStage> stages, StepFunction baseline_cumhaz,
                            std::vector<std::string> feature_names, std::vector<double> loss_history);

    std::string family() const override { return "gbsm"; }
    std::vector<double> survival_curve(std::span<const double> x, std::span<const double> grid) const override;
    double risk_score(std::span<const double> x) const override;
    const std::vector<std::string>& feature_names() const override { return names_; }
    double max_training_time() const override;
    bool fitted() const override { return fitted_; }
    nlohmann::json to_json() const override;
    static GradientBoostedSurvival from_json(const nlohmann::json& j);

    double base_score() const noexcept { return base_score_; }
    const std::vector<GbsmStage>& stages() const noexcept { return stages_; }
    const StepFunction& baseline_cumhaz() const noexcept { return baseline_; }
    /// Training loss before the first stage and after each stage.
    const std::vector<double>& loss_history() const noexcept { return loss_history_; }

private:
    double base_score_ = 0.0;
    std::vector<GbsmStage> stages_;
    StepFunction baseline_;
    std::vector<std::string> names_;
    std::vector<double> loss_history_;
    bool fitted_ = false;
};

/// Stagewise least-squares trees on the negative gradient with Newton leaf
/// values and a backtracking line search, so the training loss never rises.
/// Throws Degenerate (< 2 events), NonFiniteLoss.
GradientBoostedSurvival fit_gbsm(const SurvivalData& data, const GbsmOptions& options = {});
GradientBoostedSurvival fit_gbsm(std::span<const PolicyRecord> records, const CauseRecoding& recoding,
                                 const GbsmOptions& options = {});

}  // namespace lapselab::survival
