#pragma once

#include "lapselab/portfolio.hpp"
#include "lapselab/survival/retention.hpp"
#include "lapselab/trees/tree.hpp"
#include "lapselab/valuation.hpp"

#include "json.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lapselab::classify {

inline constexpr const char* kClassifierSchema = "lapselab.classifier.v1";

/// Constant is never requested directly; it is the all-zeros candidate added
/// to retention-gain tuning and the fallback for single-class labels.
enum class Family { CART, RandomForest, GradientBoosted, Constant };

std::string to_string(Family f);
/// Accepts cart, rf, gbt (and the to_string spellings). Throws InvalidConfig.
Family family_from_string(std::string_view s);

struct Hyperparameters {
    int max_depth = 5;
    std::size_t min_leaf = 1;
    std::size_t n_trees = 100;  // forest size or boosting stages
    double learning_rate = 0.1;
    /// 0 means all features, except for forests where it means ceil(sqrt(p)).
    std::size_t features_per_split = 0;
    bool bootstrap = true;
    double l2 = 1.0;
    /// Weights each class by n / (2 n_class). Off by default.
    bool balanced = false;

    friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

nlohmann::json to_json(const Hyperparameters& h);
Hyperparameters hyperparameters_from_json(const nlohmann::json& j);

struct ClassifierSpec {
    Family family = Family::CART;
    std::vector<Hyperparameters> grid{Hyperparameters{}};
    std::uint64_t seed = 0;
    std::size_t max_bins = 256;
    double threshold = 0.5;
};

/// Throws InvalidConfig on an empty grid or out-of-range values.
void validate(const ClassifierSpec& spec);

class Classifier {
public:
    Classifier() = default;

    Family family() const noexcept { return family_; }
    const Hyperparameters& hyperparameters() const noexcept { return hyper_; }
    std::size_t n_features() const noexcept { return n_features_; }
    const std::vector<std::string>& feature_names() const noexcept { return names_; }
    /// Fitted on a single class; predictions are then constant.
    bool degenerate() const noexcept { return degenerate_; }
    std::size_t n_trees() const noexcept { return trees_.size(); }

    /// Positive-class scores in [0, 1]. Throws SchemaMismatch on a width mismatch.
    std::vector<double> scores(const Eigen::MatrixXd& x) const;
    std::vector<double> scores(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) const;
    std::vector<std::uint8_t> predict(const Eigen::MatrixXd& x, double threshold = 0.5) const;
    std::vector<std::uint8_t> predict(const Eigen::MatrixXd& x, std::span<const std::size_t> rows,
                                      double threshold = 0.5) const;

    nlohmann::json to_json() const;
    static Classifier from_json(const nlohmann::json& j);

    static Classifier constant(double score, std::size_t n_features, std::vector<std::string> names = {});

private:
    friend Classifier fit_classifier(Family, const Hyperparameters&, const Eigen::MatrixXd&,
                                     std::span<const std::uint8_t>, std::span<const std::size_t>, std::uint64_t,
                                     std::size_t, std::vector<std::string>);

    double score_row(const Eigen::MatrixXd& x, Eigen::Index row) const;

    Family family_ = Family::Constant;
    Hyperparameters hyper_;
    std::vector<std::vector<trees::Node>> trees_;
    double base_ = 0.0;  // constant score, or base log-odds when boosting
    std::size_t n_features_ = 0;
    std::vector<std::string> names_;
    bool degenerate_ = false;
};

/// Fits on x.row(rows[k]) / labels[rows[k]]; empty `rows` means every row.
/// Single-class labels give a degenerate constant classifier.
Classifier fit_classifier(Family family, const Hyperparameters& hyper, const Eigen::MatrixXd& x,
                          std::span<const std::uint8_t> labels, std::span<const std::size_t> rows = {},
                          std::uint64_t seed = 0, std::size_t max_bins = 256, std::vector<std::string> names = {});

/// First grid point of the spec.
Classifier fit_classifier(const ClassifierSpec& spec, const Eigen::MatrixXd& x, std::span<const std::uint8_t> labels);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

enum class MetricKind { Accuracy, Recall, F1, AUC, RetentionGain };

std::string to_string(MetricKind k);

/// Strategy context for retention gain; `records` and `matrices` cover the
/// whole portfolio and evaluated rows index into them.
struct RetentionContext {
    std::span<const PolicyRecord> records;
    const survival::RetentionMatrices* matrices = nullptr;
    valuation::StrategyParams strategy;
};

struct EvalMetric {
    MetricKind kind = MetricKind::Accuracy;
    std::optional<RetentionContext> context;

    static EvalMetric of(MetricKind k) { return {k, std::nullopt}; }
    static EvalMetric retention_gain(RetentionContext ctx) { return {MetricKind::RetentionGain, ctx}; }
};

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

Confusion confusion(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> predictions);

/// Throws UndefinedMetric (recall without positives, AUC with one class, ...),
/// AlignmentError on length mismatch, InvalidConfig when retention gain lacks
/// a context. `rows` maps evaluated subjects into the retention context and
/// is only read for RetentionGain.
double evaluate(const EvalMetric& metric, std::span<const std::uint8_t> truth,
                std::span<const std::uint8_t> predictions, std::span<const double> scores,
                std::span<const std::size_t> rows = {});

/// Mann-Whitney statistic with midranks for ties.
double auc(std::span<const std::uint8_t> truth, std::span<const double> scores);

// ---------------------------------------------------------------------------
// Tuning
// ---------------------------------------------------------------------------

struct TunedModel {
    Family family = Family::CART;
    Hyperparameters chosen;
    std::size_t chosen_index = 0;      // into the candidate list below
    bool zero_classifier = false;      // the injected all-zeros candidate won
    std::vector<double> fold_metrics;  // at the chosen candidate
    double mean_metric = 0.0;
    std::vector<double> candidate_means;  // grid order, then the zero candidate if injected
    /// Out-of-fold predictions and scores at the chosen candidate, in row order.
    std::vector<std::uint8_t> oof_predictions;
    std::vector<double> oof_scores;
    std::optional<Classifier> model;  // refit on all rows when requested

    nlohmann::json to_json() const;
};

struct TuneOptions {
    bool refit = true;
    /// Adds the all-zeros candidate. Defaults to on for retention gain.
    std::optional<bool> inject_zero;
};

/// Every candidate is scored by its mean validation metric over the folds;
/// the first maximum wins.
TunedModel cross_validate_tune(const ClassifierSpec& spec, const Eigen::MatrixXd& x,
                               std::span<const std::uint8_t> labels, const EvalMetric& metric,
                               std::span<const Fold> folds, const TuneOptions& options = {});
TunedModel cross_validate_tune(const ClassifierSpec& spec, const Eigen::MatrixXd& x,
                               std::span<const std::uint8_t> labels, const EvalMetric& metric, std::size_t k,
                               std::uint64_t seed, const TuneOptions& options = {});

/// Small default grids used by the scenario engine.
std::vector<Hyperparameters> default_grid(Family family);

}  // namespace lapselab::classify
