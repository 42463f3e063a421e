#pragma once

#include "json.hpp"

#include <Eigen/Core>

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lapselab::survival {

inline constexpr const char* kModelSchemaVersion = "lapselab.survival_model.v1";

/// A fitted estimator of S(t | x). Implementations are immutable once fitted
/// and safe to query from several threads.
class SurvivalModel {
public:
    virtual ~SurvivalModel() = default;

    /// "cox", "tree", "rsf" or "gbsm".
    virtual std::string family() const = 0;

    /// S(t | x) at every grid time; 1 at t <= 0, nonincreasing, flat past the
    /// last training event time. Throws NotFitted, SchemaMismatch.
    virtual std::vector<double> survival_curve(std::span<const double> x, std::span<const double> grid) const = 0;

    /// Larger means earlier failure; what the concordance index ranks.
    virtual double risk_score(std::span<const double> x) const = 0;

    virtual const std::vector<std::string>& feature_names() const = 0;
    virtual double max_training_time() const = 0;
    virtual bool fitted() const = 0;

    virtual nlohmann::json to_json() const = 0;

    double survival(std::span<const double> x, double t) const;
};

/// Dispatches on the "family" field. Throws SchemaMismatch.
std::unique_ptr<SurvivalModel> model_from_json(const nlohmann::json& j);

/// Rows = subjects, columns = grid times.
Eigen::MatrixXd predict_survival(const SurvivalModel& model, const Eigen::MatrixXd& covariates,
                                 std::span<const double> time_grid);

std::vector<double> risk_scores(const SurvivalModel& model, const Eigen::MatrixXd& covariates);

namespace detail {
void check_fitted(const SurvivalModel& m);
void check_width(const SurvivalModel& m, std::size_t width);
std::vector<double> row_of(const Eigen::MatrixXd& m, Eigen::Index i);
}  // namespace detail

}  // namespace lapselab::survival
