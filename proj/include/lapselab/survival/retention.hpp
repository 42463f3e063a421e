#pragma once

#include "lapselab/portfolio.hpp"
#include "lapselab/survival/model.hpp"

#include <Eigen/Core>

#include <span>

namespace lapselab::survival {

/// Row i, column t: probability that subject i's policy is still in force t
/// years after its last observation, under each behavioural assumption.
struct RetentionMatrices {
    Eigen::MatrixXd r_acceptant;
    Eigen::MatrixXd r_lapser;
    int horizon = 0;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(r_acceptant.rows()); }

    /// First T+1 columns. Throws HorizonMismatch when T > horizon.
    RetentionMatrices truncated(int T) const;
    RetentionMatrices subset(std::span<const std::size_t> rows) const;

    /// Shapes, entries in [0,1], column 0 equal to 1, rows nonincreasing.
    /// Throws BadValue or LengthMismatch.
    void validate() const;

    nlohmann::json to_json() const;
    static RetentionMatrices from_json(const nlohmann::json& j);
};

/// r_{i,t} = S(s_i + t | x_i) / S(s_i | x_i) with s_i the observed seniority.
/// When S(s_i | x_i) underflows, the row is 1 at t = 0 and 0 afterwards.
/// Throws SchemaMismatch when a model's features differ from survival_features().
RetentionMatrices build_retention_matrices(const SurvivalModel& acceptant, const SurvivalModel& lapser,
                                           std::span<const PolicyRecord> records, int horizon);

/// Conditional survival rows for one model; exposed for tests.
Eigen::MatrixXd conditional_survival(const SurvivalModel& model, const Eigen::MatrixXd& covariates,
                                     std::span<const double> seniority, int horizon);

}  // namespace lapselab::survival
