#pragma once

#include "lapselab/survival/data.hpp"
#include "lapselab/survival/model.hpp"
#include "lapselab/survival/step_function.hpp"

#include <Eigen/Core>

#include <vector>

namespace lapselab::survival {

struct CoxOptions {
    int max_iter = 100;
    double tol = 1e-6;    // infinity norm of the score on the standardized scale
    double ridge = 0.0;   // penalty ridge/2 * |beta|^2 on standardized covariates
};

/// Breslow-ties log partial likelihood and its derivatives in beta.
class CoxPartialLikelihood {
public:
    CoxPartialLikelihood(std::vector<double> durations, std::vector<std::uint8_t> events, Eigen::MatrixXd x);

    double value(const Eigen::VectorXd& beta) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& beta) const;

    /// All three in one pass.
    void evaluate(const Eigen::VectorXd& beta, double* value, Eigen::VectorXd* gradient,
                  Eigen::MatrixXd* hessian) const;

    std::size_t n_events() const noexcept { return n_events_; }

private:
    struct Group {
        std::size_t begin, end;  // rows of x_ tied at one event time, sorted order
        double deaths;
        Eigen::VectorXd event_sum;  // sum of covariates over the deaths
    };
    // Rows sorted by decreasing duration so risk sets are prefixes.
    Eigen::MatrixXd x_;
    std::vector<Group> groups_;
    std::size_t n_events_ = 0;
};

class CoxModel final : public SurvivalModel {
public:
    CoxModel() = default;
    CoxModel(Eigen::VectorXd beta, Eigen::VectorXd center, StepFunction baseline_cumhaz,
             std::vector<std::string> feature_names, double log_likelihood, int iterations);

    std::string family() const override { return "cox"; }
    std::vector<double> survival_curve(std::span<const double> x, std::span<const double> grid) const override;
    double risk_score(std::span<const double> x) const override;
    const std::vector<std::string>& feature_names() const override { return names_; }
    double max_training_time() const override;
    bool fitted() const override { return fitted_; }
    nlohmann::json to_json() const override;
    static CoxModel from_json(const nlohmann::json& j);

    const Eigen::VectorXd& beta() const noexcept { return beta_; }
    /// Breslow estimate, stored for covariates centered at `center()`.
    const StepFunction& baseline_cumhaz() const noexcept { return baseline_; }
    const Eigen::VectorXd& center() const noexcept { return center_; }
    double log_likelihood() const noexcept { return loglik_; }
    int iterations() const noexcept { return iterations_; }
    /// Number of coefficients allowed to be nonzero.
    std::size_t n_active() const noexcept;
    double aic() const noexcept { return -2.0 * loglik_ + 2.0 * static_cast<double>(n_active()); }

private:
    double linear_predictor(std::span<const double> x) const;

    Eigen::VectorXd beta_;
    Eigen::VectorXd center_;
    StepFunction baseline_;
    std::vector<std::string> names_;
    std::vector<std::uint8_t> active_;
    double loglik_ = 0.0;
    int iterations_ = 0;
    bool fitted_ = false;

    friend CoxModel fit_cox_subset(const SurvivalData&, const std::vector<std::uint8_t>&, const CoxOptions&);
};

/// Breslow cumulative baseline hazard: sum over event times of
/// d_k / sum_{j at risk} exp(eta_j).
StepFunction breslow_cumhaz(std::span<const double> durations, std::span<const std::uint8_t> events,
                            std::span<const double> eta);

/// Newton-Raphson with step halving on standardized covariates.
/// Throws Degenerate (< 2 events), NonConvergence, SeparationDetected.
CoxModel fit_cox(const SurvivalData& data, const CoxOptions& options = {});
CoxModel fit_cox(std::span<const PolicyRecord> records, const CauseRecoding& recoding, const CoxOptions& options = {});

/// Fit restricted to the features flagged in `active`; the others keep beta = 0.
CoxModel fit_cox_subset(const SurvivalData& data, const std::vector<std::uint8_t>& active, const CoxOptions& options);

/// Best-subset search minimizing AIC over all 2^p feature subsets (p <= 12).
/// Ties go to the smaller subset, then to enumeration order.
CoxModel fit_cox_aic(const SurvivalData& data, const CoxOptions& options = {});

}  // namespace lapselab::survival
