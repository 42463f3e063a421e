#pragma once

#include "lapselab/portfolio.hpp"
#include "lapselab/survival/retention.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace lapselab::valuation {

using survival::RetentionMatrices;

/// A lapse management strategy. Rates are annual fractions; c is in currency.
struct StrategyParams {
    double p = 0.025;       // profitability ratio
    double delta = 0.0004;  // incentive, fraction of face amount per year
    double gamma = 0.25;    // acceptance probability
    double c = 10.0;        // contact cost
    double d = 0.0;         // discount rate
    int T = 5;              // horizon in years

    friend bool operator==(const StrategyParams&, const StrategyParams&) = default;
};

/// Throws InvalidStrategy naming the violated bound.
void validate(const StrategyParams& s);

nlohmann::json to_json(const StrategyParams& s);
/// Missing keys keep their defaults; the result is validated.
StrategyParams strategy_from_json(const nlohmann::json& j);

/// sum_{t=0}^{T} p F r_t / (1+d)^t. Throws LengthMismatch unless r.size() == T+1,
/// DiscountOutOfRange when d <= -1.
double future_clv(double p, double F, std::span<const double> r, double d, int T);

/// Gain from targeting one subject; the branch follows record.is_lapser().
double individual_gain(const PolicyRecord& record, std::span<const double> r_acceptant,
                       std::span<const double> r_lapser, const StrategyParams& s);

// Portfolio values. `matrices` rows align with `records` and need horizon >= s.T
// (HorizonMismatch otherwise). Row-count mismatches throw AlignmentError.
// The `rows` overloads evaluate the sub-portfolio records[rows[k]] with
// predictions[k].

double control_portfolio_value(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                               const StrategyParams& s);
double control_portfolio_value(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                               const StrategyParams& s, std::span<const std::size_t> rows);

double lapse_managed_portfolio_value(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                                     const StrategyParams& s, std::span<const std::uint8_t> predictions);
double lapse_managed_portfolio_value(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                                     const StrategyParams& s, std::span<const std::uint8_t> predictions,
                                     std::span<const std::size_t> rows);

/// LMPV - CPV.
double retention_gain(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                      const StrategyParams& s, std::span<const std::uint8_t> predictions);
double retention_gain(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                      const StrategyParams& s, std::span<const std::uint8_t> predictions,
                      std::span<const std::size_t> rows);

/// z_i for every row.
std::vector<double> individual_gains(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                                     const StrategyParams& s);

/// sum of z over targeted rows.
double targeted_gain(std::span<const double> z, std::span<const std::uint8_t> predictions);

/// Best achievable gain: sum of max(z, 0).
double optimal_gain(std::span<const double> z);

struct ValuationResult {
    std::vector<double> z;
    std::vector<std::uint8_t> y_tilde;
    double cpv = 0.0;
    std::vector<double> clv_per_subject;  // with r^acceptant or r^lapser according to y
    StrategyParams strategy;

    std::size_t size() const noexcept { return z.size(); }
    double optimal_gain() const { return valuation::optimal_gain(z); }
};

/// y_tilde = 1 exactly when z > 0.
std::vector<std::uint8_t> relabel(std::span<const double> z);

ValuationResult relabel_targets(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                                const StrategyParams& s);

/// subject_id,y,z,y_tilde,clv
void write_csv(std::ostream& out, std::span<const PolicyRecord> records, const ValuationResult& result);

/// cpv, strategy echo and a few aggregates.
nlohmann::json summary_json(std::span<const PolicyRecord> records, const ValuationResult& result);

}  // namespace lapselab::valuation
