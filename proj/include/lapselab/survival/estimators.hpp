#pragma once

#include "lapselab/survival/data.hpp"
#include "lapselab/survival/step_function.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace lapselab::survival {

/// Distinct event times with their at-risk and event counts.
struct EventTable {
    std::vector<double> times;
    std::vector<double> at_risk;
    std::vector<double> events;
};

/// Throws Empty, LengthMismatch.
EventTable event_table(std::span<const double> durations, std::span<const std::uint8_t> events);

/// Product-limit estimate; knots at distinct event times. Throws Empty.
StepFunction kaplan_meier(std::span<const double> durations, std::span<const std::uint8_t> events);
StepFunction kaplan_meier(std::span<const SurvivalSample> samples);

/// Cumulative hazard with increments d_k / Y_k. Throws Empty.
StepFunction nelson_aalen(std::span<const double> durations, std::span<const std::uint8_t> events);
StepFunction nelson_aalen(std::span<const SurvivalSample> samples);

/// Two-sample log-rank chi-square (O - E)^2 / V with hypergeometric variance.
/// Throws Empty for an empty group and Degenerate when neither group has an event.
double logrank_statistic(std::span<const double> durations_a, std::span<const std::uint8_t> events_a,
                         std::span<const double> durations_b, std::span<const std::uint8_t> events_b);
double logrank_statistic(std::span<const SurvivalSample> group_a, std::span<const SurvivalSample> group_b);

/// Harrell's C. A pair (i, j) is comparable when T_i < T_j and i had the event;
/// it is concordant when risk_i > risk_j and counts 0.5 on a score tie.
/// O(n log n). Throws NoComparablePairs, LengthMismatch.
double concordance_index(std::span<const double> durations, std::span<const std::uint8_t> events,
                         std::span<const double> risk_scores);

/// Aalen-Johansen cumulative incidence of `cause`: sum over event times of
/// S(t_k-) * d_{cause,k} / Y_k with S the all-cause Kaplan-Meier. Knots are the
/// all-cause event times, so the causes add up to 1 - S on every knot.
StepFunction cause_specific_cif(const CompetingRisksData& data, EventCode cause);
std::vector<double> cause_specific_cif(const CompetingRisksData& data, EventCode cause,
                                       std::span<const double> time_grid);

}  // namespace lapselab::survival
