#pragma once

#include "lapselab/portfolio.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lapselab::survival {

/// One right-censored observation. `event_flag` is the event indicator of the
/// likelihood, kept distinct from the incentive rate of a strategy.
struct SurvivalSample {
    double duration = 0.0;
    bool event_flag = false;
    std::vector<double> covariates;
};

/// How the three portfolio states map onto a single event indicator.
struct CauseRecoding {
    enum class Mode { CombinedEvent, CauseSpecific };
    Mode mode = Mode::CombinedEvent;
    EventCode cause = EventCode::Lapsed;  // meaningful for CauseSpecific only

    static CauseRecoding combined() { return {Mode::CombinedEvent, EventCode::Lapsed}; }
    /// Throws InvalidConfig unless cause is Lapsed or Death.
    static CauseRecoding cause_specific(EventCode cause);

    bool is_event(EventCode e) const noexcept {
        return mode == Mode::CombinedEvent ? e != EventCode::Active : e == cause;
    }
    std::string name() const;
};

/// Columnar survival data: durations > 0, event flags, covariate matrix.
struct SurvivalData {
    std::vector<double> durations;
    std::vector<std::uint8_t> events;
    Eigen::MatrixXd covariates;
    std::vector<std::string> feature_names;

    std::size_t size() const noexcept { return durations.size(); }
    std::size_t n_features() const noexcept { return static_cast<std::size_t>(covariates.cols()); }
    std::size_t n_events() const noexcept;

    SurvivalData subset(std::span<const std::size_t> rows) const;
    std::vector<double> row(std::size_t i) const;
    std::vector<SurvivalSample> samples() const;

    /// Throws Empty, BadValue (duration <= 0), LengthMismatch.
    void validate() const;

    static SurvivalData from_samples(std::span<const SurvivalSample> samples,
                                     std::vector<std::string> feature_names = {});
};

/// Seniority as duration, recoded event, survival_features() as covariates.
SurvivalData recode(std::span<const PolicyRecord> records, const CauseRecoding& recoding);

/// Durations with their terminal state, for cumulative incidence estimation.
struct CompetingRisksData {
    std::vector<double> durations;
    std::vector<EventCode> causes;  // Active = censored

    static CompetingRisksData from_records(std::span<const PolicyRecord> records);
};

}  // namespace lapselab::survival
