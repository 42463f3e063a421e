#include "lapselab/survival/data.hpp"

#include "lapselab/error.hpp"

#include <cmath>

namespace lapselab::survival {

CauseRecoding CauseRecoding::cause_specific(EventCode cause) {
    if (cause != EventCode::Lapsed && cause != EventCode::Death)
        throw Error(ErrorCode::InvalidConfig, "cause-specific recoding needs cause Lapsed or Death");
    return {Mode::CauseSpecific, cause};
}

std::string CauseRecoding::name() const {
    if (mode == Mode::CombinedEvent) return "combined";
    return cause == EventCode::Lapsed ? "cause_lapse" : "cause_death";
}

std::size_t SurvivalData::n_events() const noexcept {
    std::size_t d = 0;
    for (auto e : events) d += e ? 1 : 0;
    return d;
}

SurvivalData SurvivalData::subset(std::span<const std::size_t> rows) const {
    SurvivalData out;
    out.feature_names = feature_names;
    out.durations.reserve(rows.size());
    out.events.reserve(rows.size());
    out.covariates.resize(static_cast<Eigen::Index>(rows.size()), covariates.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.durations.push_back(durations.at(rows[i]));
        out.events.push_back(events.at(rows[i]));
        out.covariates.row(static_cast<Eigen::Index>(i)) = covariates.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

std::vector<double> SurvivalData::row(std::size_t i) const {
    std::vector<double> x(n_features());
    for (std::size_t c = 0; c < x.size(); ++c)
        x[c] = covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    return x;
}

std::vector<SurvivalSample> SurvivalData::samples() const {
    std::vector<SurvivalSample> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = {durations[i], events[i] != 0, row(i)};
    return out;
}

void SurvivalData::validate() const {
    if (durations.empty()) throw Error(ErrorCode::Empty, "no survival samples");
    if (events.size() != durations.size() || static_cast<std::size_t>(covariates.rows()) != durations.size())
        throw Error(ErrorCode::LengthMismatch, "durations, events and covariates differ in length");
    if (!feature_names.empty() && feature_names.size() != n_features())
        throw Error(ErrorCode::LengthMismatch, "feature names do not match covariate columns");
    for (std::size_t i = 0; i < durations.size(); ++i)
        if (!(std::isfinite(durations[i]) && durations[i] > 0.0))
            throw Error(ErrorCode::BadValue, "duration must be > 0 (sample " + std::to_string(i) + ")");
    if (!covariates.allFinite()) throw Error(ErrorCode::BadValue, "non-finite covariate");
}

SurvivalData SurvivalData::from_samples(std::span<const SurvivalSample> samples,
                                        std::vector<std::string> feature_names) {
    SurvivalData out;
    const std::size_t p = samples.empty() ? 0 : samples.front().covariates.size();
    out.covariates.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].covariates.size() != p)
            throw Error(ErrorCode::LengthMismatch, "covariate vectors differ in length");
        out.durations.push_back(samples[i].duration);
        out.events.push_back(samples[i].event_flag ? 1 : 0);
        for (std::size_t c = 0; c < p; ++c)
            out.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = samples[i].covariates[c];
    }
    if (feature_names.empty())
        for (std::size_t c = 0; c < p; ++c) feature_names.push_back("x" + std::to_string(c));
    out.feature_names = std::move(feature_names);
    return out;
}

SurvivalData recode(std::span<const PolicyRecord> records, const CauseRecoding& recoding) {
    FeatureMatrix features = survival_features(records);
    SurvivalData out;
    out.covariates = std::move(features.values);
    out.feature_names = std::move(features.names);
    out.durations.reserve(records.size());
    out.events.reserve(records.size());
    for (const auto& r : records) {
        out.durations.push_back(r.seniority);
        out.events.push_back(recoding.is_event(r.event) ? 1 : 0);
    }
    return out;
}

CompetingRisksData CompetingRisksData::from_records(std::span<const PolicyRecord> records) {
    CompetingRisksData out;
    for (const auto& r : records) {
        out.durations.push_back(r.seniority);
        out.causes.push_back(r.event);
    }
    return out;
}

}  // namespace lapselab::survival
