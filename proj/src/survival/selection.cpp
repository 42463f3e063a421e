#include "lapselab/survival/selection.hpp"

#include "lapselab/error.hpp"
#include "lapselab/survival/estimators.hpp"
#include "lapselab/text.hpp"

#include <algorithm>
#include <sstream>

namespace lapselab::survival {
namespace {

std::size_t cost_rank(const std::string& family) {
    for (std::size_t i = 0; i < std::size(kFamilies); ++i)
        if (family == kFamilies[i]) return i;
    return std::size(kFamilies);
}

}  // namespace

std::unique_ptr<SurvivalModel> fit_family(const std::string& family, const SurvivalData& data,
                                          const FamilyOptions& options) {
    if (family == "cox")
        return std::make_unique<CoxModel>(options.cox_aic ? fit_cox_aic(data, options.cox) : fit_cox(data, options.cox));
    if (family == "rsf") return std::make_unique<SurvivalForest>(fit_rsf(data, options.rsf));
    if (family == "gbsm") return std::make_unique<GradientBoostedSurvival>(fit_gbsm(data, options.gbsm));
    throw Error(ErrorCode::InvalidConfig, "unknown survival family '" + family + "'");
}

const std::string& ComparisonReport::selected_for(const std::string& recoding) const {
    for (const auto& [r, f] : selected)
        if (r == recoding) return f;
    throw Error(ErrorCode::InvalidConfig, "no selection for recoding '" + recoding + "'");
}

nlohmann::json ComparisonReport::to_json() const {
    nlohmann::json s = nlohmann::json::array();
    for (const auto& m : scores) s.push_back({{"family", m.family}, {"recoding", m.recoding}, {"c_index", m.c_index}});
    nlohmann::json sel = nlohmann::json::object();
    for (const auto& [r, f] : selected) sel[r] = f;
    return {{"scores", std::move(s)}, {"selected", std::move(sel)}};
}

std::string ComparisonReport::to_csv() const {
    std::ostringstream out;
    out << "recoding,family,c_index\n";
    for (const auto& m : scores) out << m.recoding << ',' << m.family << ',' << text::format_double(m.c_index) << '\n';
    return out.str();
}

ComparisonReport compare_models(std::span<const PolicyRecord> records, std::span<const CauseRecoding> recodings,
                                const ComparisonOptions& options) {
    if (options.family_names.empty()) throw Error(ErrorCode::InvalidConfig, "no survival families to compare");
    const Fold split = train_test_split(records.size(), options.test_fraction, derive_seed(options.seed, "model-comparison"));

    ComparisonReport report;
    for (const auto& recoding : recodings) {
        const SurvivalData all = recode(records, recoding);
        const SurvivalData train = all.subset(split.train);
        const SurvivalData test = all.subset(split.validation);
        std::optional<ModelScore> best;
        for (const auto& family : options.family_names) {
            std::unique_ptr<SurvivalModel> model;
            try {
                model = fit_family(family, train, options.families);
            } catch (const Error& e) {
                throw Error(e.code(), family + " on " + recoding.name() + ": " + e.what());
            }
            const auto scores = risk_scores(*model, test.covariates);
            ModelScore s{family, recoding.name(), concordance_index(test.durations, test.events, scores)};
            const bool better = !best || s.c_index > best->c_index ||
                                (s.c_index == best->c_index && cost_rank(family) < cost_rank(best->family));
            if (better) best = s;
            report.scores.push_back(std::move(s));
        }
        report.selected.emplace_back(recoding.name(), best->family);
    }
    return report;
}

}  // namespace lapselab::survival
