#pragma once

#include "lapselab/survival/cox.hpp"
#include "lapselab/survival/forest.hpp"
#include "lapselab/survival/gbsm.hpp"

#include <memory>
#include <string>
#include <vector>

namespace lapselab::survival {

/// Families in increasing fitting cost; selection ties go to the earlier one.
inline constexpr const char* kFamilies[] = {"cox", "gbsm", "rsf"};

struct FamilyOptions {
    CoxOptions cox;
    bool cox_aic = true;  // best-subset covariate selection
    ForestOptions rsf;
    GbsmOptions gbsm;
};

/// Throws InvalidConfig for an unknown family name.
std::unique_ptr<SurvivalModel> fit_family(const std::string& family, const SurvivalData& data,
                                          const FamilyOptions& options);

struct ModelScore {
    std::string family;
    std::string recoding;
    double c_index = 0.0;
};

struct ComparisonReport {
    std::vector<ModelScore> scores;  // recoding-major, families in kFamilies order
    std::vector<std::pair<std::string, std::string>> selected;  // (recoding, family)

    const std::string& selected_for(const std::string& recoding) const;
    nlohmann::json to_json() const;
    /// recoding,family,c_index rows.
    std::string to_csv() const;
};

struct ComparisonOptions {
    FamilyOptions families;
    std::vector<std::string> family_names{"cox", "gbsm", "rsf"};
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
};

/// Fits every family on a shared train split for each recoding and scores the
/// held-out concordance index.
ComparisonReport compare_models(std::span<const PolicyRecord> records, std::span<const CauseRecoding> recodings,
                                const ComparisonOptions& options);

}  // namespace lapselab::survival
