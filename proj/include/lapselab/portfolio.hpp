#pragma once

#include <Eigen/Core>
#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lapselab {

/// Serialized as 0/1/2.
enum class EventCode : int { Active = 0, Lapsed = 1, Death = 2 };

/// Serialized as F/M/U.
enum class Gender : int { F = 0, M = 1, Unspecified = 2 };

/// Serialized as P1/P2/P3.
enum class Product : int { P1 = 0, P2 = 1, P3 = 2 };

/// One subject, i.e. one (policy, policyholder) pair.
struct PolicyRecord {
    std::string subject_id;
    double age_at_subscription = 0.0;
    int n_contracts = 1;
    Gender gender = Gender::M;
    Product product = Product::P1;
    int start_year = 2000;
    double seniority = 0.0;    // censored duration in years
    double face_amount = 0.0;  // most recent observed
    EventCode event = EventCode::Active;

    bool is_lapser() const noexcept { return event == EventCode::Lapsed; }

    friend bool operator==(const PolicyRecord&, const PolicyRecord&) = default;
};

/// Throws BadValue naming the first violated field.
void validate(const PolicyRecord& r, std::size_t row = 0);

/// Immutable validated collection of subjects. Subject ids are unique and the
/// collection is never empty.
class PortfolioDataset {
public:
    static constexpr const char* kSchemaVersion = "lapselab.portfolio.v1";

    explicit PortfolioDataset(std::vector<PolicyRecord> records);

    std::span<const PolicyRecord> records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    const PolicyRecord& operator[](std::size_t i) const { return records_[i]; }
    std::string_view schema_version() const noexcept { return kSchemaVersion; }

    /// New dataset holding the given rows in the given order.
    PortfolioDataset subset(std::span<const std::size_t> rows) const;

    friend bool operator==(const PortfolioDataset&, const PortfolioDataset&) = default;

private:
    std::vector<PolicyRecord> records_;
};

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::array<const char*, 9> kCsvColumns = {
    "subject_id", "age_at_subscription", "n_contracts", "gender", "product",
    "start_year", "seniority",           "face_amount", "event"};

PortfolioDataset read_csv(std::istream& in);
PortfolioDataset load_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const PortfolioDataset& data);
void write_csv(const std::filesystem::path& path, const PortfolioDataset& data);

// ---------------------------------------------------------------------------
// Synthetic portfolios
// ---------------------------------------------------------------------------

/// Number of covariates entering the synthetic hazards; same order as
/// survival_features().
inline constexpr std::size_t kHazardCovariates = 6;

struct SynthConfig {
    std::size_t n_subjects = 10000;
    std::uint64_t seed = 0;
    std::array<double, 3> gender_shares{0.42, 0.574, 0.006};   // F, M, U
    std::array<double, 3> product_shares{0.72, 0.25, 0.03};    // P1, P2, P3
    std::array<double, 3> state_shares{0.61, 0.22, 0.17};      // active, lapsed, death
    double mean_seniority = 13.4;
    double age_mean = 45.0;
    double age_sd = 13.0;
    double face_log_mean = 9.62;  // lognormal; mean face ~ 40k
    double face_log_sd = 1.4;
    double extra_contract_rate = 0.35;  // n_contracts = 1 + geometric
    int observation_year = 2018;
    /// Log-hazard coefficients on the survival feature vector.
    std::array<double, kHazardCovariates> lapse_coefficients{-0.015, 0.05, 0.1, 0.2, -0.1, -8e-6};
    std::array<double, kHazardCovariates> death_coefficients{0.07, 0.0, -0.3, 0.0, 0.0, 0.0};
};

/// Throws InvalidConfig.
void validate(const SynthConfig& cfg);

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthConfig& cfg);

/// Baseline rates and censoring window solved so that the expected state mix
/// and mean seniority over the drawn covariates hit the configured targets.
struct SynthCalibration {
    double lapse_rate = 0.0;
    double death_rate = 0.0;
    double window = 0.0;  // entry offsets ~ U(0, window)
};

/// Competing exponential proportional hazards (lapse, death) with uniform
/// administrative censoring. Pure function of cfg.
PortfolioDataset generate_synthetic(const SynthConfig& cfg);
PortfolioDataset generate_synthetic(const SynthConfig& cfg, SynthCalibration* calibration);

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

/// Shuffled k-fold partition; fold sizes differ by at most one. Throws BadK.
std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);
std::vector<Fold> kfold_split(const PortfolioDataset& data, std::size_t k, std::uint64_t seed);

/// Shuffled split with round(n * test_fraction) rows held out (at least one each side).
Fold train_test_split(std::size_t n, double test_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

struct SummaryStats {
    std::size_t n = 0;
    std::array<double, 3> state_shares{};    // active, lapsed, death
    std::array<double, 3> gender_shares{};   // F, M, U
    std::array<double, 3> product_shares{};  // P1, P2, P3
    double mean_age = 0.0;
    double mean_seniority = 0.0;
    double mean_face_amount = 0.0;
    /// NaN when the state is absent.
    std::array<double, 3> mean_seniority_by_state{};
    std::array<double, 3> mean_face_amount_by_state{};
};

/// Throws EmptyDataset.
SummaryStats summary_stats(std::span<const PolicyRecord> records);
nlohmann::json to_json(const SummaryStats& s);

// ---------------------------------------------------------------------------
// Feature encoding (one-hot, reference levels M and P1; U shares the M level)
// ---------------------------------------------------------------------------

struct FeatureMatrix {
    Eigen::MatrixXd values;  // rows = subjects
    std::vector<std::string> names;
};

/// age_at_subscription, n_contracts, gender_F, product_P2, product_P3, face_amount.
FeatureMatrix survival_features(std::span<const PolicyRecord> records);

/// Survival features plus seniority and start_year.
FeatureMatrix classifier_features(std::span<const PolicyRecord> records);

std::vector<std::uint8_t> lapse_labels(std::span<const PolicyRecord> records);

std::string to_string(EventCode e);
std::string to_string(Gender g);
std::string to_string(Product p);

}  // namespace lapselab
