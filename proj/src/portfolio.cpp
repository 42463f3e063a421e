#include "lapselab/portfolio.hpp"

#include "lapselab/error.hpp"
#include "lapselab/rng.hpp"
#include "lapselab/text.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace lapselab {

std::string to_string(EventCode e) { return std::to_string(static_cast<int>(e)); }

std::string to_string(Gender g) {
    switch (g) {
        case Gender::F: return "F";
        case Gender::M: return "M";
        case Gender::Unspecified: return "U";
    }
    return "U";
}

std::string to_string(Product p) {
    switch (p) {
        case Product::P1: return "P1";
        case Product::P2: return "P2";
        case Product::P3: return "P3";
    }
    return "P1";
}

namespace {

[[noreturn]] void bad_value(std::size_t row, std::string_view column, std::string_view why) {
    throw Error(ErrorCode::BadValue,
                "row " + std::to_string(row) + ", column " + std::string(column) + ": " + std::string(why));
}

}  // namespace

void validate(const PolicyRecord& r, std::size_t row) {
    if (r.subject_id.empty()) bad_value(row, "subject_id", "empty");
    if (r.subject_id.find_first_of(",\"\n\r") != std::string::npos)
        bad_value(row, "subject_id", "contains a separator or quote");
    if (!(std::isfinite(r.age_at_subscription) && r.age_at_subscription >= 0.0))
        bad_value(row, "age_at_subscription", "must be a finite value >= 0");
    if (r.n_contracts < 1) bad_value(row, "n_contracts", "must be >= 1");
    if (!(std::isfinite(r.seniority) && r.seniority > 0.0))
        bad_value(row, "seniority", "must be a finite value > 0");
    if (!(std::isfinite(r.face_amount) && r.face_amount >= 0.0))
        bad_value(row, "face_amount", "must be a finite value >= 0");
    const int e = static_cast<int>(r.event);
    if (e < 0 || e > 2) bad_value(row, "event", "must be 0, 1 or 2");
}

PortfolioDataset::PortfolioDataset(std::vector<PolicyRecord> records) : records_(std::move(records)) {
    if (records_.empty()) throw Error(ErrorCode::EmptyDataset, "portfolio has no records");
    std::unordered_set<std::string> seen;
    seen.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
        validate(records_[i], i + 1);
        if (!seen.insert(records_[i].subject_id).second)
            throw Error(ErrorCode::DuplicateId,
                        "row " + std::to_string(i + 1) + ": subject_id " + records_[i].subject_id);
    }
}

PortfolioDataset PortfolioDataset::subset(std::span<const std::size_t> rows) const {
    std::vector<PolicyRecord> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(records_.at(r));
    return PortfolioDataset(std::move(out));
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

PortfolioDataset read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, "empty file, no header");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
    const auto header = text::split(text::trim(line), ',');
    for (std::size_t c = 0; c < kCsvColumns.size(); ++c) {
        if (c >= header.size() || text::trim(header[c]) != kCsvColumns[c])
            throw Error(ErrorCode::MissingColumn,
                        "expected column " + std::to_string(c + 1) + " to be " + kCsvColumns[c]);
    }
    if (header.size() != kCsvColumns.size())
        throw Error(ErrorCode::MissingColumn, "unexpected extra columns in header");

    std::vector<PolicyRecord> records;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const auto trimmed = text::trim(line);
        if (trimmed.empty()) continue;
        const auto f = text::split(trimmed, ',');
        if (f.size() != kCsvColumns.size())
            bad_value(row, "*", "expected " + std::to_string(kCsvColumns.size()) + " fields");

        PolicyRecord r;
        r.subject_id = std::string(text::trim(f[0]));

        auto real = [&](std::size_t c) {
            const auto v = text::parse_double(f[c]);
            if (!v) bad_value(row, kCsvColumns[c], "not a number");
            return *v;
        };
        auto integer = [&](std::size_t c) {
            const auto v = text::parse_int(f[c]);
            if (!v || *v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max())
                bad_value(row, kCsvColumns[c], "not an integer");
            return static_cast<int>(*v);
        };

        r.age_at_subscription = real(1);
        r.n_contracts = integer(2);
        const auto g = text::trim(f[3]);
        if (g == "F") r.gender = Gender::F;
        else if (g == "M") r.gender = Gender::M;
        else if (g == "U") r.gender = Gender::Unspecified;
        else bad_value(row, "gender", "expected F, M or U");
        const auto p = text::trim(f[4]);
        if (p == "P1") r.product = Product::P1;
        else if (p == "P2") r.product = Product::P2;
        else if (p == "P3") r.product = Product::P3;
        else bad_value(row, "product", "expected P1, P2 or P3");
        r.start_year = integer(5);
        r.seniority = real(6);
        r.face_amount = real(7);
        const int e = integer(8);
        if (e < 0 || e > 2) bad_value(row, "event", "expected 0, 1 or 2");
        r.event = static_cast<EventCode>(e);

        validate(r, row);
        records.push_back(std::move(r));
    }
    return PortfolioDataset(std::move(records));
}

PortfolioDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return read_csv(in);
}

void write_csv(std::ostream& out, const PortfolioDataset& data) {
    for (std::size_t c = 0; c < kCsvColumns.size(); ++c) out << (c ? "," : "") << kCsvColumns[c];
    out << '\n';
    for (const auto& r : data.records()) {
        out << r.subject_id << ',' << text::format_double(r.age_at_subscription) << ','
            << r.n_contracts << ',' << to_string(r.gender) << ',' << to_string(r.product) << ','
            << r.start_year << ',' << text::format_double(r.seniority) << ','
            << text::format_double(r.face_amount) << ',' << to_string(r.event) << '\n';
    }
}

void write_csv(const std::filesystem::path& path, const PortfolioDataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    write_csv(out, data);
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

void validate(const SynthConfig& cfg) {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (cfg.n_subjects < 1) fail("n_subjects must be >= 1");
    auto check_shares = [&](const std::array<double, 3>& s, const char* name) {
        double total = 0.0;
        for (double v : s) {
            if (!(v >= 0.0 && v <= 1.0)) fail(std::string(name) + " entries must lie in [0, 1]");
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-9) fail(std::string(name) + " must sum to 1");
    };
    check_shares(cfg.gender_shares, "gender_shares");
    check_shares(cfg.product_shares, "product_shares");
    check_shares(cfg.state_shares, "state_shares");
    if (!(cfg.state_shares[0] > 0.0 && cfg.state_shares[1] > 0.0 && cfg.state_shares[2] > 0.0))
        fail("state_shares must all be positive for the hazard calibration");
    if (!(cfg.mean_seniority > 0.0)) fail("mean_seniority must be > 0");
    if (!(cfg.age_sd >= 0.0) || !(cfg.face_log_sd >= 0.0)) fail("standard deviations must be >= 0");
    if (!(cfg.extra_contract_rate >= 0.0 && cfg.extra_contract_rate < 1.0))
        fail("extra_contract_rate must lie in [0, 1)");
    for (double b : cfg.lapse_coefficients)
        if (!std::isfinite(b)) fail("lapse_coefficients must be finite");
    for (double b : cfg.death_coefficients)
        if (!std::isfinite(b)) fail("death_coefficients must be finite");
}

namespace {

template <std::size_t N>
std::array<double, N> array_from_json(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != N)
        throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be an array of " + std::to_string(N));
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = v[i].get<double>();
    return out;
}

struct SubjectCovariates {
    PolicyRecord record;
    std::array<double, kHazardCovariates> x{};
};

std::array<double, kHazardCovariates> hazard_row(const PolicyRecord& r) {
    return {r.age_at_subscription,
            static_cast<double>(r.n_contracts),
            r.gender == Gender::F ? 1.0 : 0.0,
            r.product == Product::P2 ? 1.0 : 0.0,
            r.product == Product::P3 ? 1.0 : 0.0,
            r.face_amount};
}

double dot(const std::array<double, kHazardCovariates>& a, const std::array<double, kHazardCovariates>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < kHazardCovariates; ++i) s += a[i] * b[i];
    return s;
}

// 1 - E_C[exp(-h C)] for C ~ U(0, W): probability the event precedes censoring.
double event_probability(double h, double window) {
    const double x = h * window;
    if (x < 1e-8) return x / 2.0;
    return 1.0 + std::expm1(-x) / x;
}

// Expected (lapse share, death share, mean seniority) given baseline rates.
Eigen::Vector3d expected_marginals(const std::vector<double>& lapse_risk, const std::vector<double>& death_risk,
                                   double lapse_rate, double death_rate, double window) {
    double pl = 0.0, pd = 0.0, sen = 0.0;
    for (std::size_t i = 0; i < lapse_risk.size(); ++i) {
        const double a = lapse_rate * lapse_risk[i];
        const double b = death_rate * death_risk[i];
        const double h = a + b;
        const double q = event_probability(h, window);
        pl += a / h * q;
        pd += b / h * q;
        sen += h * window < 1e-8 ? window / 2.0 : q / h;
    }
    const double n = static_cast<double>(lapse_risk.size());
    return {pl / n, pd / n, sen / n};
}

SynthCalibration calibrate(const SynthConfig& cfg, const std::vector<double>& lapse_risk,
                           const std::vector<double>& death_risk) {
    const Eigen::Vector3d target(std::log(cfg.state_shares[1]), std::log(cfg.state_shares[2]),
                                 std::log(cfg.mean_seniority));
    auto residual = [&](const Eigen::Vector3d& logp) -> Eigen::Vector3d {
        const Eigen::Vector3d m = expected_marginals(lapse_risk, death_risk, std::exp(logp[0]),
                                                     std::exp(logp[1]), std::exp(logp[2]));
        return Eigen::Vector3d(std::log(m[0]), std::log(m[1]), std::log(m[2])) - target;
    };

    // Homogeneous starting point: event share q, mean seniority q/h.
    const double q = cfg.state_shares[1] + cfg.state_shares[2];
    const double h0 = q / cfg.mean_seniority;
    double mean_l = 0.0, mean_d = 0.0;
    for (std::size_t i = 0; i < lapse_risk.size(); ++i) {
        mean_l += lapse_risk[i];
        mean_d += death_risk[i];
    }
    mean_l /= static_cast<double>(lapse_risk.size());
    mean_d /= static_cast<double>(death_risk.size());
    Eigen::Vector3d logp(std::log(h0 * cfg.state_shares[1] / q / mean_l),
                         std::log(h0 * cfg.state_shares[2] / q / mean_d), std::log(3.0 * cfg.mean_seniority));

    Eigen::Vector3d r = residual(logp);
    for (int iter = 0; iter < 200 && r.norm() > 1e-12; ++iter) {
        Eigen::Matrix3d jac;
        for (int c = 0; c < 3; ++c) {
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e[c] = 1e-6;
            jac.col(c) = (residual(logp + e) - residual(logp - e)) / 2e-6;
        }
        const Eigen::Vector3d step = jac.fullPivLu().solve(-r);
        if (!step.allFinite()) break;
        double scale = 1.0;
        for (int half = 0; half < 40; ++half, scale *= 0.5) {
            const Eigen::Vector3d trial = logp + scale * step;
            const Eigen::Vector3d tr = residual(trial);
            if (tr.allFinite() && tr.norm() < r.norm()) {
                logp = trial;
                r = tr;
                break;
            }
        }
        if (scale < 1e-10) break;
    }
    if (!(r.norm() < 1e-8))
        throw Error(ErrorCode::InvalidConfig,
                    "cannot calibrate hazards to the requested state mix and mean seniority");
    return {std::exp(logp[0]), std::exp(logp[1]), std::exp(logp[2])};
}

double round_to(double v, double unit) { return std::round(v / unit) * unit; }

}  // namespace

SynthConfig synth_config_from_json(const nlohmann::json& j) {
    SynthConfig cfg;
    try {
        cfg.n_subjects = j.at("n_subjects").get<std::size_t>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("gender_shares")) cfg.gender_shares = array_from_json<3>(j, "gender_shares");
        if (j.contains("product_shares")) cfg.product_shares = array_from_json<3>(j, "product_shares");
        if (j.contains("state_shares")) cfg.state_shares = array_from_json<3>(j, "state_shares");
        cfg.mean_seniority = j.value("mean_seniority", cfg.mean_seniority);
        cfg.age_mean = j.value("age_mean", cfg.age_mean);
        cfg.age_sd = j.value("age_sd", cfg.age_sd);
        cfg.face_log_mean = j.value("face_log_mean", cfg.face_log_mean);
        cfg.face_log_sd = j.value("face_log_sd", cfg.face_log_sd);
        cfg.extra_contract_rate = j.value("extra_contract_rate", cfg.extra_contract_rate);
        cfg.observation_year = j.value("observation_year", cfg.observation_year);
        if (j.contains("lapse_coefficients"))
            cfg.lapse_coefficients = array_from_json<kHazardCovariates>(j, "lapse_coefficients");
        if (j.contains("death_coefficients"))
            cfg.death_coefficients = array_from_json<kHazardCovariates>(j, "death_coefficients");
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    validate(cfg);
    return cfg;
}

nlohmann::json to_json(const SynthConfig& cfg) {
    return {{"n_subjects", cfg.n_subjects},
            {"seed", cfg.seed},
            {"gender_shares", cfg.gender_shares},
            {"product_shares", cfg.product_shares},
            {"state_shares", cfg.state_shares},
            {"mean_seniority", cfg.mean_seniority},
            {"age_mean", cfg.age_mean},
            {"age_sd", cfg.age_sd},
            {"face_log_mean", cfg.face_log_mean},
            {"face_log_sd", cfg.face_log_sd},
            {"extra_contract_rate", cfg.extra_contract_rate},
            {"observation_year", cfg.observation_year},
            {"lapse_coefficients", cfg.lapse_coefficients},
            {"death_coefficients", cfg.death_coefficients}};
}

PortfolioDataset generate_synthetic(const SynthConfig& cfg) { return generate_synthetic(cfg, nullptr); }

PortfolioDataset generate_synthetic(const SynthConfig& cfg, SynthCalibration* calibration) {
    validate(cfg);
    Rng covariate_rng(derive_seed(cfg.seed, std::string_view("covariates")));
    Rng duration_rng(derive_seed(cfg.seed, std::string_view("durations")));

    const std::size_t n = cfg.n_subjects;
    const int width = static_cast<int>(std::to_string(n).size());
    std::vector<PolicyRecord> records(n);
    std::vector<double> lapse_risk(n), death_risk(n);
    const std::vector<double> gender_w(cfg.gender_shares.begin(), cfg.gender_shares.end());
    const std::vector<double> product_w(cfg.product_shares.begin(), cfg.product_shares.end());

    for (std::size_t i = 0; i < n; ++i) {
        PolicyRecord& r = records[i];
        std::string id = std::to_string(i + 1);
        r.subject_id = "S" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
        r.gender = static_cast<Gender>(covariate_rng.categorical(gender_w));
        r.product = static_cast<Product>(covariate_rng.categorical(product_w));
        r.age_at_subscription =
            round_to(std::clamp(covariate_rng.normal(cfg.age_mean, cfg.age_sd), 18.0, 90.0), 0.1);
        r.n_contracts = 1;
        while (r.n_contracts < 20 && covariate_rng.bernoulli(cfg.extra_contract_rate)) ++r.n_contracts;
        r.face_amount = round_to(std::exp(covariate_rng.normal(cfg.face_log_mean, cfg.face_log_sd)), 0.01);

        const auto x = hazard_row(r);
        lapse_risk[i] = std::exp(dot(x, cfg.lapse_coefficients));
        death_risk[i] = std::exp(dot(x, cfg.death_coefficients));
    }

    const SynthCalibration cal = calibrate(cfg, lapse_risk, death_risk);
    if (calibration) *calibration = cal;

    for (std::size_t i = 0; i < n; ++i) {
        PolicyRecord& r = records[i];
        const double entry_offset = duration_rng.uniform(0.0, cal.window);
        const double t_lapse = duration_rng.exponential(cal.lapse_rate * lapse_risk[i]);
        const double t_death = duration_rng.exponential(cal.death_rate * death_risk[i]);
        const double t_event = std::min(t_lapse, t_death);
        if (t_event <= entry_offset) {
            r.seniority = t_event;
            r.event = t_lapse < t_death ? EventCode::Lapsed : EventCode::Death;
        } else {
            r.seniority = entry_offset;
            r.event = EventCode::Active;
        }
        r.seniority = std::max(1e-4, round_to(r.seniority, 1e-4));
        r.start_year = cfg.observation_year - static_cast<int>(std::floor(entry_offset));
    }
    return PortfolioDataset(std::move(records));
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2 || k > n)
        throw Error(ErrorCode::BadK, "k=" + std::to_string(k) + " with n=" + std::to_string(n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, std::string_view("kfold")));
    rng.shuffle(order);

    std::vector<std::size_t> fold_of(n);
    const std::size_t base = n / k, extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        for (std::size_t j = 0; j < size; ++j) fold_of[order[pos++]] = f;
    }
    std::vector<Fold> folds(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < k; ++f) {
            if (fold_of[i] == f) folds[f].validation.push_back(i);
            else folds[f].train.push_back(i);
        }
    }
    return folds;
}

std::vector<Fold> kfold_split(const PortfolioDataset& data, std::size_t k, std::uint64_t seed) {
    return kfold_split(data.size(), k, seed);
}

Fold train_test_split(std::size_t n, double test_fraction, std::uint64_t seed) {
    if (n < 2) throw Error(ErrorCode::BadK, "need at least two rows to split");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, std::string_view("train_test")));
    rng.shuffle(order);
    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    Fold f;
    f.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    f.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(f.validation.begin(), f.validation.end());
    std::sort(f.train.begin(), f.train.end());
    return f;
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

SummaryStats summary_stats(std::span<const PolicyRecord> records) {
    if (records.empty()) throw Error(ErrorCode::EmptyDataset, "cannot summarize an empty dataset");
    SummaryStats s;
    s.n = records.size();
    std::array<double, 3> state_count{}, sen_sum{}, face_sum{};
    double age = 0.0, sen = 0.0, face = 0.0;
    for (const auto& r : records) {
        const auto e = static_cast<std::size_t>(r.event);
        state_count[e] += 1.0;
        sen_sum[e] += r.seniority;
        face_sum[e] += r.face_amount;
        s.gender_shares[static_cast<std::size_t>(r.gender)] += 1.0;
        s.product_shares[static_cast<std::size_t>(r.product)] += 1.0;
        age += r.age_at_subscription;
        sen += r.seniority;
        face += r.face_amount;
    }
    const double n = static_cast<double>(s.n);
    for (std::size_t j = 0; j < 3; ++j) {
        s.state_shares[j] = state_count[j] / n;
        s.gender_shares[j] /= n;
        s.product_shares[j] /= n;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        s.mean_seniority_by_state[j] = state_count[j] > 0 ? sen_sum[j] / state_count[j] : nan;
        s.mean_face_amount_by_state[j] = state_count[j] > 0 ? face_sum[j] / state_count[j] : nan;
    }
    s.mean_age = age / n;
    s.mean_seniority = sen / n;
    s.mean_face_amount = face / n;
    return s;
}

nlohmann::json to_json(const SummaryStats& s) {
    auto nullable = [](const std::array<double, 3>& a) {
        nlohmann::json out = nlohmann::json::array();
        for (double v : a) out.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
        return out;
    };
    return {{"n", s.n},
            {"state_shares", {{"active", s.state_shares[0]}, {"lapsed", s.state_shares[1]}, {"death", s.state_shares[2]}}},
            {"gender_shares", {{"F", s.gender_shares[0]}, {"M", s.gender_shares[1]}, {"U", s.gender_shares[2]}}},
            {"product_shares", {{"P1", s.product_shares[0]}, {"P2", s.product_shares[1]}, {"P3", s.product_shares[2]}}},
            {"mean_age", s.mean_age},
            {"mean_seniority", s.mean_seniority},
            {"mean_face_amount", s.mean_face_amount},
            {"mean_seniority_by_state", nullable(s.mean_seniority_by_state)},
            {"mean_face_amount_by_state", nullable(s.mean_face_amount_by_state)}};
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

FeatureMatrix survival_features(std::span<const PolicyRecord> records) {
    FeatureMatrix m;
    m.names = {"age_at_subscription", "n_contracts", "gender_F", "product_P2", "product_P3", "face_amount"};
    m.values.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(m.names.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto x = hazard_row(records[i]);
        for (std::size_t c = 0; c < x.size(); ++c)
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = x[c];
    }
    return m;
}

FeatureMatrix classifier_features(std::span<const PolicyRecord> records) {
    FeatureMatrix base = survival_features(records);
    FeatureMatrix m;
    m.names = base.names;
    m.names.push_back("seniority");
    m.names.push_back("start_year");
    m.values.resize(base.values.rows(), base.values.cols() + 2);
    m.values.leftCols(base.values.cols()) = base.values;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        m.values(row, base.values.cols()) = records[i].seniority;
        m.values(row, base.values.cols() + 1) = static_cast<double>(records[i].start_year);
    }
    return m;
}

std::vector<std::uint8_t> lapse_labels(std::span<const PolicyRecord> records) {
    std::vector<std::uint8_t> y(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) y[i] = records[i].is_lapser() ? 1 : 0;
    return y;
}

}  // namespace lapselab
