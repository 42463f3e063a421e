#include "lapselab/survival/retention.hpp"

#include "lapselab/error.hpp"
#include "lapselab/parallel.hpp"

#include <algorithm>

namespace lapselab::survival {
namespace {

constexpr double kUnderflow = 1e-300;

}  // namespace

RetentionMatrices RetentionMatrices::truncated(int T) const {
    if (T < 0 || T > horizon)
        throw Error(ErrorCode::HorizonMismatch,
                    "horizon " + std::to_string(T) + " requested from matrices built for " + std::to_string(horizon));
    return {r_acceptant.leftCols(T + 1), r_lapser.leftCols(T + 1), T};
}

RetentionMatrices RetentionMatrices::subset(std::span<const std::size_t> rows) const {
    RetentionMatrices out{Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), r_acceptant.cols()),
                          Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), r_lapser.cols()), horizon};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= this->rows()) throw Error(ErrorCode::AlignmentError, "row index out of range");
        out.r_acceptant.row(static_cast<Eigen::Index>(i)) = r_acceptant.row(static_cast<Eigen::Index>(rows[i]));
        out.r_lapser.row(static_cast<Eigen::Index>(i)) = r_lapser.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

void RetentionMatrices::validate() const {
    if (horizon < 0) throw Error(ErrorCode::BadValue, "negative horizon");
    for (const Eigen::MatrixXd* m : {&r_acceptant, &r_lapser}) {
        if (m->cols() != horizon + 1 || m->rows() != r_acceptant.rows())
            throw Error(ErrorCode::LengthMismatch, "retention matrix shape does not match (n, T+1)");
        for (Eigen::Index i = 0; i < m->rows(); ++i) {
            if ((*m)(i, 0) != 1.0) throw Error(ErrorCode::BadValue, "retention column 0 must be 1");
            for (Eigen::Index t = 1; t < m->cols(); ++t) {
                const double v = (*m)(i, t);
                if (!(v >= 0.0 && v <= 1.0) || v > (*m)(i, t - 1))
                    throw Error(ErrorCode::BadValue, "retention row " + std::to_string(i) + " not a nonincreasing probability");
            }
        }
    }
}

nlohmann::json RetentionMatrices::to_json() const {
    auto rows_of = [](const Eigen::MatrixXd& m) {
        nlohmann::json out = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            std::vector<double> r(static_cast<std::size_t>(m.cols()));
            for (Eigen::Index t = 0; t < m.cols(); ++t) r[static_cast<std::size_t>(t)] = m(i, t);
            out.push_back(std::move(r));
        }
        return out;
    };
    return {{"horizon", horizon}, {"r_acceptant", rows_of(r_acceptant)}, {"r_lapser", rows_of(r_lapser)}};
}

RetentionMatrices RetentionMatrices::from_json(const nlohmann::json& j) {
    const int T = j.at("horizon").get<int>();
    auto matrix_of = [T](const nlohmann::json& rows) {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), T + 1);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto r = rows[i].get<std::vector<double>>();
            if (r.size() != static_cast<std::size_t>(T + 1)) throw Error(ErrorCode::LengthMismatch, "retention row width");
            for (int t = 0; t <= T; ++t) m(static_cast<Eigen::Index>(i), t) = r[static_cast<std::size_t>(t)];
        }
        return m;
    };
    RetentionMatrices out{matrix_of(j.at("r_acceptant")), matrix_of(j.at("r_lapser")), T};
    out.validate();
    return out;
}

Eigen::MatrixXd conditional_survival(const SurvivalModel& model, const Eigen::MatrixXd& covariates,
                                     std::span<const double> seniority, int horizon) {
    detail::check_fitted(model);
    detail::check_width(model, static_cast<std::size_t>(covariates.cols()));
    if (horizon < 0) throw Error(ErrorCode::InvalidConfig, "negative horizon");
    if (seniority.size() != static_cast<std::size_t>(covariates.rows()))
        throw Error(ErrorCode::AlignmentError, "seniority and covariates differ in length");

    Eigen::MatrixXd out(covariates.rows(), horizon + 1);
    parallel_for(seniority.size(), [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        std::vector<double> grid(static_cast<std::size_t>(horizon) + 1);
        for (int t = 0; t <= horizon; ++t) grid[static_cast<std::size_t>(t)] = seniority[i] + t;
        const auto s = model.survival_curve(detail::row_of(covariates, row), grid);
        const double base = s.front();
        out(row, 0) = 1.0;
        for (int t = 1; t <= horizon; ++t) {
            double r = base > kUnderflow ? s[static_cast<std::size_t>(t)] / base : 0.0;
            r = std::clamp(r, 0.0, out(row, t - 1));
            out(row, t) = r;
        }
    });
    return out;
}

RetentionMatrices build_retention_matrices(const SurvivalModel& acceptant, const SurvivalModel& lapser,
                                           std::span<const PolicyRecord> records, int horizon) {
    const FeatureMatrix features = survival_features(records);
    for (const SurvivalModel* m : {&acceptant, &lapser}) {
        detail::check_fitted(*m);
        if (m->feature_names() != features.names)
            throw Error(ErrorCode::SchemaMismatch, m->family() + " model was fitted on a different covariate schema");
    }
    std::vector<double> seniority;
    seniority.reserve(records.size());
    for (const auto& r : records) seniority.push_back(r.seniority);
    return {conditional_survival(acceptant, features.values, seniority, horizon),
            conditional_survival(lapser, features.values, seniority, horizon), horizon};
}

}  // namespace lapselab::survival
