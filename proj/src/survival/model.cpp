#include "lapselab/survival/model.hpp"

#include "lapselab/error.hpp"
#include "lapselab/parallel.hpp"
#include "lapselab/survival/cox.hpp"
#include "lapselab/survival/forest.hpp"
#include "lapselab/survival/gbsm.hpp"
#include "lapselab/survival/tree.hpp"

namespace lapselab::survival {

double SurvivalModel::survival(std::span<const double> x, double t) const {
    const double grid[1] = {t};
    return survival_curve(x, grid).front();
}

std::unique_ptr<SurvivalModel> model_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("schema", std::string{}) != kModelSchemaVersion)
        throw Error(ErrorCode::SchemaMismatch, "not a " + std::string(kModelSchemaVersion) + " document");
    const std::string family = j.value("family", std::string{});
    try {
        if (family == "cox") return std::make_unique<CoxModel>(CoxModel::from_json(j));
        if (family == "tree") return std::make_unique<SurvivalTree>(SurvivalTree::from_json(j));
        if (family == "rsf") return std::make_unique<SurvivalForest>(SurvivalForest::from_json(j));
        if (family == "gbsm") return std::make_unique<GradientBoostedSurvival>(GradientBoostedSurvival::from_json(j));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaMismatch, std::string("malformed ") + family + " model: " + e.what());
    }
    throw Error(ErrorCode::SchemaMismatch, "unknown model family '" + family + "'");
}

Eigen::MatrixXd predict_survival(const SurvivalModel& model, const Eigen::MatrixXd& covariates,
                                 std::span<const double> time_grid) {
    detail::check_fitted(model);
    detail::check_width(model, static_cast<std::size_t>(covariates.cols()));
    Eigen::MatrixXd out(covariates.rows(), static_cast<Eigen::Index>(time_grid.size()));
    parallel_for(static_cast<std::size_t>(covariates.rows()), [&](std::size_t i) {
        const auto row = detail::row_of(covariates, static_cast<Eigen::Index>(i));
        const auto s = model.survival_curve(row, time_grid);
        for (std::size_t k = 0; k < s.size(); ++k) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = s[k];
    });
    return out;
}

std::vector<double> risk_scores(const SurvivalModel& model, const Eigen::MatrixXd& covariates) {
    detail::check_fitted(model);
    detail::check_width(model, static_cast<std::size_t>(covariates.cols()));
    std::vector<double> out(static_cast<std::size_t>(covariates.rows()));
    parallel_for(out.size(), [&](std::size_t i) {
        out[i] = model.risk_score(detail::row_of(covariates, static_cast<Eigen::Index>(i)));
    });
    return out;
}

namespace detail {

void check_fitted(const SurvivalModel& m) {
    if (!m.fitted()) throw Error(ErrorCode::NotFitted, m.family() + " model used before fitting");
}

void check_width(const SurvivalModel& m, std::size_t width) {
    if (width != m.feature_names().size())
        throw Error(ErrorCode::SchemaMismatch, m.family() + " model expects " + std::to_string(m.feature_names().size()) +
                                                   " covariates, got " + std::to_string(width));
}

std::vector<double> row_of(const Eigen::MatrixXd& m, Eigen::Index i) {
    std::vector<double> x(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) x[static_cast<std::size_t>(c)] = m(i, c);
    return x;
}

}  // namespace detail
}  // namespace lapselab::survival
