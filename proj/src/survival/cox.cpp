#include "lapselab/survival/cox.hpp"

#include "lapselab/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <optional>

namespace lapselab::survival {

CoxPartialLikelihood::CoxPartialLikelihood(std::vector<double> durations, std::vector<std::uint8_t> events,
                                           Eigen::MatrixXd x) {
    const std::size_t n = durations.size();
    if (events.size() != n || static_cast<std::size_t>(x.rows()) != n)
        throw Error(ErrorCode::LengthMismatch, "durations, events and covariates differ in length");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return durations[a] > durations[b]; });

    x_.resize(x.rows(), x.cols());
    for (std::size_t i = 0; i < n; ++i) x_.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));

    std::size_t i = 0;
    while (i < n) {
        const double t = durations[idx[i]];
        std::size_t j = i;
        Group g{i, i, 0.0, Eigen::VectorXd::Zero(x.cols())};
        for (; j < n && durations[idx[j]] == t; ++j) {
            if (events[idx[j]]) {
                g.deaths += 1.0;
                g.event_sum += x_.row(static_cast<Eigen::Index>(j)).transpose();
            }
        }
        g.end = j;
        if (g.deaths > 0.0) {
            n_events_ += static_cast<std::size_t>(g.deaths);
            groups_.push_back(std::move(g));
        }
        i = j;
    }
}

void CoxPartialLikelihood::evaluate(const Eigen::VectorXd& beta, double* value, Eigen::VectorXd* gradient,
                                    Eigen::MatrixXd* hessian) const {
    const Eigen::Index p = x_.cols();
    const Eigen::VectorXd eta = x_ * beta;
    const double shift = eta.size() ? eta.maxCoeff() : 0.0;

    double ll = 0.0;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(p, p);
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

    std::size_t row = 0;
    for (const Group& g : groups_) {
        for (; row < g.end; ++row) {
            const auto r = static_cast<Eigen::Index>(row);
            const double w = std::exp(eta(r) - shift);
            s0 += w;
            s1.noalias() += w * x_.row(r).transpose();
            if (hessian) s2.noalias() += w * x_.row(r).transpose() * x_.row(r);
        }
        ll += g.event_sum.dot(beta) - g.deaths * (std::log(s0) + shift);
        const Eigen::VectorXd mean = s1 / s0;
        grad.noalias() += g.event_sum - g.deaths * mean;
        if (hessian) hess.noalias() -= g.deaths * (s2 / s0 - mean * mean.transpose());
    }
    if (value) *value = ll;
    if (gradient) *gradient = std::move(grad);
    if (hessian) *hessian = std::move(hess);
}

double CoxPartialLikelihood::value(const Eigen::VectorXd& beta) const {
    double v = 0.0;
    evaluate(beta, &v, nullptr, nullptr);
    return v;
}

Eigen::VectorXd CoxPartialLikelihood::gradient(const Eigen::VectorXd& beta) const {
    Eigen::VectorXd g;
    evaluate(beta, nullptr, &g, nullptr);
    return g;
}

Eigen::MatrixXd CoxPartialLikelihood::hessian(const Eigen::VectorXd& beta) const {
    Eigen::MatrixXd h;
    evaluate(beta, nullptr, nullptr, &h);
    return h;
}

StepFunction breslow_cumhaz(std::span<const double> durations, std::span<const std::uint8_t> events,
                            std::span<const double> eta) {
    const std::size_t n = durations.size();
    if (events.size() != n || eta.size() != n)
        throw Error(ErrorCode::LengthMismatch, "durations, events and scores differ in length");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return durations[a] > durations[b]; });

    // Walk from the longest duration down, collecting increments, then reverse.
    std::vector<double> times, increments;
    double risk = 0.0;
    std::size_t i = 0;
    while (i < n) {
        const double t = durations[idx[i]];
        double d = 0.0;
        std::size_t j = i;
        for (; j < n && durations[idx[j]] == t; ++j) {
            risk += std::exp(eta[idx[j]]);
            d += events[idx[j]] ? 1.0 : 0.0;
        }
        if (d > 0.0) {
            times.push_back(t);
            increments.push_back(d / risk);
        }
        i = j;
    }
    std::reverse(times.begin(), times.end());
    std::reverse(increments.begin(), increments.end());
    std::partial_sum(increments.begin(), increments.end(), increments.begin());
    return StepFunction(0.0, std::move(times), std::move(increments));
}

CoxModel::CoxModel(Eigen::VectorXd beta, Eigen::VectorXd center, StepFunction baseline_cumhaz,
                   std::vector<std::string> feature_names, double log_likelihood, int iterations)
    : beta_(std::move(beta)),
      center_(std::move(center)),
      baseline_(std::move(baseline_cumhaz)),
      names_(std::move(feature_names)),
      loglik_(log_likelihood),
      iterations_(iterations),
      fitted_(true) {
    if (center_.size() != beta_.size() || names_.size() != static_cast<std::size_t>(beta_.size()))
        throw Error(ErrorCode::LengthMismatch, "beta, center and feature names differ in length");
    if (!beta_.allFinite()) throw Error(ErrorCode::BadValue, "non-finite coefficient");
    active_.assign(names_.size(), 1);
}

std::size_t CoxModel::n_active() const noexcept {
    return static_cast<std::size_t>(std::count(active_.begin(), active_.end(), std::uint8_t{1}));
}

double CoxModel::linear_predictor(std::span<const double> x) const {
    detail::check_fitted(*this);
    detail::check_width(*this, x.size());
    double eta = 0.0;
    for (Eigen::Index c = 0; c < beta_.size(); ++c) eta += beta_(c) * (x[static_cast<std::size_t>(c)] - center_(c));
    return eta;
}

double CoxModel::risk_score(std::span<const double> x) const { return linear_predictor(x); }

std::vector<double> CoxModel::survival_curve(std::span<const double> x, std::span<const double> grid) const {
    const double hr = std::exp(linear_predictor(x));
    std::vector<double> out(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        out[k] = grid[k] <= 0.0 ? 1.0 : std::exp(-baseline_(grid[k]) * hr);
    return out;
}

double CoxModel::max_training_time() const {
    return baseline_.times().empty() ? 0.0 : baseline_.times().back();
}

nlohmann::json CoxModel::to_json() const {
    detail::check_fitted(*this);
    return {{"schema", kModelSchemaVersion},
            {"family", family()},
            {"feature_names", names_},
            {"beta", std::vector<double>(beta_.data(), beta_.data() + beta_.size())},
            {"center", std::vector<double>(center_.data(), center_.data() + center_.size())},
            {"active", active_},
            {"baseline_cumhaz", baseline_.to_json()},
            {"log_likelihood", loglik_},
            {"iterations", iterations_}};
}

CoxModel CoxModel::from_json(const nlohmann::json& j) {
    const auto beta = j.at("beta").get<std::vector<double>>();
    const auto center = j.at("center").get<std::vector<double>>();
    CoxModel m(Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size())),
               Eigen::Map<const Eigen::VectorXd>(center.data(), static_cast<Eigen::Index>(center.size())),
               StepFunction::from_json(j.at("baseline_cumhaz")),
               j.at("feature_names").get<std::vector<std::string>>(), j.at("log_likelihood").get<double>(),
               j.at("iterations").get<int>());
    m.active_ = j.at("active").get<std::vector<std::uint8_t>>();
    if (m.active_.size() != m.names_.size()) throw Error(ErrorCode::SchemaMismatch, "cox active mask length");
    return m;
}

CoxModel fit_cox_subset(const SurvivalData& data, const std::vector<std::uint8_t>& active, const CoxOptions& options) {
    data.validate();
    const std::size_t p = data.n_features();
    if (active.size() != p) throw Error(ErrorCode::LengthMismatch, "active mask does not match feature count");
    if (data.n_events() < 2) throw Error(ErrorCode::Degenerate, "Cox fit needs at least 2 events");
    if (options.max_iter < 1 || !(options.tol > 0.0) || !(options.ridge >= 0.0))
        throw Error(ErrorCode::InvalidConfig, "Cox options out of range");

    const Eigen::VectorXd mean = data.covariates.colwise().mean().transpose();
    std::vector<Eigen::Index> cols;
    std::vector<double> scale;
    for (std::size_t c = 0; c < p; ++c) {
        if (!active[c]) continue;
        const auto col = data.covariates.col(static_cast<Eigen::Index>(c));
        const double sd = std::sqrt((col.array() - mean(static_cast<Eigen::Index>(c))).square().mean());
        if (sd <= 1e-12 * (1.0 + std::abs(mean(static_cast<Eigen::Index>(c))))) continue;  // constant column
        cols.push_back(static_cast<Eigen::Index>(c));
        scale.push_back(sd);
    }
    const auto q = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd z(data.covariates.rows(), q);
    for (Eigen::Index k = 0; k < q; ++k)
        z.col(k) = (data.covariates.col(cols[static_cast<std::size_t>(k)]).array() - mean(cols[static_cast<std::size_t>(k)])) /
                   scale[static_cast<std::size_t>(k)];

    const CoxPartialLikelihood pl(data.durations, data.events, std::move(z));
    const double ridge = options.ridge;
    auto penalized = [&](const Eigen::VectorXd& b, double* v, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
        pl.evaluate(b, v, g, h);
        if (v) *v -= 0.5 * ridge * b.squaredNorm();
        if (g) *g -= ridge * b;
        if (h) h->diagonal().array() -= ridge;
    };

    Eigen::VectorXd b = Eigen::VectorXd::Zero(q);
    double ll = 0.0;
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    penalized(b, &ll, &g, &h);
    int iter = 0;
    bool converged = q == 0 || g.lpNorm<Eigen::Infinity>() <= options.tol;
    constexpr double kSeparationBound = 25.0;  // log hazard ratio per standard deviation

    while (!converged && iter < options.max_iter) {
        ++iter;
        Eigen::LDLT<Eigen::MatrixXd> ldlt((-h).eval());
        Eigen::VectorXd step;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 1e-14)
            step = ldlt.solve(g);
        else
            step = g / std::max(1.0, g.lpNorm<Eigen::Infinity>());  // fall back to a short ascent step

        double ll_new = 0.0;
        Eigen::VectorXd b_new;
        double t = 1.0;
        int halvings = 0;
        for (;; ++halvings) {
            b_new = b + t * step;
            penalized(b_new, &ll_new, nullptr, nullptr);
            if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * (1.0 + std::abs(ll))) break;
            if (halvings == 40) throw Error(ErrorCode::NonConvergence, "Cox step halving failed at iteration " + std::to_string(iter));
            t *= 0.5;
        }
        const double gain = ll_new - ll;
        b = std::move(b_new);
        ll = ll_new;
        penalized(b, nullptr, &g, &h);

        if (ridge == 0.0 && b.lpNorm<Eigen::Infinity>() > kSeparationBound)
            throw Error(ErrorCode::SeparationDetected,
                        "coefficient diverging after " + std::to_string(iter) + " iterations (monotone likelihood)");
        converged = g.lpNorm<Eigen::Infinity>() <= options.tol || std::abs(gain) <= 1e-13 * (1.0 + std::abs(ll));
    }
    if (!converged)
        throw Error(ErrorCode::NonConvergence, "Cox Newton did not converge in " + std::to_string(options.max_iter) + " iterations");
    if (ridge == 0.0 && q > 0) {
        // Under a monotone likelihood the score vanishes while the Newton step
        // stays of order one; a regular optimum leaves a negligible step.
        Eigen::LDLT<Eigen::MatrixXd> ldlt((-h).eval());
        const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 1e-14;
        const Eigen::VectorXd remaining = singular ? Eigen::VectorXd() : ldlt.solve(g).eval();
        if (singular || (remaining.array().abs() > 1e-4 * (1.0 + b.array().abs())).any())
            throw Error(ErrorCode::SeparationDetected,
                        "coefficient diverging after " + std::to_string(iter) + " iterations (monotone likelihood)");
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    for (Eigen::Index k = 0; k < q; ++k) beta(cols[static_cast<std::size_t>(k)]) = b(k) / scale[static_cast<std::size_t>(k)];

    const Eigen::VectorXd eta = (data.covariates.rowwise() - mean.transpose()) * beta;
    StepFunction baseline = breslow_cumhaz(data.durations, data.events, std::span<const double>(eta.data(), data.size()));

    const double loglik = ridge == 0.0 ? ll : pl.value(b);
    CoxModel model(std::move(beta), mean, std::move(baseline), data.feature_names, loglik, iter);
    model.active_.assign(p, 0);
    for (auto c : cols) model.active_[static_cast<std::size_t>(c)] = 1;
    return model;
}

CoxModel fit_cox(const SurvivalData& data, const CoxOptions& options) {
    return fit_cox_subset(data, std::vector<std::uint8_t>(data.n_features(), 1), options);
}

CoxModel fit_cox(std::span<const PolicyRecord> records, const CauseRecoding& recoding, const CoxOptions& options) {
    return fit_cox(recode(records, recoding), options);
}

CoxModel fit_cox_aic(const SurvivalData& data, const CoxOptions& options) {
    const std::size_t p = data.n_features();
    if (p > 12) throw Error(ErrorCode::InvalidConfig, "best-subset search limited to 12 features");
    std::vector<unsigned> masks(std::size_t{1} << p);
    std::iota(masks.begin(), masks.end(), 0u);
    std::stable_sort(masks.begin(), masks.end(),
                     [](unsigned a, unsigned b) { return std::popcount(a) < std::popcount(b); });

    std::optional<CoxModel> best;
    for (unsigned mask : masks) {
        std::vector<std::uint8_t> active(p);
        for (std::size_t c = 0; c < p; ++c) active[c] = (mask >> c) & 1u;
        try {
            CoxModel m = fit_cox_subset(data, active, options);
            if (!best || m.aic() < best->aic()) best = std::move(m);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::SeparationDetected && e.code() != ErrorCode::NonConvergence) throw;
        }
    }
    if (!best) throw Error(ErrorCode::NonConvergence, "no feature subset could be fitted");
    return std::move(*best);
}

}  // namespace lapselab::survival
