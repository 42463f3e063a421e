#include "lapselab/survival/gbsm.hpp"

#include "lapselab/error.hpp"
#include "lapselab/rng.hpp"
#include "lapselab/survival/cox.hpp"
#include "lapselab/trees/binning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lapselab::survival {
namespace {

// Ascending duration order with tie groups, reusable across evaluations.
struct RiskSets {
    std::vector<std::size_t> order;
    std::vector<std::size_t> group_end;  // exclusive end of each tie group in `order`

    RiskSets(std::span<const double> durations) : order(durations.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return durations[a] < durations[b]; });
        for (std::size_t i = 0; i < order.size(); ++i)
            if (i + 1 == order.size() || durations[order[i + 1]] != durations[order[i]]) group_end.push_back(i + 1);
    }
};

double loss_with(const RiskSets& rs, std::span<const std::uint8_t> events, std::span<const double> f) {
    const std::size_t n = f.size();
    if (n == 0) return 0.0;
    const double shift = *std::max_element(f.begin(), f.end());
    double risk = 0.0;
    double total = 0.0;
    std::size_t end = n;
    for (std::size_t g = rs.group_end.size(); g-- > 0;) {
        const std::size_t begin = g == 0 ? 0 : rs.group_end[g - 1];
        for (std::size_t i = begin; i < end; ++i) risk += std::exp(f[rs.order[i]] - shift);
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t s = rs.order[i];
            if (events[s]) total += std::log(risk) + shift - f[s];
        }
        end = begin;
    }
    return total / static_cast<double>(n);
}

void derivatives_with(const RiskSets& rs, std::span<const std::uint8_t> events, std::span<const double> f,
                      std::vector<double>* grad, std::vector<double>* hess) {
    const std::size_t n = f.size();
    const std::size_t groups = rs.group_end.size();
    const double shift = n ? *std::max_element(f.begin(), f.end()) : 0.0;

    // Shifted risk sums S_g and event counts per tie group.
    std::vector<double> risk(groups), deaths(groups, 0.0);
    double acc = 0.0;
    for (std::size_t g = groups; g-- > 0;) {
        const std::size_t begin = g == 0 ? 0 : rs.group_end[g - 1];
        for (std::size_t i = begin; i < rs.group_end[g]; ++i) {
            acc += std::exp(f[rs.order[i]] - shift);
            if (events[rs.order[i]]) deaths[g] += 1.0;
        }
        risk[g] = acc;
    }
    if (grad) grad->assign(n, 0.0);
    if (hess) hess->assign(n, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    double c1 = 0.0, c2 = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
        if (deaths[g] > 0.0) {
            c1 += deaths[g] / risk[g];
            c2 += deaths[g] / (risk[g] * risk[g]);
        }
        const std::size_t begin = g == 0 ? 0 : rs.group_end[g - 1];
        for (std::size_t i = begin; i < rs.group_end[g]; ++i) {
            const std::size_t s = rs.order[i];
            const double e = std::exp(f[s] - shift);
            if (grad) (*grad)[s] = (e * c1 - (events[s] ? 1.0 : 0.0)) * inv_n;
            if (hess) (*hess)[s] = (e * c1 - e * e * c2) * inv_n;
        }
    }
}

}  // namespace

double cox_loss(std::span<const double> durations, std::span<const std::uint8_t> events, std::span<const double> scores) {
    if (events.size() != durations.size() || scores.size() != durations.size())
        throw Error(ErrorCode::LengthMismatch, "durations, events and scores differ in length");
    return loss_with(RiskSets(durations), events, scores);
}

void cox_loss_derivatives(std::span<const double> durations, std::span<const std::uint8_t> events,
                          std::span<const double> scores, std::vector<double>* gradient,
                          std::vector<double>* hessian_diag) {
    if (events.size() != durations.size() || scores.size() != durations.size())
        throw Error(ErrorCode::LengthMismatch, "durations, events and scores differ in length");
    derivatives_with(RiskSets(durations), events, scores, gradient, hessian_diag);
}

GradientBoostedSurvival::GradientBoostedSurvival(double base_score, std::vector<GbsmStage> stages,
                                                 StepFunction baseline_cumhaz, std::vector<std::string> feature_names,
                                                 std::vector<double> loss_history)
    : base_score_(base_score),
      stages_(std::move(stages)),
      baseline_(std::move(baseline_cumhaz)),
      names_(std::move(feature_names)),
      loss_history_(std::move(loss_history)),
      fitted_(true) {}

double GradientBoostedSurvival::risk_score(std::span<const double> x) const {
    detail::check_fitted(*this);
    detail::check_width(*this, x.size());
    double f = base_score_;
    for (const auto& s : stages_) f += s.scale * trees::tree_value(s.tree, x);
    return f;
}

std::vector<double> GradientBoostedSurvival::survival_curve(std::span<const double> x,
                                                            std::span<const double> grid) const {
    const double hr = std::exp(risk_score(x));
    std::vector<double> out(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) out[k] = grid[k] <= 0.0 ? 1.0 : std::exp(-baseline_(grid[k]) * hr);
    return out;
}

double GradientBoostedSurvival::max_training_time() const {
    return baseline_.times().empty() ? 0.0 : baseline_.times().back();
}

nlohmann::json GradientBoostedSurvival::to_json() const {
    detail::check_fitted(*this);
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : stages_) stages.push_back({{"scale", s.scale}, {"tree", trees::nodes_to_json(s.tree)}});
    return {{"schema", kModelSchemaVersion},
            {"family", family()},
            {"feature_names", names_},
            {"base_score", base_score_},
            {"stages", std::move(stages)},
            {"baseline_cumhaz", baseline_.to_json()},
            {"loss_history", loss_history_}};
}

GradientBoostedSurvival GradientBoostedSurvival::from_json(const nlohmann::json& j) {
    std::vector<GbsmStage> stages;
    for (const auto& s : j.at("stages")) stages.push_back({trees::nodes_from_json(s.at("tree")), s.at("scale").get<double>()});
    return GradientBoostedSurvival(j.at("base_score").get<double>(), std::move(stages),
                                   StepFunction::from_json(j.at("baseline_cumhaz")),
                                   j.at("feature_names").get<std::vector<std::string>>(),
                                   j.at("loss_history").get<std::vector<double>>());
}

GradientBoostedSurvival fit_gbsm(const SurvivalData& data, const GbsmOptions& options) {
    data.validate();
    if (data.n_events() < 2) throw Error(ErrorCode::Degenerate, "boosting needs at least 2 events");
    if (!(options.learning_rate > 0.0) || !(options.subsample > 0.0 && options.subsample <= 1.0) ||
        !(options.l2 >= 0.0) || options.min_leaf < 1 || options.max_depth < 0)
        throw Error(ErrorCode::InvalidConfig, "boosting options out of range");

    const std::size_t n = data.size();
    const RiskSets rs(data.durations);
    const trees::BinnedMatrix binned(data.covariates, options.max_bins);

    std::vector<double> f(n, 0.0);
    std::vector<double> candidate(n);
    std::vector<double> grad, hess;
    std::vector<trees::RowStat> stats(n);
    std::vector<GbsmStage> stages;
    std::vector<double> history;
    double loss = loss_with(rs, data.events, f);
    if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "initial loss is not finite");
    history.push_back(loss);

    const double l2 = options.l2;
    const trees::LeafValue newton = [l2](double g, double h, double) {
        const double denom = h + l2;
        return denom > 0.0 ? -g / denom : 0.0;
    };
    const trees::GrowOptions grow{options.max_depth, options.min_leaf, options.features_per_split, false};
    const std::size_t n_sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(options.subsample * static_cast<double>(n))));

    for (std::size_t stage = 0; stage < options.n_stages; ++stage) {
        derivatives_with(rs, data.events, f, &grad, &hess);
        // Per-sample derivatives of the summed loss keep leaf values on a unit scale.
        for (std::size_t i = 0; i < n; ++i)
            stats[i] = {grad[i] * static_cast<double>(n), hess[i] * static_cast<double>(n), 1.0};

        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        Rng rng(derive_seed(options.seed, stage));
        if (n_sub < n) {
            rng.shuffle(rows);
            rows.resize(n_sub);
            std::sort(rows.begin(), rows.end());
        }
        std::vector<trees::Node> tree =
            trees::grow_tree(binned, std::move(rows), stats, trees::Criterion::LeastSquares, grow, &rng, newton);

        std::vector<double> step(n);
        for (std::size_t i = 0; i < n; ++i)
            step[i] = tree[static_cast<std::size_t>(trees::leaf_index(tree, binned, i))].value;

        double scale = options.learning_rate;
        double new_loss = loss;
        bool accepted = false;
        for (int halving = 0; halving < 30; ++halving, scale *= 0.5) {
            for (std::size_t i = 0; i < n; ++i) candidate[i] = f[i] + scale * step[i];
            new_loss = loss_with(rs, data.events, candidate);
            if (!std::isfinite(new_loss)) continue;
            if (new_loss <= loss) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            scale = 0.0;
            new_loss = loss;
        } else {
            f.swap(candidate);
        }
        if (!std::isfinite(new_loss)) throw Error(ErrorCode::NonFiniteLoss, "loss at stage " + std::to_string(stage));
        loss = new_loss;
        history.push_back(loss);
        stages.push_back({std::move(tree), scale});
    }

    StepFunction baseline = breslow_cumhaz(data.durations, data.events, f);
    return GradientBoostedSurvival(0.0, std::move(stages), std::move(baseline), data.feature_names, std::move(history));
}

GradientBoostedSurvival fit_gbsm(std::span<const PolicyRecord> records, const CauseRecoding& recoding,
                                 const GbsmOptions& options) {
    return fit_gbsm(recode(records, recoding), options);
}

}  // namespace lapselab::survival
