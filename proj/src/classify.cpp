#include "lapselab/classify.hpp"

#include "lapselab/error.hpp"
#include "lapselab/parallel.hpp"
#include "lapselab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lapselab::classify {

namespace {

double sigmoid(double f) {
    if (f >= 0.0) return 1.0 / (1.0 + std::exp(-f));
    const double e = std::exp(f);
    return e / (1.0 + e);
}

const trees::LeafValue kFraction = [](double a, double, double w) { return w > 0.0 ? a / w : 0.0; };

std::vector<std::size_t> iota_rows(std::size_t n) {
    std::vector<std::size_t> r(n);
    std::iota(r.begin(), r.end(), std::size_t{0});
    return r;
}

[[noreturn]] void bad_config(const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); }

void check_hyper(const Hyperparameters& h) {
    if (h.max_depth < 0) bad_config("max_depth must be >= 0");
    if (h.min_leaf < 1) bad_config("min_leaf must be >= 1");
    if (!(h.learning_rate > 0.0)) bad_config("learning_rate must be positive");
    if (!(h.l2 >= 0.0)) bad_config("l2 must be >= 0");
}

}  // namespace

std::string to_string(Family f) {
    switch (f) {
        case Family::CART: return "cart";
        case Family::RandomForest: return "rf";
        case Family::GradientBoosted: return "gbt";
        case Family::Constant: return "constant";
    }
    return "unknown";
}

Family family_from_string(std::string_view s) {
    if (s == "cart" || s == "CART") return Family::CART;
    if (s == "rf" || s == "RandomForest" || s == "random_forest") return Family::RandomForest;
    if (s == "gbt" || s == "xgb" || s == "GradientBoosted" || s == "gradient_boosted") return Family::GradientBoosted;
    if (s == "constant") return Family::Constant;
    bad_config("unknown classifier family '" + std::string(s) + "'");
}

std::string to_string(MetricKind k) {
    switch (k) {
        case MetricKind::Accuracy: return "accuracy";
        case MetricKind::Recall: return "recall";
        case MetricKind::F1: return "f1";
        case MetricKind::AUC: return "auc";
        case MetricKind::RetentionGain: return "retention_gain";
    }
    return "unknown";
}

nlohmann::json to_json(const Hyperparameters& h) {
    return {{"max_depth", h.max_depth},     {"min_leaf", h.min_leaf},
            {"n_trees", h.n_trees},         {"learning_rate", h.learning_rate},
            {"features_per_split", h.features_per_split}, {"bootstrap", h.bootstrap},
            {"l2", h.l2},                   {"balanced", h.balanced}};
}

Hyperparameters hyperparameters_from_json(const nlohmann::json& j) {
    Hyperparameters h;
    try {
        h.max_depth = j.value("max_depth", h.max_depth);
        h.min_leaf = j.value("min_leaf", h.min_leaf);
        h.n_trees = j.value("n_trees", h.n_trees);
        h.learning_rate = j.value("learning_rate", h.learning_rate);
        h.features_per_split = j.value("features_per_split", h.features_per_split);
        h.bootstrap = j.value("bootstrap", h.bootstrap);
        h.l2 = j.value("l2", h.l2);
        h.balanced = j.value("balanced", h.balanced);
    } catch (const nlohmann::json::exception& e) {
        bad_config(std::string("malformed hyperparameters: ") + e.what());
    }
    check_hyper(h);
    return h;
}

void validate(const ClassifierSpec& spec) {
    if (spec.grid.empty()) bad_config("hyperparameter grid is empty");
    for (const auto& h : spec.grid) check_hyper(h);
    if (spec.max_bins < 2) bad_config("max_bins must be >= 2");
    if (!(spec.threshold >= 0.0 && spec.threshold <= 1.0)) bad_config("threshold must be in [0, 1]");
}

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

Classifier Classifier::constant(double score, std::size_t n_features, std::vector<std::string> names) {
    Classifier c;
    c.family_ = Family::Constant;
    c.base_ = score;
    c.n_features_ = n_features;
    c.names_ = std::move(names);
    return c;
}

double Classifier::score_row(const Eigen::MatrixXd& x, Eigen::Index row) const {
    switch (family_) {
        case Family::Constant: return base_;
        case Family::CART:
        case Family::RandomForest: {
            double s = 0.0;
            for (const auto& t : trees_) s += t[static_cast<std::size_t>(trees::leaf_index(t, x, row))].value;
            return s / static_cast<double>(trees_.size());
        }
        case Family::GradientBoosted: {
            double f = base_;
            for (const auto& t : trees_)
                f += hyper_.learning_rate * t[static_cast<std::size_t>(trees::leaf_index(t, x, row))].value;
            return sigmoid(f);
        }
    }
    return base_;
}

std::vector<double> Classifier::scores(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) const {
    if (static_cast<std::size_t>(x.cols()) != n_features_)
        throw Error(ErrorCode::SchemaMismatch, "classifier expects " + std::to_string(n_features_) + " features, got " +
                                                   std::to_string(x.cols()));
    std::vector<double> out(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] >= static_cast<std::size_t>(x.rows())) throw Error(ErrorCode::AlignmentError, "row out of range");
        out[k] = score_row(x, static_cast<Eigen::Index>(rows[k]));
    }
    return out;
}

std::vector<double> Classifier::scores(const Eigen::MatrixXd& x) const {
    return scores(x, iota_rows(static_cast<std::size_t>(x.rows())));
}

std::vector<std::uint8_t> Classifier::predict(const Eigen::MatrixXd& x, std::span<const std::size_t> rows,
                                              double threshold) const {
    const auto s = scores(x, rows);
    std::vector<std::uint8_t> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] >= threshold ? 1 : 0;
    return out;
}

std::vector<std::uint8_t> Classifier::predict(const Eigen::MatrixXd& x, double threshold) const {
    return predict(x, iota_rows(static_cast<std::size_t>(x.rows())), threshold);
}

nlohmann::json Classifier::to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(trees::nodes_to_json(t));
    return {{"schema", kClassifierSchema},
            {"family", to_string(family_)},
            {"hyperparameters", classify::to_json(hyper_)},
            {"base", base_},
            {"n_features", n_features_},
            {"feature_names", names_},
            {"degenerate", degenerate_},
            {"trees", std::move(trees)}};
}

Classifier Classifier::from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("schema", "") != kClassifierSchema)
        throw Error(ErrorCode::SchemaMismatch, std::string("not a ") + kClassifierSchema + " document");
    try {
        Classifier c;
        c.family_ = family_from_string(j.at("family").get<std::string>());
        c.hyper_ = hyperparameters_from_json(j.at("hyperparameters"));
        c.base_ = j.at("base").get<double>();
        c.n_features_ = j.at("n_features").get<std::size_t>();
        c.names_ = j.at("feature_names").get<std::vector<std::string>>();
        c.degenerate_ = j.at("degenerate").get<bool>();
        for (const auto& t : j.at("trees")) c.trees_.push_back(trees::nodes_from_json(t));
        if ((c.family_ == Family::CART || c.family_ == Family::RandomForest) && c.trees_.empty())
            throw Error(ErrorCode::SchemaMismatch, "tree classifier without trees");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaMismatch, std::string("malformed classifier: ") + e.what());
    }
}

Classifier fit_classifier(Family family, const Hyperparameters& hyper, const Eigen::MatrixXd& x,
                          std::span<const std::uint8_t> labels, std::span<const std::size_t> rows_in,
                          std::uint64_t seed, std::size_t max_bins, std::vector<std::string> names) {
    check_hyper(hyper);
    if (labels.size() != static_cast<std::size_t>(x.rows()))
        throw Error(ErrorCode::AlignmentError, "labels and features differ in length");
    if (!names.empty() && names.size() != static_cast<std::size_t>(x.cols()))
        throw Error(ErrorCode::SchemaMismatch, "feature names do not match the matrix width");
    std::vector<std::size_t> rows(rows_in.begin(), rows_in.end());
    if (rows.empty()) rows = iota_rows(labels.size());
    if (rows.empty()) throw Error(ErrorCode::Empty, "no training rows");

    std::size_t positives = 0;
    for (std::size_t r : rows) {
        if (labels[r] > 1) throw Error(ErrorCode::BadValue, "labels must be 0 or 1");
        positives += labels[r];
    }
    const std::size_t n = rows.size();
    const std::size_t p = static_cast<std::size_t>(x.cols());
    const double share = static_cast<double>(positives) / static_cast<double>(n);

    Classifier c;
    c.family_ = family;
    c.hyper_ = hyper;
    c.n_features_ = p;
    c.names_ = std::move(names);
    if (family == Family::Constant || positives == 0 || positives == n) {
        c.family_ = Family::Constant;
        c.base_ = share;
        c.degenerate_ = family != Family::Constant;
        return c;
    }

    // Row weights; 1 unless class balancing is requested.
    const double w_pos = hyper.balanced ? static_cast<double>(n) / (2.0 * static_cast<double>(positives)) : 1.0;
    const double w_neg = hyper.balanced ? static_cast<double>(n) / (2.0 * static_cast<double>(n - positives)) : 1.0;
    const auto weight = [&](std::size_t r) { return labels[r] ? w_pos : w_neg; };

    const trees::BinnedMatrix binned(x, max_bins);
    std::vector<trees::RowStat> stats(labels.size());

    if (family == Family::CART || family == Family::RandomForest) {
        for (std::size_t r : rows) stats[r] = {weight(r) * labels[r], 0.0, weight(r)};
        trees::GrowOptions grow{hyper.max_depth, hyper.min_leaf, hyper.features_per_split, true};
        if (family == Family::CART) {
            Rng rng(seed);
            c.trees_.push_back(trees::grow_tree(binned, rows, stats, trees::Criterion::Gini, grow, &rng, kFraction));
            return c;
        }
        if (grow.features_per_split == 0)
            grow.features_per_split = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
        const std::size_t n_trees = std::max<std::size_t>(1, hyper.n_trees);
        c.trees_.resize(n_trees);
        parallel_for(n_trees, [&](std::size_t k) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
            std::vector<std::size_t> sample;
            if (hyper.bootstrap) {
                sample.resize(n);
                for (auto& s : sample) s = rows[rng.below(n)];
                std::sort(sample.begin(), sample.end());
            } else {
                sample = rows;
            }
            c.trees_[k] = trees::grow_tree(binned, std::move(sample), stats, trees::Criterion::Gini, grow, &rng, kFraction);
        });
        return c;
    }

    // Logistic boosting: trees fit the gradient, leaves take a Newton step.
    double w_total = 0.0, w_positive = 0.0;
    for (std::size_t r : rows) {
        w_total += weight(r);
        w_positive += labels[r] * weight(r);
    }
    const double base_rate = w_positive / w_total;
    c.base_ = std::log(base_rate / (1.0 - base_rate));
    const double l2 = hyper.l2;
    const trees::LeafValue newton = [l2](double g, double h, double) {
        const double denom = h + l2;
        return denom > 0.0 ? -g / denom : 0.0;
    };
    const trees::GrowOptions grow{hyper.max_depth, hyper.min_leaf, hyper.features_per_split, false};
    std::vector<double> f(labels.size(), c.base_);
    for (std::size_t stage = 0; stage < hyper.n_trees; ++stage) {
        for (std::size_t r : rows) {
            const double prob = sigmoid(f[r]);
            const double w = weight(r);
            stats[r] = {w * (prob - labels[r]), w * prob * (1.0 - prob), 1.0};
        }
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(stage)));
        auto tree = trees::grow_tree(binned, rows, stats, trees::Criterion::LeastSquares, grow, &rng, newton);
        for (std::size_t r : rows)
            f[r] += hyper.learning_rate * tree[static_cast<std::size_t>(trees::leaf_index(tree, binned, r))].value;
        c.trees_.push_back(std::move(tree));
    }
    return c;
}

Classifier fit_classifier(const ClassifierSpec& spec, const Eigen::MatrixXd& x, std::span<const std::uint8_t> labels) {
    validate(spec);
    return fit_classifier(spec.family, spec.grid.front(), x, labels, {}, spec.seed, spec.max_bins);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

Confusion confusion(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> predictions) {
    if (truth.size() != predictions.size())
        throw Error(ErrorCode::AlignmentError, "labels and predictions differ in length");
    Confusion c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] && predictions[i]) ++c.tp;
        else if (!truth[i] && predictions[i]) ++c.fp;
        else if (truth[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double auc(std::span<const std::uint8_t> truth, std::span<const double> scores) {
    if (truth.size() != scores.size()) throw Error(ErrorCode::AlignmentError, "labels and scores differ in length");
    const std::size_t n = truth.size();
    std::vector<std::size_t> order = iota_rows(n);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (truth[order[k]]) {
                rank_sum += midrank;
                ++positives;
            }
        i = j;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) throw Error(ErrorCode::UndefinedMetric, "AUC needs both classes");
    const double np = static_cast<double>(positives);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(negatives));
}

double evaluate(const EvalMetric& metric, std::span<const std::uint8_t> truth,
                std::span<const std::uint8_t> predictions, std::span<const double> scores,
                std::span<const std::size_t> rows) {
    switch (metric.kind) {
        case MetricKind::Accuracy: {
            const auto c = confusion(truth, predictions);
            if (truth.empty()) throw Error(ErrorCode::UndefinedMetric, "accuracy of an empty set");
            return static_cast<double>(c.tp + c.tn) / static_cast<double>(truth.size());
        }
        case MetricKind::Recall: {
            const auto c = confusion(truth, predictions);
            if (c.tp + c.fn == 0) throw Error(ErrorCode::UndefinedMetric, "recall without positives");
            return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
        }
        case MetricKind::F1: {
            const auto c = confusion(truth, predictions);
            if (2 * c.tp + c.fp + c.fn == 0) throw Error(ErrorCode::UndefinedMetric, "F1 without positives");
            return 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
        }
        case MetricKind::AUC: return auc(truth, scores);
        case MetricKind::RetentionGain: {
            if (!metric.context || metric.context->matrices == nullptr)
                bad_config("retention gain metric needs a strategy context");
            const auto& ctx = *metric.context;
            if (rows.size() != predictions.size())
                throw Error(ErrorCode::AlignmentError, "retention gain needs one row index per prediction");
            // Sum of z over targets: equal to LMPV - CPV, and exactly zero
            // when nobody is targeted.
            const auto z = valuation::individual_gains(ctx.records, *ctx.matrices, ctx.strategy);
            double total = 0.0;
            for (std::size_t k = 0; k < rows.size(); ++k) {
                if (rows[k] >= z.size()) throw Error(ErrorCode::AlignmentError, "row index out of range");
                if (predictions[k] > 1) throw Error(ErrorCode::BadValue, "predictions must be 0 or 1");
                if (predictions[k]) total += z[rows[k]];
            }
            return total;
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Tuning
// ---------------------------------------------------------------------------

nlohmann::json TunedModel::to_json() const {
    nlohmann::json j{{"family", classify::to_string(family)},
                     {"hyperparameters", zero_classifier ? nlohmann::json(nullptr) : classify::to_json(chosen)},
                     {"chosen_index", chosen_index},
                     {"zero_classifier", zero_classifier},
                     {"fold_metrics", fold_metrics},
                     {"mean_metric", mean_metric},
                     {"candidate_means", candidate_means}};
    if (model) j["model"] = model->to_json();
    return j;
}

TunedModel cross_validate_tune(const ClassifierSpec& spec, const Eigen::MatrixXd& x,
                               std::span<const std::uint8_t> labels, const EvalMetric& metric,
                               std::span<const Fold> folds, const TuneOptions& options) {
    validate(spec);
    if (folds.empty()) throw Error(ErrorCode::BadK, "no folds");
    if (labels.size() != static_cast<std::size_t>(x.rows()))
        throw Error(ErrorCode::AlignmentError, "labels and features differ in length");
    const bool inject = options.inject_zero.value_or(metric.kind == MetricKind::RetentionGain);
    const std::size_t n_grid = spec.grid.size();
    const std::size_t n_candidates = n_grid + (inject ? 1 : 0);
    const std::size_t k = folds.size();

    struct Cell {
        std::vector<std::uint8_t> predictions;
        std::vector<double> scores;
        double metric = 0.0;
    };
    std::vector<Cell> cells(n_candidates * k);
    parallel_for(n_candidates * k, [&](std::size_t job) {
        const std::size_t g = job / k, f = job % k;
        const Fold& fold = folds[f];
        const Classifier model =
            g < n_grid ? fit_classifier(spec.family, spec.grid[g], x, labels, fold.train, spec.seed, spec.max_bins)
                       : Classifier::constant(0.0, static_cast<std::size_t>(x.cols()));
        Cell& cell = cells[job];
        cell.scores = model.scores(x, fold.validation);
        cell.predictions.resize(cell.scores.size());
        for (std::size_t i = 0; i < cell.scores.size(); ++i) cell.predictions[i] = cell.scores[i] >= spec.threshold;
        std::vector<std::uint8_t> truth(fold.validation.size());
        for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = labels[fold.validation[i]];
        cell.metric = evaluate(metric, truth, cell.predictions, cell.scores, fold.validation);
    });

    TunedModel out;
    out.family = spec.family;
    out.candidate_means.resize(n_candidates);
    for (std::size_t g = 0; g < n_candidates; ++g) {
        double sum = 0.0;
        for (std::size_t f = 0; f < k; ++f) sum += cells[g * k + f].metric;
        out.candidate_means[g] = sum / static_cast<double>(k);
    }
    const auto best = std::max_element(out.candidate_means.begin(), out.candidate_means.end());
    out.chosen_index = static_cast<std::size_t>(best - out.candidate_means.begin());
    out.mean_metric = *best;
    out.zero_classifier = out.chosen_index >= n_grid;
    if (!out.zero_classifier) out.chosen = spec.grid[out.chosen_index];

    out.oof_predictions.assign(labels.size(), 0);
    out.oof_scores.assign(labels.size(), 0.0);
    for (std::size_t f = 0; f < k; ++f) {
        const Cell& cell = cells[out.chosen_index * k + f];
        out.fold_metrics.push_back(cell.metric);
        for (std::size_t i = 0; i < folds[f].validation.size(); ++i) {
            out.oof_predictions[folds[f].validation[i]] = cell.predictions[i];
            out.oof_scores[folds[f].validation[i]] = cell.scores[i];
        }
    }
    if (options.refit)
        out.model = out.zero_classifier ? Classifier::constant(0.0, static_cast<std::size_t>(x.cols()))
                                        : fit_classifier(spec.family, out.chosen, x, labels, {}, spec.seed, spec.max_bins);
    return out;
}

TunedModel cross_validate_tune(const ClassifierSpec& spec, const Eigen::MatrixXd& x,
                               std::span<const std::uint8_t> labels, const EvalMetric& metric, std::size_t k,
                               std::uint64_t seed, const TuneOptions& options) {
    const auto folds = kfold_split(labels.size(), k, seed);
    return cross_validate_tune(spec, x, labels, metric, folds, options);
}

std::vector<Hyperparameters> default_grid(Family family) {
    std::vector<Hyperparameters> grid;
    switch (family) {
        case Family::CART:
            for (int depth : {2, 4, 6, 8}) {
                Hyperparameters h;
                h.max_depth = depth;
                h.min_leaf = 10;
                grid.push_back(h);
            }
            break;
        case Family::RandomForest:
            for (int depth : {6, 10}) {
                Hyperparameters h;
                h.max_depth = depth;
                h.min_leaf = 5;
                h.n_trees = 50;
                grid.push_back(h);
            }
            break;
        case Family::GradientBoosted:
            for (int depth : {2, 4}) {
                Hyperparameters h;
                h.max_depth = depth;
                h.min_leaf = 10;
                h.n_trees = 50;
                h.learning_rate = 0.1;
                grid.push_back(h);
            }
            break;
        case Family::Constant: grid.push_back(Hyperparameters{}); break;
    }
    return grid;
}

}  // namespace lapselab::classify
