#include "lapselab/lms.hpp"

#include "lapselab/error.hpp"
#include "lapselab/parallel.hpp"
#include "lapselab/rng.hpp"
#include "lapselab/text.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace lapselab::lms {

using classify::Family;

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> optional_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

Scenario parse_scenario(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("name") || !j["name"].is_string())
        throw Error(ErrorCode::InvalidConfig, "every scenario needs a string name");
    Scenario s;
    s.name = j["name"].get<std::string>();
    try {
        s.strategy = valuation::strategy_from_json(j.contains("strategy") ? j["strategy"] : j);
    } catch (const Error& e) {
        throw Error(e.code(), "scenario " + s.name + ": " + e.what());
    }
    return s;
}

std::string checkpoint_name(const std::string& name) {
    std::string out;
    for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out + ".json";
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

void ScenarioTable::validate() const {
    std::set<std::string> seen;
    for (const auto& s : scenarios) {
        if (s.name.empty()) throw Error(ErrorCode::InvalidConfig, "scenario with an empty name");
        if (!seen.insert(s.name).second) throw Error(ErrorCode::InvalidConfig, "duplicate scenario name " + s.name);
        try {
            valuation::validate(s.strategy);
        } catch (const Error& e) {
            throw Error(e.code(), "scenario " + s.name + ": " + e.what());
        }
    }
}

int ScenarioTable::max_horizon() const {
    int t = 0;
    for (const auto& s : scenarios) t = std::max(t, s.strategy.T);
    return t;
}

nlohmann::json ScenarioTable::to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& s : scenarios) {
        nlohmann::json j = valuation::to_json(s.strategy);
        j["name"] = s.name;
        list.push_back(std::move(j));
    }
    return {{"scenarios", std::move(list)}};
}

ScenarioTable ScenarioTable::from_json(const nlohmann::json& j) {
    const nlohmann::json* list = &j;
    if (j.is_object() && j.contains("scenarios")) list = &j["scenarios"];
    if (!list->is_array()) throw Error(ErrorCode::InvalidConfig, "scenario table must be a list");
    ScenarioTable table;
    for (const auto& item : *list) table.scenarios.push_back(parse_scenario(item));
    table.validate();
    return table;
}

ScenarioTable standard_scenarios() {
    struct Letter {
        const char* prefix;
        double deltas[2];
        double gammas[2];
    };
    const Letter letters[] = {{"A", {0.0004, 0.0010}, {0.25, 0.05}}, {"B", {0.0008, 0.0020}, {0.20, 0.10}}};
    ScenarioTable table;
    for (const auto& letter : letters) {
        int index = 1;
        for (double p : {0.025, 0.05})
            for (double delta : letter.deltas)
                for (double gamma : letter.gammas)
                    for (double c : {10.0, 100.0})
                        for (int T : {5, 20})
                            table.scenarios.push_back(
                                {std::string(letter.prefix) + "-" + std::to_string(index++), {p, delta, gamma, c, 0.015, T}});
    }
    return table;
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

nlohmann::json ScenarioResult::to_json() const {
    nlohmann::json fams = nlohmann::json::array();
    for (const auto& f : families)
        fams.push_back({{"family", classify::to_string(f.family)},
                        {"accuracy_y", f.accuracy_y},
                        {"accuracy_ytilde", f.accuracy_ytilde},
                        {"rg_y", f.rg_y},
                        {"rg_ytilde", f.rg_ytilde},
                        {"targets_y", f.targets_y},
                        {"targets_ytilde", f.targets_ytilde},
                        {"rg_per_target_y", optional_json(f.rg_per_target_y)},
                        {"rg_per_target_ytilde", optional_json(f.rg_per_target_ytilde)},
                        {"improvement", optional_json(f.improvement)},
                        {"zero_classifier_ytilde", f.zero_classifier_ytilde},
                        {"chosen_y", f.chosen_y},
                        {"chosen_ytilde", f.chosen_ytilde}});
    return {{"name", name},
            {"strategy", valuation::to_json(strategy)},
            {"target_diff_share", target_diff_share},
            {"ones_share_y", ones_share_y},
            {"ones_share_ytilde", ones_share_ytilde},
            {"optimal_gain", optimal_gain},
            {"families", std::move(fams)},
            {"wall_time", wall_time}};
}

ScenarioResult ScenarioResult::from_json(const nlohmann::json& j) {
    try {
        ScenarioResult r;
        r.name = j.at("name").get<std::string>();
        r.strategy = valuation::strategy_from_json(j.at("strategy"));
        r.target_diff_share = j.at("target_diff_share").get<double>();
        r.ones_share_y = j.at("ones_share_y").get<double>();
        r.ones_share_ytilde = j.at("ones_share_ytilde").get<double>();
        r.optimal_gain = j.at("optimal_gain").get<double>();
        r.wall_time = j.at("wall_time").get<double>();
        for (const auto& f : j.at("families")) {
            FamilyResult fr;
            fr.family = classify::family_from_string(f.at("family").get<std::string>());
            fr.accuracy_y = f.at("accuracy_y").get<double>();
            fr.accuracy_ytilde = f.at("accuracy_ytilde").get<double>();
            fr.rg_y = f.at("rg_y").get<double>();
            fr.rg_ytilde = f.at("rg_ytilde").get<double>();
            fr.targets_y = f.at("targets_y").get<std::size_t>();
            fr.targets_ytilde = f.at("targets_ytilde").get<std::size_t>();
            fr.rg_per_target_y = optional_from(f.at("rg_per_target_y"));
            fr.rg_per_target_ytilde = optional_from(f.at("rg_per_target_ytilde"));
            fr.improvement = optional_from(f.at("improvement"));
            fr.zero_classifier_ytilde = f.at("zero_classifier_ytilde").get<bool>();
            fr.chosen_y = f.at("chosen_y");
            fr.chosen_ytilde = f.at("chosen_ytilde");
            r.families.push_back(std::move(fr));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaMismatch, std::string("malformed scenario result: ") + e.what());
    }
}

void write_results_csv(std::ostream& out, std::span<const ScenarioResult> results) {
    using text::format_double;
    using text::format_optional;
    out << "scenario,family,p,delta,gamma,c,d,T,target_diff_share,ones_share_ytilde,accuracy_y,accuracy_ytilde,"
           "rg_y,rg_ytilde,rg_per_target_y,rg_per_target_ytilde,improvement\n";
    for (const auto& r : results) {
        const auto& s = r.strategy;
        for (const auto& f : r.families) {
            out << r.name << ',' << classify::to_string(f.family) << ',' << format_double(s.p) << ','
                << format_double(s.delta) << ',' << format_double(s.gamma) << ',' << format_double(s.c) << ','
                << format_double(s.d) << ',' << s.T << ',' << format_double(r.target_diff_share) << ','
                << format_double(r.ones_share_ytilde) << ',' << format_double(f.accuracy_y) << ','
                << format_double(f.accuracy_ytilde) << ',' << format_double(f.rg_y) << ','
                << format_double(f.rg_ytilde) << ',' << format_optional(f.rg_per_target_y) << ','
                << format_optional(f.rg_per_target_ytilde) << ',' << format_optional(f.improvement) << '\n';
        }
    }
}

nlohmann::json results_json(std::span<const ScenarioResult> results) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : results) list.push_back(r.to_json());
    return {{"results", std::move(list)}};
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

std::vector<classify::Hyperparameters> LmsOptions::grid_for(Family f) const {
    const auto it = grids.find(f);
    return it != grids.end() && !it->second.empty() ? it->second : classify::default_grid(f);
}

Workspace::Workspace(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                     const LmsOptions& options)
    : records_(records), matrices_(matrices), options_(options) {
    if (records.empty()) throw Error(ErrorCode::EmptyDataset, "no subjects");
    if (matrices.rows() != records.size())
        throw Error(ErrorCode::AlignmentError, "retention matrices do not match the portfolio");
    if (options.families.empty()) throw Error(ErrorCode::InvalidConfig, "no classifier families");
    features_ = classifier_features(records);
    y_ = lapse_labels(records);
    folds_ = kfold_split(records.size(), options.k, derive_seed(options.seed, "lms-folds"));
}

const classify::TunedModel& Workspace::baseline(Family f) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = baselines_.find(f);
    if (it != baselines_.end()) return it->second;
    classify::ClassifierSpec spec;
    spec.family = f;
    spec.grid = options_.grid_for(f);
    spec.seed = derive_seed(options_.seed, "pipeline-y");
    spec.max_bins = options_.max_bins;
    classify::TuneOptions tune;
    tune.refit = false;
    auto tuned = classify::cross_validate_tune(spec, features_.values, y_, classify::EvalMetric::of(classify::MetricKind::Accuracy),
                                               folds_, tune);
    return baselines_.emplace(f, std::move(tuned)).first->second;
}

ScenarioResult run_scenario(const Workspace& ws, const Scenario& scenario) {
    const auto start = std::chrono::steady_clock::now();
    const StrategyParams& s = scenario.strategy;
    try {
        valuation::validate(s);
    } catch (const Error& e) {
        throw Error(e.code(), "scenario " + scenario.name + ": " + e.what());
    }
    if (s.T > ws.matrices().horizon)
        throw Error(ErrorCode::HorizonMismatch, "scenario " + scenario.name + " needs horizon " + std::to_string(s.T) +
                                                    ", retention matrices stop at " + std::to_string(ws.matrices().horizon));

    const auto records = ws.records();
    const auto& m = ws.matrices();
    const auto& y = ws.labels();
    const auto& folds = ws.folds();
    const auto valuation_result = valuation::relabel_targets(records, m, s);
    const auto& y_tilde = valuation_result.y_tilde;
    const double n = static_cast<double>(records.size());
    const double k = static_cast<double>(folds.size());

    ScenarioResult out;
    out.name = scenario.name;
    out.strategy = s;
    out.target_diff_share = target_diff_share(y, y_tilde);
    out.ones_share_y = static_cast<double>(std::count(y.begin(), y.end(), 1)) / n;
    out.ones_share_ytilde = static_cast<double>(std::count(y_tilde.begin(), y_tilde.end(), 1)) / n;
    out.optimal_gain = valuation_result.optimal_gain();

    const auto rg_metric = classify::EvalMetric::retention_gain({records, &m, s});
    const auto accuracy = classify::EvalMetric::of(classify::MetricKind::Accuracy);

    // Retention gain and accuracy of out-of-fold predictions, fold by fold.
    const auto score_folds = [&](const std::vector<std::uint8_t>& oof, const std::vector<std::uint8_t>& truth,
                                 double* rg_total, double* acc_mean, std::size_t* targets) {
        *rg_total = 0.0;
        *acc_mean = 0.0;
        *targets = 0;
        for (const auto& fold : folds) {
            std::vector<std::uint8_t> pred, t;
            for (auto i : fold.validation) {
                pred.push_back(oof[i]);
                t.push_back(truth[i]);
                *targets += oof[i];
            }
            *rg_total += classify::evaluate(rg_metric, t, pred, {}, fold.validation);
            *acc_mean += classify::evaluate(accuracy, t, pred, {}) / k;
        }
    };

    for (Family f : ws.options().families) {
        FamilyResult r;
        r.family = f;

        const auto& base = ws.baseline(f);
        double rg_total = 0.0, acc = 0.0;
        score_folds(base.oof_predictions, y, &rg_total, &acc, &r.targets_y);
        r.accuracy_y = base.mean_metric;
        r.rg_y = rg_total / k;
        if (r.targets_y > 0) r.rg_per_target_y = rg_total / static_cast<double>(r.targets_y);
        r.chosen_y = classify::to_json(base.chosen);

        classify::ClassifierSpec spec;
        spec.family = f;
        spec.grid = ws.options().grid_for(f);
        spec.seed = derive_seed(ws.options().seed, scenario.name);
        spec.max_bins = ws.options().max_bins;
        classify::TuneOptions tune;
        tune.refit = false;
        tune.inject_zero = true;
        const auto tuned = classify::cross_validate_tune(spec, ws.features(), y_tilde, rg_metric, folds, tune);
        score_folds(tuned.oof_predictions, y_tilde, &rg_total, &r.accuracy_ytilde, &r.targets_ytilde);
        r.rg_ytilde = tuned.mean_metric;
        if (r.targets_ytilde > 0) r.rg_per_target_ytilde = rg_total / static_cast<double>(r.targets_ytilde);
        r.zero_classifier_ytilde = tuned.zero_classifier;
        r.chosen_ytilde = tuned.zero_classifier ? nlohmann::json(nullptr) : classify::to_json(tuned.chosen);
        r.improvement = improvement(r.rg_y, r.rg_ytilde);
        out.families.push_back(std::move(r));
    }
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

ScenarioResult run_scenario(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                            const Scenario& scenario, const LmsOptions& options) {
    try {
        valuation::validate(scenario.strategy);
    } catch (const Error& e) {
        throw Error(e.code(), "scenario " + scenario.name + ": " + e.what());
    }
    const Workspace ws(records, matrices, options);
    return run_scenario(ws, scenario);
}

std::vector<ScenarioResult> run_grid(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                                     const ScenarioTable& table, const LmsOptions& options,
                                     const GridOptions& grid_options) {
    table.validate();
    if (table.scenarios.empty()) return {};
    if (table.max_horizon() > matrices.horizon)
        throw Error(ErrorCode::HorizonMismatch, "scenario horizon " + std::to_string(table.max_horizon()) +
                                                    " exceeds retention horizon " + std::to_string(matrices.horizon));

    const std::size_t n = table.scenarios.size();
    std::vector<std::optional<ScenarioResult>> results(n);
    if (grid_options.checkpoint_dir) {
        std::filesystem::create_directories(*grid_options.checkpoint_dir);
        for (std::size_t i = 0; i < n; ++i) {
            const auto path = *grid_options.checkpoint_dir / checkpoint_name(table.scenarios[i].name);
            std::ifstream in(path);
            if (!in) continue;
            try {
                auto r = ScenarioResult::from_json(nlohmann::json::parse(in));
                if (r.name == table.scenarios[i].name && r.strategy == table.scenarios[i].strategy &&
                    r.families.size() == options.families.size())
                    results[i] = std::move(r);
            } catch (const std::exception&) {
                // Unreadable checkpoint: recompute.
            }
        }
    }

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < n; ++i)
        if (!results[i]) todo.push_back(i);
    if (!todo.empty()) {
        const Workspace ws(records, matrices, options);
        // Baselines first, with full parallelism, before scenarios share them.
        for (Family f : options.families) ws.baseline(f);
        const auto job = [&](std::size_t j) {
            const std::size_t i = todo[j];
            results[i] = run_scenario(ws, table.scenarios[i]);
            if (grid_options.checkpoint_dir) {
                const auto path = *grid_options.checkpoint_dir / checkpoint_name(table.scenarios[i].name);
                const auto tmp = path.string() + ".tmp";
                {
                    std::ofstream out(tmp);
                    out << results[i]->to_json().dump(1) << '\n';
                    if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint " + tmp);
                }
                std::filesystem::rename(tmp, path);
            }
        };
        if (grid_options.parallel_scenarios)
            parallel_for(todo.size(), job);
        else
            for (std::size_t j = 0; j < todo.size(); ++j) job(j);
    }

    std::vector<ScenarioResult> out;
    out.reserve(n);
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

std::optional<double> improvement(double rg_y, double rg_ytilde) {
    if (rg_y == 0.0) return std::nullopt;
    return (rg_ytilde - rg_y) / std::abs(rg_y) * 100.0;
}

double target_diff_share(std::span<const std::uint8_t> y, std::span<const std::uint8_t> y_tilde) {
    if (y.size() != y_tilde.size()) throw Error(ErrorCode::LengthMismatch, "y and y_tilde differ in length");
    if (y.empty()) throw Error(ErrorCode::EmptyDataset, "no subjects");
    std::size_t count = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y_tilde[i] && !y[i])
            throw Error(ErrorCode::ImplicationViolated, "y_tilde = 1 with y = 0 at row " + std::to_string(i));
        count += y[i] && !y_tilde[i];
    }
    return static_cast<double>(count) / static_cast<double>(y.size());
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "pearson needs equal lengths");
    if (x.size() < 2) return std::nullopt;
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

nlohmann::json NontargetedProfile::to_json() const {
    return {{"count", count}, {"subset", lapselab::to_json(subset)}, {"population", lapselab::to_json(population)}};
}

NontargetedProfile profile_nontargeted(std::span<const PolicyRecord> records, std::span<const std::uint8_t> y,
                                       std::span<const std::uint8_t> y_tilde) {
    if (y.size() != records.size() || y_tilde.size() != records.size())
        throw Error(ErrorCode::LengthMismatch, "labels do not match the portfolio");
    std::vector<PolicyRecord> subset;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (y[i] && !y_tilde[i]) subset.push_back(records[i]);
    if (subset.empty()) throw Error(ErrorCode::EmptySubset, "every lapser is worth targeting");
    NontargetedProfile p;
    p.count = subset.size();
    p.subset = summary_stats(subset);
    p.population = summary_stats(records);
    return p;
}

// ---------------------------------------------------------------------------
// Sensitivity
// ---------------------------------------------------------------------------

StrategyParams with_param(StrategyParams s, const std::string& param, double value) {
    if (param == "p") s.p = value;
    else if (param == "delta") s.delta = value;
    else if (param == "gamma") s.gamma = value;
    else if (param == "c") s.c = value;
    else if (param == "d") s.d = value;
    else if (param == "T") {
        if (!(value >= 0.0) || std::floor(value) != value || value > 1e6)
            throw Error(ErrorCode::InvalidAxis, "horizon values must be whole years, got " + text::format_double(value));
        s.T = static_cast<int>(value);
    } else {
        throw Error(ErrorCode::InvalidAxis, "unknown parameter '" + param + "' (expected p, delta, gamma, c, d or T)");
    }
    return s;
}

void SensitivityGrid::write_csv(std::ostream& out) const {
    out << axis1.param << ',' << axis2.param << ",rg" << (rg_classifier ? ",rg_classifier" : "") << '\n';
    for (std::size_t a = 0; a < axis1.values.size(); ++a)
        for (std::size_t b = 0; b < axis2.values.size(); ++b) {
            const auto i = static_cast<Eigen::Index>(a), j = static_cast<Eigen::Index>(b);
            out << text::format_double(axis1.values[a]) << ',' << text::format_double(axis2.values[b]) << ','
                << text::format_double(rg(i, j));
            if (rg_classifier) out << ',' << text::format_double((*rg_classifier)(i, j));
            out << '\n';
        }
}

SensitivityGrid sensitivity_surface(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                                    const StrategyParams& base, const Axis& axis1, const Axis& axis2,
                                    const std::optional<ClassifierSurface>& classifier) {
    if (axis1.param == axis2.param) throw Error(ErrorCode::InvalidAxis, "both axes vary " + axis1.param);
    if (axis1.values.empty() || axis2.values.empty()) throw Error(ErrorCode::InvalidAxis, "empty axis");
    const std::size_t n1 = axis1.values.size(), n2 = axis2.values.size();

    std::vector<StrategyParams> points(n1 * n2);
    for (std::size_t a = 0; a < n1; ++a)
        for (std::size_t b = 0; b < n2; ++b) {
            StrategyParams s = with_param(with_param(base, axis1.param, axis1.values[a]), axis2.param, axis2.values[b]);
            try {
                valuation::validate(s);
            } catch (const Error& e) {
                throw Error(ErrorCode::InvalidAxis, "grid point (" + axis1.param + "=" + text::format_double(axis1.values[a]) +
                                                        ", " + axis2.param + "=" + text::format_double(axis2.values[b]) +
                                                        ") is not a valid strategy: " + e.what());
            }
            if (s.T > matrices.horizon)
                throw Error(ErrorCode::HorizonMismatch, "grid horizon " + std::to_string(s.T) + " exceeds retention horizon " +
                                                            std::to_string(matrices.horizon));
            points[a * n2 + b] = s;
        }

    SensitivityGrid grid;
    grid.axis1 = axis1;
    grid.axis2 = axis2;
    grid.base = base;
    grid.rg.resize(static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n2));
    std::vector<double> cells(points.size());
    parallel_for(points.size(), [&](std::size_t c) {
        cells[c] = valuation::optimal_gain(valuation::individual_gains(records, matrices, points[c]));
    });
    for (std::size_t c = 0; c < cells.size(); ++c)
        grid.rg(static_cast<Eigen::Index>(c / n2), static_cast<Eigen::Index>(c % n2)) = cells[c];

    if (classifier) {
        const auto x = classifier_features(records);
        const auto folds = kfold_split(records.size(), classifier->k, derive_seed(classifier->seed, "sensitivity-folds"));
        classify::ClassifierSpec spec;
        spec.family = classifier->family;
        spec.grid = classifier->grid.empty() ? classify::default_grid(classifier->family) : classifier->grid;
        spec.seed = derive_seed(classifier->seed, "sensitivity");
        classify::TuneOptions tune;
        tune.refit = false;
        tune.inject_zero = true;
        parallel_for(points.size(), [&](std::size_t c) {
            const auto labels = valuation::relabel(valuation::individual_gains(records, matrices, points[c]));
            const auto metric = classify::EvalMetric::retention_gain({records, &matrices, points[c]});
            cells[c] = classify::cross_validate_tune(spec, x.values, labels, metric, folds, tune).mean_metric;
        });
        Eigen::MatrixXd m(static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n2));
        for (std::size_t c = 0; c < cells.size(); ++c)
            m(static_cast<Eigen::Index>(c / n2), static_cast<Eigen::Index>(c % n2)) = cells[c];
        grid.rg_classifier = std::move(m);
    }
    return grid;
}

}  // namespace lapselab::lms
