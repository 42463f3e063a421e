#include "lapselab/classify.hpp"
#include "lapselab/error.hpp"
#include "lapselab/lms.hpp"
#include "lapselab/portfolio.hpp"
#include "lapselab/rng.hpp"
#include "lapselab/survival/retention.hpp"
#include "lapselab/survival/selection.hpp"
#include "lapselab/text.hpp"
#include "lapselab/valuation.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lapselab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitModel = 3;
constexpr int kExitScenario = 4;

struct Failure {
    int code;
    std::string message;
};

[[noreturn]] void fail(int code, const std::string& message) { throw Failure{code, message}; }

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidStrategy:
        case ErrorCode::InvalidAxis:
        case ErrorCode::HorizonMismatch:
            return kExitScenario;
        default:
            return kExitConfig;
    }
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(kExitConfig, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(kExitConfig, path.string() + ": " + e.what());
    }
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(kExitConfig, "cannot write " + path.string());
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto part : text::split(s, ','))
        if (auto t = text::trim(part); !t.empty()) out.emplace_back(t);
    return out;
}

PortfolioDataset load_data(const fs::path& path) {
    try {
        return load_csv(path);
    } catch (const Error& e) {
        fail(kExitConfig, path.string() + ": " + e.what());
    }
}

// "standard" selects the built-in 64-scenario table. A file may hold a table, a
// bare array or a single strategy object.
lms::ScenarioTable load_table(const std::string& source) {
    if (source == "standard") return lms::standard_scenarios();
    const json j = read_json(source);
    if (j.is_object() && !j.contains("scenarios"))
        return {{{"strategy", valuation::strategy_from_json(j)}}};
    return lms::ScenarioTable::from_json(j);
}

lms::ScenarioTable select(const lms::ScenarioTable& table, const std::string& name) {
    if (name.empty()) return table;
    for (const auto& s : table.scenarios)
        if (s.name == name) return {{s}};
    fail(kExitScenario, "unknown scenario '" + name + "'");
}

struct Models {
    std::unique_ptr<survival::SurvivalModel> acceptant;
    std::unique_ptr<survival::SurvivalModel> lapser;
};

Models load_models(const fs::path& dir) {
    Models m;
    for (auto [name, slot] : {std::pair{"acceptant", &m.acceptant}, std::pair{"lapser", &m.lapser}}) {
        const fs::path path = dir / (std::string(name) + ".json");
        std::ifstream in(path);
        if (!in) fail(kExitModel, std::string(name) + " model: cannot open " + path.string());
        try {
            *slot = survival::model_from_json(json::parse(in));
        } catch (const std::exception& e) {
            fail(kExitModel, std::string(name) + " model: " + e.what());
        }
    }
    return m;
}

survival::RetentionMatrices retention(const fs::path& models_dir, std::span<const PolicyRecord> records, int horizon) {
    const Models m = load_models(models_dir);
    try {
        return survival::build_retention_matrices(*m.acceptant, *m.lapser, records, horizon);
    } catch (const Error& e) {
        fail(kExitModel, std::string("retention matrices: ") + e.what());
    }
}

int horizon_for(const lms::ScenarioTable& table, const std::optional<int>& horizon) {
    return horizon ? *horizon : table.max_horizon();
}

// "name=v1,v2,..." or "name=lo:hi:count".
lms::Axis parse_axis(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) fail(kExitScenario, "axis '" + spec + "': expected name=values");
    lms::Axis axis{spec.substr(0, eq), {}};
    const std::string rest = spec.substr(eq + 1);
    const auto parts = text::split(rest, ':');
    if (parts.size() == 3) {
        const auto lo = text::parse_double(parts[0]);
        const auto hi = text::parse_double(parts[1]);
        const auto count = text::parse_int(parts[2]);
        if (!lo || !hi || !count || *count < 1) fail(kExitScenario, "axis '" + spec + "': bad range");
        for (long long i = 0; i < *count; ++i)
            axis.values.push_back(*count == 1 ? *lo : *lo + (*hi - *lo) * static_cast<double>(i) / static_cast<double>(*count - 1));
        return axis;
    }
    for (const auto& v : split_list(rest)) {
        const auto x = text::parse_double(v);
        if (!x) fail(kExitScenario, "axis '" + spec + "': bad value '" + v + "'");
        axis.values.push_back(*x);
    }
    return axis;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string config;
};

void cmd_synth(const SynthArgs& a) {
    SynthConfig cfg;
    try {
        if (!a.config.empty()) {
            // Keys absent from the file keep their defaults.
            json j = to_json(cfg);
            j.merge_patch(read_json(a.config));
            cfg = synth_config_from_json(j);
        }
        cfg.n_subjects = a.n;
        cfg.seed = a.seed;
        validate(cfg);
    } catch (const Error& e) {
        fail(kExitConfig, e.what());
    }
    const auto data = generate_synthetic(cfg);
    auto out = open_out(a.out);
    write_csv(out, data);
    std::cout << "wrote " << data.size() << " subjects to " << a.out << "\n";
}

struct FitArgs {
    std::string data;
    std::string models_dir;
    std::uint64_t seed = 0;
    std::string families = "cox,gbsm,rsf";
    double test_fraction = 0.2;
};

void cmd_fit_survival(const FitArgs& a) {
    const auto data = load_data(a.data);
    survival::ComparisonOptions opts;
    opts.family_names = split_list(a.families);
    if (opts.family_names.empty()) fail(kExitConfig, "no survival families given");
    for (const auto& f : opts.family_names)
        if (std::find(std::begin(survival::kFamilies), std::end(survival::kFamilies), f) == std::end(survival::kFamilies))
            fail(kExitConfig, "unknown survival family '" + f + "'");
    if (!(a.test_fraction > 0.0 && a.test_fraction < 1.0)) fail(kExitConfig, "--test-fraction must lie in (0, 1)");
    opts.test_fraction = a.test_fraction;
    opts.seed = derive_seed(a.seed, "comparison");
    opts.families.rsf.seed = derive_seed(a.seed, "rsf");
    opts.families.gbsm.seed = derive_seed(a.seed, "gbsm");

    const std::vector<survival::CauseRecoding> recodings{survival::CauseRecoding::combined(),
                                                         survival::CauseRecoding::cause_specific(EventCode::Death)};
    survival::ComparisonReport report;
    try {
        report = survival::compare_models(data.records(), recodings, opts);
    } catch (const Error& e) {
        fail(kExitModel, std::string("model comparison failed: ") + e.what());
    }

    const fs::path dir = a.models_dir;
    write_text(dir / "comparison.csv", report.to_csv());
    write_json(dir / "comparison.json", report.to_json());

    // Lapsers keep the policy unless any event occurs; acceptants are only
    // exposed to death.
    const std::pair<const char*, const survival::CauseRecoding*> roles[] = {{"lapser", &recodings[0]},
                                                                            {"acceptant", &recodings[1]}};
    for (const auto& [role, recoding] : roles) {
        const std::string family = report.selected_for(recoding->name());
        std::unique_ptr<survival::SurvivalModel> model;
        try {
            model = survival::fit_family(family, survival::recode(data.records(), *recoding), opts.families);
        } catch (const Error& e) {
            fail(kExitModel, std::string(role) + " model (" + family + " on " + recoding->name() + "): " + e.what());
        }
        write_text(dir / (std::string(role) + ".json"), model->to_json().dump() + "\n");
        std::cout << role << ": " << family << " (" << recoding->name() << ")\n";
    }
}

struct ValuateArgs {
    std::string data;
    std::string models_dir;
    std::string strategies;
    std::string scenario;
    std::string out;
    std::optional<int> horizon;
};

void cmd_valuate(const ValuateArgs& a) {
    const auto table = select(load_table(a.strategies), a.scenario);
    table.validate();
    const auto data = load_data(a.data);
    const auto matrices = retention(a.models_dir, data.records(), horizon_for(table, a.horizon));
    const fs::path dir = a.out;
    json summaries = json::array();
    for (const auto& s : table.scenarios) {
        const auto result = valuation::relabel_targets(data.records(), matrices, s.strategy);
        auto out = open_out(dir / (s.name + ".csv"));
        valuation::write_csv(out, data.records(), result);
        json summary = valuation::summary_json(data.records(), result);
        summary["name"] = s.name;
        summaries.push_back(std::move(summary));
    }
    write_json(dir / "valuation_summary.json", summaries);
    std::cout << "valuated " << table.scenarios.size() << " scenario(s) into " << a.out << "\n";
}

struct LmsArgs {
    std::string data;
    std::string models_dir;
    std::string strategies;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t folds = 10;
    std::string families = "cart,rf,gbt";
    std::optional<int> horizon;
    std::string checkpoint_dir;
    bool no_checkpoint = false;
    bool sequential = false;
};

void cmd_run_lms(const LmsArgs& a) {
    const auto table = load_table(a.strategies);
    table.validate();
    lms::LmsOptions opts;
    opts.seed = a.seed;
    opts.k = a.folds;
    if (opts.k < 2) fail(kExitConfig, "--folds must be at least 2");
    opts.families.clear();
    try {
        for (const auto& f : split_list(a.families)) opts.families.push_back(classify::family_from_string(f));
    } catch (const Error& e) {
        fail(kExitConfig, e.what());
    }
    if (opts.families.empty()) fail(kExitConfig, "no classifier families given");

    const auto data = load_data(a.data);
    const auto matrices = retention(a.models_dir, data.records(), horizon_for(table, a.horizon));

    const fs::path dir = a.out;
    lms::GridOptions grid;
    if (!a.no_checkpoint) grid.checkpoint_dir = a.checkpoint_dir.empty() ? dir / "checkpoints" : fs::path(a.checkpoint_dir);
    grid.parallel_scenarios = !a.sequential;
    const auto results = lms::run_grid(data.records(), matrices, table, opts, grid);

    auto csv = open_out(dir / "results.csv");
    lms::write_results_csv(csv, results);
    write_json(dir / "results.json", lms::results_json(results));
    std::cout << "ran " << results.size() << " scenario(s) into " << a.out << "\n";
}

struct SensitivityArgs {
    std::string data;
    std::string models_dir;
    std::string strategies;
    std::string scenario;
    std::string axis1;
    std::string axis2;
    std::string out;
    std::string classifier;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
};

void cmd_sensitivity(const SensitivityArgs& a) {
    valuation::StrategyParams base;
    if (!a.strategies.empty()) {
        const auto table = load_table(a.strategies);
        if (a.scenario.empty() && table.scenarios.size() != 1)
            fail(kExitConfig, "--scenario is required when the strategy file holds several scenarios");
        base = select(table, a.scenario).scenarios.front().strategy;
    }
    const lms::Axis axis1 = parse_axis(a.axis1);
    const lms::Axis axis2 = parse_axis(a.axis2);

    std::optional<lms::ClassifierSurface> surface;
    if (!a.classifier.empty()) {
        surface.emplace();
        try {
            surface->family = classify::family_from_string(a.classifier);
        } catch (const Error& e) {
            fail(kExitConfig, e.what());
        }
        surface->k = a.folds;
        surface->seed = a.seed;
    }

    // Validate every grid point before the expensive model load.
    int horizon = base.T;
    for (const auto* axis : {&axis1, &axis2})
        for (double v : axis->values) {
            const auto s = lms::with_param(base, axis->param, v);
            valuation::validate(s);
            horizon = std::max(horizon, s.T);
        }

    const auto data = load_data(a.data);
    const auto matrices = retention(a.models_dir, data.records(), horizon);
    const auto grid = lms::sensitivity_surface(data.records(), matrices, base, axis1, axis2, surface);
    auto out = open_out(a.out);
    grid.write_csv(out);
    std::cout << "wrote " << axis1.values.size() * axis2.values.size() << " grid points to " << a.out << "\n";
}

struct ReportArgs {
    std::string data;
    std::string models_dir;
    std::string strategies;
    std::string scenario;
    std::string results;
    std::string out;
};

json family_summary(const std::vector<lms::ScenarioResult>& results) {
    std::map<std::string, std::vector<std::pair<double, double>>> pairs;  // (target_diff_share, improvement)
    std::map<std::string, json> out;
    for (const auto& r : results)
        for (const auto& f : r.families) {
            const std::string name = classify::to_string(f.family);
            auto& j = out[name];
            if (j.is_null()) j = {{"scenarios", 0}, {"mean_rg_y", 0.0}, {"mean_rg_ytilde", 0.0}, {"zero_classifier_wins", 0}};
            j["scenarios"] = j["scenarios"].get<int>() + 1;
            j["mean_rg_y"] = j["mean_rg_y"].get<double>() + f.rg_y;
            j["mean_rg_ytilde"] = j["mean_rg_ytilde"].get<double>() + f.rg_ytilde;
            if (f.zero_classifier_ytilde) j["zero_classifier_wins"] = j["zero_classifier_wins"].get<int>() + 1;
            if (f.improvement) pairs[name].emplace_back(r.target_diff_share, *f.improvement);
        }
    json summary = json::object();
    for (auto& [name, j] : out) {
        const double n = j["scenarios"].get<double>();
        j["mean_rg_y"] = j["mean_rg_y"].get<double>() / n;
        j["mean_rg_ytilde"] = j["mean_rg_ytilde"].get<double>() / n;
        std::vector<double> share, imp;
        for (const auto& [s, i] : pairs[name]) {
            share.push_back(s);
            imp.push_back(i);
        }
        double mean = 0.0;
        for (double v : imp) mean += v;
        j["mean_improvement"] = imp.empty() ? json(nullptr) : json(mean / static_cast<double>(imp.size()));
        const auto rho = lms::pearson(share, imp);
        j["corr_improvement_target_diff_share"] = rho ? json(*rho) : json(nullptr);
        summary[name] = j;
    }
    return summary;
}

void cmd_report(const ReportArgs& a) {
    const auto data = load_data(a.data);
    json report{{"portfolio", to_json(summary_stats(data.records()))}};

    if (!a.models_dir.empty() && fs::exists(fs::path(a.models_dir) / "comparison.json"))
        report["survival_comparison"] = read_json(fs::path(a.models_dir) / "comparison.json");

    if (!a.results.empty()) {
        const json j = read_json(a.results);
        std::vector<lms::ScenarioResult> results;
        try {
            for (const auto& r : j.at("results")) results.push_back(lms::ScenarioResult::from_json(r));
        } catch (const std::exception& e) {
            fail(kExitConfig, a.results + ": " + e.what());
        }
        report["families"] = family_summary(results);
    }

    if (!a.strategies.empty()) {
        if (a.models_dir.empty()) fail(kExitConfig, "--models-dir is required with --strategies");
        const auto table = select(load_table(a.strategies), a.scenario);
        table.validate();
        const auto matrices = retention(a.models_dir, data.records(), table.max_horizon());
        const auto y = lapse_labels(data.records());
        json scenarios = json::array();
        for (const auto& s : table.scenarios) {
            const auto v = valuation::relabel_targets(data.records(), matrices, s.strategy);
            json entry = valuation::summary_json(data.records(), v);
            entry["name"] = s.name;
            entry["target_diff_share"] = lms::target_diff_share(y, v.y_tilde);
            try {
                entry["nontargeted_lapsers"] = lms::profile_nontargeted(data.records(), y, v.y_tilde).to_json();
            } catch (const Error& e) {
                if (e.code() != ErrorCode::EmptySubset) throw;
                entry["nontargeted_lapsers"] = nullptr;
            }
            scenarios.push_back(std::move(entry));
        }
        report["scenarios"] = std::move(scenarios);
    }

    write_json(a.out, report);
    std::cout << "wrote report to " << a.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lapse management: survival models, retention gains and targeting", "lapselab"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic portfolio CSV");
    s->add_option("--n", synth.n, "Number of subjects")->required()->check(CLI::PositiveNumber);
    s->add_option("--seed", synth.seed, "Master seed")->required();
    s->add_option("-o,--out", synth.out, "Output CSV")->required();
    s->add_option("--config", synth.config, "Generator settings (JSON)");

    FitArgs fit;
    auto* f = app.add_subcommand("fit-survival", "Compare survival families and fit the selected models");
    f->add_option("--data", fit.data, "Portfolio CSV")->required();
    f->add_option("--models-dir", fit.models_dir, "Output directory for models and the comparison")->required();
    f->add_option("--seed", fit.seed, "Master seed")->required();
    f->add_option("--families", fit.families, "Comma-separated survival families")->capture_default_str();
    f->add_option("--test-fraction", fit.test_fraction, "Held-out share for the comparison")->capture_default_str();

    ValuateArgs val;
    auto* v = app.add_subcommand("valuate", "Individual retention gains and relabeled targets");
    v->add_option("--data", val.data, "Portfolio CSV")->required();
    v->add_option("--models-dir", val.models_dir, "Directory written by fit-survival")->required();
    v->add_option("--strategies", val.strategies, "Strategy or scenario JSON, or 'standard'")->required();
    v->add_option("--scenario", val.scenario, "Only this scenario");
    v->add_option("--out", val.out, "Output directory")->required();
    v->add_option("--horizon", val.horizon, "Retention horizon in years")->check(CLI::NonNegativeNumber);

    LmsArgs lms_args;
    auto* l = app.add_subcommand("run-lms", "Run the two-pipeline comparison over a scenario table");
    l->add_option("--data", lms_args.data, "Portfolio CSV")->required();
    l->add_option("--models-dir", lms_args.models_dir, "Directory written by fit-survival")->required();
    l->add_option("--strategies", lms_args.strategies, "Scenario JSON, or 'standard'")->required();
    l->add_option("--out", lms_args.out, "Output directory")->required();
    l->add_option("--seed", lms_args.seed, "Master seed")->required();
    l->add_option("--folds", lms_args.folds, "Cross-validation folds")->capture_default_str();
    l->add_option("--families", lms_args.families, "Comma-separated classifier families")->capture_default_str();
    l->add_option("--horizon", lms_args.horizon, "Retention horizon in years")->check(CLI::NonNegativeNumber);
    l->add_option("--checkpoint-dir", lms_args.checkpoint_dir, "Per-scenario checkpoints (default <out>/checkpoints)");
    l->add_flag("--no-checkpoint", lms_args.no_checkpoint, "Disable checkpoints");
    l->add_flag("--sequential", lms_args.sequential, "Run scenarios one at a time");

    SensitivityArgs sens;
    auto* g = app.add_subcommand("sensitivity", "Optimal retention gain over a two-parameter grid");
    g->add_option("--data", sens.data, "Portfolio CSV")->required();
    g->add_option("--models-dir", sens.models_dir, "Directory written by fit-survival")->required();
    g->add_option("--strategies", sens.strategies, "Base strategy or scenario JSON, or 'standard'");
    g->add_option("--scenario", sens.scenario, "Base scenario name");
    g->add_option("--axis1", sens.axis1, "name=v1,v2,... or name=lo:hi:count")->required();
    g->add_option("--axis2", sens.axis2, "name=v1,v2,... or name=lo:hi:count")->required();
    g->add_option("--out", sens.out, "Output CSV")->required();
    g->add_option("--classifier", sens.classifier, "Also cross-validate this classifier family at every point");
    g->add_option("--folds", sens.folds, "Folds for the classifier surface")->capture_default_str();
    g->add_option("--seed", sens.seed, "Master seed for the classifier surface")->capture_default_str();

    ReportArgs rep;
    auto* r = app.add_subcommand("report", "Portfolio, model and scenario summary as JSON");
    r->add_option("--data", rep.data, "Portfolio CSV")->required();
    r->add_option("--models-dir", rep.models_dir, "Directory written by fit-survival");
    r->add_option("--strategies", rep.strategies, "Scenario JSON, or 'standard'");
    r->add_option("--scenario", rep.scenario, "Only this scenario");
    r->add_option("--results", rep.results, "results.json written by run-lms");
    r->add_option("--out", rep.out, "Output JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const CLI::App* target = &app;
        for (const auto* sub : app.get_subcommands()) target = sub;
        std::cerr << target->help();
        return kExitConfig;
    }

    try {
        if (s->parsed()) cmd_synth(synth);
        else if (f->parsed()) cmd_fit_survival(fit);
        else if (v->parsed()) cmd_valuate(val);
        else if (l->parsed()) cmd_run_lms(lms_args);
        else if (g->parsed()) cmd_sensitivity(sens);
        else if (r->parsed()) cmd_report(rep);
        return 0;
    } catch (const Failure& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
