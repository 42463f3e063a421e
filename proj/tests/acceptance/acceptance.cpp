#include "lapselab/classify.hpp"
#include "lapselab/error.hpp"
#include "lapselab/lms.hpp"
#include "lapselab/parallel.hpp"
#include "lapselab/portfolio.hpp"
#include "lapselab/rng.hpp"
#include "lapselab/survival/cox.hpp"
#include "lapselab/survival/estimators.hpp"
#include "lapselab/survival/retention.hpp"
#include "lapselab/survival/selection.hpp"
#include "lapselab/valuation.hpp"

#include "CLI11.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace lapselab;
using survival::RetentionMatrices;
using valuation::StrategyParams;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

// Collects failed checks; the first few are reported.
struct Checks {
    std::size_t total = 0;
    std::size_t failed = 0;
    std::vector<std::string> messages;

    void expect(bool ok, const std::string& what) {
        ++total;
        if (ok) return;
        ++failed;
        if (messages.size() < 5) messages.push_back(what);
    }

    Outcome outcome(const std::string& summary) const {
        Outcome o{failed == 0, summary + " (" + std::to_string(total - failed) + "/" + std::to_string(total) + " checks)"};
        for (const auto& m : messages) o.detail += "; " + m;
        return o;
    }
};

// ---------------------------------------------------------------------------
// Random valuation instances
// ---------------------------------------------------------------------------

struct Instance {
    std::vector<PolicyRecord> records;
    RetentionMatrices matrices;
    StrategyParams strategy;
};

StrategyParams random_strategy(Rng& rng) {
    StrategyParams s;
    s.p = rng.uniform(0.005, 0.1);
    s.delta = rng.uniform(0.0, 0.9) * s.p;
    s.gamma = rng.uniform(0.0, 1.0);
    s.c = rng.uniform(0.0, 100.0);
    s.d = rng.uniform(0.0, 0.1);
    s.T = 1 + static_cast<int>(rng.below(20));
    return s;
}

// Lapser rows decay faster on average; the horizon may exceed T so that only
// a prefix of the columns is used.
Instance random_instance(Rng& rng, std::size_t n) {
    Instance inst;
    inst.strategy = random_strategy(rng);
    const int horizon = inst.strategy.T + static_cast<int>(rng.below(4));
    inst.matrices.horizon = horizon;
    inst.matrices.r_acceptant.resize(static_cast<Eigen::Index>(n), horizon + 1);
    inst.matrices.r_lapser.resize(static_cast<Eigen::Index>(n), horizon + 1);
    for (std::size_t i = 0; i < n; ++i) {
        PolicyRecord r;
        r.subject_id = "s" + std::to_string(i);
        r.face_amount = std::exp(rng.normal(9.6, 1.4));
        r.event = rng.bernoulli(0.3) ? EventCode::Lapsed : (rng.bernoulli(0.1) ? EventCode::Death : EventCode::Active);
        inst.records.push_back(r);
        const auto row = static_cast<Eigen::Index>(i);
        inst.matrices.r_acceptant(row, 0) = 1.0;
        inst.matrices.r_lapser(row, 0) = 1.0;
        for (int t = 1; t <= horizon; ++t) {
            inst.matrices.r_acceptant(row, t) = inst.matrices.r_acceptant(row, t - 1) * rng.uniform(0.85, 1.0);
            inst.matrices.r_lapser(row, t) = inst.matrices.r_lapser(row, t - 1) * rng.uniform(0.4, 1.0);
        }
    }
    return inst;
}

// Individual gains written out term by term, independently of the library.
std::vector<double> oracle_gains(const Instance& inst) {
    const auto& s = inst.strategy;
    std::vector<double> z;
    for (std::size_t i = 0; i < inst.records.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        double clv_acc = 0.0, clv_lap = 0.0;
        const double F = inst.records[i].face_amount;
        for (int t = 0; t <= s.T; ++t) {
            const double disc = std::pow(1.0 + s.d, t);
            clv_acc += s.p * F * inst.matrices.r_acceptant(row, t) / disc;
            clv_lap += s.p * F * inst.matrices.r_lapser(row, t) / disc;
        }
        const double incentive_acc = clv_acc * (s.p - s.delta) / s.p;
        if (inst.records[i].is_lapser())
            z.push_back(s.gamma * (incentive_acc - clv_lap) - s.c);
        else
            z.push_back(incentive_acc - clv_acc - s.c);
    }
    return z;
}

double rg_by_values(const Instance& inst, std::span<const std::uint8_t> targets) {
    return valuation::lapse_managed_portfolio_value(inst.records, inst.matrices, inst.strategy, targets) -
           valuation::control_portfolio_value(inst.records, inst.matrices, inst.strategy);
}

bool close(double a, double b, double rel, double floor = 1.0) {
    return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), floor});
}

// ---------------------------------------------------------------------------
// Portfolios and survival models
// ---------------------------------------------------------------------------

PortfolioDataset synthetic(std::size_t n, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_subjects = n;
    cfg.seed = seed;
    return generate_synthetic(cfg);
}

// Same protocol as the fit-survival command: compare on a held-out split,
// then refit the selected family on every subject.
RetentionMatrices fitted_matrices(std::span<const PolicyRecord> records, std::uint64_t seed, int horizon) {
    survival::ComparisonOptions opts;
    opts.seed = derive_seed(seed, "comparison");
    opts.families.rsf.seed = derive_seed(seed, "rsf");
    opts.families.gbsm.seed = derive_seed(seed, "gbsm");
    const std::vector<survival::CauseRecoding> recodings{survival::CauseRecoding::combined(),
                                                         survival::CauseRecoding::cause_specific(EventCode::Death)};
    const auto report = survival::compare_models(records, recodings, opts);
    const auto lapser = survival::fit_family(report.selected_for("combined"), survival::recode(records, recodings[0]),
                                             opts.families);
    const auto acceptant = survival::fit_family(report.selected_for("cause_death"),
                                                survival::recode(records, recodings[1]), opts.families);
    return survival::build_retention_matrices(*acceptant, *lapser, records, horizon);
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

Outcome criterion1() {
    Stopwatch clock;
    Rng rng(101);
    Checks checks;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto inst = random_instance(rng, 50);
        std::vector<std::uint8_t> targets(50);
        const double share = rng.uniform();
        for (auto& t : targets) t = rng.bernoulli(share) ? 1 : 0;

        const double lhs = rg_by_values(inst, targets);
        const auto z = oracle_gains(inst);
        double rhs = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i)
            if (targets[i]) rhs += z[i];
        const double lib = valuation::targeted_gain(
            valuation::individual_gains(inst.records, inst.matrices, inst.strategy), targets);

        const double scale = std::max({std::abs(lhs), std::abs(rhs), 1.0});
        worst = std::max(worst, std::abs(lhs - rhs) / scale);
        checks.expect(close(lhs, rhs, 1e-9), "trial " + std::to_string(trial) + ": " + fmt(lhs) + " vs " + fmt(rhs));
        checks.expect(close(lib, rhs, 1e-9), "trial " + std::to_string(trial) + " library z: " + fmt(lib));
    }
    const double t = clock.seconds();
    checks.expect(t < 10.0, "runtime " + fmt(t) + " s");
    return checks.outcome("1000 portfolios, worst relative gap " + fmt(worst) + ", " + fmt(t) + " s");
}

Outcome criterion2() {
    Stopwatch clock;
    Rng rng(202);
    Checks checks;
    std::size_t subsets = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(12);
        auto inst = random_instance(rng, n);
        // Small portfolios need cheap contacts now and then to have profitable rows.
        if (trial % 2 == 0) inst.strategy.c = rng.uniform(0.0, 5.0);
        const auto z = valuation::individual_gains(inst.records, inst.matrices, inst.strategy);
        const auto greedy = valuation::relabel(z);
        const double at_greedy = rg_by_values(inst, greedy);

        double best = -std::numeric_limits<double>::infinity();
        std::vector<std::uint8_t> targets(n);
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            for (std::size_t i = 0; i < n; ++i) targets[i] = (mask >> i) & 1u;
            best = std::max(best, rg_by_values(inst, targets));
            ++subsets;
        }
        checks.expect(at_greedy >= best - 1e-9 * std::max(1.0, std::abs(best)),
                      "trial " + std::to_string(trial) + ": greedy " + fmt(at_greedy) + " < best " + fmt(best));
        checks.expect(close(at_greedy, valuation::optimal_gain(z), 1e-9), "trial " + std::to_string(trial) + ": RG*");
    }
    const double t = clock.seconds();
    checks.expect(t < 30.0, "runtime " + fmt(t) + " s");
    return checks.outcome("200 instances, " + std::to_string(subsets) + " targetings enumerated, " + fmt(t) + " s");
}

Outcome criterion3() {
    Stopwatch clock;
    const auto data = synthetic(5000, 303);
    const auto table = lms::standard_scenarios();
    const auto matrices = fitted_matrices(data.records(), 303, table.max_horizon());
    lms::LmsOptions options;
    options.seed = 303;
    const auto results = lms::run_grid(data.records(), matrices, table, options);

    Checks checks;
    std::size_t zero_wins = 0, cells = 0;
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& r : results)
        for (const auto& f : r.families) {
            ++cells;
            zero_wins += f.zero_classifier_ytilde ? 1 : 0;
            lowest = std::min(lowest, f.rg_ytilde);
            checks.expect(f.rg_ytilde >= 0.0, r.name + "/" + classify::to_string(f.family) + " RG " + fmt(f.rg_ytilde));
        }
    checks.expect(results.size() == 64, "expected 64 scenarios, got " + std::to_string(results.size()));
    const double t = clock.seconds();
    checks.expect(t < 1800.0, "runtime " + fmt(t) + " s");
    return checks.outcome(std::to_string(cells) + " scenario/family cells, lowest RG " + fmt(lowest) + ", zero classifier chosen " +
                          std::to_string(zero_wins) + " times, " + std::to_string(thread_count()) + " worker(s), " +
                          fmt(t) + " s");
}

survival::SurvivalData simulate_ph(std::size_t n, const std::vector<double>& beta, std::uint64_t seed) {
    Rng rng(seed);
    survival::SurvivalData d;
    d.covariates.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(beta.size()));
    for (std::size_t c = 0; c < beta.size(); ++c) d.feature_names.push_back("x" + std::to_string(c));
    for (std::size_t i = 0; i < n; ++i) {
        double eta = 0.0;
        for (std::size_t c = 0; c < beta.size(); ++c) {
            const double x = rng.normal(0.0, 1.0);
            d.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = x;
            eta += beta[c] * x;
        }
        const double t = rng.exponential(std::exp(eta));
        const double cens = rng.uniform(0.0, 3.0);
        d.durations.push_back(std::max(1e-9, std::min(t, cens)));
        d.events.push_back(t <= cens ? 1 : 0);
    }
    return d;
}

// Product-limit and Nelson-Aalen straight from the definitions, O(n^2).
void oracle_km_na(const std::vector<double>& t, const std::vector<std::uint8_t>& e, double at, double* km, double* na) {
    std::vector<double> times;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (e[i] && t[i] <= at) times.push_back(t[i]);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    *km = 1.0;
    *na = 0.0;
    for (double u : times) {
        double risk = 0.0, deaths = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i] >= u) risk += 1.0;
            if (t[i] == u && e[i]) deaths += 1.0;
        }
        *km *= 1.0 - deaths / risk;
        *na += deaths / risk;
    }
}

Outcome criterion4() {
    Stopwatch clock;
    Checks checks;

    // Finite differences on the Breslow partial likelihood, with ties.
    {
        auto d = simulate_ph(500, {0.5, -0.4, 0.3}, 404);
        for (std::size_t i = 0; i < d.durations.size(); i += 5) d.durations[i] = std::ceil(d.durations[i] * 8.0) / 8.0;
        const survival::CoxPartialLikelihood pl(d.durations, d.events, d.covariates);
        Rng rng(4);
        double worst_g = 0.0, worst_h = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::VectorXd beta(3);
            for (int c = 0; c < 3; ++c) beta(c) = rng.uniform(-1.0, 1.0);
            const Eigen::VectorXd g = pl.gradient(beta);
            const Eigen::MatrixXd h = pl.hessian(beta);
            Eigen::VectorXd g_fd(3);
            Eigen::MatrixXd h_fd(3, 3);
            const double eps = 1e-5;
            for (int c = 0; c < 3; ++c) {
                Eigen::VectorXd up = beta, dn = beta;
                up(c) += eps;
                dn(c) -= eps;
                g_fd(c) = (pl.value(up) - pl.value(dn)) / (2.0 * eps);
                h_fd.col(c) = (pl.gradient(up) - pl.gradient(dn)) / (2.0 * eps);
            }
            worst_g = std::max(worst_g, (g_fd - g).norm() / g.norm());
            worst_h = std::max(worst_h, (h_fd - h).norm() / h.norm());
        }
        checks.expect(worst_g < 1e-6, "gradient relative error " + fmt(worst_g));
        checks.expect(worst_h < 1e-4, "hessian relative error " + fmt(worst_h));
    }

    // Coefficient recovery.
    {
        const auto d = simulate_ph(10000, {0.7}, 405);
        const double b = survival::fit_cox(d).beta()(0);
        checks.expect(std::abs(b - 0.7) < 0.05, "beta " + fmt(b));
    }

    // Hand example: times 1 1 2 3 3 4 5 with events 1 0 1 1 1 0 1.
    {
        const std::vector<double> t{1, 1, 2, 3, 3, 4, 5};
        const std::vector<std::uint8_t> e{1, 0, 1, 1, 1, 0, 1};
        const auto km = survival::kaplan_meier(t, e);
        const auto na = survival::nelson_aalen(t, e);
        const double s1 = 6.0 / 7.0, s2 = s1 * 4.0 / 5.0, s3 = s2 * 2.0 / 4.0, s5 = s3 * 0.0;
        const double h1 = 1.0 / 7.0, h2 = h1 + 1.0 / 5.0, h3 = h2 + 2.0 / 4.0, h5 = h3 + 1.0;
        const std::vector<std::pair<double, double>> km_expect{{0.5, 1.0}, {1.0, s1}, {2.0, s2}, {3.5, s3}, {4.0, s3}, {5.0, s5}};
        const std::vector<std::pair<double, double>> na_expect{{0.5, 0.0}, {1.0, h1}, {2.0, h2}, {3.5, h3}, {4.0, h3}, {5.0, h5}};
        for (const auto& [at, v] : km_expect) checks.expect(close(km(at), v, 1e-15, 1e-300), "KM at " + fmt(at));
        for (const auto& [at, v] : na_expect) checks.expect(close(na(at), v, 1e-15, 1e-300), "NA at " + fmt(at));

        // Aalen-Johansen with lapse (1) and death (2) among the same times.
        survival::CompetingRisksData cr{t, {EventCode::Lapsed, EventCode::Active, EventCode::Death, EventCode::Lapsed,
                                            EventCode::Death, EventCode::Active, EventCode::Lapsed}};
        const auto lapse = survival::cause_specific_cif(cr, EventCode::Lapsed);
        const auto death = survival::cause_specific_cif(cr, EventCode::Death);
        const double l1 = 1.0 / 7.0, d2 = s1 * 1.0 / 5.0, l3 = l1 + s2 * 1.0 / 4.0, d3 = d2 + s2 * 1.0 / 4.0, l5 = l3 + s3;
        checks.expect(close(lapse(1.0), l1, 1e-15), "CIF lapse at 1");
        checks.expect(close(death(2.0), d2, 1e-15), "CIF death at 2");
        checks.expect(close(lapse(3.0), l3, 1e-15), "CIF lapse at 3");
        checks.expect(close(death(3.0), d3, 1e-15), "CIF death at 3");
        checks.expect(close(lapse(5.0), l5, 1e-15), "CIF lapse at 5");
        checks.expect(close(lapse(5.0) + death(5.0), 1.0, 1e-15), "CIF total at 5");
    }

    // Random data against the definitions.
    {
        Rng rng(406);
        std::vector<double> t;
        std::vector<std::uint8_t> e;
        for (int i = 0; i < 300; ++i) {
            t.push_back(std::round(rng.exponential(0.3) * 4.0) / 4.0 + 0.25);
            e.push_back(rng.bernoulli(0.6) ? 1 : 0);
        }
        const auto km = survival::kaplan_meier(t, e);
        const auto na = survival::nelson_aalen(t, e);
        for (double at : km.times()) {
            double k = 0.0, h = 0.0;
            oracle_km_na(t, e, at, &k, &h);
            checks.expect(close(km(at), k, 1e-12, 1e-300), "KM oracle at " + fmt(at));
            checks.expect(close(na(at), h, 1e-12, 1e-300), "NA oracle at " + fmt(at));
        }
    }

    // Cumulative incidences add up to one minus all-cause survival.
    {
        const auto p = synthetic(5000, 407);
        const auto cr = survival::CompetingRisksData::from_records(p.records());
        const auto lapse = survival::cause_specific_cif(cr, EventCode::Lapsed);
        const auto death = survival::cause_specific_cif(cr, EventCode::Death);
        const auto all = survival::recode(p.records(), survival::CauseRecoding::combined());
        const auto km = survival::kaplan_meier(all.durations, all.events);
        double worst = 0.0;
        for (double at : km.times()) worst = std::max(worst, std::abs(lapse(at) + death(at) - (1.0 - km(at))));
        checks.expect(worst <= 1e-12, "CIF sum gap " + fmt(worst));
    }

    const double t = clock.seconds();
    checks.expect(t < 120.0, "runtime " + fmt(t) + " s");
    return checks.outcome("derivatives, recovery, estimator oracles, " + fmt(t) + " s");
}

Outcome criterion5() {
    Stopwatch clock;
    // Log hazard 4|x0 - 0.5| with three irrelevant covariates.
    const std::size_t n = 5000;
    Rng rng(505);
    survival::SurvivalData d;
    d.covariates.resize(static_cast<Eigen::Index>(n), 4);
    d.feature_names = {"x0", "x1", "x2", "x3"};
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const double x0 = rng.uniform();
        d.covariates(row, 0) = x0;
        for (int c = 1; c < 4; ++c) d.covariates(row, c) = rng.normal(0.0, 1.0);
        const double t = rng.exponential(0.2 * std::exp(4.0 * std::abs(x0 - 0.5)));
        const double cens = rng.uniform(0.0, 10.0);
        d.durations.push_back(std::max(1e-9, std::min(t, cens)));
        d.events.push_back(t <= cens ? 1 : 0);
    }
    const Fold split = train_test_split(n, 0.2, 505);
    const auto train = d.subset(split.train);
    const auto test = d.subset(split.validation);

    survival::FamilyOptions opts;
    opts.rsf.seed = derive_seed(505, "rsf");
    opts.gbsm.seed = derive_seed(505, "gbsm");
    std::map<std::string, double> c;
    for (const char* family : {"cox", "rsf", "gbsm"}) {
        const auto model = survival::fit_family(family, train, opts);
        c[family] = survival::concordance_index(test.durations, test.events, survival::risk_scores(*model, test.covariates));
    }
    Checks checks;
    checks.expect(c["gbsm"] >= c["rsf"], "GBSM " + fmt(c["gbsm"]) + " below RSF " + fmt(c["rsf"]));
    checks.expect(c["rsf"] > c["cox"] + 0.02, "RSF " + fmt(c["rsf"]) + " not 0.02 above Cox " + fmt(c["cox"]));
    const double t = clock.seconds();
    checks.expect(t < 600.0, "runtime " + fmt(t) + " s");
    return checks.outcome("held-out C: gbsm " + fmt(c["gbsm"]) + ", rsf " + fmt(c["rsf"]) + ", cox " + fmt(c["cox"]) + ", " +
                          fmt(t) + " s");
}

Outcome criterion6() {
    Stopwatch clock;
    // Small policies, mostly not worth an incentive, plus a segment of young
    // policyholders with large policies that mostly lapse.
    SynthConfig cfg;
    cfg.n_subjects = 5000;
    cfg.seed = 606;
    cfg.face_log_mean = 7.0;
    const auto base = generate_synthetic(cfg);
    std::vector<PolicyRecord> records(base.records().begin(), base.records().end());
    Rng rng(606);
    std::size_t planted = 0;
    for (auto& r : records) {
        if (r.age_at_subscription >= 32.0) continue;
        ++planted;
        r.face_amount *= 30.0;
        if (r.event == EventCode::Active && rng.bernoulli(0.75)) r.event = EventCode::Lapsed;
    }
    const PortfolioDataset data(records);
    const auto matrices = fitted_matrices(data.records(), 606, 5);

    const auto scenario = lms::standard_scenarios().scenarios.front();
    lms::LmsOptions options;
    options.seed = 606;
    const auto result = lms::run_scenario(data.records(), matrices, scenario, options);

    Checks checks;
    checks.expect(scenario.name == "A-1", "first scenario is " + scenario.name);
    std::string gains;
    for (const auto& f : result.families) {
        const std::string name = classify::to_string(f.family);
        gains += " " + name + " " + fmt(f.rg_y) + " -> " + fmt(f.rg_ytilde);
        checks.expect(f.rg_ytilde > f.rg_y, name + ": B " + fmt(f.rg_ytilde) + " not above A " + fmt(f.rg_y));
    }

    const auto v = valuation::relabel_targets(data.records(), matrices, scenario.strategy);
    const auto profile = lms::profile_nontargeted(data.records(), lapse_labels(data.records()), v.y_tilde);
    checks.expect(profile.subset.mean_face_amount < profile.population.mean_face_amount,
                  "non-targeted face " + fmt(profile.subset.mean_face_amount) + " vs population " +
                      fmt(profile.population.mean_face_amount));
    const double t = clock.seconds();
    checks.expect(t < 900.0, "runtime " + fmt(t) + " s");
    return checks.outcome(std::to_string(planted) + " planted subjects; RG A -> B:" + gains + "; non-targeted face " +
                          fmt(profile.subset.mean_face_amount) + " vs " + fmt(profile.population.mean_face_amount) + ", " +
                          fmt(t) + " s");
}

Outcome criterion7() {
    Stopwatch clock;
    Checks checks;
    const auto data = synthetic(3000, 707);
    survival::FamilyOptions opts;
    const auto acceptant = survival::fit_family(
        "cox", survival::recode(data.records(), survival::CauseRecoding::cause_specific(EventCode::Death)), opts);
    const auto lapser = survival::fit_family("cox", survival::recode(data.records(), survival::CauseRecoding::combined()), opts);
    const auto matrices = survival::build_retention_matrices(*acceptant, *lapser, data.records(), 20);

    // 20 x 20 grid over c and delta.
    StrategyParams base;
    base.d = 0.015;
    lms::Axis c_axis{"c", {}}, delta_axis{"delta", {}};
    for (int i = 0; i < 20; ++i) {
        c_axis.values.push_back(10.0 * i);
        delta_axis.values.push_back(base.p * 0.95 * i / 19.0);
    }
    const auto grid = lms::sensitivity_surface(data.records(), matrices, base, c_axis, delta_axis);
    std::size_t violations = 0;
    for (Eigen::Index i = 0; i < grid.rg.rows(); ++i)
        for (Eigen::Index j = 0; j < grid.rg.cols(); ++j) {
            if (i + 1 < grid.rg.rows() && grid.rg(i + 1, j) > grid.rg(i, j)) ++violations;
            if (j + 1 < grid.rg.cols() && grid.rg(i, j + 1) > grid.rg(i, j)) ++violations;
        }
    checks.expect(violations == 0, std::to_string(violations) + " monotonicity violations");
    checks.expect(grid.rg(0, 0) > 0.0, "free incentive should be profitable");

    // Fixed targeting: RG is affine in gamma.
    Rng rng(707);
    std::vector<std::uint8_t> targets(data.size());
    for (auto& t : targets) t = rng.bernoulli(0.3) ? 1 : 0;
    auto rg_at = [&](StrategyParams s) {
        return valuation::lapse_managed_portfolio_value(data.records(), matrices, s, targets) -
               valuation::control_portfolio_value(data.records(), matrices, s);
    };
    StrategyParams s0 = base, s1 = base;
    s0.gamma = 0.0;
    s1.gamma = 1.0;
    const double g0 = rg_at(s0), g1 = rg_at(s1);
    for (double gamma : {0.05, 0.25, 0.5, 0.73, 0.9}) {
        StrategyParams s = base;
        s.gamma = gamma;
        const double expected = g0 + gamma * (g1 - g0);
        checks.expect(close(rg_at(s), expected, 1e-9), "gamma " + fmt(gamma) + ": " + fmt(rg_at(s)) + " vs " + fmt(expected));
    }

    // At c = 0, scaling every face amount scales every gain.
    StrategyParams free = base;
    free.c = 0.0;
    const double rg = rg_at(free);
    const auto z = valuation::individual_gains(data.records(), matrices, free);
    for (double lambda : {0.5, 3.0, 17.0}) {
        std::vector<PolicyRecord> scaled(data.records().begin(), data.records().end());
        for (auto& r : scaled) r.face_amount *= lambda;
        const double rg_scaled = valuation::lapse_managed_portfolio_value(scaled, matrices, free, targets) -
                                 valuation::control_portfolio_value(scaled, matrices, free);
        checks.expect(close(rg_scaled, lambda * rg, 1e-9), "lambda " + fmt(lambda) + " RG");
        const auto z_scaled = valuation::individual_gains(scaled, matrices, free);
        checks.expect(close(valuation::optimal_gain(z_scaled), lambda * valuation::optimal_gain(z), 1e-9),
                      "lambda " + fmt(lambda) + " RG*");
        checks.expect(valuation::relabel(z_scaled) == valuation::relabel(z), "lambda " + fmt(lambda) + " targets");
    }

    const double t = clock.seconds();
    checks.expect(t < 60.0, "runtime " + fmt(t) + " s");
    return checks.outcome("20x20 grid, affinity in gamma, homogeneity, " + fmt(t) + " s");
}

int shell(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome criterion8() {
    Stopwatch clock;
    const fs::path root = fs::temp_directory_path() / ("lapselab_determinism_" + std::to_string(::getpid()));
    fs::remove_all(root);
    Checks checks;
    const std::string cli = LAPSELAB_CLI_PATH;
    // The second run uses more workers than the first.
    for (const char* run : {"1", "4"}) {
        const fs::path dir = root / run;
        fs::create_directories(dir);
        const std::string env = std::string("LAPSELAB_THREADS=") + run + " ";
        const std::string q = "'" + dir.string() + "/";
        const std::vector<std::string> steps{
            "synth --n 1500 --seed 808 -o " + q + "data.csv'",
            "fit-survival --data " + q + "data.csv' --models-dir " + q + "models' --seed 808",
            "run-lms --data " + q + "data.csv' --models-dir " + q + "models' --strategies standard --out " + q +
                "lms' --seed 808 --folds 5",
            "valuate --data " + q + "data.csv' --models-dir " + q + "models' --strategies standard --scenario A-1 --out " + q +
                "val'",
            "sensitivity --data " + q + "data.csv' --models-dir " + q + "models' --strategies standard --scenario A-1 " +
                "--axis1 delta=0:0.002:10 --axis2 c=0:100:10 --out " + q + "sens.csv'",
        };
        for (const auto& step : steps) {
            const int code = shell(env + cli + " " + step + " > /dev/null");
            checks.expect(code == 0, "exit " + std::to_string(code) + ": " + step);
            if (code != 0) return checks.outcome("pipeline failed");
        }
    }
    const std::vector<std::string> files{"data.csv",        "models/comparison.csv", "models/lapser.json",
                                         "models/acceptant.json", "lms/results.csv",  "val/A-1.csv",
                                         "sens.csv"};
    for (const auto& f : files) {
        const auto a = slurp(root / "1" / f);
        checks.expect(!a.empty(), f + " is empty");
        checks.expect(a == slurp(root / "4" / f), f + " differs between runs");
    }
    fs::remove_all(root);
    const double t = clock.seconds();
    return checks.outcome(std::to_string(files.size()) + " outputs byte-identical across two runs, " + fmt(t) + " s");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    int criterion = 0;
    app.add_option("--criterion", criterion, "Criterion number; all when omitted")->check(CLI::Range(1, 8));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                         criterion5, criterion6, criterion7, criterion8};
    bool all_pass = true;
    for (int k = 1; k <= 8; ++k) {
        if (criterion != 0 && k != criterion) continue;
        Outcome o;
        try {
            o = criteria[static_cast<std::size_t>(k - 1)]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << o.detail << std::endl;
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
