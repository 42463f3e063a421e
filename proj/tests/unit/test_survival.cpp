#include "doctest.h"

#include "lapselab/error.hpp"
#include "lapselab/rng.hpp"
#include "lapselab/survival/cox.hpp"
#include "lapselab/survival/estimators.hpp"
#include "lapselab/survival/forest.hpp"
#include "lapselab/survival/gbsm.hpp"
#include "lapselab/survival/retention.hpp"
#include "lapselab/survival/selection.hpp"
#include "lapselab/survival/tree.hpp"

#include <cmath>
#include <cstdlib>

using namespace lapselab;
using namespace lapselab::survival;

namespace {

std::vector<std::uint8_t> flags(std::initializer_list<int> v) {
    std::vector<std::uint8_t> out;
    for (int x : v) out.push_back(static_cast<std::uint8_t>(x));
    return out;
}

// Exponential PH times with log hazard x.beta and uniform censoring on (0, w).
SurvivalData simulate_ph(std::size_t n, const std::vector<double>& beta, std::uint64_t seed, double w = 3.0) {
    Rng rng(seed);
    SurvivalData d;
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
        const double cens = rng.uniform(0.0, w);
        d.durations.push_back(std::max(1e-9, std::min(t, cens)));
        d.events.push_back(t <= cens ? 1 : 0);
    }
    return d;
}

double brute_cindex(const std::vector<double>& t, const std::vector<std::uint8_t>& e, const std::vector<double>& s) {
    double pairs = 0, conc = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j < t.size(); ++j)
            if (e[i] && t[i] < t[j]) {
                pairs += 1;
                conc += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return conc / pairs;
}

void check_curve_invariants(const SurvivalModel& m, const SurvivalData& d) {
    const std::vector<double> grid{0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 100.0};
    for (std::size_t i = 0; i < std::min<std::size_t>(d.size(), 50); ++i) {
        const auto s = m.survival_curve(d.row(i), grid);
        CHECK(s[0] == 1.0);
        for (std::size_t k = 0; k < s.size(); ++k) {
            CHECK(s[k] >= 0.0);
            CHECK(s[k] <= 1.0);
            if (k) CHECK(s[k] <= s[k - 1]);
        }
    }
}

PortfolioDataset small_portfolio(std::size_t n, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_subjects = n;
    cfg.seed = seed;
    return generate_synthetic(cfg);
}

}  // namespace

TEST_CASE("kaplan-meier hand values") {
    const std::vector<double> t{1, 2, 3};
    const auto km = kaplan_meier(t, flags({1, 1, 0}));
    CHECK(km(0.0) == 1.0);
    CHECK(km(1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(km(2.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(km(3.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(km.left_limit(2.0) == doctest::Approx(2.0 / 3.0));

    const auto none = kaplan_meier(t, flags({0, 0, 0}));
    CHECK(none(10.0) == 1.0);
    const std::vector<double> ones{1, 1, 1};
    CHECK(kaplan_meier(ones, flags({1, 1, 1}))(1.0) == 0.0);
    CHECK_THROWS_AS(kaplan_meier(std::vector<double>{}, std::vector<std::uint8_t>{}), Error);
}

TEST_CASE("nelson-aalen hand values and the exp(-H) >= S bound") {
    const std::vector<double> t{1, 2, 3};
    const auto na = nelson_aalen(t, flags({1, 1, 0}));
    CHECK(na(0.5) == 0.0);
    CHECK(na(1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(na(2.0) == doctest::Approx(1.0 / 3.0 + 0.5).epsilon(1e-15));
    CHECK(nelson_aalen(t, flags({0, 0, 0}))(5.0) == 0.0);

    const auto d = simulate_ph(300, {0.5}, 77);
    const auto km = kaplan_meier(d.durations, d.events);
    const auto h = nelson_aalen(d.durations, d.events);
    for (double x : km.times()) CHECK(std::exp(-h(x)) >= km(x) - 1e-15);
}

TEST_CASE("log-rank statistic") {
    SUBCASE("hand six-subject example") {
        // Pooled increments: O-E = .5 - .4 + .5 = .6 and V = .25 + .24 + .25 = .74.
        const std::vector<double> ta{1, 3, 5}, tb{2, 4, 6};
        const double stat = logrank_statistic(ta, flags({1, 1, 0}), tb, flags({1, 0, 1}));
        CHECK(stat == doctest::Approx(0.36 / 0.74).epsilon(1e-14));
        CHECK(logrank_statistic(tb, flags({1, 0, 1}), ta, flags({1, 1, 0})) == doctest::Approx(stat).epsilon(1e-14));
    }
    SUBCASE("identical groups give zero") {
        const auto d = simulate_ph(100, {0.3}, 4);
        CHECK(logrank_statistic(d.durations, d.events, d.durations, d.events) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("separated exponential groups exceed the 95% chi-square quantile") {
        Rng rng(8);
        std::vector<double> a, b;
        std::vector<std::uint8_t> ea(200, 1), eb(200, 1);
        for (int i = 0; i < 200; ++i) a.push_back(rng.exponential(1.0));
        for (int i = 0; i < 200; ++i) b.push_back(rng.exponential(3.0));
        CHECK(logrank_statistic(a, ea, b, eb) > 3.84);
    }
    SUBCASE("no events is degenerate") {
        const std::vector<double> t{1, 2};
        CHECK_THROWS_AS(logrank_statistic(t, flags({0, 0}), t, flags({0, 0})), Error);
    }
}

TEST_CASE("concordance index") {
    const std::vector<double> t{1, 2, 3};
    const auto e = flags({1, 1, 1});
    CHECK(concordance_index(t, e, std::vector<double>{3, 2, 1}) == 1.0);
    CHECK(concordance_index(t, e, std::vector<double>{1, 2, 3}) == 0.0);
    CHECK(concordance_index(t, e, std::vector<double>{1, 3, 2}) == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(concordance_index(t, flags({0, 0, 0}), std::vector<double>{1, 2, 3}), Error);

    // Against pairwise enumeration, with ties in durations and scores.
    Rng rng(21);
    std::vector<double> dt, s;
    std::vector<std::uint8_t> de;
    for (int i = 0; i < 300; ++i) {
        dt.push_back(std::floor(rng.uniform(0.0, 20.0)));
        de.push_back(rng.bernoulli(0.6) ? 1 : 0);
        s.push_back(std::floor(rng.uniform(0.0, 10.0)));
    }
    CHECK(concordance_index(dt, de, s) == doctest::Approx(brute_cindex(dt, de, s)).epsilon(1e-14));
}

TEST_CASE("cumulative incidence") {
    SUBCASE("hand five-subject example") {
        CompetingRisksData d{{1, 2, 2, 3, 4},
                             {EventCode::Lapsed, EventCode::Death, EventCode::Active, EventCode::Lapsed, EventCode::Death}};
        const auto lapse = cause_specific_cif(d, EventCode::Lapsed);
        const auto death = cause_specific_cif(d, EventCode::Death);
        CHECK(lapse(1.0) == doctest::Approx(0.2).epsilon(1e-15));
        CHECK(death(2.0) == doctest::Approx(0.2).epsilon(1e-15));
        CHECK(lapse(3.0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(death(4.0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(lapse(10.0) + death(10.0) == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("causes add up to one minus all-cause survival") {
        const auto p = small_portfolio(3000, 2);
        const auto cr = CompetingRisksData::from_records(p.records());
        const auto lapse = cause_specific_cif(cr, EventCode::Lapsed);
        const auto death = cause_specific_cif(cr, EventCode::Death);
        const auto all = recode(p.records(), CauseRecoding::combined());
        const auto km = kaplan_meier(all.durations, all.events);
        for (double t : km.times()) CHECK(std::abs(lapse(t) + death(t) - (1.0 - km(t))) < 1e-12);
    }
    SUBCASE("single cause collapses to one minus KM") {
        CompetingRisksData d{{1, 2, 3, 4, 5},
                             {EventCode::Lapsed, EventCode::Active, EventCode::Lapsed, EventCode::Lapsed, EventCode::Active}};
        std::vector<std::uint8_t> e;
        for (auto c : d.causes) e.push_back(c == EventCode::Lapsed);
        const auto km = kaplan_meier(d.durations, e);
        const auto f = cause_specific_cif(d, EventCode::Lapsed);
        for (double t : {0.5, 1.0, 2.5, 3.0, 4.0, 9.0}) CHECK(f(t) == doctest::Approx(1.0 - km(t)).epsilon(1e-15));
    }
}

TEST_CASE("cox partial likelihood derivatives match finite differences") {
    const auto d = simulate_ph(400, {0.4, -0.3, 0.2}, 31);
    // Add tied durations so the Breslow grouping is exercised.
    auto durations = d.durations;
    for (std::size_t i = 0; i < durations.size(); i += 7) durations[i] = std::round(durations[i] * 4.0) / 4.0 + 0.25;
    const CoxPartialLikelihood pl(durations, d.events, d.covariates);
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd beta(3);
        for (int c = 0; c < 3; ++c) beta(c) = rng.uniform(-1.0, 1.0);
        const Eigen::VectorXd g = pl.gradient(beta);
        const Eigen::MatrixXd h = pl.hessian(beta);
        const double eps = 1e-5;
        for (int c = 0; c < 3; ++c) {
            Eigen::VectorXd up = beta, dn = beta;
            up(c) += eps;
            dn(c) -= eps;
            const double fd = (pl.value(up) - pl.value(dn)) / (2 * eps);
            CHECK(std::abs(fd - g(c)) / std::max(1.0, std::abs(g(c))) < 1e-6);
            const Eigen::VectorXd gfd = (pl.gradient(up) - pl.gradient(dn)) / (2 * eps);
            for (int r = 0; r < 3; ++r) CHECK(std::abs(gfd(r) - h(r, c)) / std::max(1.0, std::abs(h(r, c))) < 1e-4);
        }
    }
}

TEST_CASE("cox fit") {
    SUBCASE("recovers a known coefficient") {
        const auto d = simulate_ph(4000, {0.7}, 12);
        const auto m = fit_cox(d);
        CHECK(std::abs(m.beta()(0) - 0.7) < 0.08);
        CHECK(m.baseline_cumhaz()(0.0) == 0.0);
        const auto& v = m.baseline_cumhaz().values();
        CHECK(std::is_sorted(v.begin(), v.end()));
        check_curve_invariants(m, d);
    }
    SUBCASE("null covariate stays near zero") {
        const auto d = simulate_ph(5000, {0.0}, 13);
        CHECK(std::abs(fit_cox(d).beta()(0)) < 0.05);
    }
    SUBCASE("zero coefficients give exp(-L0) for every subject") {
        const auto d = simulate_ph(200, {0.0, 0.0}, 14);
        CoxModel m(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2),
                   nelson_aalen(d.durations, d.events), d.feature_names, 0.0, 0);
        const std::vector<double> grid{0.0, 0.5, 1.0};
        const auto a = m.survival_curve(d.row(0), grid);
        const auto b = m.survival_curve(d.row(1), grid);
        CHECK(a == b);
        CHECK(a[2] == doctest::Approx(std::exp(-m.baseline_cumhaz()(1.0))));
    }
    SUBCASE("perfect separation is reported") {
        SurvivalData d;
        d.covariates.resize(20, 1);
        for (int i = 0; i < 20; ++i) {
            d.durations.push_back(i + 1.0);
            d.events.push_back(1);
            d.covariates(i, 0) = i < 10 ? 1.0 : 0.0;
        }
        d.feature_names = {"x"};
        CHECK_THROWS_AS(fit_cox(d), Error);
        try {
            fit_cox(d);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::SeparationDetected);
        }
        CoxOptions ridge;
        ridge.ridge = 1.0;
        CHECK(std::isfinite(fit_cox(d, ridge).beta()(0)));
    }
    SUBCASE("too few events") {
        SurvivalData d = simulate_ph(10, {0.1}, 3);
        std::fill(d.events.begin(), d.events.end(), 0);
        d.events[0] = 1;
        CHECK_THROWS_AS(fit_cox(d), Error);
    }
    SUBCASE("AIC subset keeps the informative covariate") {
        const auto d = simulate_ph(1500, {0.8, 0.0, 0.0}, 15);
        const auto m = fit_cox_aic(d);
        CHECK(m.beta()(0) > 0.5);
        CHECK(m.n_active() >= 1);
        CHECK(m.aic() <= fit_cox(d).aic() + 1e-9);
    }
}

TEST_CASE("survival tree") {
    SUBCASE("identical subjects give a single leaf") {
        SurvivalData d;
        d.covariates.resize(30, 2);
        for (int i = 0; i < 30; ++i) {
            d.durations.push_back(2.0);
            d.events.push_back(1);
            d.covariates(i, 0) = i % 3;
            d.covariates(i, 1) = i % 2;
        }
        d.feature_names = {"a", "b"};
        SurvivalTreeOptions o;
        o.min_leaf = 3;
        CHECK(fit_survival_tree(d, o).leaves().size() == 1);
    }
    SUBCASE("root split matches an exhaustive log-rank search") {
        Rng rng(99);
        SurvivalData d;
        d.covariates.resize(20, 3);
        d.feature_names = {"a", "b", "c"};
        for (int i = 0; i < 20; ++i) {
            const double fast = i % 2;
            d.covariates(i, 0) = fast;
            d.covariates(i, 1) = std::floor(rng.uniform(0.0, 5.0));
            d.covariates(i, 2) = rng.uniform(0.0, 1.0);
            d.durations.push_back(rng.exponential(fast > 0 ? 4.0 : 0.5));
            d.events.push_back(rng.bernoulli(0.85) ? 1 : 0);
        }
        SurvivalTreeOptions o;
        o.min_leaf = 2;
        o.max_depth = 1;
        const auto tree = fit_survival_tree(d, o);

        double best = 0.0;
        int best_f = -1;
        double best_t = 0.0;
        for (int f = 0; f < 3; ++f) {
            std::vector<double> values;
            for (int i = 0; i < 20; ++i) values.push_back(d.covariates(i, f));
            std::sort(values.begin(), values.end());
            values.erase(std::unique(values.begin(), values.end()), values.end());
            for (std::size_t k = 0; k + 1 < values.size(); ++k) {
                const double thr = 0.5 * (values[k] + values[k + 1]);
                std::vector<double> tl, tr;
                std::vector<std::uint8_t> el, er;
                for (int i = 0; i < 20; ++i) {
                    (d.covariates(i, f) <= thr ? tl : tr).push_back(d.durations[static_cast<std::size_t>(i)]);
                    (d.covariates(i, f) <= thr ? el : er).push_back(d.events[static_cast<std::size_t>(i)]);
                }
                if (tl.size() < 2 || tr.size() < 2) continue;
                const double s = logrank_statistic(tl, el, tr, er);
                if (s > best + 1e-9) {
                    best = s;
                    best_f = f;
                    best_t = thr;
                }
            }
        }
        REQUIRE(!tree.nodes().front().is_leaf());
        CHECK(tree.nodes().front().feature == best_f);
        CHECK(tree.nodes().front().threshold == doctest::Approx(best_t));
        CHECK(best_f == 0);
    }
    SUBCASE("leaves respect min_leaf and every subject reaches one leaf") {
        const auto d = simulate_ph(600, {0.8, -0.5}, 41);
        SurvivalTreeOptions o;
        o.min_leaf = 25;
        const auto tree = fit_survival_tree(d, o);
        std::size_t total = 0;
        for (const auto& l : tree.leaves()) {
            CHECK(l.n >= 25);
            total += l.n;
        }
        CHECK(total == d.size());
        CHECK(tree.leaves().size() > 1);
        check_curve_invariants(tree, d);
    }
    SUBCASE("too few samples") {
        const auto d = simulate_ph(10, {0.1}, 1);
        SurvivalTreeOptions o;
        o.min_leaf = 6;
        CHECK_THROWS_AS(fit_survival_tree(d, o), Error);
    }
}

TEST_CASE("random survival forest") {
    const auto d = simulate_ph(500, {0.8, -0.4, 0.0}, 51);
    SUBCASE("one tree without bootstrap equals the single tree") {
        ForestOptions fo;
        fo.n_trees = 1;
        fo.bootstrap = false;
        fo.features_per_split = 3;
        fo.min_leaf = 10;
        fo.seed = 7;
        const auto forest = fit_rsf(d, fo);
        SurvivalTreeOptions to{10, fo.max_depth, 3, derive_seed(7, std::uint64_t{0}), fo.max_bins};
        const auto tree = fit_survival_tree(d, to);
        const std::vector<double> grid{0.0, 0.3, 1.0, 2.0};
        for (std::size_t i = 0; i < 40; ++i) {
            CHECK(forest.survival_curve(d.row(i), grid) == tree.survival_curve(d.row(i), grid));
            CHECK(forest.risk_score(d.row(i)) == tree.risk_score(d.row(i)));
        }
    }
    SUBCASE("prediction is the mean of member trees and fits are reproducible") {
        ForestOptions fo;
        fo.n_trees = 8;
        fo.seed = 3;
        const auto a = fit_rsf(d, fo);
        const auto b = fit_rsf(d, fo);
        CHECK(a.to_json() == b.to_json());
        const std::vector<double> grid{0.5, 1.5};
        const auto s = a.survival_curve(d.row(3), grid);
        double mean = 0.0;
        for (const auto& t : a.trees()) mean += t.survival_curve(d.row(3), grid)[1];
        CHECK(s[1] == doctest::Approx(mean / 8.0).epsilon(1e-14));
        check_curve_invariants(a, d);
    }
    SUBCASE("worker count does not change the forest") {
        ForestOptions fo;
        fo.n_trees = 6;
        fo.seed = 4;
        setenv("LAPSELAB_THREADS", "1", 1);
        const auto serial = fit_rsf(d, fo).to_json();
        setenv("LAPSELAB_THREADS", "4", 1);
        const auto parallel = fit_rsf(d, fo).to_json();
        unsetenv("LAPSELAB_THREADS");
        CHECK(serial == parallel);
    }
}

TEST_CASE("gradient boosted survival") {
    const auto d = simulate_ph(400, {0.9, -0.5}, 61);
    SUBCASE("loss derivatives match finite differences") {
        Rng rng(2);
        std::vector<double> f(d.size());
        for (auto& v : f) v = rng.uniform(-1.0, 1.0);
        std::vector<double> g, h;
        cox_loss_derivatives(d.durations, d.events, f, &g, &h);
        const double eps = 1e-5;
        for (std::size_t i = 0; i < d.size(); i += 37) {
            auto up = f, dn = f;
            up[i] += eps;
            dn[i] -= eps;
            const double fd = (cox_loss(d.durations, d.events, up) - cox_loss(d.durations, d.events, dn)) / (2 * eps);
            CHECK(std::abs(fd - g[i]) <= 1e-6 * std::max(std::abs(g[i]), 1e-3));
            std::vector<double> gu, gd;
            cox_loss_derivatives(d.durations, d.events, up, &gu, nullptr);
            cox_loss_derivatives(d.durations, d.events, dn, &gd, nullptr);
            const double hfd = (gu[i] - gd[i]) / (2 * eps);
            CHECK(std::abs(hfd - h[i]) <= 1e-4 * std::max(std::abs(h[i]), 1e-3));
        }
    }
    SUBCASE("loss equals the negated Cox partial likelihood over n") {
        std::vector<double> f(d.size());
        Eigen::VectorXd beta(2);
        beta << 0.3, -0.2;
        const Eigen::VectorXd eta = d.covariates * beta;
        for (std::size_t i = 0; i < d.size(); ++i) f[i] = eta(static_cast<Eigen::Index>(i));
        const CoxPartialLikelihood pl(d.durations, d.events, d.covariates);
        CHECK(cox_loss(d.durations, d.events, f) == doctest::Approx(-pl.value(beta) / d.size()).epsilon(1e-12));
    }
    SUBCASE("zero stages give a constant score") {
        GbsmOptions o;
        o.n_stages = 0;
        const auto m = fit_gbsm(d, o);
        std::vector<double> scores;
        for (std::size_t i = 0; i < d.size(); ++i) scores.push_back(m.risk_score(d.row(i)));
        for (double s : scores) CHECK(s == m.base_score());
        CHECK(concordance_index(d.durations, d.events, scores) == 0.5);
    }
    SUBCASE("training loss never rises over 100 stages") {
        GbsmOptions o;
        o.n_stages = 100;
        o.subsample = 0.8;
        o.seed = 9;
        const auto m = fit_gbsm(d, o);
        const auto& h = m.loss_history();
        REQUIRE(h.size() == 101);
        for (std::size_t k = 1; k < h.size(); ++k) CHECK(h[k] <= h[k - 1]);
        CHECK(h.back() < h.front());
        check_curve_invariants(m, d);
        std::vector<double> scores;
        for (std::size_t i = 0; i < d.size(); ++i) scores.push_back(m.risk_score(d.row(i)));
        CHECK(concordance_index(d.durations, d.events, scores) > 0.65);
    }
}

TEST_CASE("model json round trip preserves predictions") {
    const auto d = simulate_ph(300, {0.6, 0.2}, 71);
    ForestOptions fo;
    fo.n_trees = 3;
    GbsmOptions go;
    go.n_stages = 10;
    std::vector<std::unique_ptr<SurvivalModel>> models;
    models.push_back(std::make_unique<CoxModel>(fit_cox(d)));
    models.push_back(std::make_unique<SurvivalTree>(fit_survival_tree(d)));
    models.push_back(std::make_unique<SurvivalForest>(fit_rsf(d, fo)));
    models.push_back(std::make_unique<GradientBoostedSurvival>(fit_gbsm(d, go)));
    const std::vector<double> grid{0.0, 0.4, 1.1, 3.0};
    for (const auto& m : models) {
        const auto back = model_from_json(nlohmann::json::parse(m->to_json().dump()));
        CHECK(back->family() == m->family());
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(back->survival_curve(d.row(i), grid) == m->survival_curve(d.row(i), grid));
            CHECK(back->risk_score(d.row(i)) == m->risk_score(d.row(i)));
        }
    }
    CHECK_THROWS_AS(model_from_json(nlohmann::json{{"family", "cox"}}), Error);
    CHECK_THROWS_AS(CoxModel{}.survival(d.row(0), 1.0), Error);
}

TEST_CASE("retention matrices") {
    const auto p = small_portfolio(1000, 81);
    const auto acc = fit_cox(p.records(), CauseRecoding::cause_specific(EventCode::Death));
    const auto lap = fit_gbsm(p.records(), CauseRecoding::combined(), GbsmOptions{.n_stages = 20});
    const auto m = build_retention_matrices(acc, lap, p.records(), 10);
    REQUIRE(m.rows() == 1000);
    CHECK(m.r_acceptant.cols() == 11);
    m.validate();
    CHECK((m.r_acceptant.col(0).array() == 1.0).all());
    CHECK((m.r_lapser.col(0).array() == 1.0).all());
    const auto t5 = m.truncated(5);
    CHECK(t5.r_lapser.cols() == 6);
    CHECK(t5.r_lapser(7, 5) == m.r_lapser(7, 5));
    CHECK_THROWS_AS(m.truncated(11), Error);

    SUBCASE("zero coefficients give identical rows for equal seniority") {
        CoxModel flat(Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(6), acc.baseline_cumhaz(), acc.feature_names(), 0.0, 0);
        std::vector<PolicyRecord> rs(p.records().begin(), p.records().begin() + 5);
        for (auto& r : rs) r.seniority = 4.0;
        const auto f = build_retention_matrices(flat, flat, rs, 6);
        for (Eigen::Index i = 1; i < 5; ++i) CHECK((f.r_acceptant.row(i).array() == f.r_acceptant.row(0).array()).all());
    }
    SUBCASE("schema mismatch") {
        const auto d = simulate_ph(100, {0.5}, 3);
        const auto other = fit_cox(d);
        CHECK_THROWS_AS(build_retention_matrices(other, lap, p.records(), 3), Error);
    }
}

TEST_CASE("model comparison report") {
    const auto p = small_portfolio(1200, 91);
    ComparisonOptions o;
    o.families.rsf.n_trees = 10;
    o.families.gbsm.n_stages = 30;
    o.seed = 5;
    const std::vector<CauseRecoding> rec{CauseRecoding::combined(), CauseRecoding::cause_specific(EventCode::Death)};
    const auto a = compare_models(p.records(), rec, o);
    CHECK(a.scores.size() == 6);
    CHECK(a.selected.size() == 2);
    for (const auto& s : a.scores) {
        CHECK(s.c_index > 0.0);
        CHECK(s.c_index < 1.0);
    }
    const auto b = compare_models(p.records(), rec, o);
    CHECK(a.to_csv() == b.to_csv());
}
