#include "lapselab/survival/estimators.hpp"

#include "lapselab/error.hpp"

#include <algorithm>
#include <numeric>

namespace lapselab::survival {
namespace {

std::vector<std::size_t> order_by(std::span<const double> values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    return idx;
}

void split_samples(std::span<const SurvivalSample> samples, std::vector<double>& durations,
                   std::vector<std::uint8_t>& events) {
    durations.reserve(samples.size());
    events.reserve(samples.size());
    for (const auto& s : samples) {
        durations.push_back(s.duration);
        events.push_back(s.event_flag ? 1 : 0);
    }
}

// Fenwick tree over ranks, counting inserted scores.
class Fenwick {
public:
    explicit Fenwick(std::size_t n) : tree_(n + 1, 0.0) {}
    void add(std::size_t i, double v) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += v;
    }
    // Sum over [0, i).
    double prefix(std::size_t i) const {
        double s = 0.0;
        for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }

private:
    std::vector<double> tree_;
};

}  // namespace

EventTable event_table(std::span<const double> durations, std::span<const std::uint8_t> events) {
    if (durations.empty()) throw Error(ErrorCode::Empty, "no samples");
    if (durations.size() != events.size()) throw Error(ErrorCode::LengthMismatch, "durations and events differ in length");
    const auto idx = order_by(durations);
    EventTable out;
    const double n = static_cast<double>(durations.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        const double t = durations[idx[i]];
        const double at_risk = n - static_cast<double>(i);
        double d = 0.0;
        std::size_t j = i;
        for (; j < idx.size() && durations[idx[j]] == t; ++j) d += events[idx[j]] ? 1.0 : 0.0;
        if (d > 0.0) {
            out.times.push_back(t);
            out.at_risk.push_back(at_risk);
            out.events.push_back(d);
        }
        i = j;
    }
    return out;
}

StepFunction kaplan_meier(std::span<const double> durations, std::span<const std::uint8_t> events) {
    const EventTable tab = event_table(durations, events);
    std::vector<double> values(tab.times.size());
    double s = 1.0;
    for (std::size_t k = 0; k < tab.times.size(); ++k) {
        s *= 1.0 - tab.events[k] / tab.at_risk[k];
        values[k] = s;
    }
    return StepFunction(1.0, tab.times, std::move(values));
}

StepFunction kaplan_meier(std::span<const SurvivalSample> samples) {
    std::vector<double> d;
    std::vector<std::uint8_t> e;
    split_samples(samples, d, e);
    return kaplan_meier(d, e);
}

StepFunction nelson_aalen(std::span<const double> durations, std::span<const std::uint8_t> events) {
    const EventTable tab = event_table(durations, events);
    std::vector<double> values(tab.times.size());
    double h = 0.0;
    for (std::size_t k = 0; k < tab.times.size(); ++k) {
        h += tab.events[k] / tab.at_risk[k];
        values[k] = h;
    }
    return StepFunction(0.0, tab.times, std::move(values));
}

StepFunction nelson_aalen(std::span<const SurvivalSample> samples) {
    std::vector<double> d;
    std::vector<std::uint8_t> e;
    split_samples(samples, d, e);
    return nelson_aalen(d, e);
}

double logrank_statistic(std::span<const double> durations_a, std::span<const std::uint8_t> events_a,
                         std::span<const double> durations_b, std::span<const std::uint8_t> events_b) {
    if (durations_a.empty() || durations_b.empty()) throw Error(ErrorCode::Empty, "log-rank needs two nonempty groups");
    if (durations_a.size() != events_a.size() || durations_b.size() != events_b.size())
        throw Error(ErrorCode::LengthMismatch, "durations and events differ in length");

    struct Obs {
        double t;
        bool event;
        bool in_a;
    };
    std::vector<Obs> obs;
    obs.reserve(durations_a.size() + durations_b.size());
    for (std::size_t i = 0; i < durations_a.size(); ++i) obs.push_back({durations_a[i], events_a[i] != 0, true});
    for (std::size_t i = 0; i < durations_b.size(); ++i) obs.push_back({durations_b[i], events_b[i] != 0, false});
    std::stable_sort(obs.begin(), obs.end(), [](const Obs& x, const Obs& y) { return x.t < y.t; });

    double y = static_cast<double>(obs.size());
    double y_a = static_cast<double>(durations_a.size());
    double o_minus_e = 0.0;
    double var = 0.0;
    bool any_event = false;
    std::size_t i = 0;
    while (i < obs.size()) {
        const double t = obs[i].t;
        double d = 0.0, d_a = 0.0, leave = 0.0, leave_a = 0.0;
        std::size_t j = i;
        for (; j < obs.size() && obs[j].t == t; ++j) {
            leave += 1.0;
            if (obs[j].in_a) leave_a += 1.0;
            if (obs[j].event) {
                d += 1.0;
                if (obs[j].in_a) d_a += 1.0;
            }
        }
        if (d > 0.0) {
            any_event = true;
            const double frac = y_a / y;
            o_minus_e += d_a - d * frac;
            if (y > 1.0) var += d * frac * (1.0 - frac) * (y - d) / (y - 1.0);
        }
        y -= leave;
        y_a -= leave_a;
        i = j;
    }
    if (!any_event) throw Error(ErrorCode::Degenerate, "log-rank with no events");
    if (var <= 0.0) return 0.0;
    return o_minus_e * o_minus_e / var;
}

double logrank_statistic(std::span<const SurvivalSample> group_a, std::span<const SurvivalSample> group_b) {
    std::vector<double> da, db;
    std::vector<std::uint8_t> ea, eb;
    split_samples(group_a, da, ea);
    split_samples(group_b, db, eb);
    return logrank_statistic(da, ea, db, eb);
}

double concordance_index(std::span<const double> durations, std::span<const std::uint8_t> events,
                         std::span<const double> risk_scores) {
    const std::size_t n = durations.size();
    if (events.size() != n || risk_scores.size() != n)
        throw Error(ErrorCode::LengthMismatch, "durations, events and scores differ in length");

    // Score ranks for the Fenwick trees.
    std::vector<double> sorted_scores(risk_scores.begin(), risk_scores.end());
    std::sort(sorted_scores.begin(), sorted_scores.end());
    sorted_scores.erase(std::unique(sorted_scores.begin(), sorted_scores.end()), sorted_scores.end());
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i)
        rank[i] = static_cast<std::size_t>(std::lower_bound(sorted_scores.begin(), sorted_scores.end(), risk_scores[i]) -
                                           sorted_scores.begin());

    // Walk from the longest duration down; the tree holds subjects with strictly
    // longer durations than the current tie group.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return durations[a] > durations[b]; });

    Fenwick tree(sorted_scores.size());
    double inserted = 0.0;
    double pairs = 0.0;
    double concordant = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && durations[idx[j]] == durations[idx[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) {
            const std::size_t s = idx[k];
            if (!events[s]) continue;
            const double lower = tree.prefix(rank[s]);
            const double equal = tree.prefix(rank[s] + 1) - lower;
            pairs += inserted;
            concordant += lower + 0.5 * equal;
        }
        for (std::size_t k = i; k < j; ++k) {
            tree.add(rank[idx[k]], 1.0);
            inserted += 1.0;
        }
        i = j;
    }
    if (pairs == 0.0) throw Error(ErrorCode::NoComparablePairs, "no comparable pairs");
    return concordant / pairs;
}

StepFunction cause_specific_cif(const CompetingRisksData& data, EventCode cause) {
    if (cause == EventCode::Active) throw Error(ErrorCode::InvalidConfig, "CIF cause must be Lapsed or Death");
    const std::size_t n = data.durations.size();
    if (n == 0) throw Error(ErrorCode::Empty, "no samples");
    if (data.causes.size() != n) throw Error(ErrorCode::LengthMismatch, "durations and causes differ in length");

    const auto idx = order_by(data.durations);
    std::vector<double> times, values;
    double s = 1.0;
    double f = 0.0;
    std::size_t i = 0;
    while (i < n) {
        const double t = data.durations[idx[i]];
        const double at_risk = static_cast<double>(n - i);
        double d = 0.0, d_cause = 0.0;
        std::size_t j = i;
        for (; j < n && data.durations[idx[j]] == t; ++j) {
            const EventCode c = data.causes[idx[j]];
            if (c != EventCode::Active) d += 1.0;
            if (c == cause) d_cause += 1.0;
        }
        if (d > 0.0) {
            f += s * d_cause / at_risk;
            s *= 1.0 - d / at_risk;
            times.push_back(t);
            values.push_back(f);
        }
        i = j;
    }
    return StepFunction(0.0, std::move(times), std::move(values));
}

std::vector<double> cause_specific_cif(const CompetingRisksData& data, EventCode cause,
                                       std::span<const double> time_grid) {
    return cause_specific_cif(data, cause).evaluate(time_grid);
}

}  // namespace lapselab::survival
