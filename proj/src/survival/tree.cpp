#include "lapselab/survival/tree.hpp"

#include "lapselab/error.hpp"
#include "lapselab/rng.hpp"
#include "lapselab/survival/estimators.hpp"

#include <algorithm>
#include <numeric>

namespace lapselab::survival {
namespace {

class Fenwick {
public:
    void reset(std::size_t n) { tree_.assign(n + 1, 0.0); }
    void add(std::size_t i, double v) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += v;
    }
    // Sum over positions [0, i).
    double prefix(std::size_t i) const {
        double s = 0.0;
        for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }

private:
    std::vector<double> tree_;
};

class LogrankGrower {
public:
    LogrankGrower(const trees::BinnedMatrix& x, const SurvivalData& data, const SurvivalTreeOptions& options,
                  std::span<const double> event_times)
        : x_(x), data_(data), options_(options), event_times_(event_times), rng_(options.seed) {
        features_.resize(x.cols());
        std::iota(features_.begin(), features_.end(), std::size_t{0});
    }

    void run(std::vector<std::size_t> rows) {
        rows_ = std::move(rows);
        build(0, rows_.size(), 0);
    }

    std::vector<trees::Node> nodes;
    std::vector<SurvivalLeaf> leaves;

private:
    struct Split {
        int feature = -1;
        std::uint16_t bin = 0;
        double stat = 0.0;
    };

    int build(std::size_t begin, std::size_t end, int depth) {
        const int id = static_cast<int>(nodes.size());
        nodes.push_back(trees::Node{});
        Split best;
        if (depth < options_.max_depth && end - begin >= 2 * options_.min_leaf) best = find_split(begin, end);
        if (best.feature < 0) {
            make_leaf(id, begin, end);
            return id;
        }
        const auto f = static_cast<std::size_t>(best.feature);
        const std::uint16_t* col = x_.column(f);
        const auto mid_it = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                                  rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                                  [&](std::size_t r) { return col[r] <= best.bin; });
        const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());
        nodes[static_cast<std::size_t>(id)].feature = best.feature;
        nodes[static_cast<std::size_t>(id)].split_bin = best.bin;
        nodes[static_cast<std::size_t>(id)].threshold = x_.threshold(f, best.bin);
        const int left = build(begin, mid, depth + 1);
        const int right = build(mid, end, depth + 1);
        nodes[static_cast<std::size_t>(id)].left = left;
        nodes[static_cast<std::size_t>(id)].right = right;
        return id;
    }

    void make_leaf(int id, std::size_t begin, std::size_t end) {
        std::vector<double> d;
        std::vector<std::uint8_t> e;
        d.reserve(end - begin);
        e.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            d.push_back(data_.durations[rows_[i]]);
            e.push_back(data_.events[rows_[i]]);
        }
        SurvivalLeaf leaf{kaplan_meier(d, e), nelson_aalen(d, e), 0.0, end - begin};
        // Cumulative hazard summed over the training event times, walked in step.
        const auto& knots = leaf.na.times();
        const auto& values = leaf.na.values();
        std::size_t k = 0;
        double h = 0.0;
        for (double t : event_times_) {
            while (k < knots.size() && knots[k] <= t) h = values[k++];
            leaf.mortality += h;
        }
        nodes[static_cast<std::size_t>(id)].value = static_cast<double>(leaves.size());
        leaves.push_back(std::move(leaf));
    }

    // Per-node log-rank tables: sample s is at risk on node event times 1..K_s.
    void prepare(std::size_t begin, std::size_t end) {
        times_.clear();
        for (std::size_t i = begin; i < end; ++i)
            if (data_.events[rows_[i]]) times_.push_back(data_.durations[rows_[i]]);
        std::sort(times_.begin(), times_.end());
        times_.erase(std::unique(times_.begin(), times_.end()), times_.end());
        const std::size_t m = times_.size();

        k_of_.resize(end - begin);
        std::vector<double> at_risk_from(m + 2, 0.0), deaths(m + 1, 0.0);
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t r = rows_[i];
            const auto k = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), data_.durations[r]) -
                                                    times_.begin());
            k_of_[i - begin] = k;
            at_risk_from[k] += 1.0;
            if (data_.events[r]) deaths[k] += 1.0;
        }
        // Y_k = #{s : K_s >= k}.
        std::vector<double> y(m + 2, 0.0);
        for (std::size_t k = m + 1; k-- > 1;) y[k] = y[k + 1] + at_risk_from[k];

        cum_h_.assign(m + 1, 0.0);
        cum_a_.assign(m + 1, 0.0);
        cum_w_.assign(m + 1, 0.0);
        for (std::size_t k = 1; k <= m; ++k) {
            const double yk = y[k], dk = deaths[k];
            const double w = yk > 1.0 ? dk * (yk - dk) / (yk * yk * (yk - 1.0)) : 0.0;
            cum_h_[k] = cum_h_[k - 1] + dk / yk;
            cum_w_[k] = cum_w_[k - 1] + w;
            cum_a_[k] = cum_a_[k - 1] + w * yk;
        }
    }

    Split find_split(std::size_t begin, std::size_t end) {
        prepare(begin, end);
        const std::size_t m = times_.size();
        Split best;
        if (m == 0) return best;

        const std::size_t p = features_.size();
        std::size_t nf = options_.features_per_split == 0 ? p : std::min(options_.features_per_split, p);
        if (nf < p) {
            for (std::size_t i = 0; i < nf; ++i) std::swap(features_[i], features_[i + rng_.below(p - i)]);
            std::sort(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(nf));
        } else {
            std::iota(features_.begin(), features_.end(), std::size_t{0});
        }

        const std::size_t n = end - begin;
        double best_stat = 1e-10;
        for (std::size_t fi = 0; fi < nf; ++fi) {
            const std::size_t f = features_[fi];
            const std::size_t nb = x_.n_bins(f);
            if (nb < 2) continue;
            const std::uint16_t* col = x_.column(f);

            // Counting sort of node positions by bin.
            bin_start_.assign(nb + 1, 0);
            for (std::size_t i = begin; i < end; ++i) ++bin_start_[col[rows_[i]] + 1u];
            for (std::size_t b = 0; b < nb; ++b) bin_start_[b + 1] += bin_start_[b];
            order_.resize(n);
            fill_ = bin_start_;
            for (std::size_t i = begin; i < end; ++i) order_[fill_[col[rows_[i]]]++] = i - begin;

            count_.reset(m + 1);
            wsum_.reset(m + 1);
            double o_minus_e = 0.0, a_sum = 0.0, q = 0.0, in_left = 0.0;
            std::size_t n_left = 0;
            for (std::size_t b = 0; b + 1 < nb; ++b) {
                if (bin_start_[b] == bin_start_[b + 1]) continue;
                for (std::size_t pos = bin_start_[b]; pos < bin_start_[b + 1]; ++pos) {
                    const std::size_t local = order_[pos];
                    const std::size_t k = k_of_[local];
                    const double wk = cum_w_[k];
                    const double longer = in_left - count_.prefix(k);
                    q += 2.0 * (wk * longer + wsum_.prefix(k)) + wk;
                    count_.add(k, 1.0);
                    wsum_.add(k, wk);
                    in_left += 1.0;
                    o_minus_e += (data_.events[rows_[begin + local]] ? 1.0 : 0.0) - cum_h_[k];
                    a_sum += cum_a_[k];
                }
                n_left = bin_start_[b + 1];
                if (n_left < options_.min_leaf) continue;
                if (n - n_left < options_.min_leaf) break;
                const double v = a_sum - q;
                if (v <= 1e-12) continue;
                const double stat = o_minus_e * o_minus_e / v;
                if (stat > best_stat) {
                    best_stat = stat;
                    best = {static_cast<int>(f), static_cast<std::uint16_t>(b), stat};
                }
            }
        }
        return best;
    }

    const trees::BinnedMatrix& x_;
    const SurvivalData& data_;
    SurvivalTreeOptions options_;
    std::span<const double> event_times_;
    Rng rng_;
    std::vector<std::size_t> features_;
    std::vector<std::size_t> rows_;

    std::vector<double> times_;
    std::vector<std::size_t> k_of_;
    std::vector<double> cum_h_, cum_a_, cum_w_;
    std::vector<std::size_t> bin_start_, fill_, order_;
    Fenwick count_, wsum_;
};

}  // namespace

SurvivalTree::SurvivalTree(std::vector<trees::Node> nodes, std::vector<SurvivalLeaf> leaves,
                           std::vector<std::string> feature_names, double max_time)
    : nodes_(std::move(nodes)), leaves_(std::move(leaves)), names_(std::move(feature_names)), max_time_(max_time) {
    for (const auto& n : nodes_)
        if (n.is_leaf() && (n.value < 0.0 || static_cast<std::size_t>(n.value) >= leaves_.size()))
            throw Error(ErrorCode::SchemaMismatch, "survival tree leaf index out of range");
}

const SurvivalLeaf& SurvivalTree::leaf(std::span<const double> x) const {
    detail::check_fitted(*this);
    detail::check_width(*this, x.size());
    const int i = trees::leaf_index(nodes_, x);
    return leaves_[static_cast<std::size_t>(nodes_[static_cast<std::size_t>(i)].value)];
}

std::vector<double> SurvivalTree::survival_curve(std::span<const double> x, std::span<const double> grid) const {
    const SurvivalLeaf& l = leaf(x);
    std::vector<double> out(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) out[k] = grid[k] <= 0.0 ? 1.0 : l.km(grid[k]);
    return out;
}

double SurvivalTree::risk_score(std::span<const double> x) const { return leaf(x).mortality; }

nlohmann::json SurvivalTree::to_json() const {
    detail::check_fitted(*this);
    nlohmann::json leaves = nlohmann::json::array();
    for (const auto& l : leaves_)
        leaves.push_back({{"km", l.km.to_json()}, {"na", l.na.to_json()}, {"mortality", l.mortality}, {"n", l.n}});
    return {{"schema", kModelSchemaVersion},
            {"family", family()},
            {"feature_names", names_},
            {"max_time", max_time_},
            {"nodes", trees::nodes_to_json(nodes_)},
            {"leaves", std::move(leaves)}};
}

SurvivalTree SurvivalTree::from_json(const nlohmann::json& j) {
    std::vector<SurvivalLeaf> leaves;
    for (const auto& l : j.at("leaves"))
        leaves.push_back({StepFunction::from_json(l.at("km")), StepFunction::from_json(l.at("na")),
                          l.at("mortality").get<double>(), l.at("n").get<std::size_t>()});
    return SurvivalTree(trees::nodes_from_json(j.at("nodes")), std::move(leaves),
                        j.at("feature_names").get<std::vector<std::string>>(), j.at("max_time").get<double>());
}

namespace detail {

std::vector<double> distinct_event_times(const SurvivalData& data) {
    std::vector<double> t;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data.events[i]) t.push_back(data.durations[i]);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

SurvivalTree grow_survival_tree(const trees::BinnedMatrix& binned, const SurvivalData& data,
                                std::vector<std::size_t> rows, const SurvivalTreeOptions& options,
                                std::span<const double> event_times) {
    if (options.min_leaf < 1 || options.max_depth < 0) throw Error(ErrorCode::InvalidConfig, "tree options out of range");
    if (rows.size() < 2 * options.min_leaf)
        throw Error(ErrorCode::TooFewSamples, "need at least 2 * min_leaf = " + std::to_string(2 * options.min_leaf) +
                                                  " samples, got " + std::to_string(rows.size()));
    double max_time = 0.0;
    for (auto r : rows)
        if (data.events[r]) max_time = std::max(max_time, data.durations[r]);
    LogrankGrower grower(binned, data, options, event_times);
    grower.run(std::move(rows));
    return SurvivalTree(std::move(grower.nodes), std::move(grower.leaves), data.feature_names, max_time);
}

}  // namespace detail

SurvivalTree fit_survival_tree(const SurvivalData& data, const SurvivalTreeOptions& options) {
    data.validate();
    const trees::BinnedMatrix binned(data.covariates, options.max_bins);
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto times = detail::distinct_event_times(data);
    return detail::grow_survival_tree(binned, data, std::move(rows), options, times);
}

SurvivalTree fit_survival_tree(std::span<const PolicyRecord> records, const CauseRecoding& recoding,
                               const SurvivalTreeOptions& options) {
    return fit_survival_tree(recode(records, recoding), options);
}

}  // namespace lapselab::survival
