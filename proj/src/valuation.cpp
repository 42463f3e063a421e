#include "lapselab/valuation.hpp"

#include "lapselab/error.hpp"
#include "lapselab/text.hpp"

#include <cmath>
#include <ostream>
#include <string>

namespace lapselab::valuation {

namespace {

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::InvalidStrategy, why); }

void check_discount(double d) {
    if (!(d > -1.0) || !std::isfinite(d))
        throw Error(ErrorCode::DiscountOutOfRange, "discount rate must exceed -1, got " + text::format_double(d));
}

// Discounted retention mass sum_t r_t / (1+d)^t for one matrix row.
double discounted_mass(const Eigen::MatrixXd& m, Eigen::Index row, double d, int T) {
    double total = 0.0, factor = 1.0;
    const double v = 1.0 / (1.0 + d);
    for (int t = 0; t <= T; ++t) {
        total += m(row, t) * factor;
        factor *= v;
    }
    return total;
}

struct Masses {
    double acceptant = 0.0;
    double lapser = 0.0;
};

class Aligned {
public:
    Aligned(std::span<const PolicyRecord> records, const RetentionMatrices& m, const StrategyParams& s)
        : m_(m), s_(s) {
        validate(s);
        if (m.r_acceptant.rows() != m.r_lapser.rows() || m.r_acceptant.cols() != m.r_lapser.cols())
            throw Error(ErrorCode::AlignmentError, "retention matrices differ in shape");
        if (m.rows() != records.size())
            throw Error(ErrorCode::AlignmentError, "retention matrices have " + std::to_string(m.rows()) +
                                                       " rows for " + std::to_string(records.size()) + " subjects");
        if (s.T > m.horizon || m.r_acceptant.cols() < s.T + 1)
            throw Error(ErrorCode::HorizonMismatch, "strategy horizon " + std::to_string(s.T) +
                                                        " exceeds retention horizon " + std::to_string(m.horizon));
    }

    Masses masses(std::size_t i) const {
        const auto r = static_cast<Eigen::Index>(i);
        return {discounted_mass(m_.r_acceptant, r, s_.d, s_.T), discounted_mass(m_.r_lapser, r, s_.d, s_.T)};
    }

private:
    const RetentionMatrices& m_;
    const StrategyParams& s_;
};

void check_rows(std::span<const std::size_t> rows, std::size_t n) {
    for (std::size_t r : rows)
        if (r >= n) throw Error(ErrorCode::AlignmentError, "row " + std::to_string(r) + " out of range");
}

void check_predictions(std::span<const std::uint8_t> predictions, std::size_t expected) {
    if (predictions.size() != expected)
        throw Error(ErrorCode::AlignmentError, std::to_string(predictions.size()) + " predictions for " +
                                                   std::to_string(expected) + " subjects");
    for (auto v : predictions)
        if (v > 1) throw Error(ErrorCode::BadValue, "predictions must be 0 or 1");
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

}  // namespace

void validate(const StrategyParams& s) {
    const auto f = [](double v) { return text::format_double(v); };
    if (!std::isfinite(s.p) || !std::isfinite(s.delta) || !std::isfinite(s.gamma) || !std::isfinite(s.c) ||
        !std::isfinite(s.d))
        invalid("non-finite parameter");
    if (s.delta < 0.0) invalid("delta must be >= 0, got " + f(s.delta));
    if (!(s.delta < s.p)) invalid("delta must be below p (delta=" + f(s.delta) + ", p=" + f(s.p) + ")");
    if (s.gamma < 0.0 || s.gamma > 1.0) invalid("gamma must be in [0, 1], got " + f(s.gamma));
    if (s.c < 0.0) invalid("c must be >= 0, got " + f(s.c));
    if (s.T < 0) invalid("T must be >= 0, got " + std::to_string(s.T));
    if (!(s.d > -1.0)) invalid("d must exceed -1, got " + f(s.d));
}

nlohmann::json to_json(const StrategyParams& s) {
    return {{"p", s.p}, {"delta", s.delta}, {"gamma", s.gamma}, {"c", s.c}, {"d", s.d}, {"T", s.T}};
}

StrategyParams strategy_from_json(const nlohmann::json& j) {
    if (!j.is_object()) invalid("strategy must be a JSON object");
    StrategyParams s;
    try {
        s.p = j.value("p", s.p);
        s.delta = j.value("delta", s.delta);
        s.gamma = j.value("gamma", s.gamma);
        s.c = j.value("c", s.c);
        s.d = j.value("d", s.d);
        s.T = j.value("T", s.T);
    } catch (const nlohmann::json::exception& e) {
        invalid(std::string("malformed strategy: ") + e.what());
    }
    validate(s);
    return s;
}

double future_clv(double p, double F, std::span<const double> r, double d, int T) {
    if (T < 0 || r.size() != static_cast<std::size_t>(T) + 1)
        throw Error(ErrorCode::LengthMismatch, "retention vector has " + std::to_string(r.size()) +
                                                   " entries for horizon " + std::to_string(T));
    check_discount(d);
    double total = 0.0, factor = 1.0;
    const double v = 1.0 / (1.0 + d);
    for (double rt : r) {
        total += p * F * rt * factor;
        factor *= v;
    }
    return total;
}

double individual_gain(const PolicyRecord& record, std::span<const double> r_acceptant,
                       std::span<const double> r_lapser, const StrategyParams& s) {
    const double F = record.face_amount;
    if (!record.is_lapser()) return -future_clv(s.delta, F, r_acceptant, s.d, s.T) - s.c;
    return s.gamma * (future_clv(s.p - s.delta, F, r_acceptant, s.d, s.T) - future_clv(s.p, F, r_lapser, s.d, s.T)) -
           s.c;
}

double control_portfolio_value(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                               const StrategyParams& s, std::span<const std::size_t> rows) {
    const Aligned a(records, matrices, s);
    check_rows(rows, records.size());
    double total = 0.0;
    for (std::size_t i : rows) {
        const auto m = a.masses(i);
        const double F = records[i].face_amount;
        if (records[i].is_lapser())
            total += s.p * F * m.lapser;
        else
            total += s.p * F * m.acceptant;
    }
    return total;
}

double control_portfolio_value(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                               const StrategyParams& s) {
    return control_portfolio_value(records, matrices, s, all_rows(records.size()));
}

double lapse_managed_portfolio_value(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                                     const StrategyParams& s, std::span<const std::uint8_t> predictions,
                                     std::span<const std::size_t> rows) {
    const Aligned a(records, matrices, s);
    check_rows(rows, records.size());
    check_predictions(predictions, rows.size());
    // The six sums kept separate, one per (y, y_hat) case.
    double keep_acceptant = 0.0, keep_lapser = 0.0, incentive_acceptant = 0.0;
    double accepted_lapser = 0.0, refused_lapser = 0.0, contact = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t i = rows[k];
        const auto m = a.masses(i);
        const double F = records[i].face_amount;
        const bool y = records[i].is_lapser();
        const bool yhat = predictions[k] == 1;
        if (!y && !yhat) keep_acceptant += s.p * F * m.acceptant;
        if (y && !yhat) keep_lapser += s.p * F * m.lapser;
        if (!y && yhat) incentive_acceptant += (s.p - s.delta) * F * m.acceptant;
        if (y && yhat) accepted_lapser += (s.p - s.delta) * F * m.acceptant;
        if (y && yhat) refused_lapser += s.p * F * m.lapser;
        if (yhat) contact += s.c;
    }
    return keep_acceptant + keep_lapser + incentive_acceptant + s.gamma * accepted_lapser +
           (1.0 - s.gamma) * refused_lapser - contact;
}

double lapse_managed_portfolio_value(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                                     const StrategyParams& s, std::span<const std::uint8_t> predictions) {
    return lapse_managed_portfolio_value(records, matrices, s, predictions, all_rows(records.size()));
}

double retention_gain(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                      const StrategyParams& s, std::span<const std::uint8_t> predictions,
                      std::span<const std::size_t> rows) {
    return lapse_managed_portfolio_value(records, matrices, s, predictions, rows) -
           control_portfolio_value(records, matrices, s, rows);
}

double retention_gain(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                      const StrategyParams& s, std::span<const std::uint8_t> predictions) {
    return retention_gain(records, matrices, s, predictions, all_rows(records.size()));
}

std::vector<double> individual_gains(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                                     const StrategyParams& s) {
    const Aligned a(records, matrices, s);
    std::vector<double> z(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto m = a.masses(i);
        const double F = records[i].face_amount;
        if (records[i].is_lapser())
            z[i] = s.gamma * ((s.p - s.delta) * F * m.acceptant - s.p * F * m.lapser) - s.c;
        else
            z[i] = -s.delta * F * m.acceptant - s.c;
    }
    return z;
}

double targeted_gain(std::span<const double> z, std::span<const std::uint8_t> predictions) {
    if (z.size() != predictions.size())
        throw Error(ErrorCode::AlignmentError, "gains and predictions differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
        if (predictions[i]) total += z[i];
    return total;
}

double optimal_gain(std::span<const double> z) {
    double total = 0.0;
    for (double v : z)
        if (v > 0.0) total += v;
    return total;
}

std::vector<std::uint8_t> relabel(std::span<const double> z) {
    std::vector<std::uint8_t> y(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i] > 0.0 ? 1 : 0;
    return y;
}

ValuationResult relabel_targets(std::span<const PolicyRecord> records, const RetentionMatrices& matrices,
                                const StrategyParams& s) {
    ValuationResult out;
    out.strategy = s;
    out.z = individual_gains(records, matrices, s);
    out.y_tilde = relabel(out.z);
    const Aligned a(records, matrices, s);
    out.clv_per_subject.resize(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto m = a.masses(i);
        out.clv_per_subject[i] = s.p * records[i].face_amount * (records[i].is_lapser() ? m.lapser : m.acceptant);
        out.cpv += out.clv_per_subject[i];
    }
    return out;
}

void write_csv(std::ostream& out, std::span<const PolicyRecord> records, const ValuationResult& result) {
    if (records.size() != result.size()) throw Error(ErrorCode::AlignmentError, "result does not match records");
    out << "subject_id,y,z,y_tilde,clv\n";
    for (std::size_t i = 0; i < records.size(); ++i)
        out << records[i].subject_id << ',' << (records[i].is_lapser() ? 1 : 0) << ','
            << text::format_double(result.z[i]) << ',' << int(result.y_tilde[i]) << ','
            << text::format_double(result.clv_per_subject[i]) << '\n';
}

nlohmann::json summary_json(std::span<const PolicyRecord> records, const ValuationResult& result) {
    if (records.size() != result.size()) throw Error(ErrorCode::AlignmentError, "result does not match records");
    std::size_t lapsers = 0, targets = 0;
    double z_sum = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        lapsers += records[i].is_lapser();
        targets += result.y_tilde[i];
        z_sum += result.z[i];
    }
    const double n = static_cast<double>(records.size());
    return {{"n", records.size()},
            {"cpv", result.cpv},
            {"strategy", to_json(result.strategy)},
            {"lapsers", lapsers},
            {"profitable_targets", targets},
            {"ones_share_y_tilde", n > 0 ? static_cast<double>(targets) / n : 0.0},
            {"mean_z", n > 0 ? z_sum / n : 0.0},
            {"optimal_gain", result.optimal_gain()}};
}

}  // namespace lapselab::valuation
