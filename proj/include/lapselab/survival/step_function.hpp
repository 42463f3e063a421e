#pragma once

#include "json.hpp"

#include <span>
#include <vector>

namespace lapselab::survival {

/// Right-continuous step function: value(t) = values[k] for the largest knot
/// times[k] <= t, and `initial` before the first knot. Flat after the last knot.
class StepFunction {
public:
    StepFunction() = default;
    StepFunction(double initial, std::vector<double> times, std::vector<double> values);

    double operator()(double t) const;
    /// lim s->t- of value(s).
    double left_limit(double t) const;
    std::vector<double> evaluate(std::span<const double> grid) const;

    double initial() const noexcept { return initial_; }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<double>& values() const noexcept { return values_; }

    nlohmann::json to_json() const;
    static StepFunction from_json(const nlohmann::json& j);

private:
    double initial_ = 0.0;
    std::vector<double> times_;
    std::vector<double> values_;
};

}  // namespace lapselab::survival
