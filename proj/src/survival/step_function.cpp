#include "lapselab/survival/step_function.hpp"

#include "lapselab/error.hpp"

#include <algorithm>

namespace lapselab::survival {

StepFunction::StepFunction(double initial, std::vector<double> times, std::vector<double> values)
    : initial_(initial), times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() != values_.size())
        throw Error(ErrorCode::LengthMismatch, "step function knots and values differ in length");
    if (!std::is_sorted(times_.begin(), times_.end()))
        throw Error(ErrorCode::BadValue, "step function knots must be sorted");
}

double StepFunction::operator()(double t) const {
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return initial_;
    return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepFunction::left_limit(double t) const {
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return initial_;
    return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

std::vector<double> StepFunction::evaluate(std::span<const double> grid) const {
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = (*this)(grid[i]);
    return out;
}

nlohmann::json StepFunction::to_json() const {
    return {{"initial", initial_}, {"times", times_}, {"values", values_}};
}

StepFunction StepFunction::from_json(const nlohmann::json& j) {
    return StepFunction(j.at("initial").get<double>(), j.at("times").get<std::vector<double>>(),
                        j.at("values").get<std::vector<double>>());
}

}  // namespace lapselab::survival
