#include "lapselab/trees/binning.hpp"

#include "lapselab/error.hpp"

#include <algorithm>

namespace lapselab::trees {

BinnedMatrix::BinnedMatrix(const Eigen::MatrixXd& x, std::size_t max_bins)
    : rows_(static_cast<std::size_t>(x.rows())) {
    if (max_bins < 2 || max_bins > 65535) throw Error(ErrorCode::InvalidConfig, "max_bins must be in [2, 65535]");
    if (!x.allFinite()) throw Error(ErrorCode::BadValue, "non-finite feature value");
    const std::size_t p = static_cast<std::size_t>(x.cols());
    bins_.resize(p);
    codes_.resize(rows_ * p);

    std::vector<double> sorted(rows_);
    for (std::size_t c = 0; c < p; ++c) {
        for (std::size_t i = 0; i < rows_; ++i) sorted[i] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        std::sort(sorted.begin(), sorted.end());

        std::vector<double> values;
        std::vector<std::size_t> counts;
        for (double v : sorted) {
            if (values.empty() || v != values.back()) {
                values.push_back(v);
                counts.push_back(0);
            }
            ++counts.back();
        }

        Bins& bins = bins_[c];
        std::vector<double> lower;
        if (values.size() <= max_bins) {
            bins.upper = values;
            lower = values;
        } else {
            // Greedy equal-frequency grouping of distinct values; the target
            // is recomputed so the remainder spreads over the bins left.
            std::size_t in_bin = 0, placed = 0;
            double first = values.front();
            for (std::size_t k = 0; k < values.size(); ++k) {
                in_bin += counts[k];
                const bool last = k + 1 == values.size();
                const std::size_t remaining_bins = max_bins - bins.upper.size();
                const double target = static_cast<double>(rows_ - placed) / static_cast<double>(remaining_bins);
                if (last || (static_cast<double>(in_bin) >= target && remaining_bins > 1)) {
                    bins.upper.push_back(values[k]);
                    lower.push_back(first);
                    placed += in_bin;
                    in_bin = 0;
                    if (!last) first = values[k + 1];
                }
            }
        }
        for (std::size_t b = 0; b + 1 < bins.upper.size(); ++b)
            bins.thresholds.push_back(bins.upper[b] + 0.5 * (lower[b + 1] - bins.upper[b]));

        std::uint16_t* col = codes_.data() + c * rows_;
        for (std::size_t i = 0; i < rows_; ++i) {
            const double v = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
            col[i] = static_cast<std::uint16_t>(std::lower_bound(bins.upper.begin(), bins.upper.end(), v) - bins.upper.begin());
        }
    }
}

}  // namespace lapselab::trees
