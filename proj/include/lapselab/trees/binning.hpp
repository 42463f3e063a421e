#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace lapselab::trees {

/// Column-wise histogram codes. A column with at most `max_bins` distinct
/// values gets one bin per value, so splits are exact; otherwise bins hold
/// roughly equal counts. Splitting "bin <= b" is the same as
/// "x <= threshold(col, b)", with thresholds halfway between neighbouring bins.
class BinnedMatrix {
public:
    BinnedMatrix() = default;
    explicit BinnedMatrix(const Eigen::MatrixXd& x, std::size_t max_bins = 256);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return bins_.size(); }

    std::uint16_t bin(std::size_t row, std::size_t col) const noexcept { return codes_[col * rows_ + row]; }
    const std::uint16_t* column(std::size_t col) const noexcept { return codes_.data() + col * rows_; }

    std::size_t n_bins(std::size_t col) const noexcept { return bins_[col].upper.size(); }
    double threshold(std::size_t col, std::size_t b) const noexcept { return bins_[col].thresholds[b]; }

private:
    struct Bins {
        std::vector<double> upper;       // largest value in each bin
        std::vector<double> thresholds;  // size = bins - 1
    };
    std::size_t rows_ = 0;
    std::vector<Bins> bins_;
    std::vector<std::uint16_t> codes_;
};

}  // namespace lapselab::trees
