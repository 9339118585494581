#include "espcsi/core.hpp"

#include <cmath>
#include <limits>

namespace espcsi {

namespace {
constexpr double kUnitTol = 1e-9;
}

ArraySystem::ArraySystem(std::vector<BoardPose> boards, double element_spacing,
                         double carrier_frequency, double subcarrier_spacing,
                         int n_subcarriers, int subcarrier_index_offset)
    : boards_(std::move(boards)),
      element_spacing_(element_spacing),
      carrier_frequency_(carrier_frequency),
      subcarrier_spacing_(subcarrier_spacing),
      n_subcarriers_(n_subcarriers),
      subcarrier_index_offset_(subcarrier_index_offset) {
    if (boards_.empty())
        throw std::invalid_argument("ArraySystem: need at least one board");
    if (n_subcarriers_ < 1)
        throw std::invalid_argument("ArraySystem: n_subcarriers must be >= 1");
    if (element_spacing_ <= 0.0)
        throw std::invalid_argument("ArraySystem: element_spacing must be > 0");
    if (carrier_frequency_ <= 0.0)
        throw std::invalid_argument("ArraySystem: carrier_frequency must be > 0");
    for (std::size_t b = 0; b < boards_.size(); ++b) {
        const BoardPose& pose = boards_[b];
        if (std::abs(pose.row_axis.norm() - 1.0) > kUnitTol ||
            std::abs(pose.col_axis.norm() - 1.0) > kUnitTol)
            throw std::invalid_argument("ArraySystem: board " + std::to_string(b) +
                                        " orientation vectors must be unit norm");
        if (std::abs(pose.row_axis.dot(pose.col_axis)) > kUnitTol)
            throw std::invalid_argument("ArraySystem: board " + std::to_string(b) +
                                        " row/col axes must be orthogonal");
    }
}

Vec3 antenna_position(const ArraySystem& system, int board, int row, int col) {
    if (board < 0 || board >= system.n_boards())
        throw std::out_of_range("antenna_position: board index out of range");
    if (row < 0 || row >= ArraySystem::kRows)
        throw std::out_of_range("antenna_position: row index out of range");
    if (col < 0 || col >= ArraySystem::kCols)
        throw std::out_of_range("antenna_position: col index out of range");
    const BoardPose& pose = system.boards()[board];
    const double s = system.element_spacing();
    return pose.center + (col - 1.5) * s * pose.col_axis +
           (0.5 - row) * s * pose.row_axis;
}

double subcarrier_frequency(const ArraySystem& system, int n) {
    if (n < 0 || n >= system.n_subcarriers())
        throw std::out_of_range("subcarrier_frequency: subcarrier index out of range");
    return system.carrier_frequency() +
           (system.subcarrier_index_offset() + n) * system.subcarrier_spacing();
}

void Dataset::validate() const {
    const std::size_t csi_n = system.csi_size();
    const std::size_t rssi_n = system.rssi_size();
    double last_t = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < points.size(); ++l) {
        const CsiDatapoint& dp = points[l];
        if (dp.h.size() != csi_n || dp.p.size() != rssi_n)
            throw std::invalid_argument("Dataset: datapoint " + std::to_string(l) +
                                        " shape mismatch");
        for (const cfloat& c : dp.h)
            if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
                throw std::invalid_argument("Dataset: non-finite CSI at datapoint " +
                                            std::to_string(l));
        for (float v : dp.p)
            if (!std::isfinite(v))
                throw std::invalid_argument("Dataset: non-finite RSSI at datapoint " +
                                            std::to_string(l));
        if (dp.t < last_t)
            throw std::invalid_argument("Dataset: timestamps decrease at datapoint " +
                                        std::to_string(l));
        last_t = dp.t;
    }
}

}  // namespace espcsi
