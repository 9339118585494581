#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace espcsi {

using cfloat = std::complex<float>;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Position and orientation of one 2x4 antenna board.
/// row_axis points from row 0 toward row 1 is NOT the convention here:
/// row 0 is the top row, so moving down a row means -row_axis in "up"
/// terms; see antenna_position for the exact formula.
struct BoardPose {
    Vec3 center;
    Vec3 row_axis;  // unit vector along increasing column positions' vertical partner
    Vec3 col_axis;  // unit vector along increasing column index

    /// Outward-facing board normal (col_axis x row_axis).
    Vec3 normal() const { return col_axis.cross(row_axis); }
};

/// Geometry and RF configuration of a multi-board receiver array.
class ArraySystem {
public:
    static constexpr int kRows = 2;
    static constexpr int kCols = 4;

    ArraySystem(std::vector<BoardPose> boards, double element_spacing,
                double carrier_frequency, double subcarrier_spacing,
                int n_subcarriers, int subcarrier_index_offset);

    const std::vector<BoardPose>& boards() const { return boards_; }
    int n_boards() const { return static_cast<int>(boards_.size()); }
    double element_spacing() const { return element_spacing_; }
    double carrier_frequency() const { return carrier_frequency_; }
    double subcarrier_spacing() const { return subcarrier_spacing_; }
    int n_subcarriers() const { return n_subcarriers_; }
    int subcarrier_index_offset() const { return subcarrier_index_offset_; }

    /// Antennas per board (kRows * kCols).
    static constexpr int kAntennasPerBoard = kRows * kCols;

    /// Total complex coefficients per datapoint: B * 2 * 4 * N_sub.
    std::size_t csi_size() const {
        return static_cast<std::size_t>(n_boards()) * kAntennasPerBoard * n_subcarriers_;
    }
    /// Total RSSI entries per datapoint: B * 2 * 4.
    std::size_t rssi_size() const {
        return static_cast<std::size_t>(n_boards()) * kAntennasPerBoard;
    }

    std::size_t csi_index(int board, int row, int col, int sub) const {
        return ((static_cast<std::size_t>(board) * kRows + row) * kCols + col) *
                   n_subcarriers_ + sub;
    }
    std::size_t rssi_index(int board, int row, int col) const {
        return (static_cast<std::size_t>(board) * kRows + row) * kCols + col;
    }

private:
    std::vector<BoardPose> boards_;
    double element_spacing_;
    double carrier_frequency_;
    double subcarrier_spacing_;
    int n_subcarriers_;
    int subcarrier_index_offset_;
};

/// Physical position of antenna (board, row, col). Row 0 is the top row,
/// col 0 the leftmost antenna when facing the array.
Vec3 antenna_position(const ArraySystem& system, int board, int row, int col);

/// Center frequency of subcarrier n (0 <= n < N_sub).
double subcarrier_frequency(const ArraySystem& system, int n);

/// One WiFi packet's fused channel estimate plus metadata.
struct CsiDatapoint {
    std::vector<cfloat> h;  // (B, 2, 4, N_sub), board-major
    std::vector<float> p;   // (B, 2, 4), dB
    Vec3 x;                 // transmitter position, meters
    double t = 0.0;         // seconds
};

/// Ordered collection of datapoints sharing one ArraySystem.
struct Dataset {
    ArraySystem system;
    std::vector<CsiDatapoint> points;
    std::map<std::string, std::string> annotations;

    std::size_t size() const { return points.size(); }

    /// Throws if any datapoint has a wrong shape, a non-finite value or
    /// timestamps run backwards.
    void validate() const;
};

}  // namespace espcsi
