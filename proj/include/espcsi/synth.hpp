#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "espcsi/core.hpp"

namespace espcsi {

/// One propagation path: direct line of sight, or a single specular
/// bounce off a (possibly finite) planar reflector.
struct PathSpec {
    enum class Kind { LineOfSight, Reflector };

    Kind kind = Kind::LineOfSight;
    std::complex<double> gain{1.0, 0.0};

    // Reflector plane: a point on it plus its normal. extent_* limit the
    // reflecting region to a rectangle around reflector_point along two
    // tangent directions; <= 0 means unbounded in that direction.
    Vec3 reflector_point;
    Vec3 reflector_normal;
    Vec3 extent_axis;        // unit tangent; only used when extent_a > 0
    double extent_a = 0.0;   // half-size along extent_axis
    double extent_b = 0.0;   // half-size along normal x extent_axis
};

/// WiFi-sniffer impairments applied per packet on top of the clean channel.
struct ImpairmentSpec {
    bool per_packet_common_phase = false;
    double per_packet_timing_offset_std = 0.0;  // seconds
    std::vector<double> per_board_phase_offsets;  // radians; empty = all zero
    std::optional<double> noise_snr_db;           // nullopt = noise off
    double rssi_calibration_db = 0.0;
    double rssi_jitter_std_db = 0.0;
};

struct TrajectorySpec {
    std::vector<Vec3> waypoints;
    double speed = 1.0;        // m/s
    double packet_rate = 100;  // packets/s
    double start_time = 0.0;   // s
    // Capture duration; defaults to the polyline travel time. A stationary
    // capture is two identical waypoints plus an explicit duration.
    std::optional<double> duration;
};

/// Deterministic impairment-free channel: sum over paths of
/// gain/d * exp(-j 2 pi f_n d / c0) per antenna and subcarrier.
std::vector<cfloat> channel_response(const ArraySystem& system, const Vec3& tx_position,
                                     const std::vector<PathSpec>& paths);

/// Position along the waypoint polyline after traveling speed*(t - start_time);
/// clamps at the final waypoint.
Vec3 trajectory_position(const TrajectorySpec& trajectory, double t);

/// Total polyline travel time in seconds.
double trajectory_duration(const TrajectorySpec& trajectory);

/// Synthesize a full dataset along a trajectory with impairments.
/// Identical (inputs, seed) give an identical dataset.
Dataset generate_dataset(const ArraySystem& system, const TrajectorySpec& trajectory,
                         const std::vector<PathSpec>& paths,
                         const ImpairmentSpec& impairments, std::uint64_t seed);

}  // namespace espcsi
