#pragma once

#include <vector>

#include "espcsi/core.hpp"

namespace espcsi {

struct AntennaIndex {
    int board = 0;
    int row = 0;
    int col = 0;
};

struct FeatureConfig {
    int n_taps = 8;
    bool rssi_weighting = false;
    bool unit_power_normalization = true;
    AntennaIndex alignment_reference;
};

/// Scale each antenna's subcarrier row so its RMS amplitude equals
/// 10^(p/20); phases untouched.
std::vector<cfloat> rssi_weight(const ArraySystem& system, const std::vector<cfloat>& h,
                                const std::vector<float>& p);

/// Remove the per-packet common phase: rotate h by -arg(sum over the
/// reference antenna's subcarriers).
std::vector<cfloat> align_packet_phase(const ArraySystem& system,
                                       const std::vector<cfloat>& h,
                                       const AntennaIndex& reference);

/// Coherent triangular-kernel average of phase-aligned packets around
/// t_center. rssi_weighting applies rssi_weight to each packet first.
std::vector<cfloat> interpolate_csi(const ArraySystem& system,
                                    const std::vector<const CsiDatapoint*>& window,
                                    double t_center, const AntennaIndex& reference,
                                    bool rssi_weighting = false);

/// Per-antenna time-domain taps: inverse DFT over subcarriers (1/N
/// scaling), first n_taps taps kept, real/imag parts concatenated in
/// (board, row, col, tap) order. Length 2 * B * 8 * n_taps. The tensor is
/// phase-aligned first; rssi_weighting is ignored here (see
/// datapoint_features).
std::vector<double> extract_features(const ArraySystem& system,
                                     const std::vector<cfloat>& h,
                                     const FeatureConfig& config);

/// extract_features on a full datapoint, honoring config.rssi_weighting.
std::vector<double> datapoint_features(const ArraySystem& system,
                                       const CsiDatapoint& dp,
                                       const FeatureConfig& config);

inline std::size_t feature_length(const ArraySystem& system, const FeatureConfig& config) {
    return 2ull * system.n_boards() * ArraySystem::kAntennasPerBoard * config.n_taps;
}

struct AoaConfig {
    double grid_start = -M_PI / 2;
    double grid_stop = M_PI / 2;
    int grid_points = 181;
};

/// Delay-and-sum beamformer power over an azimuth grid for one board.
/// Azimuth 0 is broadside; positive toward +col_axis.
std::vector<double> aoa_spectrum(const ArraySystem& system, const std::vector<cfloat>& h,
                                 int board, const AoaConfig& config);

/// Azimuth of the beamformer peak, refined by parabolic interpolation
/// around the grid argmax.
double estimate_aoa(const ArraySystem& system, const std::vector<cfloat>& h, int board,
                    const AoaConfig& config = {});

/// Ground-truth azimuth of a transmitter at x as seen from a board:
/// atan2 of the col_axis and broadside components of (x - center).
double true_azimuth(const ArraySystem& system, int board, const Vec3& x);

}  // namespace espcsi
