#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <list>
#include <vector>

#include "espcsi/core.hpp"
#include "espcsi/synth.hpp"

namespace espcsi {

inline constexpr std::uint32_t kDatagramMagic = 0x45535043;

/// One board's channel estimate for one sensed WiFi packet.
struct BoardFrame {
    std::uint8_t board_id = 0;
    std::uint16_t wifi_seq = 0;
    std::array<std::uint8_t, 6> source_id{};
    double rx_timestamp = 0.0;
    std::vector<float> rssi;  // 8 entries
    std::vector<cfloat> csi;  // 8 * N_sub, (row, col, subcarrier) order
};

enum class CompletenessPolicy { RequireAllBoards, EmitPartialFlagged };

struct AggregatorConfig {
    double match_window = 0.05;  // s
    CompletenessPolicy completeness_policy = CompletenessPolicy::RequireAllBoards;
    std::size_t buffer_capacity = 1024;  // open groups
};

struct AggregatorStats {
    std::size_t frames_in = 0;
    std::size_t complete = 0;
    std::size_t partial = 0;
    std::size_t dropped = 0;
    std::size_t evicted = 0;
};

struct FusedPacket {
    CsiDatapoint datapoint;  // x is not known at this layer (left zero)
    std::uint16_t wifi_seq = 0;
    bool complete = true;
};

/// Groups BoardFrames by (source_id, wifi_seq) within a time window and
/// fuses them into datapoints. Single consumer; push frames in globally
/// non-decreasing rx_timestamp order (up to jitter below match_window/2).
class Aggregator {
public:
    Aggregator(const ArraySystem& system, const AggregatorConfig& config);

    /// Push one frame; fused packets ready for in-order emission are
    /// appended to `out`.
    void push(const BoardFrame& frame, std::vector<FusedPacket>& out);

    /// Flush all open and held groups, emitting in timestamp order.
    void finish(std::vector<FusedPacket>& out);

    const AggregatorStats& stats() const { return stats_; }

private:
    struct Group {
        std::array<std::uint8_t, 6> source_id{};
        std::uint16_t wifi_seq = 0;
        double min_ts = 0.0;
        double max_ts = 0.0;
        std::vector<bool> have;
        std::vector<BoardFrame> frames;
        int count = 0;
    };

    void close_group(Group& group);
    void expire_and_release(std::vector<FusedPacket>& out);
    FusedPacket fuse(const Group& group) const;

    const ArraySystem& system_;
    AggregatorConfig config_;
    AggregatorStats stats_;
    std::list<Group> open_;
    std::vector<FusedPacket> held_;  // closed, awaiting ordered release
    double watermark_ = -std::numeric_limits<double>::infinity();
};

/// Split a dataset into B per-board frame streams with per-frame loss and
/// timestamp jitter. Streams come back sorted by rx_timestamp.
std::vector<std::vector<BoardFrame>> emit_board_streams(const Dataset& dataset,
                                                        double loss_rate,
                                                        double jitter_std,
                                                        std::uint64_t seed);

/// Run emit streams through an aggregator (merging by rx_timestamp).
std::vector<FusedPacket> aggregate(const ArraySystem& system,
                                   const std::vector<std::vector<BoardFrame>>& streams,
                                   const AggregatorConfig& config,
                                   AggregatorStats* stats_out = nullptr);

/// Estimate constant per-board phase offsets against the impairment-free
/// channel model at the datapoints' known positions (calibration mode A).
/// Result is zero at reference_board.
std::vector<double> calibrate_board_phases(const ArraySystem& system,
                                           const std::vector<CsiDatapoint>& datapoints,
                                           const std::vector<PathSpec>& paths,
                                           int reference_board);

/// Multiply each board's coefficients by e^{-j psi_b}.
CsiDatapoint apply_phase_calibration(const ArraySystem& system, const CsiDatapoint& dp,
                                     const std::vector<double>& phases);

/// Datagram binding: fixed little-endian layout, one datagram per frame.
std::vector<std::uint8_t> encode_frame(const BoardFrame& frame);
BoardFrame decode_frame(const std::vector<std::uint8_t>& bytes, int n_subcarriers);

}  // namespace espcsi
