#include "espcsi/stream.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "espcsi/rng.hpp"

namespace espcsi {

namespace {
constexpr std::array<std::uint8_t, 6> kDefaultSource = {0x02, 0x00, 0x00, 0x00, 0x00, 0x01};
}

Aggregator::Aggregator(const ArraySystem& system, const AggregatorConfig& config)
    : system_(system), config_(config) {
    if (config_.match_window <= 0.0)
        throw std::invalid_argument("Aggregator: match_window must be > 0");
    if (config_.buffer_capacity < static_cast<std::size_t>(system.n_boards()))
        throw std::invalid_argument("Aggregator: buffer_capacity must be >= B");
}

FusedPacket Aggregator::fuse(const Group& group) const {
    const int n_sub = system_.n_subcarriers();
    FusedPacket packet;
    packet.wifi_seq = group.wifi_seq;
    packet.complete = group.count == system_.n_boards();
    packet.datapoint.t = group.min_ts;
    packet.datapoint.h.assign(system_.csi_size(), cfloat{0.0f, 0.0f});
    packet.datapoint.p.assign(system_.rssi_size(), 0.0f);
    for (int b = 0; b < system_.n_boards(); ++b) {
        if (!group.have[b]) continue;  // partial: zero-filled
        const BoardFrame& frame = group.frames[b];
        std::copy(frame.csi.begin(), frame.csi.end(),
                  packet.datapoint.h.begin() +
                      static_cast<std::ptrdiff_t>(b) * 8 * n_sub);
        std::copy(frame.rssi.begin(), frame.rssi.end(),
                  packet.datapoint.p.begin() + static_cast<std::ptrdiff_t>(b) * 8);
    }
    return packet;
}

void Aggregator::close_group(Group& group) {
    if (group.count == system_.n_boards()) {
        ++stats_.complete;
        held_.push_back(fuse(group));
    } else if (config_.completeness_policy == CompletenessPolicy::EmitPartialFlagged) {
        ++stats_.partial;
        held_.push_back(fuse(group));
    } else {
        ++stats_.dropped;
    }
}

void Aggregator::expire_and_release(std::vector<FusedPacket>& out) {
    for (auto it = open_.begin(); it != open_.end();) {
        if (watermark_ - it->min_ts > config_.match_window) {
            close_group(*it);
            it = open_.erase(it);
        } else {
            ++it;
        }
    }
    // Any group still open (or yet to appear) has min_ts above this bar,
    // so held packets at or below it can be released in order.
    const double bar = watermark_ - config_.match_window;
    std::sort(held_.begin(), held_.end(),
              [](const FusedPacket& a, const FusedPacket& b) {
                  return a.datapoint.t < b.datapoint.t;
              });
    std::size_t n_release = 0;
    while (n_release < held_.size() && held_[n_release].datapoint.t <= bar) ++n_release;
    for (std::size_t i = 0; i < n_release; ++i) out.push_back(std::move(held_[i]));
    held_.erase(held_.begin(), held_.begin() + static_cast<std::ptrdiff_t>(n_release));
}

void Aggregator::push(const BoardFrame& frame, std::vector<FusedPacket>& out) {
    if (frame.board_id >= system_.n_boards())
        throw std::invalid_argument("Aggregator: board_id out of range");
    if (frame.csi.size() != 8ull * system_.n_subcarriers() || frame.rssi.size() != 8)
        throw std::invalid_argument("Aggregator: frame shape mismatch");
    ++stats_.frames_in;
    watermark_ = std::max(watermark_, frame.rx_timestamp);

    Group* target = nullptr;
    for (Group& group : open_) {
        if (group.wifi_seq == frame.wifi_seq && group.source_id == frame.source_id &&
            std::abs(frame.rx_timestamp - group.min_ts) <= config_.match_window &&
            std::abs(frame.rx_timestamp - group.max_ts) <= config_.match_window &&
            !group.have[frame.board_id]) {
            target = &group;
            break;
        }
    }
    if (target == nullptr) {
        if (open_.size() >= config_.buffer_capacity) {
            // Evict the oldest open group.
            auto oldest = open_.begin();
            for (auto it = open_.begin(); it != open_.end(); ++it)
                if (it->min_ts < oldest->min_ts) oldest = it;
            ++stats_.evicted;
            close_group(*oldest);
            open_.erase(oldest);
        }
        Group group;
        group.source_id = frame.source_id;
        group.wifi_seq = frame.wifi_seq;
        group.min_ts = group.max_ts = frame.rx_timestamp;
        group.have.assign(system_.n_boards(), false);
        group.frames.resize(system_.n_boards());
        open_.push_back(std::move(group));
        target = &open_.back();
    }

    target->have[frame.board_id] = true;
    target->frames[frame.board_id] = frame;
    target->min_ts = std::min(target->min_ts, frame.rx_timestamp);
    target->max_ts = std::max(target->max_ts, frame.rx_timestamp);
    ++target->count;

    if (target->count == system_.n_boards()) {
        close_group(*target);
        for (auto it = open_.begin(); it != open_.end(); ++it) {
            if (&*it == target) {
                open_.erase(it);
                break;
            }
        }
    }
    expire_and_release(out);
}

void Aggregator::finish(std::vector<FusedPacket>& out) {
    for (Group& group : open_) close_group(group);
    open_.clear();
    std::sort(held_.begin(), held_.end(),
              [](const FusedPacket& a, const FusedPacket& b) {
                  return a.datapoint.t < b.datapoint.t;
              });
    for (FusedPacket& packet : held_) out.push_back(std::move(packet));
    held_.clear();
}

std::vector<std::vector<BoardFrame>> emit_board_streams(const Dataset& dataset,
                                                        double loss_rate,
                                                        double jitter_std,
                                                        std::uint64_t seed) {
    if (loss_rate < 0.0 || loss_rate > 1.0)
        throw std::invalid_argument("emit_board_streams: loss_rate must be in [0,1]");
    if (jitter_std < 0.0 || !std::isfinite(jitter_std))
        throw std::invalid_argument("emit_board_streams: bad jitter_std");

    const int n_boards = dataset.system.n_boards();
    const int n_sub = dataset.system.n_subcarriers();
    std::vector<std::vector<BoardFrame>> streams(n_boards);

    for (std::size_t l = 0; l < dataset.points.size(); ++l) {
        const CsiDatapoint& dp = dataset.points[l];
        for (int b = 0; b < n_boards; ++b) {
            RandomStream rng(seed, l * static_cast<std::uint64_t>(n_boards) + b);
            const bool drop = rng.next_double() < loss_rate;
            const double jitter = jitter_std > 0.0 ? jitter_std * rng.next_gaussian() : 0.0;
            if (drop) continue;
            BoardFrame frame;
            frame.board_id = static_cast<std::uint8_t>(b);
            frame.wifi_seq = static_cast<std::uint16_t>(l & 0xffff);
            frame.source_id = kDefaultSource;
            frame.rx_timestamp = dp.t + jitter;
            frame.rssi.assign(dp.p.begin() + static_cast<std::ptrdiff_t>(b) * 8,
                              dp.p.begin() + static_cast<std::ptrdiff_t>(b + 1) * 8);
            frame.csi.assign(
                dp.h.begin() + static_cast<std::ptrdiff_t>(b) * 8 * n_sub,
                dp.h.begin() + static_cast<std::ptrdiff_t>(b + 1) * 8 * n_sub);
            streams[b].push_back(std::move(frame));
        }
    }
    for (auto& stream : streams)
        std::stable_sort(stream.begin(), stream.end(),
                         [](const BoardFrame& a, const BoardFrame& b) {
                             return a.rx_timestamp < b.rx_timestamp;
                         });
    return streams;
}

std::vector<FusedPacket> aggregate(const ArraySystem& system,
                                   const std::vector<std::vector<BoardFrame>>& streams,
                                   const AggregatorConfig& config,
                                   AggregatorStats* stats_out) {
    Aggregator aggregator(system, config);
    std::vector<FusedPacket> out;

    // Merge the per-board streams by rx_timestamp.
    std::vector<std::size_t> cursor(streams.size(), 0);
    while (true) {
        int best = -1;
        for (std::size_t s = 0; s < streams.size(); ++s) {
            if (cursor[s] >= streams[s].size()) continue;
            if (best < 0 || streams[s][cursor[s]].rx_timestamp <
                                streams[best][cursor[best]].rx_timestamp)
                best = static_cast<int>(s);
        }
        if (best < 0) break;
        aggregator.push(streams[best][cursor[best]++], out);
    }
    aggregator.finish(out);
    if (stats_out) *stats_out = aggregator.stats();
    return out;
}

std::vector<double> calibrate_board_phases(const ArraySystem& system,
                                           const std::vector<CsiDatapoint>& datapoints,
                                           const std::vector<PathSpec>& paths,
                                           int reference_board) {
    if (datapoints.empty())
        throw std::invalid_argument("calibrate_board_phases: empty calibration set");
    if (reference_board < 0 || reference_board >= system.n_boards())
        throw std::out_of_range("calibrate_board_phases: reference board out of range");

    const int n_boards = system.n_boards();
    const std::size_t per_board = 8ull * system.n_subcarriers();
    std::vector<std::complex<double>> acc(n_boards, {0.0, 0.0});

    for (const CsiDatapoint& dp : datapoints) {
        const std::vector<cfloat> model = channel_response(system, dp.x, paths);
        std::vector<double> phi(n_boards);
        for (int b = 0; b < n_boards; ++b) {
            std::complex<double> z{0.0, 0.0};
            const cfloat* obs = dp.h.data() + b * per_board;
            const cfloat* mod = model.data() + b * per_board;
            for (std::size_t i = 0; i < per_board; ++i)
                z += std::complex<double>(obs[i].real(), obs[i].imag()) *
                     std::complex<double>(mod[i].real(), -mod[i].imag());
            phi[b] = std::arg(z);
        }
        for (int b = 0; b < n_boards; ++b)
            acc[b] += std::polar(1.0, phi[b] - phi[reference_board]);
    }

    std::vector<double> psi(n_boards);
    for (int b = 0; b < n_boards; ++b)
        psi[b] = b == reference_board ? 0.0 : std::arg(acc[b]);
    return psi;
}

CsiDatapoint apply_phase_calibration(const ArraySystem& system, const CsiDatapoint& dp,
                                     const std::vector<double>& phases) {
    if (phases.size() != static_cast<std::size_t>(system.n_boards()))
        throw std::invalid_argument("apply_phase_calibration: need one phase per board");
    if (dp.h.size() != system.csi_size())
        throw std::invalid_argument("apply_phase_calibration: shape mismatch");
    for (double psi : phases)
        if (!std::isfinite(psi))
            throw std::invalid_argument("apply_phase_calibration: non-finite phase");

    CsiDatapoint out = dp;
    const std::size_t per_board = 8ull * system.n_subcarriers();
    for (int b = 0; b < system.n_boards(); ++b) {
        if (phases[b] == 0.0) continue;
        const std::complex<double> rot = std::polar(1.0, -phases[b]);
        cfloat* row = out.h.data() + b * per_board;
        for (std::size_t i = 0; i < per_board; ++i) {
            const std::complex<double> v =
                std::complex<double>(row[i].real(), row[i].imag()) * rot;
            row[i] = cfloat(static_cast<float>(v.real()), static_cast<float>(v.imag()));
        }
    }
    return out;
}

std::vector<std::uint8_t> encode_frame(const BoardFrame& frame) {
    const std::size_t size = 22 + 4 * frame.rssi.size() + 8 * frame.csi.size();
    std::vector<std::uint8_t> bytes(size);
    std::uint8_t* p = bytes.data();
    std::memcpy(p, &kDatagramMagic, 4);
    p += 4;
    *p++ = frame.board_id;
    *p++ = 0;  // reserved
    std::memcpy(p, &frame.wifi_seq, 2);
    p += 2;
    std::memcpy(p, frame.source_id.data(), 6);
    p += 6;
    std::memcpy(p, &frame.rx_timestamp, 8);
    p += 8;
    std::memcpy(p, frame.rssi.data(), 4 * frame.rssi.size());
    p += 4 * frame.rssi.size();
    std::memcpy(p, frame.csi.data(), 8 * frame.csi.size());
    return bytes;
}

BoardFrame decode_frame(const std::vector<std::uint8_t>& bytes, int n_subcarriers) {
    const std::size_t expected = 22 + 4ull * 8 + 8ull * 8 * n_subcarriers;
    if (bytes.size() != expected)
        throw std::invalid_argument("decode_frame: bad datagram length");
    std::uint32_t magic;
    std::memcpy(&magic, bytes.data(), 4);
    if (magic != kDatagramMagic) throw std::invalid_argument("decode_frame: bad magic");

    BoardFrame frame;
    const std::uint8_t* p = bytes.data() + 4;
    frame.board_id = *p++;
    ++p;  // reserved
    std::memcpy(&frame.wifi_seq, p, 2);
    p += 2;
    std::memcpy(frame.source_id.data(), p, 6);
    p += 6;
    std::memcpy(&frame.rx_timestamp, p, 8);
    p += 8;
    frame.rssi.resize(8);
    std::memcpy(frame.rssi.data(), p, 32);
    p += 32;
    frame.csi.resize(8ull * n_subcarriers);
    std::memcpy(frame.csi.data(), p, 8ull * frame.csi.size());
    return frame;
}

}  // namespace espcsi
