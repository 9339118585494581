#include "espcsi/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "espcsi/rng.hpp"

namespace espcsi {

namespace {

constexpr double kMinTxDistance = 1e-3;  // m

// Path length from tx to the given antenna, or nullopt when the bounce
// misses the reflector's finite extent (or the geometry is blocked).
std::optional<double> path_length(const PathSpec& path, const Vec3& tx, const Vec3& ant) {
    if (path.kind == PathSpec::Kind::LineOfSight) return (tx - ant).norm();

    const double nn = path.reflector_normal.norm();
    if (nn < 1e-12)
        throw std::invalid_argument("channel_response: reflector normal is degenerate");
    const Vec3 n = path.reflector_normal * (1.0 / nn);

    // Image source across the reflector plane.
    const double tx_side = (tx - path.reflector_point).dot(n);
    const Vec3 image = tx - 2.0 * tx_side * n;

    // Specular point = intersection of image->antenna with the plane.
    const Vec3 dir = ant - image;
    const double denom = dir.dot(n);
    if (std::abs(denom) < 1e-12)
        throw std::invalid_argument("channel_response: reflected path length undefined");
    const double s = (path.reflector_point - image).dot(n) / denom;
    if (s <= 0.0 || s >= 1.0) return std::nullopt;  // bounce behind the plane

    if (path.extent_a > 0.0) {
        const Vec3 hit = image + s * dir;
        const Vec3 u = path.extent_axis;
        const Vec3 v = n.cross(u);
        const Vec3 rel = hit - path.reflector_point;
        if (std::abs(rel.dot(u)) > path.extent_a) return std::nullopt;
        if (path.extent_b > 0.0 && std::abs(rel.dot(v)) > path.extent_b)
            return std::nullopt;
    }
    return dir.norm();
}

}  // namespace

std::vector<cfloat> channel_response(const ArraySystem& system, const Vec3& tx_position,
                                     const std::vector<PathSpec>& paths) {
    const int n_sub = system.n_subcarriers();
    const double f0 = subcarrier_frequency(system, 0);
    const double df = system.subcarrier_spacing();

    std::vector<std::complex<double>> acc(system.csi_size());
    for (int b = 0; b < system.n_boards(); ++b) {
        for (int r = 0; r < ArraySystem::kRows; ++r) {
            for (int c = 0; c < ArraySystem::kCols; ++c) {
                const Vec3 ant = antenna_position(system, b, r, c);
                if ((tx_position - ant).norm() <= kMinTxDistance)
                    throw std::invalid_argument(
                        "channel_response: tx coincides with an antenna");
                std::complex<double>* row = acc.data() + system.csi_index(b, r, c, 0);
                for (const PathSpec& path : paths) {
                    const auto d_opt = path_length(path, tx_position, ant);
                    if (!d_opt) continue;
                    const double d = *d_opt;
                    // Phase is linear in subcarrier index; rotate instead of
                    // evaluating exp() per subcarrier.
                    const std::complex<double> w0 =
                        path.gain * (1.0 / d) *
                        std::polar(1.0, -2.0 * M_PI * f0 * d / kSpeedOfLight);
                    const std::complex<double> step =
                        std::polar(1.0, -2.0 * M_PI * df * d / kSpeedOfLight);
                    std::complex<double> w = w0;
                    for (int n = 0; n < n_sub; ++n) {
                        row[n] += w;
                        w *= step;
                    }
                }
            }
        }
    }

    std::vector<cfloat> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i)
        out[i] = cfloat(static_cast<float>(acc[i].real()),
                        static_cast<float>(acc[i].imag()));
    return out;
}

double trajectory_duration(const TrajectorySpec& trajectory) {
    if (trajectory.duration) return *trajectory.duration;
    double length = 0.0;
    for (std::size_t i = 1; i < trajectory.waypoints.size(); ++i)
        length += (trajectory.waypoints[i] - trajectory.waypoints[i - 1]).norm();
    return length / trajectory.speed;
}

Vec3 trajectory_position(const TrajectorySpec& trajectory, double t) {
    double dist = trajectory.speed * (t - trajectory.start_time);
    if (dist <= 0.0) return trajectory.waypoints.front();
    for (std::size_t i = 1; i < trajectory.waypoints.size(); ++i) {
        const Vec3 seg = trajectory.waypoints[i] - trajectory.waypoints[i - 1];
        const double seg_len = seg.norm();
        if (dist <= seg_len && seg_len > 0.0)
            return trajectory.waypoints[i - 1] + (dist / seg_len) * seg;
        dist -= seg_len;
    }
    return trajectory.waypoints.back();
}

Dataset generate_dataset(const ArraySystem& system, const TrajectorySpec& trajectory,
                         const std::vector<PathSpec>& paths,
                         const ImpairmentSpec& impairments, std::uint64_t seed) {
    if (trajectory.waypoints.size() < 2)
        throw std::invalid_argument("generate_dataset: trajectory needs >= 2 waypoints");
    if (trajectory.speed <= 0.0 || trajectory.packet_rate <= 0.0)
        throw std::invalid_argument("generate_dataset: speed and packet_rate must be > 0");
    if (impairments.per_packet_timing_offset_std < 0.0 ||
        !std::isfinite(impairments.per_packet_timing_offset_std))
        throw std::invalid_argument("generate_dataset: bad timing offset std");
    if (impairments.noise_snr_db && !std::isfinite(*impairments.noise_snr_db))
        throw std::invalid_argument("generate_dataset: SNR must be finite");
    if (!impairments.per_board_phase_offsets.empty() &&
        impairments.per_board_phase_offsets.size() !=
            static_cast<std::size_t>(system.n_boards()))
        throw std::invalid_argument("generate_dataset: need one phase offset per board");
    for (double psi : impairments.per_board_phase_offsets)
        if (!std::isfinite(psi))
            throw std::invalid_argument("generate_dataset: non-finite board phase offset");

    const double duration = trajectory_duration(trajectory);
    const std::size_t n_packets =
        static_cast<std::size_t>(std::floor(duration * trajectory.packet_rate + 1e-9)) + 1;

    const int n_sub = system.n_subcarriers();
    const int n_boards = system.n_boards();
    const double f0 = subcarrier_frequency(system, 0);
    const double df = system.subcarrier_spacing();

    const bool any_multiplicative =
        impairments.per_packet_common_phase ||
        impairments.per_packet_timing_offset_std > 0.0 ||
        !impairments.per_board_phase_offsets.empty();

    Dataset dataset{system, {}, {}};
    dataset.points.reserve(n_packets);

    for (std::size_t l = 0; l < n_packets; ++l) {
        RandomStream rng(seed, l);
        const double t =
            trajectory.start_time + static_cast<double>(l) / trajectory.packet_rate;
        CsiDatapoint dp;
        dp.t = t;
        dp.x = trajectory_position(trajectory, t);
        dp.h = channel_response(system, dp.x, paths);

        if (any_multiplicative) {
            const double common_phase =
                impairments.per_packet_common_phase ? 2.0 * M_PI * rng.next_double() : 0.0;
            const double dt = impairments.per_packet_timing_offset_std > 0.0
                                  ? impairments.per_packet_timing_offset_std *
                                        rng.next_gaussian()
                                  : 0.0;
            for (int b = 0; b < n_boards; ++b) {
                const double psi = impairments.per_board_phase_offsets.empty()
                                       ? 0.0
                                       : impairments.per_board_phase_offsets[b];
                for (int a = 0; a < ArraySystem::kAntennasPerBoard; ++a) {
                    cfloat* row =
                        dp.h.data() + system.csi_index(b, a / 4, a % 4, 0);
                    std::complex<double> w = std::polar(
                        1.0, common_phase + psi - 2.0 * M_PI * f0 * dt);
                    const std::complex<double> step =
                        std::polar(1.0, -2.0 * M_PI * df * dt);
                    for (int n = 0; n < n_sub; ++n) {
                        const std::complex<double> v =
                            std::complex<double>(row[n].real(), row[n].imag()) * w;
                        row[n] = cfloat(static_cast<float>(v.real()),
                                        static_cast<float>(v.imag()));
                        w *= step;
                    }
                }
            }
        }

        if (impairments.noise_snr_db) {
            double mean_pow = 0.0;
            for (const cfloat& c : dp.h) mean_pow += std::norm(c);
            mean_pow /= static_cast<double>(dp.h.size());
            const double sigma =
                std::sqrt(mean_pow / std::pow(10.0, *impairments.noise_snr_db / 10.0) /
                          2.0);
            for (cfloat& c : dp.h) {
                c = cfloat(
                    static_cast<float>(c.real() + sigma * rng.next_gaussian()),
                    static_cast<float>(c.imag() + sigma * rng.next_gaussian()));
            }
        }

        dp.p.resize(system.rssi_size());
        for (std::size_t a = 0; a < dp.p.size(); ++a) {
            double pow_a = 0.0;
            const cfloat* row = dp.h.data() + a * n_sub;
            for (int n = 0; n < n_sub; ++n) pow_a += std::norm(row[n]);
            pow_a /= n_sub;
            double rssi = 10.0 * std::log10(std::max(pow_a, 1e-30)) +
                          impairments.rssi_calibration_db;
            if (impairments.rssi_jitter_std_db > 0.0)
                rssi += impairments.rssi_jitter_std_db * rng.next_gaussian();
            dp.p[a] = static_cast<float>(rssi);
        }

        dataset.points.push_back(std::move(dp));
    }
    return dataset;
}

}  // namespace espcsi
