#include "espcsi/dsp.hpp"

#include <cmath>
#include <stdexcept>

namespace espcsi {

namespace {

void check_shape(const ArraySystem& system, const std::vector<cfloat>& h) {
    if (h.size() != system.csi_size())
        throw std::invalid_argument("dsp: CSI tensor shape mismatch");
}

std::complex<double> widen(const cfloat& c) { return {c.real(), c.imag()}; }

}  // namespace

std::vector<cfloat> rssi_weight(const ArraySystem& system, const std::vector<cfloat>& h,
                                const std::vector<float>& p) {
    check_shape(system, h);
    if (p.size() != system.rssi_size())
        throw std::invalid_argument("rssi_weight: RSSI tensor shape mismatch");

    const int n_sub = system.n_subcarriers();
    std::vector<cfloat> out(h.size());
    for (std::size_t a = 0; a < p.size(); ++a) {
        const cfloat* src = h.data() + a * n_sub;
        double mean_pow = 0.0;
        for (int n = 0; n < n_sub; ++n) mean_pow += std::norm(src[n]);
        mean_pow /= n_sub;
        if (mean_pow == 0.0)
            throw std::invalid_argument(
                "rssi_weight: cannot scale zero-power antenna " + std::to_string(a));
        const double scale = std::pow(10.0, p[a] / 20.0) / std::sqrt(mean_pow);
        cfloat* dst = out.data() + a * n_sub;
        for (int n = 0; n < n_sub; ++n)
            dst[n] = cfloat(static_cast<float>(src[n].real() * scale),
                            static_cast<float>(src[n].imag() * scale));
    }
    return out;
}

std::vector<cfloat> align_packet_phase(const ArraySystem& system,
                                       const std::vector<cfloat>& h,
                                       const AntennaIndex& reference) {
    check_shape(system, h);
    const int n_sub = system.n_subcarriers();
    const cfloat* ref =
        h.data() + system.csi_index(reference.board, reference.row, reference.col, 0);
    std::complex<double> m{0.0, 0.0};
    for (int n = 0; n < n_sub; ++n) m += widen(ref[n]);
    if (std::abs(m) == 0.0)
        throw std::invalid_argument("align_packet_phase: reference antenna has zero energy");
    const std::complex<double> rot = std::polar(1.0, -std::arg(m));

    std::vector<cfloat> out(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const std::complex<double> v = widen(h[i]) * rot;
        out[i] = cfloat(static_cast<float>(v.real()), static_cast<float>(v.imag()));
    }
    return out;
}

std::vector<cfloat> interpolate_csi(const ArraySystem& system,
                                    const std::vector<const CsiDatapoint*>& window,
                                    double t_center, const AntennaIndex& reference,
                                    bool rssi_weighting) {
    if (window.empty()) throw std::invalid_argument("interpolate_csi: empty window");

    double span = 0.0;
    for (const CsiDatapoint* dp : window)
        span = std::max(span, std::abs(dp->t - t_center));
    // Slightly inflate the kernel half-width so the farthest packet still
    // contributes and a symmetric two-packet window has nonzero mass.
    const double half_width =
        span > 0.0 ? span * (1.0 + 1.0 / static_cast<double>(window.size())) : 1.0;

    std::vector<std::complex<double>> acc(system.csi_size());
    double weight_sum = 0.0;
    for (const CsiDatapoint* dp : window) {
        std::vector<cfloat> aligned =
            rssi_weighting ? align_packet_phase(system, rssi_weight(system, dp->h, dp->p),
                                                reference)
                           : align_packet_phase(system, dp->h, reference);
        const double w = 1.0 - std::abs(dp->t - t_center) / half_width;
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * widen(aligned[i]);
        weight_sum += w;
    }

    std::vector<cfloat> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) {
        const std::complex<double> v = acc[i] / weight_sum;
        out[i] = cfloat(static_cast<float>(v.real()), static_cast<float>(v.imag()));
    }
    return out;
}

std::vector<double> extract_features(const ArraySystem& system,
                                     const std::vector<cfloat>& h,
                                     const FeatureConfig& config) {
    check_shape(system, h);
    const int n_sub = system.n_subcarriers();
    if (config.n_taps < 1 || config.n_taps > n_sub)
        throw std::invalid_argument("extract_features: n_taps out of range");

    std::vector<cfloat> conditioned = align_packet_phase(system, h, config.alignment_reference);
    const std::size_t n_antennas = system.rssi_size();
    const int n_taps = config.n_taps;

    // Twiddles for tap k: e^{+j 2 pi k n / N}, 1/N scaling.
    std::vector<std::complex<double>> twiddle(n_sub);
    std::vector<double> features(2 * n_antennas * n_taps);
    double* re = features.data();
    double* im = features.data() + n_antennas * n_taps;

    for (int k = 0; k < n_taps; ++k) {
        for (int n = 0; n < n_sub; ++n)
            twiddle[n] = std::polar(1.0 / n_sub, 2.0 * M_PI * k * n / n_sub);
        for (std::size_t a = 0; a < n_antennas; ++a) {
            const cfloat* row = conditioned.data() + a * n_sub;
            std::complex<double> tap{0.0, 0.0};
            for (int n = 0; n < n_sub; ++n) tap += widen(row[n]) * twiddle[n];
            re[a * n_taps + k] = tap.real();
            im[a * n_taps + k] = tap.imag();
        }
    }

    if (config.unit_power_normalization) {
        double energy = 0.0;
        for (double v : features) energy += v * v;
        if (energy > 0.0) {
            const double inv = 1.0 / std::sqrt(energy);
            for (double& v : features) v *= inv;
        }
    }
    return features;
}

std::vector<double> datapoint_features(const ArraySystem& system, const CsiDatapoint& dp,
                                       const FeatureConfig& config) {
    if (config.rssi_weighting)
        return extract_features(system, rssi_weight(system, dp.h, dp.p), config);
    return extract_features(system, dp.h, config);
}

std::vector<double> aoa_spectrum(const ArraySystem& system, const std::vector<cfloat>& h,
                                 int board, const AoaConfig& config) {
    check_shape(system, h);
    if (board < 0 || board >= system.n_boards())
        throw std::out_of_range("aoa: board index out of range");
    if (config.grid_points < 3)
        throw std::invalid_argument("aoa: grid needs at least 3 points");

    const int n_sub = system.n_subcarriers();
    const BoardPose& pose = system.boards()[board];
    const Vec3 normal = pose.normal();

    double energy = 0.0;
    for (int a = 0; a < ArraySystem::kAntennasPerBoard; ++a) {
        const cfloat* row = h.data() + system.csi_index(board, a / 4, a % 4, 0);
        for (int n = 0; n < n_sub; ++n) energy += std::norm(row[n]);
    }
    if (energy == 0.0) throw std::invalid_argument("aoa: all-zero CSI for board");

    const double f0 = subcarrier_frequency(system, 0);
    const double df = system.subcarrier_spacing();
    const double dtheta =
        (config.grid_stop - config.grid_start) / (config.grid_points - 1);

    std::vector<double> spectrum(config.grid_points, 0.0);
    std::vector<std::complex<double>> acc(n_sub);
    for (int gi = 0; gi < config.grid_points; ++gi) {
        const double theta = config.grid_start + gi * dtheta;
        const Vec3 u = std::cos(theta) * normal + std::sin(theta) * pose.col_axis;
        std::fill(acc.begin(), acc.end(), std::complex<double>{0.0, 0.0});
        for (int a = 0; a < ArraySystem::kAntennasPerBoard; ++a) {
            const int r = a / 4, c = a % 4;
            const double proj = (antenna_position(system, board, r, c) - pose.center).dot(u);
            // conj(steering) per subcarrier: e^{-j 2 pi f_n proj / c0}
            std::complex<double> w =
                std::polar(1.0, -2.0 * M_PI * f0 * proj / kSpeedOfLight);
            const std::complex<double> step =
                std::polar(1.0, -2.0 * M_PI * df * proj / kSpeedOfLight);
            const cfloat* row = h.data() + system.csi_index(board, r, c, 0);
            for (int n = 0; n < n_sub; ++n) {
                acc[n] += w * widen(row[n]);
                w *= step;
            }
        }
        double power = 0.0;
        for (int n = 0; n < n_sub; ++n) power += std::norm(acc[n]);
        spectrum[gi] = power;
    }
    return spectrum;
}

double estimate_aoa(const ArraySystem& system, const std::vector<cfloat>& h, int board,
                    const AoaConfig& config) {
    const std::vector<double> spectrum = aoa_spectrum(system, h, board, config);
    int best = 0;
    for (int i = 1; i < static_cast<int>(spectrum.size()); ++i)
        if (spectrum[i] > spectrum[best]) best = i;

    const double dtheta =
        (config.grid_stop - config.grid_start) / (config.grid_points - 1);
    double theta = config.grid_start + best * dtheta;
    if (best > 0 && best + 1 < static_cast<int>(spectrum.size())) {
        const double a = spectrum[best - 1], b = spectrum[best], c = spectrum[best + 1];
        const double denom = a - 2.0 * b + c;
        if (denom < 0.0) theta += 0.5 * (a - c) / denom * dtheta;
    }
    return theta;
}

double true_azimuth(const ArraySystem& system, int board, const Vec3& x) {
    if (board < 0 || board >= system.n_boards())
        throw std::out_of_range("true_azimuth: board index out of range");
    const BoardPose& pose = system.boards()[board];
    const Vec3 d = x - pose.center;
    return std::atan2(d.dot(pose.col_axis), d.dot(pose.normal()));
}

}  // namespace espcsi
