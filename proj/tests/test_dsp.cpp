#include <doctest.h>

#include <cmath>
#include <numeric>

#include "espcsi/dsp.hpp"
#include "espcsi/rng.hpp"
#include "espcsi/synth.hpp"
#include "helpers.hpp"

using namespace espcsi;

namespace {

std::vector<cfloat> random_csi(const ArraySystem& system, std::uint64_t seed) {
    RandomStream rng(seed, 0);
    std::vector<cfloat> h(system.csi_size());
    for (auto& c : h)
        c = cfloat(static_cast<float>(rng.next_gaussian()),
                   static_cast<float>(rng.next_gaussian()));
    return h;
}

std::complex<double> widen(const cfloat& c) { return {c.real(), c.imag()}; }

double tensor_error(const std::vector<cfloat>& a, const std::vector<cfloat>& b) {
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) e += std::norm(widen(a[i]) - widen(b[i]));
    return e;
}

}  // namespace

TEST_CASE("rssi_weight sets each antenna row's RMS to 10^(p/20)") {
    const ArraySystem system = test::make_system(2, 16);
    std::vector<cfloat> h = random_csi(system, 1);
    std::vector<float> p(system.rssi_size());
    for (std::size_t a = 0; a < p.size(); ++a) p[a] = -60.0f + 5.0f * a;

    const auto w = rssi_weight(system, h, p);
    const int n_sub = system.n_subcarriers();
    for (std::size_t a = 0; a < p.size(); ++a) {
        double mean_pow = 0.0;
        for (int n = 0; n < n_sub; ++n) mean_pow += std::norm(w[a * n_sub + n]);
        mean_pow /= n_sub;
        CHECK(std::sqrt(mean_pow) ==
              doctest::Approx(std::pow(10.0, p[a] / 20.0)).epsilon(1e-5));
        // Pure positive real scaling: phases survive.
        for (int n = 0; n < n_sub; ++n) {
            CHECK(std::arg(widen(w[a * n_sub + n])) ==
                  doctest::Approx(std::arg(widen(h[a * n_sub + n]))).epsilon(1e-5));
        }
    }
}

TEST_CASE("rssi_weight rejects a zero-power antenna row") {
    const ArraySystem system = test::make_system(1, 8);
    std::vector<cfloat> h(system.csi_size(), cfloat{0.0f, 0.0f});
    std::vector<float> p(system.rssi_size(), -50.0f);
    CHECK_THROWS_AS(rssi_weight(system, h, p), std::invalid_argument);
}

TEST_CASE("phase alignment zeroes the reference antenna's mean phase") {
    const ArraySystem system = test::make_system(2, 16);
    const std::vector<cfloat> h = random_csi(system, 2);
    const AntennaIndex ref{1, 0, 2};
    const auto aligned = align_packet_phase(system, h, ref);

    std::complex<double> m{0.0, 0.0};
    const int n_sub = system.n_subcarriers();
    for (int n = 0; n < n_sub; ++n)
        m += widen(aligned[system.csi_index(1, 0, 2, n)]);
    CHECK(std::abs(std::arg(m)) < 1e-5);
}

TEST_CASE("phase alignment is invariant to a common packet phase") {
    const ArraySystem system = test::make_system(1, 32);
    const std::vector<cfloat> h = random_csi(system, 3);
    const auto base = align_packet_phase(system, h, {});

    SUBCASE("quarter-turn rotation, bit-exact") {
        std::vector<cfloat> rotated(h.size());
        for (std::size_t i = 0; i < h.size(); ++i)
            rotated[i] = cfloat(-h[i].imag(), h[i].real());  // multiply by j
        const auto aligned = align_packet_phase(system, rotated, {});
        CHECK(aligned == base);
    }

    SUBCASE("arbitrary rotation, float tolerance") {
        const std::complex<double> rot = std::polar(1.0, 1.234);
        std::vector<cfloat> rotated(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) {
            const auto v = widen(h[i]) * rot;
            rotated[i] = cfloat(static_cast<float>(v.real()), static_cast<float>(v.imag()));
        }
        const auto aligned = align_packet_phase(system, rotated, {});
        for (std::size_t i = 0; i < h.size(); ++i) {
            CHECK(aligned[i].real() ==
                  doctest::Approx(base[i].real()).epsilon(1e-4).scale(1e-2));
            CHECK(aligned[i].imag() ==
                  doctest::Approx(base[i].imag()).epsilon(1e-4).scale(1e-2));
        }
    }
}

TEST_CASE("interpolating a single packet reduces to phase alignment") {
    const ArraySystem system = test::make_system(1, 16);
    ImpairmentSpec imp;
    imp.noise_snr_db = 15.0;
    Dataset ds = generate_dataset(system, test::stationary_at({0.3, 2.0, 0.1}, 0.1, 10.0),
                                  test::los_only(), imp, 4);
    const std::vector<const CsiDatapoint*> window = {&ds.points[0]};
    const auto out = interpolate_csi(system, window, ds.points[0].t, {});
    const auto aligned = align_packet_phase(system, ds.points[0].h, {});
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].real() == doctest::Approx(aligned[i].real()).epsilon(1e-6).scale(1e-3));
        CHECK(out[i].imag() == doctest::Approx(aligned[i].imag()).epsilon(1e-6).scale(1e-3));
    }
}

TEST_CASE("interpolating identical packets is a fixed point") {
    const ArraySystem system = test::make_system(1, 16);
    ImpairmentSpec imp;  // clean: all 40 packets identical
    Dataset ds = generate_dataset(system, test::stationary_at({0.3, 2.0, 0.1}, 3.9, 10.0),
                                  test::los_only(), imp, 4);
    REQUIRE(ds.points.size() == 40);
    std::vector<const CsiDatapoint*> window;
    for (const auto& dp : ds.points) window.push_back(&dp);

    const double t_center = 0.5 * (ds.points.front().t + ds.points.back().t);
    const auto out = interpolate_csi(system, window, t_center, {});
    const auto aligned = align_packet_phase(system, ds.points[0].h, {});
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].real() == doctest::Approx(aligned[i].real()).epsilon(1e-5).scale(1e-3));
        CHECK(out[i].imag() == doctest::Approx(aligned[i].imag()).epsilon(1e-5).scale(1e-3));
    }
}

TEST_CASE("coherent averaging of 40 noisy packets cuts error power by >= 10x") {
    const ArraySystem system = test::make_system(1, 16);
    const Vec3 tx{0.3, 2.0, 0.1};
    const auto clean = align_packet_phase(system, channel_response(system, tx, test::los_only()), {});

    double single_err = 0.0, interp_err = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        ImpairmentSpec imp;
        imp.noise_snr_db = 10.0;
        imp.per_packet_common_phase = true;
        Dataset ds = generate_dataset(system, test::stationary_at(tx, 3.9, 10.0),
                                      test::los_only(), imp, 1000 + trial);
        REQUIRE(ds.points.size() == 40);
        std::vector<const CsiDatapoint*> window;
        for (const auto& dp : ds.points) window.push_back(&dp);
        const double t_center = 0.5 * (ds.points.front().t + ds.points.back().t);

        const auto out = interpolate_csi(system, window, t_center, {});
        interp_err += tensor_error(out, clean);
        for (const auto& dp : ds.points)
            single_err += tensor_error(align_packet_phase(system, dp.h, {}), clean) / 40.0;
    }
    CHECK(single_err / interp_err >= 10.0);
}

TEST_CASE("a flat spectrum concentrates in tap zero with value one") {
    const ArraySystem system = test::make_system(1, 16);
    std::vector<cfloat> h(system.csi_size(), cfloat{1.0f, 0.0f});
    FeatureConfig config;
    config.n_taps = 4;
    config.unit_power_normalization = false;
    const auto f = extract_features(system, h, config);
    REQUIRE(f.size() == feature_length(system, config));

    const std::size_t n_antennas = system.rssi_size();
    for (std::size_t a = 0; a < n_antennas; ++a) {
        CHECK(f[a * 4 + 0] == doctest::Approx(1.0).epsilon(1e-9));
        for (int k = 1; k < 4; ++k) {
            CHECK(std::abs(f[a * 4 + k]) < 1e-9);                     // real
            CHECK(std::abs(f[n_antennas * 4 + a * 4 + k]) < 1e-9);    // imag
        }
    }
}

TEST_CASE("a subcarrier phase ramp lands in the matching tap") {
    const ArraySystem system = test::make_system(1, 16);
    const int n_sub = 16, m = 3;
    std::vector<cfloat> h(system.csi_size());
    // 2 + e^{-j 2 pi m n / N}: nonzero mean keeps alignment a no-op.
    for (std::size_t a = 0; a < system.rssi_size(); ++a)
        for (int n = 0; n < n_sub; ++n) {
            const auto v = 2.0 + std::polar(1.0, -2.0 * M_PI * m * n / n_sub);
            h[a * n_sub + n] = cfloat(static_cast<float>(v.real()),
                                      static_cast<float>(v.imag()));
        }
    FeatureConfig config;
    config.n_taps = 8;
    config.unit_power_normalization = false;
    const auto f = extract_features(system, h, config);
    const std::size_t n_antennas = system.rssi_size();
    for (std::size_t a = 0; a < n_antennas; ++a) {
        CHECK(f[a * 8 + 0] == doctest::Approx(2.0).epsilon(1e-5));
        CHECK(f[a * 8 + m] == doctest::Approx(1.0).epsilon(1e-5));
        for (int k = 1; k < 8; ++k) {
            if (k == m) continue;
            CHECK(std::abs(f[a * 8 + k]) < 1e-5);
            CHECK(std::abs(f[n_antennas * 8 + a * 8 + k]) < 1e-5);
        }
    }
}

TEST_CASE("feature vector length is 2 * B * 8 * n_taps") {
    const ArraySystem system = test::make_system(4, 117);
    FeatureConfig config;
    config.n_taps = 16;
    CHECK(feature_length(system, config) == 1024);
    const auto f = extract_features(system, random_csi(system, 9), config);
    CHECK(f.size() == 1024);
}

TEST_CASE("unit normalization yields an L2-norm-one feature vector") {
    const ArraySystem system = test::make_system(2, 32);
    FeatureConfig config;
    const auto f = extract_features(system, random_csi(system, 10), config);
    const double e = std::inner_product(f.begin(), f.end(), f.begin(), 0.0);
    CHECK(e == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a channel built from the first taps is recovered exactly") {
    const ArraySystem system = test::make_system(1, 32);
    const int n_sub = 32, n_taps = 6;
    RandomStream rng(77, 0);
    std::vector<std::complex<double>> taps(n_taps);
    taps[0] = {4.0, 0.0};  // dominant real tap keeps alignment a no-op
    for (int k = 1; k < n_taps; ++k)
        taps[k] = {0.3 * rng.next_gaussian(), 0.3 * rng.next_gaussian()};

    std::vector<cfloat> h(system.csi_size());
    for (std::size_t a = 0; a < system.rssi_size(); ++a)
        for (int n = 0; n < n_sub; ++n) {
            std::complex<double> v{0.0, 0.0};
            for (int k = 0; k < n_taps; ++k)
                v += taps[k] * std::polar(1.0, -2.0 * M_PI * k * n / n_sub);
            h[a * n_sub + n] = cfloat(static_cast<float>(v.real()),
                                      static_cast<float>(v.imag()));
        }

    FeatureConfig config;
    config.n_taps = n_taps;
    config.unit_power_normalization = false;
    const auto f = extract_features(system, h, config);
    const std::size_t n_antennas = system.rssi_size();
    for (std::size_t a = 0; a < n_antennas; ++a)
        for (int k = 0; k < n_taps; ++k) {
            CHECK(f[a * n_taps + k] == doctest::Approx(taps[k].real()).epsilon(1e-5).scale(1e-2));
            CHECK(f[n_antennas * n_taps + a * n_taps + k] ==
                  doctest::Approx(taps[k].imag()).epsilon(1e-5).scale(1e-2));
        }
}

TEST_CASE("broadside transmitter estimates to azimuth zero") {
    const ArraySystem system = test::make_system(1, 16);
    const Vec3 tx{0.0, 40.0, 0.0};
    const auto h = channel_response(system, tx, test::los_only());
    CHECK(true_azimuth(system, 0, tx) == doctest::Approx(0.0));
    CHECK(std::abs(estimate_aoa(system, h, 0)) < 1e-3);
}

TEST_CASE("oblique transmitter matches a fine-grid oracle within 0.5 degrees") {
    const ArraySystem system = test::make_system(1, 16);
    const double theta = 30.0 * M_PI / 180.0;
    const Vec3 tx{50.0 * std::sin(theta), 50.0 * std::cos(theta), 0.0};
    const auto h = channel_response(system, tx, test::los_only());

    AoaConfig fine;
    fine.grid_points = 18001;  // 0.01 degree spacing over +-90
    const double oracle = estimate_aoa(system, h, 0, fine);
    const double est = estimate_aoa(system, h, 0);
    CHECK(std::abs(est - oracle) < 0.5 * M_PI / 180.0);
    CHECK(std::abs(oracle - true_azimuth(system, 0, tx)) < 0.5 * M_PI / 180.0);
}

TEST_CASE("refined estimate stays within one grid cell of the argmax") {
    const ArraySystem system = test::make_system(1, 16);
    AoaConfig config;
    const double dtheta = (config.grid_stop - config.grid_start) / (config.grid_points - 1);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto h = random_csi(system, 100 + s);
        const auto spectrum = aoa_spectrum(system, h, 0, config);
        int best = 0;
        for (int i = 1; i < config.grid_points; ++i)
            if (spectrum[i] > spectrum[best]) best = i;
        const double argmax = config.grid_start + best * dtheta;
        CHECK(std::abs(estimate_aoa(system, h, 0) - argmax) <= dtheta);
    }
}

TEST_CASE("spectrum scales with |c|^2 and the estimate ignores global phase") {
    const ArraySystem system = test::make_system(1, 16);
    const auto h = random_csi(system, 55);
    const std::complex<double> c = std::polar(2.5, 0.9);
    std::vector<cfloat> scaled(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const auto v = widen(h[i]) * c;
        scaled[i] = cfloat(static_cast<float>(v.real()), static_cast<float>(v.imag()));
    }
    const auto s0 = aoa_spectrum(system, h, 0, {});
    const auto s1 = aoa_spectrum(system, scaled, 0, {});
    for (std::size_t i = 0; i < s0.size(); ++i)
        CHECK(s1[i] == doctest::Approx(s0[i] * std::norm(c)).epsilon(1e-4));
    CHECK(estimate_aoa(system, scaled, 0) ==
          doctest::Approx(estimate_aoa(system, h, 0)).epsilon(1e-6));
}

TEST_CASE("aoa rejects bad input") {
    const ArraySystem system = test::make_system(1, 16);
    const auto h = random_csi(system, 7);
    CHECK_THROWS_AS(estimate_aoa(system, h, 1), std::out_of_range);
    std::vector<cfloat> zeros(system.csi_size(), cfloat{0.0f, 0.0f});
    CHECK_THROWS_AS(estimate_aoa(system, zeros, 0), std::invalid_argument);
    AoaConfig bad;
    bad.grid_points = 2;
    CHECK_THROWS_AS(estimate_aoa(system, h, 0, bad), std::invalid_argument);
}
