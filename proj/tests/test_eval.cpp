#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "espcsi/eval.hpp"
#include "espcsi/rng.hpp"

using namespace espcsi;

namespace {

std::vector<Point2> random_points(std::size_t n, std::uint64_t seed, double spread = 3.0) {
    RandomStream rng(seed, 0);
    std::vector<Point2> p(n);
    for (auto& q : p) q = {spread * rng.next_gaussian(), spread * rng.next_gaussian()};
    return p;
}

// Independent quadratic-time reference for the rank metrics: sorts the
// full distance lists with index tie-breaks and applies the definition
// literally.
std::pair<double, double> ct_tw_reference(const std::vector<Point2>& truth,
                                          const std::vector<Point2>& chart, int k) {
    const std::size_t n = truth.size();
    auto ranks_of = [n](const std::vector<Point2>& pts, std::size_t i) {
        std::vector<std::pair<double, std::size_t>> order;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = pts[i][0] - pts[j][0], dy = pts[i][1] - pts[j][1];
            order.emplace_back(dx * dx + dy * dy, j);
        }
        std::sort(order.begin(), order.end());
        std::vector<std::size_t> rank(n, 0);
        for (std::size_t r = 0; r < order.size(); ++r) rank[order[r].second] = r + 1;
        return rank;
    };

    auto penalty = [&](const std::vector<Point2>& a, const std::vector<Point2>& b) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto ra = ranks_of(a, i);
            const auto rb = ranks_of(b, i);
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                if (ra[j] <= static_cast<std::size_t>(k) &&
                    rb[j] > static_cast<std::size_t>(k))
                    total += static_cast<double>(rb[j]) - k;
            }
        }
        return total;
    };

    const double norm = 2.0 / (static_cast<double>(n) * k * (2.0 * n - 3.0 * k - 1.0));
    return {1.0 - norm * penalty(truth, chart), 1.0 - norm * penalty(chart, truth)};
}

double kruskal_reference(const std::vector<Point2>& truth, const std::vector<Point2>& chart) {
    const std::size_t n = truth.size();
    std::vector<double> d, dh;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            d.push_back(std::hypot(truth[i][0] - truth[j][0], truth[i][1] - truth[j][1]));
            dh.push_back(std::hypot(chart[i][0] - chart[j][0], chart[i][1] - chart[j][1]));
        }
    const double beta = std::inner_product(d.begin(), d.end(), dh.begin(), 0.0) /
                        std::inner_product(dh.begin(), dh.end(), dh.begin(), 0.0);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        num += (beta * dh[i] - d[i]) * (beta * dh[i] - d[i]);
        den += d[i] * d[i];
    }
    return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("identity chart fits the identity affine transform") {
    const auto truth = random_points(50, 1);
    const AffineTransform t = fit_affine(truth, truth);
    CHECK(t.a[0][0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(t.a[0][1] == doctest::Approx(0.0).epsilon(1e-10).scale(1.0));
    CHECK(t.a[1][0] == doctest::Approx(0.0).epsilon(1e-10).scale(1.0));
    CHECK(t.a[1][1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(t.b[0] == doctest::Approx(0.0).epsilon(1e-10).scale(1.0));
    CHECK(t.b[1] == doctest::Approx(0.0).epsilon(1e-10).scale(1.0));
}

TEST_CASE("apply_affine matches manual arithmetic") {
    AffineTransform t;
    t.a = {{{2.0, -1.0}, {0.5, 3.0}}};
    t.b = {1.0, -2.0};
    const Point2 y{3.0, 4.0};
    const Point2 out = apply_affine(t, y);
    CHECK(out[0] == 2.0 * 3.0 - 1.0 * 4.0 + 1.0);
    CHECK(out[1] == 0.5 * 3.0 + 3.0 * 4.0 - 2.0);

    AffineTransform zero;
    zero.a = {{{0.0, 0.0}, {0.0, 0.0}}};
    zero.b = {7.0, -3.0};
    CHECK(apply_affine(zero, y) == Point2{7.0, -3.0});
}

TEST_CASE("random affine maps are recovered to 1e-8") {
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        RandomStream rng(trial, 1);
        AffineTransform gt;
        do {
            gt.a = {{{rng.next_gaussian(), rng.next_gaussian()},
                     {rng.next_gaussian(), rng.next_gaussian()}}};
        } while (std::abs(gt.a[0][0] * gt.a[1][1] - gt.a[0][1] * gt.a[1][0]) < 0.1);
        gt.b = {5.0 * rng.next_gaussian(), 5.0 * rng.next_gaussian()};

        const auto chart = random_points(60, 1000 + trial);
        std::vector<Point2> truth(chart.size());
        for (std::size_t i = 0; i < chart.size(); ++i)
            truth[i] = apply_affine(gt, chart[i]);

        const AffineTransform est = fit_affine(chart, truth);
        double max_err = 0.0;
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 2; ++c)
                max_err = std::max(max_err, std::abs(est.a[r][c] - gt.a[r][c]));
            max_err = std::max(max_err, std::abs(est.b[r] - gt.b[r]));
        }
        CHECK(max_err <= 1e-8);
    }
}

TEST_CASE("least-squares fit beats nearby perturbed transforms") {
    const auto chart = random_points(80, 5);
    std::vector<Point2> truth(chart.size());
    RandomStream rng(5, 2);
    for (std::size_t i = 0; i < chart.size(); ++i)
        truth[i] = {1.4 * chart[i][0] - 0.3 * chart[i][1] + 2.0 + 0.05 * rng.next_gaussian(),
                    0.2 * chart[i][0] + 0.9 * chart[i][1] - 1.0 + 0.05 * rng.next_gaussian()};

    const AffineTransform fit = fit_affine(chart, truth);
    auto residual = [&](const AffineTransform& t) {
        double s = 0.0;
        for (std::size_t i = 0; i < chart.size(); ++i) {
            const Point2 p = apply_affine(t, chart[i]);
            s += (p[0] - truth[i][0]) * (p[0] - truth[i][0]) +
                 (p[1] - truth[i][1]) * (p[1] - truth[i][1]);
        }
        return s;
    };
    const double best = residual(fit);
    for (int param = 0; param < 6; ++param) {
        for (double delta : {-1e-3, 1e-3}) {
            AffineTransform perturbed = fit;
            if (param < 4)
                perturbed.a[param / 2][param % 2] += delta;
            else
                perturbed.b[param - 4] += delta;
            CHECK(residual(perturbed) > best);
        }
    }
}

TEST_CASE("degenerate (collinear) charts are rejected") {
    std::vector<Point2> chart, truth;
    for (int i = 0; i < 10; ++i) {
        chart.push_back({static_cast<double>(i), 2.0 * i});  // a line
        truth.push_back({static_cast<double>(i), 1.0});
    }
    CHECK_THROWS_WITH_AS(fit_affine(chart, truth), doctest::Contains("degenerate"),
                         std::invalid_argument);
    CHECK_THROWS_AS(fit_affine({{0, 0}, {1, 1}}, {{0, 0}, {1, 1}}),
                    std::invalid_argument);
}

TEST_CASE("an identical chart scores ct = tw = 1") {
    const auto truth = random_points(100, 7);
    const auto [ct, tw] = continuity_trustworthiness(truth, truth, 10);
    CHECK(ct == 1.0);
    CHECK(tw == 1.0);
}

TEST_CASE("a rigid transform of the truth scores ct = tw = 1") {
    const auto truth = random_points(150, 8);
    const double phi = 0.87;
    std::vector<Point2> chart(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
        chart[i] = {std::cos(phi) * truth[i][0] - std::sin(phi) * truth[i][1] + 4.0,
                    std::sin(phi) * truth[i][0] + std::cos(phi) * truth[i][1] - 2.0};
    const auto [ct, tw] = continuity_trustworthiness(truth, chart, 12);
    CHECK(ct == 1.0);
    CHECK(tw == 1.0);
}

TEST_CASE("a random permutation scrambles ct and tw below 0.8") {
    const auto truth = random_points(200, 9);
    std::vector<Point2> chart = truth;
    RandomStream rng(9, 3);
    for (std::size_t i = chart.size() - 1; i > 0; --i)
        std::swap(chart[i], chart[rng.next_below(i + 1)]);

    const auto [ct, tw] = continuity_trustworthiness(truth, chart, 10);
    CHECK(ct < 0.8);
    CHECK(tw < 0.8);
    const auto [rct, rtw] = ct_tw_reference(truth, chart, 10);
    CHECK(ct == doctest::Approx(rct).epsilon(1e-12));
    CHECK(tw == doctest::Approx(rtw).epsilon(1e-12));
}

TEST_CASE("rank metrics agree with the quadratic reference on N = 200") {
    const auto truth = random_points(200, 13);
    auto chart = random_points(200, 14, 1.0);
    // Correlate the chart with the truth so the metric is nontrivial.
    for (std::size_t i = 0; i < chart.size(); ++i) {
        chart[i][0] += 0.8 * truth[i][0];
        chart[i][1] += 0.8 * truth[i][1];
    }
    for (int k : {1, 5, 10, 25}) {
        const auto [ct, tw] = continuity_trustworthiness(truth, chart, k);
        const auto [rct, rtw] = ct_tw_reference(truth, chart, k);
        CHECK(std::abs(ct - rct) <= 1e-9);
        CHECK(std::abs(tw - rtw) <= 1e-9);
        CHECK(ct >= 0.0);
        CHECK(ct <= 1.0);
        CHECK(tw >= 0.0);
        CHECK(tw <= 1.0);
    }
}

TEST_CASE("ct/tw preconditions") {
    const auto truth = random_points(20, 2);
    CHECK_THROWS_AS(continuity_trustworthiness(truth, truth, 0), std::invalid_argument);
    CHECK_THROWS_AS(continuity_trustworthiness(truth, truth, 13), std::invalid_argument);
    CHECK_NOTHROW(continuity_trustworthiness(truth, truth, 12));
}

TEST_CASE("kruskal stress vanishes for scaled isometries") {
    const auto truth = random_points(60, 20);
    std::vector<Point2> chart(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
        chart[i] = {2.5 * truth[i][1] + 1.0, -2.5 * truth[i][0] - 3.0};  // rotate + scale
    CHECK(kruskal_stress(truth, chart) < 1e-12);
}

TEST_CASE("kruskal stress is chart-scale-invariant and matches the reference") {
    const auto truth = random_points(80, 21);
    const auto chart = random_points(80, 22);
    const double ks = kruskal_stress(truth, chart);
    CHECK(ks == doctest::Approx(kruskal_reference(truth, chart)).epsilon(1e-12));

    std::vector<Point2> scaled(chart.size());
    for (std::size_t i = 0; i < chart.size(); ++i)
        scaled[i] = {7.0 * chart[i][0], 7.0 * chart[i][1]};
    CHECK(kruskal_stress(truth, scaled) == doctest::Approx(ks).epsilon(1e-12));
}

TEST_CASE("kruskal stress rejects a collapsed chart") {
    const auto truth = random_points(10, 23);
    const std::vector<Point2> collapsed(10, Point2{1.0, 1.0});
    CHECK_THROWS_AS(kruskal_stress(truth, collapsed), std::invalid_argument);
}

TEST_CASE("mae and cep on hand-computed radii") {
    // Radial errors 0.1, 0.2, 0.3, 10: mean 2.65, even-count median 0.25.
    const std::vector<Point2> truth = {{0, 0}, {0, 0}, {0, 0}, {0, 0}};
    const std::vector<Point2> reg = {{0.1, 0}, {0, 0.2}, {-0.3, 0}, {6, 8}};
    const auto [mae, cep] = mae_cep(truth, reg);
    CHECK(mae == doctest::Approx(2.65).epsilon(1e-12));
    CHECK(cep == doctest::Approx(0.25).epsilon(1e-12));

    // Odd count: median is the middle radius.
    const std::vector<Point2> truth3 = {{0, 0}, {0, 0}, {0, 0}};
    const std::vector<Point2> reg3 = {{1, 0}, {0, 5}, {3, 4}};
    const auto [mae3, cep3] = mae_cep(truth3, reg3);
    CHECK(mae3 == doctest::Approx(11.0 / 3.0).epsilon(1e-12));
    CHECK(cep3 == doctest::Approx(5.0).epsilon(1e-12));

    const auto [zm, zc] = mae_cep(truth, truth);
    CHECK(zm == 0.0);
    CHECK(zc == 0.0);
}

TEST_CASE("default neighborhood size is max(10, round(N/100))") {
    CHECK(default_k(50) == 10);
    CHECK(default_k(1000) == 10);
    CHECK(default_k(1049) == 10);
    CHECK(default_k(2500) == 25);
    CHECK(default_k(5000) == 50);
}

TEST_CASE("evaluating an oracle chart yields perfect scores") {
    const auto truth = random_points(300, 30);
    AffineTransform sim;  // scaled rotation: neighbor sets survive
    sim.a = {{{0.6, 0.2}, {-0.2, 0.6}}};
    sim.b = {3.0, -1.0};
    std::vector<Point2> chart(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) chart[i] = apply_affine(sim, truth[i]);

    const MetricReport report = evaluate_points(chart, truth, 0, 0, 0);
    CHECK(report.ct == 1.0);
    CHECK(report.tw == 1.0);
    CHECK(report.ks <= 1e-9);
    CHECK(report.mae <= 1e-9);
    CHECK(report.cep <= 1e-9);
    CHECK(report.k_neighbors == default_k(300));
    CHECK(report.n_eval == 300);

    // An isometric chart also maxes the rank metrics and kills the stress.
    std::vector<Point2> rigid(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
        rigid[i] = {truth[i][1] + 2.0, -truth[i][0] + 1.0};
    const MetricReport r2 = evaluate_points(rigid, truth, 0, 0, 0);
    CHECK(r2.ct == 1.0);
    CHECK(r2.tw == 1.0);
    CHECK(r2.ks <= 1e-9);
    CHECK(r2.mae <= 1e-9);
    CHECK(r2.cep <= 1e-9);
}

TEST_CASE("subsampling is seed-deterministic and bounded") {
    const auto truth = random_points(500, 31);
    auto chart = truth;
    for (auto& p : chart) {
        p[0] = 0.9 * p[0] + 0.1;
        p[1] = 1.1 * p[1] - 0.2;
    }
    const MetricReport a = evaluate_points(chart, truth, 10, 100, 42);
    const MetricReport b = evaluate_points(chart, truth, 10, 100, 42);
    const MetricReport c = evaluate_points(chart, truth, 10, 100, 43);
    CHECK(a.n_eval == 100);
    CHECK(a.ct == b.ct);
    CHECK(a.tw == b.tw);
    CHECK(a.ks == b.ks);
    CHECK(a.mae == b.mae);  // affine fit uses all points regardless of seed
    CHECK(a.mae == c.mae);
    CHECK(a.n_eval == c.n_eval);
}
