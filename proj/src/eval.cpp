#include "espcsi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "espcsi/rng.hpp"

namespace espcsi {

namespace {

double dist2(const Point2& a, const Point2& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1];
    return dx * dx + dy * dy;
}

// rank[j] = 1-based position of j among i's neighbors ordered by distance
// (ties by index); top_k[j] = true when rank <= k.
void neighbor_ranks(const std::vector<Point2>& points, std::size_t i, int k,
                    std::vector<std::size_t>& rank, std::vector<char>& top_k) {
    const std::size_t n = points.size();
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
        if (j != i) order.emplace_back(dist2(points[i], points[j]), j);
    std::sort(order.begin(), order.end());
    rank.assign(n, 0);
    top_k.assign(n, 0);
    for (std::size_t r = 0; r < order.size(); ++r) {
        rank[order[r].second] = r + 1;
        if (r < static_cast<std::size_t>(k)) top_k[order[r].second] = 1;
    }
}

// Trustworthiness-style penalty sum with `first` supplying the candidate
// neighborhoods and `second` supplying the ranks: for each i, sum over
// the k nearest `first`-space neighbors of i that are not among its k
// nearest `second`-space neighbors of (rank_second(i,j) - k).
double rank_penalty(const std::vector<Point2>& first, const std::vector<Point2>& second,
                    int k) {
    const std::size_t n = first.size();
    std::vector<std::size_t> rank_first, rank_second;
    std::vector<char> top_first, top_second;
    double penalty = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        neighbor_ranks(first, i, k, rank_first, top_first);
        neighbor_ranks(second, i, k, rank_second, top_second);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || !top_first[j] || top_second[j]) continue;
            penalty += static_cast<double>(rank_second[j]) - k;
        }
    }
    return penalty;
}

}  // namespace

AffineTransform fit_affine(const std::vector<Point2>& chart,
                           const std::vector<Point2>& truth) {
    const std::size_t n = chart.size();
    if (n != truth.size() || n < 3)
        throw std::invalid_argument("fit_affine: need >= 3 matched points");

    // Normal equations on [y1 y2 1].
    double g[3][3] = {};
    double rhs[3][2] = {};
    for (std::size_t l = 0; l < n; ++l) {
        const double d[3] = {chart[l][0], chart[l][1], 1.0};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) g[r][c] += d[r] * d[c];
            rhs[r][0] += d[r] * truth[l][0];
            rhs[r][1] += d[r] * truth[l][1];
        }
    }

    // Gaussian elimination with partial pivoting on the 3x3 system.
    double aug[3][5];
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) aug[r][c] = g[r][c];
        aug[r][3] = rhs[r][0];
        aug[r][4] = rhs[r][1];
    }
    const double scale = std::max(1.0, std::abs(g[0][0]) + std::abs(g[1][1]));
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(aug[r][col]) > std::abs(aug[pivot][col])) pivot = r;
        if (std::abs(aug[pivot][col]) < 1e-12 * scale)
            throw std::invalid_argument("fit_affine: degenerate chart");
        std::swap_ranges(aug[col], aug[col] + 5, aug[pivot]);
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = aug[r][col] / aug[col][col];
            for (int c = col; c < 5; ++c) aug[r][c] -= f * aug[col][c];
        }
    }

    AffineTransform t;
    for (int dim = 0; dim < 2; ++dim) {
        t.a[dim][0] = aug[0][3 + dim] / aug[0][0];
        t.a[dim][1] = aug[1][3 + dim] / aug[1][1];
        t.b[dim] = aug[2][3 + dim] / aug[2][2];
    }
    return t;
}

Point2 apply_affine(const AffineTransform& t, const Point2& y) {
    return {t.a[0][0] * y[0] + t.a[0][1] * y[1] + t.b[0],
            t.a[1][0] * y[0] + t.a[1][1] * y[1] + t.b[1]};
}

std::pair<double, double> continuity_trustworthiness(const std::vector<Point2>& truth,
                                                     const std::vector<Point2>& chart,
                                                     int k) {
    const std::size_t n = truth.size();
    if (n != chart.size()) throw std::invalid_argument("ct/tw: size mismatch");
    if (k < 1) throw std::invalid_argument("ct/tw: k must be >= 1");
    const double norm_denom =
        static_cast<double>(n) * k * (2.0 * n - 3.0 * k - 1.0);
    if (2.0 * n <= 3.0 * k + 2.0)
        throw std::invalid_argument("ct/tw: N must exceed 3k/2 + 1");

    const double tw = 1.0 - 2.0 / norm_denom * rank_penalty(chart, truth, k);
    const double ct = 1.0 - 2.0 / norm_denom * rank_penalty(truth, chart, k);
    return {ct, tw};
}

double kruskal_stress(const std::vector<Point2>& truth, const std::vector<Point2>& chart) {
    const std::size_t n = truth.size();
    if (n != chart.size() || n < 2)
        throw std::invalid_argument("kruskal_stress: need >= 2 matched points");

    double cross = 0.0, chart_sq = 0.0, truth_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::sqrt(dist2(truth[i], truth[j]));
            const double dh = std::sqrt(dist2(chart[i], chart[j]));
            cross += d * dh;
            chart_sq += dh * dh;
            truth_sq += d * d;
        }
    }
    if (chart_sq == 0.0)
        throw std::invalid_argument("kruskal_stress: zero chart variance");
    const double beta = cross / chart_sq;

    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::sqrt(dist2(truth[i], truth[j]));
            const double dh = std::sqrt(dist2(chart[i], chart[j]));
            num += (beta * dh - d) * (beta * dh - d);
        }
    }
    return std::sqrt(num / truth_sq);
}

std::pair<double, double> mae_cep(const std::vector<Point2>& truth,
                                  const std::vector<Point2>& registered) {
    const std::size_t n = truth.size();
    if (n != registered.size() || n == 0)
        throw std::invalid_argument("mae_cep: need >= 1 matched points");
    std::vector<double> radii(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        radii[i] = std::sqrt(dist2(truth[i], registered[i]));
        sum += radii[i];
    }
    std::sort(radii.begin(), radii.end());
    const double cep = n % 2 == 1 ? radii[n / 2]
                                  : 0.5 * (radii[n / 2 - 1] + radii[n / 2]);
    return {sum / n, cep};
}

int default_k(std::size_t n) {
    return std::max(10, static_cast<int>(std::lround(0.01 * static_cast<double>(n))));
}

MetricReport evaluate_points(const std::vector<Point2>& chart,
                             const std::vector<Point2>& truth, int k,
                             std::size_t subsample, std::uint64_t seed,
                             std::vector<Point2>* registered_out) {
    const std::size_t n = chart.size();
    if (n != truth.size() || n < 3) throw std::invalid_argument("evaluate: too few points");

    const AffineTransform t = fit_affine(chart, truth);
    std::vector<Point2> registered(n);
    for (std::size_t i = 0; i < n; ++i) registered[i] = apply_affine(t, chart[i]);

    // Seed-deterministic subsample for the O(N^2) rank metrics.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (subsample > 0 && n > subsample) {
        RandomStream rng(seed, 0x5EBA11ULL);
        for (std::size_t i = 0; i < subsample; ++i) {
            const std::size_t j = i + rng.next_below(n - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(subsample);
        std::sort(idx.begin(), idx.end());
    }
    std::vector<Point2> chart_s, truth_s;
    chart_s.reserve(idx.size());
    truth_s.reserve(idx.size());
    for (std::size_t i : idx) {
        chart_s.push_back(chart[i]);
        truth_s.push_back(truth[i]);
    }

    MetricReport report;
    report.n_eval = idx.size();
    report.k_neighbors = k > 0 ? k : default_k(idx.size());
    const auto [ct, tw] = continuity_trustworthiness(truth_s, chart_s, report.k_neighbors);
    report.ct = ct;
    report.tw = tw;
    report.ks = kruskal_stress(truth_s, chart_s);
    const auto [mae, cep] = mae_cep(truth, registered);
    report.mae = mae;
    report.cep = cep;
    if (registered_out) *registered_out = std::move(registered);
    return report;
}

MetricReport evaluate(const Dataset& dataset, const ChartModel& model, int k,
                      std::size_t subsample, std::uint64_t seed,
                      std::vector<Point2>* chart_out,
                      std::vector<Point2>* registered_out) {
    const std::size_t n = dataset.points.size();
    const std::size_t f_dim = feature_length(dataset.system, model.feature_config);
    if (f_dim != static_cast<std::size_t>(model.layer_dims.front()))
        throw std::invalid_argument("evaluate: model/dataset feature length mismatch");

    std::vector<Point2> chart(n), truth(n);
    for (std::size_t l = 0; l < n; ++l) {
        const std::vector<double> features =
            datapoint_features(dataset.system, dataset.points[l], model.feature_config);
        const std::array<double, 2> y = forward(model, features.data());
        chart[l] = {y[0], y[1]};
        truth[l] = {dataset.points[l].x.x, dataset.points[l].x.y};
    }
    MetricReport report = evaluate_points(chart, truth, k, subsample, seed, registered_out);
    if (chart_out) *chart_out = std::move(chart);
    return report;
}

}  // namespace espcsi
