#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "espcsi/charting.hpp"
#include "espcsi/core.hpp"

namespace espcsi {

using Point2 = std::array<double, 2>;

struct AffineTransform {
    std::array<std::array<double, 2>, 2> a{{{1.0, 0.0}, {0.0, 1.0}}};
    Point2 b{0.0, 0.0};
};

struct MetricReport {
    double ct = 0.0;
    double tw = 0.0;
    double ks = 0.0;
    double mae = 0.0;  // m
    double cep = 0.0;  // m
    int k_neighbors = 0;
    std::size_t n_eval = 0;  // points used for CT/TW/KS
};

/// Least-squares affine registration chart -> truth via normal equations.
AffineTransform fit_affine(const std::vector<Point2>& chart,
                           const std::vector<Point2>& truth);

Point2 apply_affine(const AffineTransform& t, const Point2& y);

/// Rank-based continuity / trustworthiness with k neighbors. Distance
/// ties break by index order.
std::pair<double, double> continuity_trustworthiness(const std::vector<Point2>& truth,
                                                     const std::vector<Point2>& chart,
                                                     int k);

/// Kruskal's stress with the closed-form optimal chart scale.
double kruskal_stress(const std::vector<Point2>& truth, const std::vector<Point2>& chart);

/// Mean and median (lower interpolated for even N) radial errors.
std::pair<double, double> mae_cep(const std::vector<Point2>& truth,
                                  const std::vector<Point2>& registered);

/// Default CT/TW neighborhood: max(10, round(0.01 N)).
int default_k(std::size_t n);

/// Full pipeline evaluation: chart every point, fit the affine transform,
/// compute MAE/CEP on all points and CT/TW/KS on a seed-deterministic
/// subsample of at most `subsample` points.
MetricReport evaluate(const Dataset& dataset, const ChartModel& model, int k,
                      std::size_t subsample, std::uint64_t seed,
                      std::vector<Point2>* chart_out = nullptr,
                      std::vector<Point2>* registered_out = nullptr);

/// evaluate() on precomputed chart coordinates (also used with oracle
/// charts in tests).
MetricReport evaluate_points(const std::vector<Point2>& chart,
                             const std::vector<Point2>& truth, int k,
                             std::size_t subsample, std::uint64_t seed,
                             std::vector<Point2>* registered_out = nullptr);

}  // namespace espcsi
