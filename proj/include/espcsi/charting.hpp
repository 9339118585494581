#pragma once

#include <array>
#include <string>
#include <vector>

#include "espcsi/core.hpp"
#include "espcsi/dsp.hpp"

namespace espcsi {

/// Forward Charting Function parameters: a small feedforward network
/// mapping CSI features to 2-D chart coordinates.
struct ChartModel {
    std::vector<int> layer_dims;  // (F, hidden..., 2)
    // weights[l] is (in x out) row-major; biases[l] has out entries.
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    double leaky_slope = 0.01;
    FeatureConfig feature_config;
    std::string training_digest;

    std::size_t parameter_count() const;
};

struct TrainConfig {
    std::vector<int> hidden_dims = {64, 64, 32};
    double leaky_slope = 0.01;
    double pos_time_threshold = 1.0;  // s
    double neg_time_threshold = 1.0;  // s, >= pos_time_threshold
    double margin = 1.0;
    int batch_size = 128;
    int steps = 2500;
    double learning_rate = 1e-3;  // cosine-decayed to 0
    std::uint64_t seed = 0;
    FeatureConfig features;
};

struct Triplet {
    std::size_t anchor, positive, negative;
};

struct TrainingLog {
    std::vector<double> loss_per_step;
};

/// Seed-derived network init: per-layer uniform scaled by 1/sqrt(fan_in).
ChartModel init_model(int feature_dim, const TrainConfig& config);

/// Forward pass on a precomputed feature vector.
std::array<double, 2> forward(const ChartModel& model, const double* features);

/// Forward pass from raw CSI (extracts features first).
std::array<double, 2> fcf_forward(const ChartModel& model, const ArraySystem& system,
                                  const std::vector<cfloat>& h);

/// Row-major L x F feature matrix for a whole dataset.
std::vector<double> feature_matrix(const Dataset& dataset, const FeatureConfig& config);

/// Triplet loss: max(0, |y_a - y_p| - |y_a - y_n| + margin).
double triplet_loss(const std::array<double, 2>& y_a, const std::array<double, 2>& y_p,
                    const std::array<double, 2>& y_n, double margin);

/// Counter-based triplet sampling: anchors uniform; positives uniform in
/// 0 < |dt| <= pos threshold; negatives uniform in |dt| > neg threshold.
/// Draw `index` identifies the triplet within the seed's stream.
Triplet sample_triplet(const std::vector<double>& timestamps, const TrainConfig& config,
                       std::uint64_t index);

std::vector<Triplet> sample_triplets(const std::vector<double>& timestamps,
                                     const TrainConfig& config, std::uint64_t first_index,
                                     std::size_t count);

/// Mean triplet loss and parameter gradients for one batch.
/// Used by training and by the finite-difference oracle tests.
double batch_loss_and_gradients(const ChartModel& model, const std::vector<double>& features,
                                std::size_t feature_dim,
                                const std::vector<Triplet>& batch, double margin,
                                std::vector<std::vector<double>>* grad_weights,
                                std::vector<std::vector<double>>* grad_biases);

/// Train the FCF on a dataset with Adam and cosine learning-rate decay.
/// Same (dataset, config) always gives identical parameters.
ChartModel train_fcf(const Dataset& dataset, const TrainConfig& config,
                     TrainingLog* log = nullptr);

/// As train_fcf but on a precomputed feature matrix (timestamps from the
/// dataset points).
ChartModel train_fcf_features(const std::vector<double>& features, std::size_t feature_dim,
                              const std::vector<double>& timestamps,
                              const FeatureConfig& feature_config, const TrainConfig& config,
                              TrainingLog* log = nullptr);

void save_model(const ChartModel& model, const std::string& path);
ChartModel load_model(const std::string& path);

}  // namespace espcsi
