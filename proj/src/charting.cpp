#include "espcsi/charting.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "espcsi/ingest.hpp"
#include "espcsi/rng.hpp"

namespace espcsi {

namespace {

constexpr char kModelMagic[8] = {'E', 'S', 'P', 'F', 'C', 'F', 'M', '1'};

// C (m x n) += A (m x k) * B (k x n), all row-major.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

nlohmann::json feature_config_to_json(const FeatureConfig& fc) {
    return {{"n_taps", fc.n_taps},
            {"rssi_weighting", fc.rssi_weighting},
            {"unit_power_normalization", fc.unit_power_normalization},
            {"alignment_reference",
             {fc.alignment_reference.board, fc.alignment_reference.row,
              fc.alignment_reference.col}}};
}

FeatureConfig feature_config_from_json(const nlohmann::json& j) {
    FeatureConfig fc;
    fc.n_taps = j.at("n_taps").get<int>();
    fc.rssi_weighting = j.at("rssi_weighting").get<bool>();
    fc.unit_power_normalization = j.at("unit_power_normalization").get<bool>();
    const auto& r = j.at("alignment_reference");
    fc.alignment_reference = {r[0].get<int>(), r[1].get<int>(), r[2].get<int>()};
    return fc;
}

struct ForwardState {
    // activations[0] is the input batch; activations.back() the output.
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> preacts;  // per layer
};

void forward_batch(const ChartModel& model, const double* input, std::size_t rows,
                   ForwardState& state) {
    const std::size_t n_layers = model.weights.size();
    state.activations.assign(n_layers + 1, {});
    state.preacts.assign(n_layers, {});
    state.activations[0].assign(input, input + rows * model.layer_dims[0]);

    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::size_t in_dim = model.layer_dims[l];
        const std::size_t out_dim = model.layer_dims[l + 1];
        std::vector<double>& z = state.preacts[l];
        z.assign(rows * out_dim, 0.0);
        for (std::size_t i = 0; i < rows; ++i)
            std::memcpy(z.data() + i * out_dim, model.biases[l].data(), out_dim * 8);
        gemm_acc(state.activations[l].data(), model.weights[l].data(), z.data(), rows,
                 in_dim, out_dim);
        std::vector<double>& a = state.activations[l + 1];
        if (l + 1 == n_layers) {
            a = z;  // linear output layer
        } else {
            a.resize(z.size());
            const double slope = model.leaky_slope;
            for (std::size_t i = 0; i < z.size(); ++i)
                a[i] = z[i] > 0.0 ? z[i] : slope * z[i];
        }
    }
}

}  // namespace

std::size_t ChartModel::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        n += weights[l].size() + biases[l].size();
    return n;
}

ChartModel init_model(int feature_dim, const TrainConfig& config) {
    ChartModel model;
    model.layer_dims.push_back(feature_dim);
    for (int d : config.hidden_dims) model.layer_dims.push_back(d);
    model.layer_dims.push_back(2);
    model.leaky_slope = config.leaky_slope;
    model.feature_config = config.features;

    for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
        const int in_dim = model.layer_dims[l];
        const int out_dim = model.layer_dims[l + 1];
        RandomStream rng(config.seed, 0xC0DE0000ULL + l);
        std::vector<double> w(static_cast<std::size_t>(in_dim) * out_dim);
        const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
        for (double& v : w) v = (2.0 * rng.next_double() - 1.0) * scale;
        model.weights.push_back(std::move(w));
        model.biases.push_back(std::vector<double>(out_dim, 0.0));
    }
    return model;
}

std::array<double, 2> forward(const ChartModel& model, const double* features) {
    ForwardState state;
    forward_batch(model, features, 1, state);
    return {state.activations.back()[0], state.activations.back()[1]};
}

std::array<double, 2> fcf_forward(const ChartModel& model, const ArraySystem& system,
                                  const std::vector<cfloat>& h) {
    const std::vector<double> features =
        extract_features(system, h, model.feature_config);
    if (features.size() != static_cast<std::size_t>(model.layer_dims.front()))
        throw std::invalid_argument("fcf_forward: feature length does not match model");
    return forward(model, features.data());
}

std::vector<double> feature_matrix(const Dataset& dataset, const FeatureConfig& config) {
    const std::size_t f_dim = feature_length(dataset.system, config);
    std::vector<double> features(dataset.points.size() * f_dim);
    for (std::size_t l = 0; l < dataset.points.size(); ++l) {
        const std::vector<double> row =
            datapoint_features(dataset.system, dataset.points[l], config);
        std::copy(row.begin(), row.end(), features.begin() + l * f_dim);
    }
    return features;
}

double triplet_loss(const std::array<double, 2>& y_a, const std::array<double, 2>& y_p,
                    const std::array<double, 2>& y_n, double margin) {
    const double dp = std::hypot(y_a[0] - y_p[0], y_a[1] - y_p[1]);
    const double dn = std::hypot(y_a[0] - y_n[0], y_a[1] - y_n[1]);
    return std::max(0.0, dp - dn + margin);
}

Triplet sample_triplet(const std::vector<double>& timestamps, const TrainConfig& config,
                       std::uint64_t index) {
    const std::size_t n = timestamps.size();
    if (n < 3) throw std::invalid_argument("sample_triplet: need at least 3 datapoints");
    if (config.pos_time_threshold <= 0.0)
        throw std::invalid_argument("sample_triplet: pos_time_threshold must be > 0");
    RandomStream rng(config.seed, 0x7B1931E7ULL ^ index);

    for (int attempt = 0; attempt < 256; ++attempt) {
        const std::size_t a = rng.next_below(n);
        const double t_a = timestamps[a];

        // Positives: 0 < |dt| <= pos threshold -> contiguous index range.
        const auto lo_it = std::lower_bound(timestamps.begin(), timestamps.end(),
                                            t_a - config.pos_time_threshold);
        const auto hi_it = std::upper_bound(timestamps.begin(), timestamps.end(),
                                            t_a + config.pos_time_threshold);
        const std::size_t lo = static_cast<std::size_t>(lo_it - timestamps.begin());
        const std::size_t hi = static_cast<std::size_t>(hi_it - timestamps.begin());
        const std::size_t n_pos = hi - lo - 1;  // excluding the anchor itself
        if (n_pos == 0) continue;
        std::size_t p = lo + rng.next_below(n_pos);
        if (p >= a) ++p;

        // Negatives: |dt| > neg threshold -> complement of a range.
        const double tau_neg = std::max(config.neg_time_threshold, config.pos_time_threshold);
        const auto nlo_it =
            std::lower_bound(timestamps.begin(), timestamps.end(), t_a - tau_neg);
        const auto nhi_it =
            std::upper_bound(timestamps.begin(), timestamps.end(), t_a + tau_neg);
        const std::size_t nlo = static_cast<std::size_t>(nlo_it - timestamps.begin());
        const std::size_t nhi = static_cast<std::size_t>(nhi_it - timestamps.begin());
        const std::size_t n_neg = n - (nhi - nlo);
        if (n_neg == 0) continue;
        std::size_t g = rng.next_below(n_neg);
        const std::size_t neg = g < nlo ? g : g - nlo + nhi;

        return Triplet{a, p, neg};
    }
    throw std::runtime_error(
        "sample_triplet: no anchor with an eligible positive/negative found");
}

std::vector<Triplet> sample_triplets(const std::vector<double>& timestamps,
                                     const TrainConfig& config, std::uint64_t first_index,
                                     std::size_t count) {
    std::vector<Triplet> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(sample_triplet(timestamps, config, first_index + i));
    return out;
}

double batch_loss_and_gradients(const ChartModel& model, const std::vector<double>& features,
                                std::size_t feature_dim,
                                const std::vector<Triplet>& batch, double margin,
                                std::vector<std::vector<double>>* grad_weights,
                                std::vector<std::vector<double>>* grad_biases) {
    const std::size_t bsz = batch.size();
    const std::size_t rows = 3 * bsz;  // anchors, positives, negatives

    std::vector<double> input(rows * feature_dim);
    for (std::size_t i = 0; i < bsz; ++i) {
        const std::size_t idx[3] = {batch[i].anchor, batch[i].positive, batch[i].negative};
        for (int part = 0; part < 3; ++part)
            std::memcpy(input.data() + (part * bsz + i) * feature_dim,
                        features.data() + idx[part] * feature_dim, feature_dim * 8);
    }

    ForwardState state;
    forward_batch(model, input.data(), rows, state);
    const std::vector<double>& y = state.activations.back();

    // Loss and output gradient per triplet.
    double total_loss = 0.0;
    std::vector<double> dy(rows * 2, 0.0);
    const double inv_b = 1.0 / static_cast<double>(bsz);
    for (std::size_t i = 0; i < bsz; ++i) {
        const double* ya = y.data() + i * 2;
        const double* yp = y.data() + (bsz + i) * 2;
        const double* yn = y.data() + (2 * bsz + i) * 2;
        const double dpx = ya[0] - yp[0], dpy = ya[1] - yp[1];
        const double dnx = ya[0] - yn[0], dny = ya[1] - yn[1];
        const double dp = std::sqrt(dpx * dpx + dpy * dpy);
        const double dn = std::sqrt(dnx * dnx + dny * dny);
        const double loss = dp - dn + margin;
        if (loss <= 0.0) continue;
        total_loss += loss;
        const double sp = 1.0 / std::max(dp, 1e-12);
        const double sn = 1.0 / std::max(dn, 1e-12);
        double* ga = dy.data() + i * 2;
        double* gp = dy.data() + (bsz + i) * 2;
        double* gn = dy.data() + (2 * bsz + i) * 2;
        ga[0] = (dpx * sp - dnx * sn) * inv_b;
        ga[1] = (dpy * sp - dny * sn) * inv_b;
        gp[0] = -dpx * sp * inv_b;
        gp[1] = -dpy * sp * inv_b;
        gn[0] = dnx * sn * inv_b;
        gn[1] = dny * sn * inv_b;
    }

    if (grad_weights) {
        const std::size_t n_layers = model.weights.size();
        grad_weights->assign(n_layers, {});
        grad_biases->assign(n_layers, {});
        std::vector<double> delta = dy;
        for (std::size_t l = n_layers; l-- > 0;) {
            const std::size_t in_dim = model.layer_dims[l];
            const std::size_t out_dim = model.layer_dims[l + 1];
            const std::vector<double>& a_in = state.activations[l];

            // dW = a_in^T * delta ; db = column sums of delta.
            std::vector<double>& gw = (*grad_weights)[l];
            std::vector<double>& gb = (*grad_biases)[l];
            gw.assign(in_dim * out_dim, 0.0);
            gb.assign(out_dim, 0.0);
            for (std::size_t i = 0; i < rows; ++i) {
                const double* di = delta.data() + i * out_dim;
                const double* ai = a_in.data() + i * in_dim;
                for (std::size_t j = 0; j < out_dim; ++j) gb[j] += di[j];
                for (std::size_t k = 0; k < in_dim; ++k) {
                    const double av = ai[k];
                    if (av == 0.0) continue;
                    double* gwk = gw.data() + k * out_dim;
                    for (std::size_t j = 0; j < out_dim; ++j) gwk[j] += av * di[j];
                }
            }

            if (l == 0) break;
            // delta_prev = (delta * W^T) .* act'(z_{l-1})
            std::vector<double> prev(rows * in_dim, 0.0);
            const double* w = model.weights[l].data();
            for (std::size_t i = 0; i < rows; ++i) {
                const double* di = delta.data() + i * out_dim;
                double* pi = prev.data() + i * in_dim;
                for (std::size_t k = 0; k < in_dim; ++k) {
                    const double* wk = w + k * out_dim;
                    double s = 0.0;
                    for (std::size_t j = 0; j < out_dim; ++j) s += di[j] * wk[j];
                    pi[k] = s;
                }
            }
            const std::vector<double>& z = state.preacts[l - 1];
            const double slope = model.leaky_slope;
            for (std::size_t i = 0; i < prev.size(); ++i)
                if (z[i] <= 0.0) prev[i] *= slope;
            delta = std::move(prev);
        }
    }
    return total_loss * inv_b;
}

ChartModel train_fcf_features(const std::vector<double>& features, std::size_t feature_dim,
                              const std::vector<double>& timestamps,
                              const FeatureConfig& feature_config, const TrainConfig& config,
                              TrainingLog* log) {
    if (timestamps.size() < 3)
        throw std::invalid_argument("train_fcf: dataset too small");
    if (!std::is_sorted(timestamps.begin(), timestamps.end()))
        throw std::invalid_argument("train_fcf: timestamps must be sorted");
    if (timestamps.back() - timestamps.front() <= config.pos_time_threshold)
        throw std::invalid_argument(
            "train_fcf: dataset time span must exceed pos_time_threshold");

    TrainConfig cfg = config;
    cfg.features = feature_config;
    ChartModel model = init_model(static_cast<int>(feature_dim), cfg);
    model.feature_config = feature_config;

    const std::size_t n_layers = model.weights.size();
    std::vector<std::vector<double>> m_w(n_layers), v_w(n_layers), m_b(n_layers),
        v_b(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        m_w[l].assign(model.weights[l].size(), 0.0);
        v_w[l].assign(model.weights[l].size(), 0.0);
        m_b[l].assign(model.biases[l].size(), 0.0);
        v_b[l].assign(model.biases[l].size(), 0.0);
    }

    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<std::vector<double>> gw, gb;

    for (int step = 0; step < config.steps; ++step) {
        const std::vector<Triplet> batch =
            sample_triplets(timestamps, cfg,
                            static_cast<std::uint64_t>(step) * config.batch_size,
                            config.batch_size);
        const double loss = batch_loss_and_gradients(model, features, feature_dim, batch,
                                                     config.margin, &gw, &gb);
        if (!std::isfinite(loss))
            throw std::runtime_error("train_fcf: non-finite loss at step " +
                                     std::to_string(step));
        if (log) log->loss_per_step.push_back(loss);

        const double lr =
            config.learning_rate * 0.5 *
            (1.0 + std::cos(M_PI * static_cast<double>(step) / config.steps));
        const double t = step + 1;
        const double bc1 = 1.0 - std::pow(beta1, t);
        const double bc2 = 1.0 - std::pow(beta2, t);
        for (std::size_t l = 0; l < n_layers; ++l) {
            auto update = [&](std::vector<double>& param, std::vector<double>& g,
                              std::vector<double>& m, std::vector<double>& v) {
                for (std::size_t i = 0; i < param.size(); ++i) {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    param[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
                }
            };
            update(model.weights[l], gw[l], m_w[l], v_w[l]);
            update(model.biases[l], gb[l], m_b[l], v_b[l]);
        }
    }
    return model;
}

ChartModel train_fcf(const Dataset& dataset, const TrainConfig& config, TrainingLog* log) {
    const std::size_t f_dim = feature_length(dataset.system, config.features);
    const std::vector<double> features = feature_matrix(dataset, config.features);
    std::vector<double> timestamps(dataset.points.size());
    for (std::size_t l = 0; l < dataset.points.size(); ++l)
        timestamps[l] = dataset.points[l].t;
    return train_fcf_features(features, f_dim, timestamps, config.features, config, log);
}

void save_model(const ChartModel& model, const std::string& path) {
    nlohmann::json meta = {{"layer_dims", model.layer_dims},
                           {"leaky_slope", model.leaky_slope},
                           {"feature_config", feature_config_to_json(model.feature_config)},
                           {"training_digest", model.training_digest}};
    const std::string meta_text = meta.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    out.write(kModelMagic, 8);
    const std::uint32_t len = static_cast<std::uint32_t>(meta_text.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        out.write(reinterpret_cast<const char*>(model.weights[l].data()),
                  static_cast<std::streamsize>(model.weights[l].size() * 8));
        out.write(reinterpret_cast<const char*>(model.biases[l].data()),
                  static_cast<std::streamsize>(model.biases[l].size() * 8));
    }
    if (!out) throw std::runtime_error("save_model: I/O failure");
}

ChartModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kModelMagic, 8) != 0)
        throw std::runtime_error("load_model: bad magic");
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    std::string meta_text(len, '\0');
    in.read(meta_text.data(), len);
    if (!in) throw std::runtime_error("load_model: truncated header");

    const nlohmann::json meta = nlohmann::json::parse(meta_text);
    ChartModel model;
    model.layer_dims = meta.at("layer_dims").get<std::vector<int>>();
    model.leaky_slope = meta.at("leaky_slope").get<double>();
    model.feature_config = feature_config_from_json(meta.at("feature_config"));
    if (meta.contains("training_digest"))
        model.training_digest = meta.at("training_digest").get<std::string>();

    if (model.layer_dims.size() < 2 || model.layer_dims.back() != 2)
        throw std::runtime_error("load_model: bad layer dims");
    for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
        std::vector<double> w(static_cast<std::size_t>(model.layer_dims[l]) *
                              model.layer_dims[l + 1]);
        std::vector<double> b(model.layer_dims[l + 1]);
        in.read(reinterpret_cast<char*>(w.data()),
                static_cast<std::streamsize>(w.size() * 8));
        in.read(reinterpret_cast<char*>(b.data()),
                static_cast<std::streamsize>(b.size() * 8));
        if (!in) throw std::runtime_error("load_model: truncated weights");
        model.weights.push_back(std::move(w));
        model.biases.push_back(std::move(b));
    }
    return model;
}

}  // namespace espcsi
