#include "espcsi.h"

#include <complex>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <limits>
#include <string>

#include <json.hpp>

#include "espcsi/charting.hpp"
#include "espcsi/config.hpp"
#include "espcsi/core.hpp"
#include "espcsi/dsp.hpp"
#include "espcsi/eval.hpp"
#include "espcsi/ingest.hpp"
#include "espcsi/stream.hpp"
#include "espcsi/synth.hpp"

using nlohmann::json;

struct espcsi_dataset {
    espcsi::Dataset data;
    std::string origin_path;  // for the on-disk feature cache; may be empty
};

struct espcsi_model {
    espcsi::ChartModel model;
};

namespace {

thread_local std::string g_last_error;

espcsi_status classify(const std::exception& e) {
    const std::string what = e.what();
    if (what.rfind("config:", 0) == 0 || what.rfind("usage:", 0) == 0)
        return ESPCSI_ERR_USAGE;
    if (what.find("non-finite loss") != std::string::npos ||
        what.find("degenerate chart") != std::string::npos)
        return ESPCSI_ERR_NUMERIC;
    return ESPCSI_ERR_DATA;
}

template <typename Fn>
espcsi_status guarded(Fn&& fn) {
    try {
        fn();
        return ESPCSI_OK;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return classify(e);
    }
}

void require_arg(const void* p, const char* name) {
    if (p == nullptr)
        throw std::invalid_argument(std::string("usage: ") + name + " must not be null");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

espcsi::PipelineConfig resolve_config(const char* config_json, uint64_t seed,
                                      int override_seed) {
    json j = json::object();
    if (config_json) {
        try {
            j = json::parse(std::string(config_json));
        } catch (const json::exception& e) {
            throw std::invalid_argument(std::string("config: parse error: ") + e.what());
        }
    }
    espcsi::PipelineConfig config = espcsi::parse_config(j);
    if (override_seed) {
        config.seed = seed;
        config.training.seed = seed;
    }
    return config;
}

// FNV-1a over the dataset's raw tensors, for the feature cache key.
std::uint64_t dataset_digest(const espcsi::Dataset& dataset) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    auto mix_bytes = [&hash](const void* p, std::size_t n) {
        const unsigned char* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            hash ^= bytes[i];
            hash *= 0x100000001b3ULL;
        }
    };
    const std::size_t l = dataset.points.size();
    mix_bytes(&l, sizeof(l));
    for (const espcsi::CsiDatapoint& dp : dataset.points) {
        mix_bytes(&dp.t, 8);
        mix_bytes(dp.h.data(), dp.h.size() * 8);
        mix_bytes(dp.p.data(), dp.p.size() * 4);
    }
    return hash;
}

std::string feature_cache_key(const espcsi::Dataset& dataset,
                              const espcsi::FeatureConfig& fc) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(dataset_digest(dataset)));
    return std::string(buf) + "-t" + std::to_string(fc.n_taps) +
           (fc.rssi_weighting ? "w1" : "w0") +
           (fc.unit_power_normalization ? "n1" : "n0") + "-r" +
           std::to_string(fc.alignment_reference.board) +
           std::to_string(fc.alignment_reference.row) +
           std::to_string(fc.alignment_reference.col);
}

// Feature matrix with a best-effort on-disk cache next to the dataset.
std::vector<double> cached_feature_matrix(const espcsi_dataset* handle,
                                          const espcsi::FeatureConfig& fc) {
    const espcsi::Dataset& dataset = handle->data;
    const std::size_t f_dim = espcsi::feature_length(dataset.system, fc);
    const std::size_t expected = dataset.points.size() * f_dim;

    std::string cache_path;
    if (!handle->origin_path.empty()) {
        cache_path =
            handle->origin_path + ".features-" + feature_cache_key(dataset, fc) + ".bin";
        std::ifstream in(cache_path, std::ios::binary);
        if (in) {
            std::vector<double> features(expected);
            in.read(reinterpret_cast<char*>(features.data()),
                    static_cast<std::streamsize>(expected * 8));
            if (in && in.peek() == EOF) return features;
        }
    }

    std::vector<double> features = espcsi::feature_matrix(dataset, fc);
    if (!cache_path.empty()) {
        std::ofstream out(cache_path, std::ios::binary);
        if (out)
            out.write(reinterpret_cast<const char*>(features.data()),
                      static_cast<std::streamsize>(features.size() * 8));
    }
    return features;
}

json stats_of(const std::vector<double>& values) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
    }
    if (values.empty()) return {{"count", 0}};
    return {{"count", values.size()},
            {"min", lo},
            {"max", hi},
            {"mean", sum / static_cast<double>(values.size())}};
}

}  // namespace

extern "C" {

const char* espcsi_last_error(void) { return g_last_error.c_str(); }

void espcsi_string_free(char* s) { std::free(s); }

espcsi_status espcsi_dataset_open(const char* path, espcsi_dataset** out) {
    return guarded([&] {
        require_arg(path, "path");
        require_arg(out, "out");
        auto handle = std::make_unique<espcsi_dataset>(
            espcsi_dataset{espcsi::read_dataset_file(path), path});
        *out = handle.release();
    });
}

espcsi_status espcsi_dataset_save(const espcsi_dataset* dataset, const char* path) {
    return guarded([&] {
        require_arg(dataset, "dataset");
        require_arg(path, "path");
        espcsi::write_dataset_file(dataset->data, path);
    });
}

void espcsi_dataset_free(espcsi_dataset* dataset) { delete dataset; }

size_t espcsi_dataset_size(const espcsi_dataset* dataset) {
    return dataset ? dataset->data.points.size() : 0;
}

espcsi_status espcsi_dataset_info_json(const espcsi_dataset* dataset, char** out_json) {
    return guarded([&] {
        require_arg(dataset, "dataset");
        require_arg(out_json, "out_json");
        const espcsi::Dataset& d = dataset->data;
        std::vector<double> ts, amp, rssi;
        for (const auto& dp : d.points) {
            ts.push_back(dp.t);
            for (const auto& c : dp.h) amp.push_back(std::abs(std::complex<double>(
                c.real(), c.imag())));
            for (float v : dp.p) rssi.push_back(v);
        }
        json info = {{"record_count", d.points.size()},
                     {"system", espcsi::array_system_to_json(d.system)},
                     {"annotations", d.annotations},
                     {"stats",
                      {{"t", stats_of(ts)},
                       {"csi_amplitude", stats_of(amp)},
                       {"rssi_db", stats_of(rssi)}}}};
        *out_json = dup_string(info.dump(2));
    });
}

espcsi_status espcsi_default_config(char** out_json) {
    return guarded([&] {
        require_arg(out_json, "out_json");
        *out_json = dup_string(espcsi::default_config_json().dump(2));
    });
}

espcsi_status espcsi_synth(const char* config_json, uint64_t seed, int override_seed,
                           espcsi_dataset** out) {
    return guarded([&] {
        require_arg(out, "out");
        const espcsi::PipelineConfig config =
            resolve_config(config_json, seed, override_seed);
        espcsi::Dataset dataset =
            espcsi::generate_dataset(config.system, config.trajectory, config.paths,
                                     config.impairments, config.seed);
        dataset.annotations["config_digest"] = config.digest;
        dataset.annotations["seed"] = std::to_string(config.seed);
        dataset.annotations["generator"] = "espcsi synth";
        *out = new espcsi_dataset{std::move(dataset), {}};
    });
}

espcsi_status espcsi_stream_sim(const espcsi_dataset* source, const char* config_json,
                                double loss_rate, double jitter_std, uint64_t seed,
                                int override_seed, espcsi_dataset** out,
                                char** stats_json) {
    return guarded([&] {
        require_arg(source, "source");
        require_arg(out, "out");
        const espcsi::PipelineConfig config =
            resolve_config(config_json, seed, override_seed);
        const espcsi::Dataset& src = source->data;
        const auto streams =
            espcsi::emit_board_streams(src, loss_rate, jitter_std, config.seed);
        espcsi::AggregatorStats stats;
        const std::vector<espcsi::FusedPacket> packets =
            espcsi::aggregate(src.system, streams, config.aggregator, &stats);

        espcsi::Dataset fused{src.system, {}, src.annotations};
        fused.annotations["stream_sim"] = "1";
        // Re-attach ground truth by source index: wifi_seq is l mod 2^16
        // and packets come out in time order, so scan forward.
        std::size_t cursor = 0;
        for (const espcsi::FusedPacket& packet : packets) {
            while (cursor < src.points.size() &&
                   static_cast<std::uint16_t>(cursor & 0xffff) != packet.wifi_seq)
                ++cursor;
            espcsi::CsiDatapoint dp = packet.datapoint;
            if (cursor < src.points.size()) dp.x = src.points[cursor].x;
            fused.points.push_back(std::move(dp));
        }
        if (stats_json) {
            json sj = {{"frames_in", stats.frames_in}, {"complete", stats.complete},
                       {"partial", stats.partial},    {"dropped", stats.dropped},
                       {"evicted", stats.evicted},    {"source_count", src.points.size()},
                       {"emitted_count", fused.points.size()}};
            *stats_json = dup_string(sj.dump(2));
        }
        *out = new espcsi_dataset{std::move(fused), {}};
    });
}

espcsi_status espcsi_train(const espcsi_dataset* dataset, const char* config_json,
                           uint64_t seed, int override_seed, espcsi_model** out) {
    return guarded([&] {
        require_arg(dataset, "dataset");
        require_arg(out, "out");
        const espcsi::PipelineConfig config =
            resolve_config(config_json, seed, override_seed);
        const espcsi::Dataset& d = dataset->data;
        const std::size_t f_dim = espcsi::feature_length(d.system, config.features);
        const std::vector<double> features = cached_feature_matrix(dataset, config.features);
        std::vector<double> timestamps(d.points.size());
        for (std::size_t l = 0; l < d.points.size(); ++l) timestamps[l] = d.points[l].t;

        espcsi::ChartModel model = espcsi::train_fcf_features(
            features, f_dim, timestamps, config.features, config.training, nullptr);
        model.training_digest = config.digest;
        *out = new espcsi_model{std::move(model)};
    });
}

espcsi_status espcsi_model_open(const char* path, espcsi_model** out) {
    return guarded([&] {
        require_arg(path, "path");
        require_arg(out, "out");
        *out = new espcsi_model{espcsi::load_model(path)};
    });
}

espcsi_status espcsi_model_save(const espcsi_model* model, const char* path) {
    return guarded([&] {
        require_arg(model, "model");
        require_arg(path, "path");
        espcsi::save_model(model->model, path);
    });
}

void espcsi_model_free(espcsi_model* model) { delete model; }

espcsi_status espcsi_chart_csv(const espcsi_model* model, const espcsi_dataset* dataset,
                               const char* csv_path) {
    return guarded([&] {
        require_arg(model, "model");
        require_arg(dataset, "dataset");
        require_arg(csv_path, "csv_path");
        const espcsi::Dataset& d = dataset->data;
        std::ofstream out(csv_path);
        if (!out) throw std::runtime_error(std::string("cannot open ") + csv_path);
        out << "l,t,y1,y2,x1,x2,x3\n";
        out.precision(12);
        for (std::size_t l = 0; l < d.points.size(); ++l) {
            const auto y = espcsi::fcf_forward(model->model, d.system, d.points[l].h);
            const espcsi::CsiDatapoint& dp = d.points[l];
            out << l << ',' << dp.t << ',' << y[0] << ',' << y[1] << ',' << dp.x.x << ','
                << dp.x.y << ',' << dp.x.z << '\n';
        }
    });
}

espcsi_status espcsi_eval(const espcsi_dataset* dataset, const espcsi_model* model,
                          int k, uint64_t subsample, uint64_t seed,
                          const char* scatter_csv, char** report_json) {
    return guarded([&] {
        require_arg(dataset, "dataset");
        require_arg(model, "model");
        require_arg(report_json, "report_json");
        std::vector<espcsi::Point2> chart, registered;
        const espcsi::MetricReport report =
            espcsi::evaluate(dataset->data, model->model, k, subsample, seed, &chart,
                             &registered);
        if (scatter_csv) {
            std::ofstream out(scatter_csv);
            if (!out) throw std::runtime_error(std::string("cannot open ") + scatter_csv);
            out << "l,x1,x2,y1,y2,xhat1,xhat2\n";
            out.precision(12);
            for (std::size_t l = 0; l < chart.size(); ++l) {
                const espcsi::Vec3& x = dataset->data.points[l].x;
                out << l << ',' << x.x << ',' << x.y << ',' << chart[l][0] << ','
                    << chart[l][1] << ',' << registered[l][0] << ',' << registered[l][1]
                    << '\n';
            }
        }
        json rj = {{"ct", report.ct},   {"tw", report.tw},
                   {"ks", report.ks},   {"mae_m", report.mae},
                   {"cep_m", report.cep}, {"k_neighbors", report.k_neighbors},
                   {"n_eval", report.n_eval}};
        *report_json = dup_string(rj.dump(2));
    });
}

espcsi_status espcsi_aoa_csv(const espcsi_dataset* dataset, int board,
                             const char* csv_path) {
    return guarded([&] {
        require_arg(dataset, "dataset");
        require_arg(csv_path, "csv_path");
        const espcsi::Dataset& d = dataset->data;
        std::ofstream out(csv_path);
        if (!out) throw std::runtime_error(std::string("cannot open ") + csv_path);
        out << "t,azimuth_rad,true_azimuth_rad\n";
        out.precision(12);
        for (const espcsi::CsiDatapoint& dp : d.points) {
            const double est = espcsi::estimate_aoa(d.system, dp.h, board);
            const double truth = espcsi::true_azimuth(d.system, board, dp.x);
            out << dp.t << ',' << est << ',' << truth << '\n';
        }
    });
}

}  // extern "C"
