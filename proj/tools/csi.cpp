// csi: command-line front end for the espcsi pipeline, built on the C API.
// Subcommands: synth, info, stream-sim, train, chart, eval, aoa.
// Machine-readable JSON goes to stdout, human diagnostics to stderr.
// Exit codes: 0 ok, 1 usage error, 2 data error, 3 numerical failure.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "espcsi.h"

namespace {

struct DatasetDeleter {
    void operator()(espcsi_dataset* d) const { espcsi_dataset_free(d); }
};
struct ModelDeleter {
    void operator()(espcsi_model* m) const { espcsi_model_free(m); }
};
using DatasetPtr = std::unique_ptr<espcsi_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<espcsi_model, ModelDeleter>;

[[noreturn]] void fail(espcsi_status status) {
    std::cerr << "error: " << espcsi_last_error() << "\n";
    std::exit(static_cast<int>(status));
}

void check(espcsi_status status) {
    if (status != ESPCSI_OK) fail(status);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "error: cannot open config file " << path << "\n";
        std::exit(1);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string take_string(char* s) {
    std::string out = s ? s : "";
    espcsi_string_free(s);
    return out;
}

DatasetPtr open_dataset(const std::string& path) {
    espcsi_dataset* raw = nullptr;
    check(espcsi_dataset_open(path.c_str(), &raw));
    return DatasetPtr(raw);
}

ModelPtr open_model(const std::string& path) {
    espcsi_model* raw = nullptr;
    check(espcsi_model_open(path.c_str(), &raw));
    return ModelPtr(raw);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"espcsi: synthetic phase-coherent WiFi CSI pipeline"};
    app.require_subcommand(1);

    std::string config_path, dataset_path, model_path, out_path, scatter_path;
    std::optional<std::uint64_t> seed;
    double loss_rate = 0.01, jitter_std = 0.0;
    int board = 0, k = 0;
    std::uint64_t subsample = 5000, eval_seed = 0;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Override the config file's seed");
    };

    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--config", config_path, "Pipeline config file (JSON)");
    synth->add_option("--out", out_path, "Output dataset (.espcsi)")->required();
    add_seed(synth);

    CLI::App* info = app.add_subcommand("info", "Print dataset metadata and statistics");
    info->add_option("file", dataset_path, "Dataset file")->required();

    CLI::App* stream_sim =
        app.add_subcommand("stream-sim", "Emit per-board streams, aggregate, write back");
    stream_sim->add_option("--dataset", dataset_path, "Source dataset")->required();
    stream_sim->add_option("--loss", loss_rate, "Per-board-frame loss probability");
    stream_sim->add_option("--jitter", jitter_std, "Rx timestamp jitter std (s)");
    stream_sim->add_option("--config", config_path, "Pipeline config file (JSON)");
    stream_sim->add_option("--out", out_path, "Output dataset")->required();
    add_seed(stream_sim);

    CLI::App* train = app.add_subcommand("train", "Train the forward charting function");
    train->add_option("--dataset", dataset_path, "Training dataset")->required();
    train->add_option("--config", config_path, "Pipeline config file (JSON)");
    train->add_option("--out", out_path, "Output model (.fcf)")->required();
    add_seed(train);

    CLI::App* chart = app.add_subcommand("chart", "Apply a model to a dataset (CSV)");
    chart->add_option("--model", model_path, "Model file")->required();
    chart->add_option("--dataset", dataset_path, "Dataset file")->required();
    chart->add_option("--out", out_path, "Output CSV")->required();

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a model (five-metric report)");
    eval->add_option("--dataset", dataset_path, "Dataset file")->required();
    eval->add_option("--model", model_path, "Model file")->required();
    eval->add_option("--k", k, "CT/TW neighborhood size (0 = auto)");
    eval->add_option("--subsample", subsample, "Max points for rank metrics");
    eval->add_option("--seed", eval_seed, "Subsample seed");
    eval->add_option("--scatter", scatter_path, "Optional chart-vs-truth scatter CSV");

    CLI::App* aoa = app.add_subcommand("aoa", "Angle-of-arrival CSV for one board");
    aoa->add_option("--dataset", dataset_path, "Dataset file")->required();
    aoa->add_option("--board", board, "Board index");
    aoa->add_option("--out", out_path, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const std::string config_text = config_path.empty() ? "" : read_file(config_path);
    const char* config_arg = config_path.empty() ? nullptr : config_text.c_str();
    const int override_seed = seed.has_value() ? 1 : 0;
    const std::uint64_t seed_value = seed.value_or(0);

    if (synth->parsed()) {
        espcsi_dataset* raw = nullptr;
        check(espcsi_synth(config_arg, seed_value, override_seed, &raw));
        DatasetPtr dataset(raw);
        check(espcsi_dataset_save(dataset.get(), out_path.c_str()));
        std::cerr << "wrote " << espcsi_dataset_size(dataset.get()) << " datapoints to "
                  << out_path << "\n";
    } else if (info->parsed()) {
        DatasetPtr dataset = open_dataset(dataset_path);
        char* info_json = nullptr;
        check(espcsi_dataset_info_json(dataset.get(), &info_json));
        std::cout << take_string(info_json) << "\n";
    } else if (stream_sim->parsed()) {
        DatasetPtr source = open_dataset(dataset_path);
        espcsi_dataset* raw = nullptr;
        char* stats = nullptr;
        check(espcsi_stream_sim(source.get(), config_arg, loss_rate, jitter_std,
                                seed_value, override_seed, &raw, &stats));
        DatasetPtr fused(raw);
        check(espcsi_dataset_save(fused.get(), out_path.c_str()));
        std::cout << take_string(stats) << "\n";
    } else if (train->parsed()) {
        DatasetPtr dataset = open_dataset(dataset_path);
        espcsi_model* raw = nullptr;
        check(espcsi_train(dataset.get(), config_arg, seed_value, override_seed, &raw));
        ModelPtr model(raw);
        check(espcsi_model_save(model.get(), out_path.c_str()));
        std::cerr << "wrote model to " << out_path << "\n";
    } else if (chart->parsed()) {
        ModelPtr model = open_model(model_path);
        DatasetPtr dataset = open_dataset(dataset_path);
        check(espcsi_chart_csv(model.get(), dataset.get(), out_path.c_str()));
    } else if (eval->parsed()) {
        DatasetPtr dataset = open_dataset(dataset_path);
        ModelPtr model = open_model(model_path);
        char* report = nullptr;
        check(espcsi_eval(dataset.get(), model.get(), k, subsample, eval_seed,
                          scatter_path.empty() ? nullptr : scatter_path.c_str(), &report));
        std::cout << take_string(report) << "\n";
    } else if (aoa->parsed()) {
        DatasetPtr dataset = open_dataset(dataset_path);
        check(espcsi_aoa_csv(dataset.get(), board, out_path.c_str()));
    }
    return 0;
}
