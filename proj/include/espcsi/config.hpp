#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "espcsi/charting.hpp"
#include "espcsi/core.hpp"
#include "espcsi/dsp.hpp"
#include "espcsi/stream.hpp"
#include "espcsi/synth.hpp"

namespace espcsi {

/// Everything a pipeline run needs, parsed from one versioned JSON
/// config file. Unknown keys anywhere are rejected.
struct PipelineConfig {
    ArraySystem system;
    TrajectorySpec trajectory;
    std::vector<PathSpec> paths;
    ImpairmentSpec impairments;
    FeatureConfig features;
    TrainConfig training;
    AggregatorConfig aggregator;

    struct Evaluation {
        int k = 0;  // 0 = max(10, round(0.01 N))
        std::size_t subsample = 5000;
        std::uint64_t seed = 0;
    } evaluation;

    std::uint64_t seed = 0;
    std::string digest;  // content hash, stable across key order
};

/// FNV-1a over the canonical (key-sorted) serialization, as 16 hex chars.
std::string config_digest(const nlohmann::json& j);

PipelineConfig parse_config(const nlohmann::json& j);
PipelineConfig load_config_file(const std::string& path);

/// The built-in reference scene: a 4-board array and one reflecting metal
/// wall in a roughly 5 m x 6 m room, with a ring trajectory around the
/// room center.
nlohmann::json default_config_json();

}  // namespace espcsi
