#include "espcsi/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace espcsi {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& where) {
    if (!j.is_object())
        throw std::invalid_argument("config: section '" + where + "' must be an object");
    for (const auto& item : j.items())
        if (!allowed.contains(item.key()))
            throw std::invalid_argument("config: unknown key '" + item.key() + "' in " +
                                        where);
}

Vec3 parse_vec3(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3)
        throw std::invalid_argument("config: " + where + " must be [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ArraySystem parse_scene(const nlohmann::json& j) {
    check_keys(j, {"boards", "element_spacing", "carrier_frequency", "subcarrier_spacing",
                   "n_subcarriers", "subcarrier_index_offset"},
               "scene");
    std::vector<BoardPose> boards;
    for (const auto& bj : j.at("boards")) {
        check_keys(bj, {"center", "row_axis", "col_axis"}, "scene.boards[]");
        boards.push_back({parse_vec3(bj.at("center"), "board center"),
                          parse_vec3(bj.at("row_axis"), "board row_axis"),
                          parse_vec3(bj.at("col_axis"), "board col_axis")});
    }
    return ArraySystem(std::move(boards), j.value("element_spacing", 0.06),
                       j.value("carrier_frequency", 2.462e9),
                       j.value("subcarrier_spacing", 312.5e3),
                       j.value("n_subcarriers", 117),
                       j.value("subcarrier_index_offset", -58));
}

TrajectorySpec parse_trajectory(const nlohmann::json& j) {
    check_keys(j, {"waypoints", "ring", "speed", "packet_rate", "start_time", "duration"},
               "trajectory");
    TrajectorySpec spec;
    spec.speed = j.value("speed", 0.5);
    spec.packet_rate = j.value("packet_rate", 25.0);
    spec.start_time = j.value("start_time", 0.0);
    if (j.contains("duration")) spec.duration = j.at("duration").get<double>();

    if (j.contains("ring")) {
        const auto& r = j.at("ring");
        check_keys(r, {"center", "radius", "laps", "points_per_lap"}, "trajectory.ring");
        const Vec3 center = parse_vec3(r.at("center"), "ring center");
        const double radius = r.at("radius").get<double>();
        const double laps = r.value("laps", 1.0);
        const int per_lap = r.value("points_per_lap", 64);
        const int total = static_cast<int>(std::ceil(per_lap * laps)) + 1;
        for (int i = 0; i < total; ++i) {
            const double ang = 2.0 * M_PI * i / per_lap;
            spec.waypoints.push_back(center + Vec3{radius * std::cos(ang),
                                                   radius * std::sin(ang), 0.0});
        }
    } else {
        for (const auto& wj : j.at("waypoints"))
            spec.waypoints.push_back(parse_vec3(wj, "waypoint"));
    }
    return spec;
}

std::vector<PathSpec> parse_paths(const nlohmann::json& j) {
    std::vector<PathSpec> paths;
    for (const auto& pj : j) {
        check_keys(pj, {"kind", "gain", "point", "normal", "extent_axis", "extent_a",
                        "extent_b"},
                   "paths[]");
        PathSpec path;
        const std::string kind = pj.value("kind", "los");
        if (kind == "los") {
            path.kind = PathSpec::Kind::LineOfSight;
        } else if (kind == "reflector") {
            path.kind = PathSpec::Kind::Reflector;
            path.reflector_point = parse_vec3(pj.at("point"), "reflector point");
            path.reflector_normal = parse_vec3(pj.at("normal"), "reflector normal");
            if (pj.contains("extent_axis"))
                path.extent_axis = parse_vec3(pj.at("extent_axis"), "reflector extent_axis");
            path.extent_a = pj.value("extent_a", 0.0);
            path.extent_b = pj.value("extent_b", 0.0);
        } else {
            throw std::invalid_argument("config: unknown path kind '" + kind + "'");
        }
        if (pj.contains("gain")) {
            const auto& g = pj.at("gain");
            if (g.is_number())
                path.gain = {g.get<double>(), 0.0};
            else
                path.gain = {g.at(0).get<double>(), g.at(1).get<double>()};
        }
        paths.push_back(path);
    }
    return paths;
}

ImpairmentSpec parse_impairments(const nlohmann::json& j) {
    check_keys(j, {"common_phase", "timing_offset_std", "board_phase_offsets", "snr_db",
                   "rssi_calibration_db", "rssi_jitter_std_db"},
               "impairments");
    ImpairmentSpec spec;
    spec.per_packet_common_phase = j.value("common_phase", false);
    spec.per_packet_timing_offset_std = j.value("timing_offset_std", 0.0);
    if (j.contains("board_phase_offsets"))
        spec.per_board_phase_offsets =
            j.at("board_phase_offsets").get<std::vector<double>>();
    if (j.contains("snr_db") && !j.at("snr_db").is_null())
        spec.noise_snr_db = j.at("snr_db").get<double>();
    spec.rssi_calibration_db = j.value("rssi_calibration_db", 0.0);
    spec.rssi_jitter_std_db = j.value("rssi_jitter_std_db", 0.0);
    return spec;
}

FeatureConfig parse_features(const nlohmann::json& j) {
    check_keys(j, {"n_taps", "rssi_weighting", "unit_power_normalization",
                   "alignment_reference"},
               "features");
    FeatureConfig fc;
    fc.n_taps = j.value("n_taps", 8);
    fc.rssi_weighting = j.value("rssi_weighting", false);
    fc.unit_power_normalization = j.value("unit_power_normalization", true);
    if (j.contains("alignment_reference")) {
        const auto& r = j.at("alignment_reference");
        fc.alignment_reference = {r[0].get<int>(), r[1].get<int>(), r[2].get<int>()};
    }
    return fc;
}

TrainConfig parse_training(const nlohmann::json& j) {
    check_keys(j, {"hidden_dims", "leaky_slope", "pos_time_threshold",
                   "neg_time_threshold", "margin", "batch_size", "steps", "learning_rate",
                   "seed"},
               "training");
    TrainConfig tc;
    if (j.contains("hidden_dims"))
        tc.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
    tc.leaky_slope = j.value("leaky_slope", 0.01);
    tc.pos_time_threshold = j.value("pos_time_threshold", 1.0);
    tc.neg_time_threshold = j.value("neg_time_threshold", tc.pos_time_threshold);
    tc.margin = j.value("margin", 1.0);
    tc.batch_size = j.value("batch_size", 128);
    tc.steps = j.value("steps", 2500);
    tc.learning_rate = j.value("learning_rate", 1e-3);
    tc.seed = j.value("seed", 0ull);
    return tc;
}

}  // namespace

std::string config_digest(const nlohmann::json& j) {
    const std::string canonical = j.dump();  // object keys are sorted
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

PipelineConfig parse_config(const nlohmann::json& in) {
    // Missing sections fall back to the reference scene defaults.
    nlohmann::json j = default_config_json();
    check_keys(in, {"version", "scene", "trajectory", "paths", "impairments", "features",
                    "training", "evaluation", "stream", "seed"},
               "config");
    if (in.value("version", 1) != 1)
        throw std::invalid_argument("config: unsupported version");
    for (const auto& item : in.items()) j[item.key()] = item.value();

    PipelineConfig config{parse_scene(j.at("scene")),
                          parse_trajectory(j.at("trajectory")),
                          parse_paths(j.at("paths")),
                          parse_impairments(j.at("impairments")),
                          parse_features(j.at("features")),
                          parse_training(j.at("training")),
                          {}};

    const auto& ej = j.at("evaluation");
    check_keys(ej, {"k", "subsample", "seed"}, "evaluation");
    config.evaluation.k = ej.value("k", 0);
    config.evaluation.subsample = ej.value("subsample", 5000ull);
    config.evaluation.seed = ej.value("seed", 0ull);

    const auto& sj = j.at("stream");
    check_keys(sj, {"match_window", "completeness_policy", "buffer_capacity"}, "stream");
    config.aggregator.match_window = sj.value("match_window", 0.05);
    const std::string policy = sj.value("completeness_policy", "require-all-boards");
    if (policy == "require-all-boards")
        config.aggregator.completeness_policy = CompletenessPolicy::RequireAllBoards;
    else if (policy == "emit-partial-flagged")
        config.aggregator.completeness_policy = CompletenessPolicy::EmitPartialFlagged;
    else
        throw std::invalid_argument("config: unknown completeness_policy '" + policy + "'");
    config.aggregator.buffer_capacity = sj.value("buffer_capacity", 1024ull);

    config.seed = j.value("seed", 0ull);
    config.digest = config_digest(j);
    return config;
}

PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: parse error: ") + e.what());
    }
    return parse_config(j);
}

nlohmann::json default_config_json() {
    // Reference scene: a 4-board 4x8 array on one wall of a ~5 m x 6 m
    // room, one metal wall near the room center, ring trajectory around it.
    const Vec3 seg_a{-5.3399, 4.5903, 1.5};
    const Vec3 seg_b{-5.0218, 4.9378, 1.5};
    const Vec3 seg_mid = 0.5 * (seg_a + seg_b);
    Vec3 along = seg_b - seg_a;
    along = along * (1.0 / along.norm());
    const Vec3 up{0.0, 0.0, 1.0};
    const double s = 0.06;

    nlohmann::json boards = nlohmann::json::array();
    for (int br = 0; br < 2; ++br) {      // board row (top, bottom)
        for (int bc = 0; bc < 2; ++bc) {  // board column (left, right)
            const Vec3 center = seg_mid + (bc == 0 ? -2.0 : 2.0) * s * along +
                                (br == 0 ? 1.0 : -1.0) * s * up;
            boards.push_back(
                {{"center", {center.x, center.y, center.z}},
                 {"row_axis", {up.x, up.y, up.z}},
                 {"col_axis", {along.x, along.y, along.z}}});
        }
    }

    // Metal wall from the floor-plan segment (-2.855, 2.571)-(-3.712, 1.974).
    const Vec3 wall_a{-2.855, 2.571, 1.0};
    const Vec3 wall_b{-3.712, 1.974, 1.0};
    const Vec3 wall_mid = 0.5 * (wall_a + wall_b);
    Vec3 wall_dir = wall_b - wall_a;
    const double wall_half = 0.5 * wall_dir.norm();
    wall_dir = wall_dir * (1.0 / (2.0 * wall_half));
    const Vec3 wall_normal = wall_dir.cross(up);

    return {
        {"version", 1},
        {"seed", 0},
        {"scene",
         {{"boards", boards},
          {"element_spacing", s},
          {"carrier_frequency", 2.462e9},
          {"subcarrier_spacing", 312.5e3},
          {"n_subcarriers", 117},
          {"subcarrier_index_offset", -58}}},
        {"trajectory",
         {{"ring",
           {{"center", {-3.5, 2.0, 1.2}}, {"radius", 1.6}, {"laps", 10.5},
            {"points_per_lap", 64}}},
          {"speed", 0.5},
          {"packet_rate", 25.0},
          {"start_time", 0.0},
          {"duration", 199.96}}},
        {"paths",
         {{{"kind", "los"}, {"gain", 1.0}},
          {{"kind", "reflector"},
           {"gain", {0.7, 0.0}},
           {"point", {wall_mid.x, wall_mid.y, wall_mid.z}},
           {"normal", {wall_normal.x, wall_normal.y, wall_normal.z}},
           {"extent_axis", {wall_dir.x, wall_dir.y, wall_dir.z}},
           {"extent_a", wall_half},
           {"extent_b", 1.25}}}},
        {"impairments",
         {{"common_phase", true},
          {"timing_offset_std", 0.0},
          {"board_phase_offsets", {0.0, 1.0, 2.0, -1.0}},
          {"snr_db", 25.0},
          {"rssi_calibration_db", 0.0},
          {"rssi_jitter_std_db", 0.5}}},
        {"features",
         {{"n_taps", 8},
          {"rssi_weighting", false},
          {"unit_power_normalization", true},
          {"alignment_reference", {0, 0, 0}}}},
        {"training",
         {{"hidden_dims", {64, 64, 32}},
          {"leaky_slope", 0.01},
          {"pos_time_threshold", 1.0},
          {"neg_time_threshold", 1.0},
          {"margin", 1.0},
          {"batch_size", 128},
          {"steps", 2500},
          {"learning_rate", 1e-3},
          {"seed", 0}}},
        {"evaluation", {{"k", 0}, {"subsample", 5000}, {"seed", 0}}},
        {"stream",
         {{"match_window", 0.05},
          {"completeness_policy", "require-all-boards"},
          {"buffer_capacity", 1024}}},
    };
}

}  // namespace espcsi
