#include "espcsi/ingest.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace espcsi {

namespace {

// All multi-byte fields are little-endian; this code assumes a
// little-endian host (asserted at build time below).
static_assert(std::endian::native == std::endian::little,
              "espcsi containers require a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

nlohmann::json vec3_to_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3)
        throw std::invalid_argument("expected a 3-element array for a position");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

nlohmann::json array_system_to_json(const ArraySystem& system) {
    nlohmann::json boards = nlohmann::json::array();
    for (const BoardPose& pose : system.boards()) {
        boards.push_back({{"center", vec3_to_json(pose.center)},
                          {"row_axis", vec3_to_json(pose.row_axis)},
                          {"col_axis", vec3_to_json(pose.col_axis)}});
    }
    return {{"boards", boards},
            {"element_spacing", system.element_spacing()},
            {"carrier_frequency", system.carrier_frequency()},
            {"subcarrier_spacing", system.subcarrier_spacing()},
            {"n_subcarriers", system.n_subcarriers()},
            {"subcarrier_index_offset", system.subcarrier_index_offset()}};
}

ArraySystem array_system_from_json(const nlohmann::json& j) {
    std::vector<BoardPose> boards;
    for (const auto& bj : j.at("boards")) {
        boards.push_back({vec3_from_json(bj.at("center")),
                          vec3_from_json(bj.at("row_axis")),
                          vec3_from_json(bj.at("col_axis"))});
    }
    return ArraySystem(std::move(boards), j.at("element_spacing").get<double>(),
                       j.at("carrier_frequency").get<double>(),
                       j.at("subcarrier_spacing").get<double>(),
                       j.at("n_subcarriers").get<int>(),
                       j.at("subcarrier_index_offset").get<int>());
}

std::size_t write_dataset(const Dataset& dataset, std::ostream& sink) {
    dataset.validate();

    nlohmann::json meta = {{"format", "espcsi"},
                           {"system", array_system_to_json(dataset.system)},
                           {"annotations", dataset.annotations},
                           {"record_count", dataset.points.size()}};
    const std::string meta_text = meta.dump();

    sink.write(kContainerMagic, 8);
    put_u32(sink, static_cast<std::uint32_t>(meta_text.size()));
    sink.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));

    for (const CsiDatapoint& dp : dataset.points) {
        sink.write(reinterpret_cast<const char*>(&dp.t), 8);
        const double xyz[3] = {dp.x.x, dp.x.y, dp.x.z};
        sink.write(reinterpret_cast<const char*>(xyz), 24);
        sink.write(reinterpret_cast<const char*>(dp.p.data()),
                   static_cast<std::streamsize>(dp.p.size() * 4));
        sink.write(reinterpret_cast<const char*>(dp.h.data()),
                   static_cast<std::streamsize>(dp.h.size() * 8));
    }
    if (!sink) throw std::runtime_error("write_dataset: I/O failure");

    return 12 + meta_text.size() +
           dataset.points.size() *
               record_size(dataset.system.n_boards(), dataset.system.n_subcarriers());
}

RecordReader::RecordReader(std::istream& source) : source_(source) {
    char magic[8];
    source_.read(magic, 8);
    if (!source_ || std::memcmp(magic, kContainerMagic, 8) != 0)
        throw std::runtime_error("read_dataset: bad magic");

    std::uint32_t header_length = 0;
    source_.read(reinterpret_cast<char*>(&header_length), 4);
    std::string meta_text(header_length, '\0');
    source_.read(meta_text.data(), header_length);
    if (!source_) throw std::runtime_error("read_dataset: truncated header");

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("read_dataset: bad metadata: ") + e.what());
    }
    system_ = std::make_unique<ArraySystem>(array_system_from_json(meta.at("system")));
    record_count_ = meta.at("record_count").get<std::size_t>();
    if (meta.contains("annotations"))
        annotations_ = meta.at("annotations").get<std::map<std::string, std::string>>();
}

std::optional<CsiDatapoint> RecordReader::next() {
    if (next_index_ >= record_count_) return std::nullopt;

    CsiDatapoint dp;
    dp.h.resize(system_->csi_size());
    dp.p.resize(system_->rssi_size());
    source_.read(reinterpret_cast<char*>(&dp.t), 8);
    double xyz[3];
    source_.read(reinterpret_cast<char*>(xyz), 24);
    source_.read(reinterpret_cast<char*>(dp.p.data()),
                 static_cast<std::streamsize>(dp.p.size() * 4));
    source_.read(reinterpret_cast<char*>(dp.h.data()),
                 static_cast<std::streamsize>(dp.h.size() * 8));
    if (!source_)
        throw std::runtime_error("read_dataset: truncated record " +
                                 std::to_string(next_index_));
    dp.x = {xyz[0], xyz[1], xyz[2]};
    ++next_index_;
    return dp;
}

Dataset read_dataset(std::istream& source) {
    RecordReader reader(source);
    Dataset dataset{reader.system(), {}, reader.annotations()};
    dataset.points.reserve(reader.record_count());
    while (auto dp = reader.next()) dataset.points.push_back(std::move(*dp));
    return dataset;
}

std::size_t write_dataset_file(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return write_dataset(dataset, out);
}

Dataset read_dataset_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return read_dataset(in);
}

}  // namespace espcsi
