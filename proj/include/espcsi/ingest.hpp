#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "espcsi/core.hpp"

namespace espcsi {

inline constexpr char kContainerMagic[8] = {'E', 'S', 'P', 'C', 'S', 'I', 'D', '1'};

/// Bytes per record for a given geometry: t + x + rssi + csi.
inline std::size_t record_size(int n_boards, int n_subcarriers) {
    return 8 + 24 + 4ull * 8 * n_boards + 8ull * 8 * n_boards * n_subcarriers;
}

nlohmann::json array_system_to_json(const ArraySystem& system);
ArraySystem array_system_from_json(const nlohmann::json& j);

/// Serialize: header (magic, u32 JSON length, JSON metadata) followed by
/// L fixed-size little-endian records. Returns total bytes written.
std::size_t write_dataset(const Dataset& dataset, std::ostream& sink);

/// Full in-memory read; throws on bad magic, metadata mismatch or
/// truncation (the message names the first incomplete record index).
Dataset read_dataset(std::istream& source);

/// Streaming reader: O(1) memory beyond one record.
class RecordReader {
public:
    explicit RecordReader(std::istream& source);

    const ArraySystem& system() const { return *system_; }
    const std::map<std::string, std::string>& annotations() const { return annotations_; }
    std::size_t record_count() const { return record_count_; }

    /// Next record, or nullopt at end. Throws at a truncated record.
    std::optional<CsiDatapoint> next();

private:
    std::istream& source_;
    std::unique_ptr<ArraySystem> system_;
    std::map<std::string, std::string> annotations_;
    std::size_t record_count_ = 0;
    std::size_t next_index_ = 0;
};

// Convenience file-path wrappers.
std::size_t write_dataset_file(const Dataset& dataset, const std::string& path);
Dataset read_dataset_file(const std::string& path);

}  // namespace espcsi
