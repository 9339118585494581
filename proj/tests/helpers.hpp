#pragma once

#include <vector>

#include "espcsi/core.hpp"
#include "espcsi/synth.hpp"

namespace espcsi::test {

/// B boards side by side along world x, facing +y, at 2.462 GHz with the
/// usual 117-subcarrier grid (or a smaller one for cheap tests).
inline ArraySystem make_system(int n_boards = 1, int n_subcarriers = 117,
                               double spacing = 0.06) {
    std::vector<BoardPose> boards;
    for (int b = 0; b < n_boards; ++b) {
        const double offset = (b - 0.5 * (n_boards - 1)) * 4 * spacing;
        boards.push_back({{offset, 0.0, 0.0}, {0.0, 0.0, -1.0}, {1.0, 0.0, 0.0}});
    }
    return ArraySystem(std::move(boards), spacing, 2.462e9, 312.5e3, n_subcarriers, -58);
}

inline std::vector<PathSpec> los_only() { return {PathSpec{}}; }

inline TrajectorySpec stationary_at(const Vec3& p, double duration, double rate) {
    TrajectorySpec t;
    t.waypoints = {p, p};
    t.packet_rate = rate;
    t.duration = duration;
    return t;
}

}  // namespace espcsi::test
