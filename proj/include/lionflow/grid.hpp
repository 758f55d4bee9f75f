#pragma once

#include <stdexcept>

namespace lionflow {

// Uniform partition 0 = t_0 < t_1 < ... < t_M = T of [0, T].
struct TimeGrid {
    double horizon = 0.0;
    int steps = 0;

    double dt() const { return horizon / steps; }
    int nodes() const { return steps + 1; }
    double node(int i) const { return (i == steps) ? horizon : i * dt(); }

    bool operator==(const TimeGrid&) const = default;
};

inline TimeGrid make_time_grid(double horizon, int steps) {
    if (!(horizon > 0.0)) throw std::invalid_argument("make_time_grid: horizon must be > 0");
    if (steps < 1) throw std::invalid_argument("make_time_grid: steps must be >= 1");
    return TimeGrid{horizon, steps};
}

}  // namespace lionflow
