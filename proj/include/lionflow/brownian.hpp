#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "lionflow/grid.hpp"
#include "lionflow/linalg.hpp"
#include "lionflow/rng.hpp"

namespace lionflow {

// Discrete d-dimensional Brownian path on a uniform grid: i.i.d. increments
// dW_i ~ N(0, dt I_d), with W(t_i) the running prefix sum and W(0) = 0.
struct BrownianPath {
    TimeGrid grid;
    int dim = 0;
    std::uint64_t stream_id = 0;
    // increments[i] holds dW_i as d contiguous doubles, i = 0..M-1
    std::vector<double> increments;
    // values[i] holds W(t_i), i = 0..M
    std::vector<double> values;

    std::span<const double> increment(int i) const {
        return {increments.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)};
    }
    std::span<const double> value(int i) const {
        return {values.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)};
    }
    Vec value_vec(int i) const {
        auto v = value(i);
        return Vec(v.begin(), v.end());
    }
};

inline BrownianPath sample_brownian(const TimeGrid& grid, int dim, RngStream& stream,
                                    std::uint64_t stream_id = 0) {
    if (dim < 1) throw std::invalid_argument("sample_brownian: dim must be >= 1");
    BrownianPath p;
    p.grid = grid;
    p.dim = dim;
    p.stream_id = stream_id;
    p.increments.resize(static_cast<size_t>(grid.steps) * dim);
    p.values.assign(static_cast<size_t>(grid.nodes()) * dim, 0.0);
    const double sdt = std::sqrt(grid.dt());
    for (int i = 0; i < grid.steps; ++i) {
        for (int c = 0; c < dim; ++c) {
            const double dw = sdt * stream.gaussian();
            p.increments[static_cast<size_t>(i) * dim + c] = dw;
            p.values[static_cast<size_t>(i + 1) * dim + c] =
                p.values[static_cast<size_t>(i) * dim + c] + dw;
        }
    }
    return p;
}

}  // namespace lionflow
