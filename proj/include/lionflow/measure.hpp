#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "lionflow/linalg.hpp"

namespace lionflow {

// Non-owning view of N uniformly weighted support points (row-major, N x d).
struct PointsView {
    const double* data = nullptr;
    int n = 0;
    int dim = 0;

    std::span<const double> point(int l) const {
        return {data + static_cast<size_t>(l) * dim, static_cast<size_t>(dim)};
    }
};

// Uniformly weighted empirical measure (1/N) sum_l delta_{x^l}.
struct EmpiricalMeasure {
    int dim = 0;
    std::vector<double> flat;  // N x dim, row-major

    EmpiricalMeasure() = default;
    EmpiricalMeasure(int d, int n) : dim(d), flat(static_cast<size_t>(n) * d, 0.0) {}

    int size() const { return dim == 0 ? 0 : static_cast<int>(flat.size()) / dim; }

    std::span<double> point(int l) {
        return {flat.data() + static_cast<size_t>(l) * dim, static_cast<size_t>(dim)};
    }
    std::span<const double> point(int l) const {
        return {flat.data() + static_cast<size_t>(l) * dim, static_cast<size_t>(dim)};
    }

    PointsView view() const { return PointsView{flat.data(), size(), dim}; }

    static EmpiricalMeasure from_points(const std::vector<Vec>& pts) {
        if (pts.empty()) throw std::invalid_argument("EmpiricalMeasure: no points");
        EmpiricalMeasure m(static_cast<int>(pts[0].size()), static_cast<int>(pts.size()));
        for (size_t l = 0; l < pts.size(); ++l) {
            if (static_cast<int>(pts[l].size()) != m.dim)
                throw std::invalid_argument("EmpiricalMeasure: inconsistent point dimension");
            for (int c = 0; c < m.dim; ++c) m.flat[l * m.dim + c] = pts[l][c];
        }
        return m;
    }

    // 1-d convenience
    static EmpiricalMeasure from_scalars(const std::vector<double>& xs) {
        EmpiricalMeasure m(1, static_cast<int>(xs.size()));
        m.flat = xs;
        return m;
    }
};

inline Vec measure_mean(const PointsView& p) {
    Vec m(p.dim, 0.0);
    for (int l = 0; l < p.n; ++l) axpy(1.0, p.point(l), m);
    for (auto& v : m) v /= p.n;
    return m;
}

// k = 1: mean vector; k = 2: (1/N) sum x^l (x^l)^T. Other k rejected.
struct MomentTensor {
    int order = 0;
    Vec mean;
    Mat second;
};

inline MomentTensor measure_moments(const EmpiricalMeasure& mu, int order) {
    if (mu.size() < 1) throw std::invalid_argument("measure_moments: empty measure");
    if (order != 1 && order != 2)
        throw std::invalid_argument("measure_moments: order must be 1 or 2");
    MomentTensor t;
    t.order = order;
    const auto p = mu.view();
    if (order == 1) {
        t.mean = measure_mean(p);
    } else {
        t.second = Mat(mu.dim, mu.dim);
        for (int l = 0; l < p.n; ++l) {
            auto x = p.point(l);
            for (int i = 0; i < mu.dim; ++i)
                for (int j = 0; j < mu.dim; ++j) t.second(i, j) += x[i] * x[j];
        }
        t.second *= 1.0 / p.n;
    }
    return t;
}

}  // namespace lionflow
