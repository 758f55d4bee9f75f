#pragma once

#include "lionflow/measure.hpp"

namespace lionflow {

// Exact 2-Wasserstein distance between empirical measures.
//   d = 1: quantile coupling on the sorted samples (any sizes; for equal
//          sizes this is the sorted pairing).
//   d >= 2: exact optimal assignment, equal sizes only, N capped at 512.
// Violating the d >= 2 restrictions raises unsupported_operation.
double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

inline double wasserstein2_squared(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    const double w = wasserstein2(mu, nu);
    return w * w;
}

}  // namespace lionflow
