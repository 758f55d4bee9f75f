#pragma once

#include <optional>
#include <span>
#include <vector>

#include "lionflow/functionals.hpp"
#include "lionflow/measure.hpp"
#include "lionflow/rng.hpp"

namespace lionflow {

// Central finite differences with a step scaled by the anchor magnitude to
// control cancellation.
struct FiniteDifferenceScheme {
    double h_base = 1e-4;

    double step_for(std::span<const double> anchor) const {
        return h_base * (1.0 + norm2(anchor));
    }
};

// u^N(x^1,...,x^N) = u(mubar^N), the empirical projection of the functional.
double empirical_projection(const MeasureFunctional& u, const EmpiricalMeasure& points,
                            std::span<const double> x = {});

// Derivative-free estimate of dmu u(mubar^N, x^j): N times the central
// finite-difference gradient of the empirical projection in x^j.
Vec numeric_lions_derivative(const MeasureFunctional& u, const EmpiricalMeasure& mu, int j,
                             const FiniteDifferenceScheme& scheme,
                             std::span<const double> x = {});

// Second-derivative estimates via the projection identity.
//   j != k: dmu2 = N^2 d2/dx^k dx^j u^N, an estimate of d2mu u(mubar, x^j, x^k).
//   j == k: dv_dmu = N d2/dx^j dx^j u^N - (1/N) dmu2(x^j, x^j), where the
//           correction is estimated off-diagonally on the doubled cloud
//           (same empirical measure, the pair (j, N+j) sits at (x^j, x^j));
//           it is skipped for functionals whose d2mu vanishes identically.
struct SecondDerivativeEstimate {
    std::optional<Mat> dv_dmu;  // populated when j == k
    Mat dmu2;
};

SecondDerivativeEstimate numeric_lions_second(const MeasureFunctional& u,
                                              const EmpiricalMeasure& mu, int j, int k,
                                              const FiniteDifferenceScheme& scheme,
                                              std::span<const double> x = {});

}  // namespace lionflow
