#pragma once

#include <vector>

#include "lionflow/functionals.hpp"
#include "lionflow/measure.hpp"
#include "lionflow/rng.hpp"

namespace lionflow {

// Smooth compactly supported bump density on the unit ball,
//   rho(z) = exp(-1/(1-|z|^2)) / c_d  for |z| < 1,
// normalized by radial quadrature at construction. The level-n kernel is
// rho_n(z) = n^d rho(n z) with support radius 1/n.
struct MollifierKernel {
    int dim = 1;
    int level = 1;       // n
    int quadrature = 1;  // Q, number of smoothing draws

    double norm_const = 0.0;  // c_d

    MollifierKernel(int dim, int level, int quadrature);

    double support_radius() const { return 1.0; }  // of the base kernel rho
    double density(std::span<const double> z) const;
    // One draw from rho by rejection against the uniform ball law.
    Vec sample(RngStream& stream) const;
};

struct MollifiedResult {
    double value = 0.0;       // u^{N,n}, the Monte Carlo smoothing average
    double projection = 0.0;  // u^N on the unperturbed cloud
    double max_w2sq = 0.0;    // max over draws of W2^2(cloud, shifted cloud)
};

// u^{N,n}: average over Q i.i.d. smoothing draws (Z^1..Z^N) of the functional
// evaluated on the shifted cloud {y^l - Z^l / n}. Deterministic given the
// smoothing stream.
MollifiedResult mollified_projection_detail(const MeasureFunctional& u,
                                            const EmpiricalMeasure& points,
                                            const MollifierKernel& kernel, RngStream& stream,
                                            std::span<const double> x = {});

double mollified_projection(const MeasureFunctional& u, const EmpiricalMeasure& points,
                            const MollifierKernel& kernel, RngStream& stream,
                            std::span<const double> x = {});

}  // namespace lionflow
