#include "lionflow/mollifier.hpp"

#include <cmath>
#include <stdexcept>

#include "lionflow/wasserstein.hpp"

namespace lionflow {

namespace {

double bump_raw(double rsq) {
    if (rsq >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - rsq));
}

// Surface area of the unit (d-1)-sphere.
double sphere_area(int d) {
    // 2 pi^{d/2} / Gamma(d/2)
    const double pi = 3.14159265358979323846;
    return 2.0 * std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d);
}

// c_d = S_{d-1} int_0^1 exp(-1/(1-r^2)) r^{d-1} dr by composite Simpson.
double normalization(int d) {
    const int panels = 20000;
    const double h = 1.0 / panels;
    auto f = [&](double r) { return bump_raw(r * r) * std::pow(r, d - 1); };
    double s = f(0.0) + f(1.0);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
    return sphere_area(d) * s * h / 3.0;
}

}  // namespace

MollifierKernel::MollifierKernel(int d, int n, int q) : dim(d), level(n), quadrature(q) {
    if (d < 1) throw std::invalid_argument("MollifierKernel: dim >= 1");
    if (n < 1) throw std::invalid_argument("MollifierKernel: level >= 1");
    if (q < 1) throw std::invalid_argument("MollifierKernel: quadrature >= 1");
    norm_const = normalization(d);
}

double MollifierKernel::density(std::span<const double> z) const {
    double rsq = 0.0;
    for (double c : z) rsq += c * c;
    return bump_raw(rsq) / norm_const;
}

Vec MollifierKernel::sample(RngStream& stream) const {
    // Rejection against the uniform law on the enclosing box; the acceptance
    // ratio uses the unnormalized bump with max value e^{-1} at the origin.
    const double fmax = bump_raw(0.0);
    Vec z(dim);
    for (;;) {
        double rsq = 0.0;
        for (int c = 0; c < dim; ++c) {
            z[c] = 2.0 * stream.uniform() - 1.0;
            rsq += z[c] * z[c];
        }
        if (rsq >= 1.0) continue;
        if (stream.uniform() * fmax <= bump_raw(rsq)) return z;
    }
}

MollifiedResult mollified_projection_detail(const MeasureFunctional& u,
                                            const EmpiricalMeasure& points,
                                            const MollifierKernel& kernel, RngStream& stream,
                                            std::span<const double> x) {
    if (kernel.dim != points.dim)
        throw std::invalid_argument("mollified_projection: kernel dimension mismatch");
    const int n = points.size();
    const double inv_level = 1.0 / kernel.level;
    Vec xv(x.begin(), x.end());
    if (xv.empty()) xv.assign(u.dim, 0.0);

    MollifiedResult res;
    res.projection = u.value(xv, points.view());

    EmpiricalMeasure shifted = points;
    double acc = 0.0;
    for (int d = 0; d < kernel.quadrature; ++d) {
        for (int l = 0; l < n; ++l) {
            Vec z = kernel.sample(stream);
            auto p = shifted.point(l);
            for (int c = 0; c < points.dim; ++c) p[c] = points.point(l)[c] - z[c] * inv_level;
        }
        acc += u.value(xv, shifted.view());
        const double w2 = wasserstein2(points, shifted);
        res.max_w2sq = std::max(res.max_w2sq, w2 * w2);
    }
    res.value = acc / kernel.quadrature;
    return res;
}

double mollified_projection(const MeasureFunctional& u, const EmpiricalMeasure& points,
                            const MollifierKernel& kernel, RngStream& stream,
                            std::span<const double> x) {
    return mollified_projection_detail(u, points, kernel, stream, x).value;
}

}  // namespace lionflow
