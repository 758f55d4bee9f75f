#include "lionflow/lions.hpp"

#include <stdexcept>

namespace lionflow {

namespace {

Vec default_x(const MeasureFunctional& u, std::span<const double> x) {
    if (!x.empty()) return Vec(x.begin(), x.end());
    return Vec(u.dim, 0.0);
}

double proj_at(const MeasureFunctional& u, const EmpiricalMeasure& cloud,
               std::span<const double> x) {
    return u.value(x, cloud.view());
}

}  // namespace

double empirical_projection(const MeasureFunctional& u, const EmpiricalMeasure& points,
                            std::span<const double> x) {
    Vec xv = default_x(u, x);
    return proj_at(u, points, xv);
}

Vec numeric_lions_derivative(const MeasureFunctional& u, const EmpiricalMeasure& mu, int j,
                             const FiniteDifferenceScheme& scheme, std::span<const double> x) {
    const int n = mu.size();
    if (j < 0 || j >= n) throw std::invalid_argument("numeric_lions_derivative: index");
    if (!(scheme.h_base > 0.0))
        throw std::invalid_argument("numeric_lions_derivative: step must be > 0");
    Vec xv = default_x(u, x);
    const double h = scheme.step_for(mu.point(j));

    EmpiricalMeasure cloud = mu;
    Vec grad(mu.dim, 0.0);
    for (int c = 0; c < mu.dim; ++c) {
        const double orig = cloud.point(j)[c];
        cloud.point(j)[c] = orig + h;
        const double up = proj_at(u, cloud, xv);
        cloud.point(j)[c] = orig - h;
        const double dn = proj_at(u, cloud, xv);
        cloud.point(j)[c] = orig;
        grad[c] = n * (up - dn) / (2.0 * h);
    }
    return grad;
}

namespace {

// d2/dx^k_c2 dx^j_c1 of the empirical projection by central differences.
double mixed_second(const MeasureFunctional& u, EmpiricalMeasure& cloud, int j, int c1, int k,
                    int c2, double hj, double hk, std::span<const double> x) {
    if (j == k && c1 == c2) {
        const double orig = cloud.point(j)[c1];
        const double mid = proj_at(u, cloud, x);
        cloud.point(j)[c1] = orig + hj;
        const double up = proj_at(u, cloud, x);
        cloud.point(j)[c1] = orig - hj;
        const double dn = proj_at(u, cloud, x);
        cloud.point(j)[c1] = orig;
        return (up - 2.0 * mid + dn) / (hj * hj);
    }
    const double oj = cloud.point(j)[c1];
    const double ok = cloud.point(k)[c2];
    double v = 0.0;
    for (int sj : {+1, -1}) {
        for (int sk : {+1, -1}) {
            cloud.point(j)[c1] = oj + sj * hj;
            cloud.point(k)[c2] += sk * hk;  // handles j == k with c1 != c2
            v += sj * sk * proj_at(u, cloud, x);
            cloud.point(j)[c1] = oj;
            cloud.point(k)[c2] = ok;
        }
    }
    return v / (4.0 * hj * hk);
}

Mat mixed_second_matrix(const MeasureFunctional& u, EmpiricalMeasure& cloud, int j, int k,
                        const FiniteDifferenceScheme& scheme, std::span<const double> x) {
    const int d = cloud.dim;
    const double hj = scheme.step_for(cloud.point(j));
    const double hk = scheme.step_for(cloud.point(k));
    Mat m(d, d);
    for (int c1 = 0; c1 < d; ++c1)
        for (int c2 = 0; c2 < d; ++c2)
            m(c1, c2) = mixed_second(u, cloud, j, c1, k, c2, hj, hk, x);
    return m;
}

}  // namespace

SecondDerivativeEstimate numeric_lions_second(const MeasureFunctional& u,
                                              const EmpiricalMeasure& mu, int j, int k,
                                              const FiniteDifferenceScheme& scheme,
                                              std::span<const double> x) {
    const int n = mu.size();
    if (j < 0 || j >= n || k < 0 || k >= n)
        throw std::invalid_argument("numeric_lions_second: index");
    if (!(scheme.h_base > 0.0))
        throw std::invalid_argument("numeric_lions_second: step must be > 0");
    if (n == 1 && j != k)
        throw std::invalid_argument("numeric_lions_second: off-diagonal needs N >= 2");
    Vec xv = default_x(u, x);

    SecondDerivativeEstimate est;
    EmpiricalMeasure cloud = mu;

    if (j != k) {
        est.dmu2 = mixed_second_matrix(u, cloud, j, k, scheme, xv);
        est.dmu2 *= static_cast<double>(n) * n;
        return est;
    }

    // Diagonal: N d2_{x^j x^j} u^N = dv_dmu + (1/N) dmu2(x^j, x^j).
    Mat diag = mixed_second_matrix(u, cloud, j, j, scheme, xv);
    diag *= static_cast<double>(n);

    // Estimate dmu2 at (x^j, x^j) on the doubled cloud: duplicating every
    // point leaves the empirical measure unchanged while slots j and N+j
    // both carry x^j, so the off-diagonal identity applies at the exact
    // evaluation pair.
    const bool skip = u.dmu2_form().zero;
    if (skip) {
        est.dmu2 = Mat::zero(mu.dim);
    } else {
        EmpiricalMeasure doubled(mu.dim, 2 * n);
        for (int l = 0; l < n; ++l)
            for (int c = 0; c < mu.dim; ++c) {
                doubled.point(l)[c] = mu.point(l)[c];
                doubled.point(n + l)[c] = mu.point(l)[c];
            }
        Mat corr = mixed_second_matrix(u, doubled, j, n + j, scheme, xv);
        corr *= 4.0 * static_cast<double>(n) * n;
        est.dmu2 = corr;
        Mat scaled = corr;
        scaled *= -1.0 / n;
        diag += scaled;
    }
    est.dv_dmu = diag;
    return est;
}

}  // namespace lionflow
