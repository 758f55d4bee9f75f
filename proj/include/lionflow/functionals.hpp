#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lionflow/errors.hpp"
#include "lionflow/linalg.hpp"
#include "lionflow/measure.hpp"

namespace lionflow {

// Scalar ridge function f(v) = p(a.v + s) with p a polynomial of degree <= 4
// or a single-frequency cosine. Gradients and Hessians stay closed-form:
//   grad f = p'(a.v + s) a,   Hess f = p''(a.v + s) a a^T.
struct InnerFunction {
    enum class Kind { Poly, Cos };

    Kind kind = Kind::Poly;
    Vec dir;           // a
    double shift = 0.0;  // s
    Vec coeffs;        // c_0..c_4 for poly
    double amp = 1.0;    // cos amplitude
    double freq = 1.0;   // cos frequency

    static InnerFunction poly(Vec direction, Vec c, double s = 0.0) {
        if (c.size() > 5)
            throw std::invalid_argument("InnerFunction: polynomial degree capped at 4");
        InnerFunction f;
        f.kind = Kind::Poly;
        f.dir = std::move(direction);
        f.coeffs = std::move(c);
        f.shift = s;
        return f;
    }
    static InnerFunction cosine(Vec direction, double amplitude, double frequency,
                                double s = 0.0) {
        InnerFunction f;
        f.kind = Kind::Cos;
        f.dir = std::move(direction);
        f.amp = amplitude;
        f.freq = frequency;
        f.shift = s;
        return f;
    }
    // f(v) = a . v
    static InnerFunction linear(Vec direction) { return poly(std::move(direction), {0.0, 1.0}); }
    // f(v) = (a . v)^2
    static InnerFunction square(Vec direction) {
        return poly(std::move(direction), {0.0, 0.0, 1.0});
    }
    static InnerFunction constant(int dim, double c) { return poly(Vec(dim, 0.0), {c}); }

    double p(double s) const {
        if (kind == Kind::Cos) return amp * std::cos(freq * s + shift);
        double v = 0.0;
        for (size_t k = coeffs.size(); k-- > 0;) v = v * s + coeffs[k];
        return v;
    }
    double dp(double s) const {
        if (kind == Kind::Cos) return -amp * freq * std::sin(freq * s + shift);
        double v = 0.0;
        for (size_t k = coeffs.size(); k-- > 1;) v = v * s + k * coeffs[k];
        return v;
    }
    double d2p(double s) const {
        if (kind == Kind::Cos) return -amp * freq * freq * std::cos(freq * s + shift);
        double v = 0.0;
        for (size_t k = coeffs.size(); k-- > 2;) v = v * s + k * (k - 1) * coeffs[k];
        return v;
    }

    // Scalar ridge argument; the polynomial shift enters here, the cosine
    // shift lives inside p itself.
    double arg(std::span<const double> v) const {
        return (kind == Kind::Poly) ? dot(dir, v) + shift : dot(dir, v);
    }
    double value(std::span<const double> v) const { return p(arg(v)); }
    Vec grad(std::span<const double> v) const { return dp(arg(v)) * dir; }
    Mat hess(std::span<const double> v) const {
        Mat h = outer(dir, dir);
        h *= d2p(arg(v));
        return h;
    }
    double integral(const PointsView& pts) const {
        double s = 0.0;
        for (int l = 0; l < pts.n; ++l) s += value(pts.point(l));
        return s / pts.n;
    }
};

enum class FunctionalKind {
    Linear,             // u = int f dmu
    QuadraticMean,      // u = (int f dmu)^2
    DoubleIntegral,     // u = int int f(v) g(v') dmu(v) dmu(v')
    Variance,           // u = int |v|^2 dmu - |int v dmu|^2
    Product,            // u = a(x) int f dmu
    ScaledSecondMoment  // u = scale * int |v|^2 dmu
};

// Per-cloud summary reused across particles within one evaluation step.
struct MeasureCache {
    double mf = 0.0;        // int f dmu
    double mg = 0.0;        // int g dmu
    Vec mean;               // int v dmu
    double second = 0.0;    // int |v|^2 dmu
};

// Structural form of d2mu u used by the U-statistic estimators:
//   d2mu u(mu, v, v') = constant + sum_r coef_r grad(g_r)(v) grad(h_r)(v')^T.
// All catalogue members fit this shape, so pair averages reduce to O(N)
// accumulators instead of O(N^2) loops.
struct Dmu2Form {
    struct Part {
        double coef = 0.0;
        const InnerFunction* g = nullptr;
        const InnerFunction* h = nullptr;
    };
    bool zero = true;
    bool has_constant = false;
    Mat constant;
    std::vector<Part> parts;
};

// A test functional u(x, mu) from the closed catalogue, with every Lions and
// space derivative required by the chain-rule formulae available in closed
// form. Measure integrals are uniform sums over the support points.
class MeasureFunctional {
public:
    FunctionalKind kind = FunctionalKind::Linear;
    int dim = 1;
    InnerFunction f;   // measure-side inner function
    InnerFunction g;   // second inner function (double-integral)
    InnerFunction a;   // space-side inner function (product)
    double scale = 1.0;

    static MeasureFunctional linear(int dim, InnerFunction f);
    static MeasureFunctional quadratic_mean(int dim, InnerFunction f);
    static MeasureFunctional double_integral(int dim, InnerFunction f, InnerFunction g);
    static MeasureFunctional variance(int dim);
    static MeasureFunctional product(int dim, InnerFunction a_of_x, InnerFunction f);
    static MeasureFunctional scaled_second_moment(int dim, double scale);

    bool depends_on_x() const { return kind == FunctionalKind::Product; }

    MeasureCache prepare(const PointsView& pts) const;

    double value(std::span<const double> x, const MeasureCache& c) const;
    Vec dx(std::span<const double> x, const MeasureCache& c) const;
    Mat hess_x(std::span<const double> x, const MeasureCache& c) const;
    Vec dmu(std::span<const double> x, const MeasureCache& c, std::span<const double> v) const;
    Mat dv_dmu(std::span<const double> x, const MeasureCache& c, std::span<const double> v) const;
    // [dx_dmu]_{ij} = d/dx_j of (dmu u)_i
    Mat dx_dmu(std::span<const double> x, const MeasureCache& c, std::span<const double> v) const;
    // [dmu2]_{ij}: i indexes the v slot, j the v' slot
    Mat dmu2(std::span<const double> x, const MeasureCache& c, std::span<const double> v,
             std::span<const double> vp) const;
    Dmu2Form dmu2_form() const;

    // Accumulating variants for hot loops: out += scale * derivative.
    void add_dmu(std::span<const double> x, const MeasureCache& c, std::span<const double> v,
                 double scale, std::span<double> out) const;
    void add_dv_dmu(std::span<const double> x, const MeasureCache& c, std::span<const double> v,
                    double scale, Mat& out) const;
    void add_dx_dmu(std::span<const double> x, const MeasureCache& c, std::span<const double> v,
                    double scale, Mat& out) const;
    void add_dmu2(std::span<const double> x, const MeasureCache& c, std::span<const double> v,
                  std::span<const double> vp, double scale, Mat& out) const;

    // Convenience overloads evaluating the cache internally.
    double value(std::span<const double> x, const PointsView& pts) const {
        return value(x, prepare(pts));
    }

    std::string kind_name() const;
};

// eval_functional: u(x, mu) with mu-integrals replaced by uniform sums.
inline double eval_functional(const MeasureFunctional& u, std::span<const double> x,
                              const EmpiricalMeasure& mu) {
    return u.value(x, mu.view());
}
inline double eval_functional(const MeasureFunctional& u, const EmpiricalMeasure& mu) {
    Vec x(u.dim, 0.0);
    return u.value(x, mu.view());
}

// Closed-form derivative accessors named after the calculus they implement.
Vec lions_derivative(const MeasureFunctional& u, const EmpiricalMeasure& mu,
                     std::span<const double> v);
Mat lions_hessian_v(const MeasureFunctional& u, const EmpiricalMeasure& mu,
                    std::span<const double> v);
Mat lions_second(const MeasureFunctional& u, const EmpiricalMeasure& mu,
                 std::span<const double> v, std::span<const double> vp);

struct SpaceDerivatives {
    Vec dx;
    Mat hess_x;
};
SpaceDerivatives space_derivatives(const MeasureFunctional& u, std::span<const double> x,
                                   const EmpiricalMeasure& mu);
Mat dx_lions_derivative(const MeasureFunctional& u, std::span<const double> x,
                        const EmpiricalMeasure& mu, std::span<const double> v);

}  // namespace lionflow
