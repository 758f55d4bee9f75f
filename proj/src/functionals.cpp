#include "lionflow/functionals.hpp"

namespace lionflow {

MeasureFunctional MeasureFunctional::linear(int dim, InnerFunction f) {
    MeasureFunctional u;
    u.kind = FunctionalKind::Linear;
    u.dim = dim;
    u.f = std::move(f);
    return u;
}

MeasureFunctional MeasureFunctional::quadratic_mean(int dim, InnerFunction f) {
    MeasureFunctional u;
    u.kind = FunctionalKind::QuadraticMean;
    u.dim = dim;
    u.f = std::move(f);
    return u;
}

MeasureFunctional MeasureFunctional::double_integral(int dim, InnerFunction f, InnerFunction g) {
    MeasureFunctional u;
    u.kind = FunctionalKind::DoubleIntegral;
    u.dim = dim;
    u.f = std::move(f);
    u.g = std::move(g);
    return u;
}

MeasureFunctional MeasureFunctional::variance(int dim) {
    MeasureFunctional u;
    u.kind = FunctionalKind::Variance;
    u.dim = dim;
    return u;
}

MeasureFunctional MeasureFunctional::product(int dim, InnerFunction a_of_x, InnerFunction f) {
    MeasureFunctional u;
    u.kind = FunctionalKind::Product;
    u.dim = dim;
    u.a = std::move(a_of_x);
    u.f = std::move(f);
    return u;
}

MeasureFunctional MeasureFunctional::scaled_second_moment(int dim, double scale) {
    MeasureFunctional u;
    u.kind = FunctionalKind::ScaledSecondMoment;
    u.dim = dim;
    u.scale = scale;
    return u;
}

std::string MeasureFunctional::kind_name() const {
    switch (kind) {
        case FunctionalKind::Linear: return "linear";
        case FunctionalKind::QuadraticMean: return "quadratic-mean";
        case FunctionalKind::DoubleIntegral: return "double-integral";
        case FunctionalKind::Variance: return "variance";
        case FunctionalKind::Product: return "product";
        case FunctionalKind::ScaledSecondMoment: return "scaled-second-moment";
    }
    return "?";
}

MeasureCache MeasureFunctional::prepare(const PointsView& pts) const {
    MeasureCache c;
    switch (kind) {
        case FunctionalKind::Linear:
        case FunctionalKind::QuadraticMean:
        case FunctionalKind::Product:
            c.mf = f.integral(pts);
            break;
        case FunctionalKind::DoubleIntegral:
            c.mf = f.integral(pts);
            c.mg = g.integral(pts);
            break;
        case FunctionalKind::Variance: {
            c.mean = measure_mean(pts);
            double s = 0.0;
            for (int l = 0; l < pts.n; ++l) s += dot(pts.point(l), pts.point(l));
            c.second = s / pts.n;
            break;
        }
        case FunctionalKind::ScaledSecondMoment: {
            double s = 0.0;
            for (int l = 0; l < pts.n; ++l) s += dot(pts.point(l), pts.point(l));
            c.second = s / pts.n;
            break;
        }
    }
    return c;
}

double MeasureFunctional::value(std::span<const double> x, const MeasureCache& c) const {
    switch (kind) {
        case FunctionalKind::Linear: return c.mf;
        case FunctionalKind::QuadraticMean: return c.mf * c.mf;
        case FunctionalKind::DoubleIntegral: return c.mf * c.mg;
        case FunctionalKind::Variance: return c.second - dot(c.mean, c.mean);
        case FunctionalKind::Product: return a.value(x) * c.mf;
        case FunctionalKind::ScaledSecondMoment: return scale * c.second;
    }
    return 0.0;
}

Vec MeasureFunctional::dx(std::span<const double> x, const MeasureCache& c) const {
    if (kind == FunctionalKind::Product) return c.mf * a.grad(x);
    return Vec(dim, 0.0);
}

Mat MeasureFunctional::hess_x(std::span<const double> x, const MeasureCache& c) const {
    if (kind == FunctionalKind::Product) {
        Mat h = a.hess(x);
        h *= c.mf;
        return h;
    }
    return Mat::zero(dim);
}

Vec MeasureFunctional::dmu(std::span<const double> x, const MeasureCache& c,
                           std::span<const double> v) const {
    switch (kind) {
        case FunctionalKind::Linear: return f.grad(v);
        case FunctionalKind::QuadraticMean: return (2.0 * c.mf) * f.grad(v);
        case FunctionalKind::DoubleIntegral: {
            Vec r = c.mg * f.grad(v);
            axpy(c.mf, g.grad(v), r);
            return r;
        }
        case FunctionalKind::Variance: {
            Vec r(v.begin(), v.end());
            for (int i = 0; i < dim; ++i) r[i] = 2.0 * (r[i] - c.mean[i]);
            return r;
        }
        case FunctionalKind::Product: return a.value(x) * f.grad(v);
        case FunctionalKind::ScaledSecondMoment: {
            Vec r(v.begin(), v.end());
            for (auto& e : r) e *= 2.0 * scale;
            return r;
        }
    }
    return Vec(dim, 0.0);
}

Mat MeasureFunctional::dv_dmu(std::span<const double> x, const MeasureCache& c,
                              std::span<const double> v) const {
    switch (kind) {
        case FunctionalKind::Linear: return f.hess(v);
        case FunctionalKind::QuadraticMean: {
            Mat h = f.hess(v);
            h *= 2.0 * c.mf;
            return h;
        }
        case FunctionalKind::DoubleIntegral: {
            Mat h = f.hess(v);
            h *= c.mg;
            Mat h2 = g.hess(v);
            h2 *= c.mf;
            h += h2;
            return h;
        }
        case FunctionalKind::Variance: {
            Mat h = Mat::identity(dim);
            h *= 2.0;
            return h;
        }
        case FunctionalKind::Product: {
            Mat h = f.hess(v);
            h *= a.value(x);
            return h;
        }
        case FunctionalKind::ScaledSecondMoment: {
            Mat h = Mat::identity(dim);
            h *= 2.0 * scale;
            return h;
        }
    }
    return Mat::zero(dim);
}

Mat MeasureFunctional::dx_dmu(std::span<const double> x, const MeasureCache& c,
                              std::span<const double> v) const {
    (void)c;
    if (kind == FunctionalKind::Product) {
        // (dmu u)_i = a(x) (grad f)_i  =>  d/dx_j gives (grad f)_i (grad a)_j
        return outer(f.grad(v), a.grad(x));
    }
    return Mat::zero(dim);
}

Mat MeasureFunctional::dmu2(std::span<const double> x, const MeasureCache& c,
                            std::span<const double> v, std::span<const double> vp) const {
    (void)x;
    (void)c;
    switch (kind) {
        case FunctionalKind::QuadraticMean: {
            Mat m = outer(f.grad(v), f.grad(vp));
            m *= 2.0;
            return m;
        }
        case FunctionalKind::DoubleIntegral: {
            Mat m = outer(f.grad(v), g.grad(vp));
            m += outer(g.grad(v), f.grad(vp));
            return m;
        }
        case FunctionalKind::Variance: {
            Mat m = Mat::identity(dim);
            m *= -2.0;
            return m;
        }
        default:
            return Mat::zero(dim);
    }
}

Dmu2Form MeasureFunctional::dmu2_form() const {
    Dmu2Form form;
    switch (kind) {
        case FunctionalKind::QuadraticMean:
            form.zero = false;
            form.parts.push_back({2.0, &f, &f});
            break;
        case FunctionalKind::DoubleIntegral:
            form.zero = false;
            form.parts.push_back({1.0, &f, &g});
            form.parts.push_back({1.0, &g, &f});
            break;
        case FunctionalKind::Variance: {
            form.zero = false;
            form.has_constant = true;
            form.constant = Mat::identity(dim);
            form.constant *= -2.0;
            break;
        }
        default:
            break;
    }
    return form;
}

void MeasureFunctional::add_dmu(std::span<const double> x, const MeasureCache& c,
                                std::span<const double> v, double scale,
                                std::span<double> out) const {
    switch (kind) {
        case FunctionalKind::Linear:
            axpy(scale * f.dp(f.arg(v)), f.dir, out);
            return;
        case FunctionalKind::QuadraticMean:
            axpy(scale * 2.0 * c.mf * f.dp(f.arg(v)), f.dir, out);
            return;
        case FunctionalKind::DoubleIntegral:
            axpy(scale * c.mg * f.dp(f.arg(v)), f.dir, out);
            axpy(scale * c.mf * g.dp(g.arg(v)), g.dir, out);
            return;
        case FunctionalKind::Variance:
            for (int i = 0; i < dim; ++i) out[i] += scale * 2.0 * (v[i] - c.mean[i]);
            return;
        case FunctionalKind::Product:
            axpy(scale * a.value(x) * f.dp(f.arg(v)), f.dir, out);
            return;
        case FunctionalKind::ScaledSecondMoment:
            for (int i = 0; i < dim; ++i) out[i] += scale * 2.0 * this->scale * v[i];
            return;
    }
}

namespace {

inline void add_scaled_outer(double s, const Vec& a, const Vec& b, Mat& out) {
    for (int i = 0; i < out.rows; ++i) {
        const double sa = s * a[i];
        for (int j = 0; j < out.cols; ++j) out(i, j) += sa * b[j];
    }
}

inline void add_scaled_identity(double s, Mat& out) {
    for (int i = 0; i < out.rows; ++i) out(i, i) += s;
}

}  // namespace

void MeasureFunctional::add_dv_dmu(std::span<const double> x, const MeasureCache& c,
                                   std::span<const double> v, double scale, Mat& out) const {
    switch (kind) {
        case FunctionalKind::Linear:
            add_scaled_outer(scale * f.d2p(f.arg(v)), f.dir, f.dir, out);
            return;
        case FunctionalKind::QuadraticMean:
            add_scaled_outer(scale * 2.0 * c.mf * f.d2p(f.arg(v)), f.dir, f.dir, out);
            return;
        case FunctionalKind::DoubleIntegral:
            add_scaled_outer(scale * c.mg * f.d2p(f.arg(v)), f.dir, f.dir, out);
            add_scaled_outer(scale * c.mf * g.d2p(g.arg(v)), g.dir, g.dir, out);
            return;
        case FunctionalKind::Variance:
            add_scaled_identity(scale * 2.0, out);
            return;
        case FunctionalKind::Product:
            add_scaled_outer(scale * a.value(x) * f.d2p(f.arg(v)), f.dir, f.dir, out);
            return;
        case FunctionalKind::ScaledSecondMoment:
            add_scaled_identity(scale * 2.0 * this->scale, out);
            return;
    }
}

void MeasureFunctional::add_dx_dmu(std::span<const double> x, const MeasureCache& c,
                                   std::span<const double> v, double scale, Mat& out) const {
    (void)c;
    if (kind != FunctionalKind::Product) return;
    const Vec gf = f.grad(v);
    const Vec ga = a.grad(x);
    add_scaled_outer(scale, gf, ga, out);
}

void MeasureFunctional::add_dmu2(std::span<const double> x, const MeasureCache& c,
                                 std::span<const double> v, std::span<const double> vp,
                                 double scale, Mat& out) const {
    (void)x;
    (void)c;
    switch (kind) {
        case FunctionalKind::QuadraticMean:
            add_scaled_outer(scale * 2.0, f.grad(v), f.grad(vp), out);
            return;
        case FunctionalKind::DoubleIntegral:
            add_scaled_outer(scale, f.grad(v), g.grad(vp), out);
            add_scaled_outer(scale, g.grad(v), f.grad(vp), out);
            return;
        case FunctionalKind::Variance:
            add_scaled_identity(-2.0 * scale, out);
            return;
        default:
            return;
    }
}

Vec lions_derivative(const MeasureFunctional& u, const EmpiricalMeasure& mu,
                     std::span<const double> v) {
    Vec x(u.dim, 0.0);
    return u.dmu(x, u.prepare(mu.view()), v);
}

Mat lions_hessian_v(const MeasureFunctional& u, const EmpiricalMeasure& mu,
                    std::span<const double> v) {
    Vec x(u.dim, 0.0);
    return u.dv_dmu(x, u.prepare(mu.view()), v);
}

Mat lions_second(const MeasureFunctional& u, const EmpiricalMeasure& mu,
                 std::span<const double> v, std::span<const double> vp) {
    Vec x(u.dim, 0.0);
    return u.dmu2(x, u.prepare(mu.view()), v, vp);
}

SpaceDerivatives space_derivatives(const MeasureFunctional& u, std::span<const double> x,
                                   const EmpiricalMeasure& mu) {
    auto c = u.prepare(mu.view());
    return SpaceDerivatives{u.dx(x, c), u.hess_x(x, c)};
}

Mat dx_lions_derivative(const MeasureFunctional& u, std::span<const double> x,
                        const EmpiricalMeasure& mu, std::span<const double> v) {
    return u.dx_dmu(x, u.prepare(mu.view()), v);
}

}  // namespace lionflow
