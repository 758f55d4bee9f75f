#include "lionflow/fields.hpp"

#include <algorithm>
#include <cmath>

namespace lionflow {

namespace {

MeasureFunctional zero_functional(int dim) {
    return MeasureFunctional::linear(dim, InnerFunction::constant(dim, 0.0));
}

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

ItoRandomField ItoRandomField::statik(MeasureFunctional F, FieldNoiseMode mode) {
    ItoRandomField f;
    f.kind = FieldKind::Static;
    f.mode = mode;
    f.dim = F.dim;
    f.F = std::move(F);
    f.label = "static";
    return f;
}

ItoRandomField ItoRandomField::drift_ramp(MeasureFunctional F, FieldNoiseMode mode) {
    ItoRandomField f;
    f.kind = FieldKind::DriftRamp;
    f.mode = mode;
    f.dim = F.dim;
    f.F = std::move(F);
    f.label = "drift-ramp";
    return f;
}

ItoRandomField ItoRandomField::exp_martingale(MeasureFunctional F, Vec lambda) {
    ItoRandomField f;
    f.kind = FieldKind::ExpMartingale;
    f.mode = FieldNoiseMode::Single;
    f.dim = F.dim;
    require(static_cast<int>(lambda.size()) == f.dim, "exp_martingale: lambda dimension");
    f.F = std::move(F);
    f.lambda = std::move(lambda);
    f.label = "exponential-martingale";
    return f;
}

ItoRandomField ItoRandomField::linear_noise(MeasureFunctional F, Vec c) {
    ItoRandomField f;
    f.kind = FieldKind::LinearNoise;
    f.mode = FieldNoiseMode::Single;
    f.dim = F.dim;
    require(static_cast<int>(c.size()) == f.dim, "linear_noise: loading dimension");
    f.F = std::move(F);
    f.c = std::move(c);
    f.label = "linear-noise";
    return f;
}

ItoRandomField ItoRandomField::noise_product(MeasureFunctional F, MeasureFunctional G, Vec e) {
    ItoRandomField f;
    f.kind = FieldKind::NoiseProduct;
    f.mode = FieldNoiseMode::Single;
    f.dim = F.dim;
    require(G.dim == f.dim && static_cast<int>(e.size()) == f.dim,
            "noise_product: dimension mismatch");
    f.F = std::move(F);
    f.G = std::move(G);
    f.e = std::move(e);
    f.label = "noise-product";
    return f;
}

ItoRandomField ItoRandomField::common_noise_product(MeasureFunctional F, MeasureFunctional G,
                                                    Vec e) {
    ItoRandomField f;
    f.kind = FieldKind::CommonNoiseProduct;
    f.mode = FieldNoiseMode::Two;
    f.dim = F.dim;
    require(G.dim == f.dim && static_cast<int>(e.size()) == f.dim,
            "common_noise_product: dimension mismatch");
    f.F = std::move(F);
    f.G = std::move(G);
    f.e = std::move(e);
    f.label = "common-noise-product";
    return f;
}

ItoRandomField ItoRandomField::idio_noise_product(MeasureFunctional F, MeasureFunctional G,
                                                  Vec e) {
    ItoRandomField f;
    f.kind = FieldKind::IdioNoiseProduct;
    f.mode = FieldNoiseMode::Two;
    f.dim = F.dim;
    require(G.dim == f.dim && static_cast<int>(e.size()) == f.dim,
            "idio_noise_product: dimension mismatch");
    f.F = std::move(F);
    f.G = std::move(G);
    f.e = std::move(e);
    f.label = "idio-noise-product";
    return f;
}

ItoRandomField ItoRandomField::mean_times_common_noise(int dim, Vec weight, Vec e) {
    require(static_cast<int>(weight.size()) == dim && static_cast<int>(e.size()) == dim,
            "mean_times_common_noise: dimension mismatch");
    auto f = common_noise_product(zero_functional(dim),
                                  MeasureFunctional::linear(dim, InnerFunction::linear(weight)),
                                  std::move(e));
    f.label = "mean-times-common-noise";
    return f;
}

double ItoRandomField::factor_su(const FieldContext& ctx) const {
    switch (kind) {
        case FieldKind::DriftRamp: {
            const double t = ctx.t();
            return 1.0 + 0.5 * t * t;
        }
        case FieldKind::ExpMartingale: {
            require(ctx.w != nullptr, "field: single-noise path missing");
            const double lw = dot(lambda, ctx.w->value(ctx.step));
            return std::exp(lw - 0.5 * dot(lambda, lambda) * ctx.t());
        }
        default:
            return 1.0;
    }
}

double ItoRandomField::factor_sg(const FieldContext& ctx) const {
    switch (kind) {
        case FieldKind::NoiseProduct:
            require(ctx.w != nullptr, "field: single-noise path missing");
            return dot(e, ctx.w->value(ctx.step));
        case FieldKind::CommonNoiseProduct:
            require(ctx.w0 != nullptr, "field: common-noise path missing");
            return dot(e, ctx.w0->value(ctx.step));
        case FieldKind::IdioNoiseProduct:
            require(ctx.w1 != nullptr, "field: idiosyncratic-noise path missing");
            return dot(e, ctx.w1->value(ctx.step));
        default:
            return 0.0;
    }
}

double ItoRandomField::factor_addu(const FieldContext& ctx) const {
    if (kind == FieldKind::LinearNoise) {
        require(ctx.w != nullptr, "field: single-noise path missing");
        return dot(c, ctx.w->value(ctx.step));
    }
    return 0.0;
}

FieldCache ItoRandomField::prepare(const FieldContext& ctx, const PointsView& pts) const {
    FieldCache cache;
    cache.fc = F.prepare(pts);
    if (G) cache.gc = G->prepare(pts);
    cache.su = factor_su(ctx);
    cache.sg = factor_sg(ctx);
    cache.addu = factor_addu(ctx);
    return cache;
}

double ItoRandomField::value(const FieldContext& ctx, std::span<const double> x,
                             const FieldCache& c) const {
    (void)ctx;
    double v = c.su * F.value(x, c.fc) + c.addu;
    if (G) v += c.sg * G->value(x, c.gc);
    return v;
}

Vec ItoRandomField::dx(const FieldContext&, std::span<const double> x, const FieldCache& c) const {
    Vec r = c.su * F.dx(x, c.fc);
    if (G) axpy(c.sg, G->dx(x, c.gc), r);
    return r;
}

Mat ItoRandomField::hess_x(const FieldContext&, std::span<const double> x,
                           const FieldCache& c) const {
    Mat r = F.hess_x(x, c.fc);
    r *= c.su;
    if (G) {
        Mat rg = G->hess_x(x, c.gc);
        rg *= c.sg;
        r += rg;
    }
    return r;
}

Vec ItoRandomField::dmu(const FieldContext&, std::span<const double> x, const FieldCache& c,
                        std::span<const double> v) const {
    Vec r = c.su * F.dmu(x, c.fc, v);
    if (G) axpy(c.sg, G->dmu(x, c.gc, v), r);
    return r;
}

Mat ItoRandomField::dv_dmu(const FieldContext&, std::span<const double> x, const FieldCache& c,
                           std::span<const double> v) const {
    Mat r = F.dv_dmu(x, c.fc, v);
    r *= c.su;
    if (G) {
        Mat rg = G->dv_dmu(x, c.gc, v);
        rg *= c.sg;
        r += rg;
    }
    return r;
}

Mat ItoRandomField::dx_dmu(const FieldContext&, std::span<const double> x, const FieldCache& c,
                           std::span<const double> v) const {
    Mat r = F.dx_dmu(x, c.fc, v);
    r *= c.su;
    if (G) {
        Mat rg = G->dx_dmu(x, c.gc, v);
        rg *= c.sg;
        r += rg;
    }
    return r;
}

Mat ItoRandomField::dmu2(const FieldContext&, std::span<const double> x, const FieldCache& c,
                         std::span<const double> v, std::span<const double> vp) const {
    Mat r = F.dmu2(x, c.fc, v, vp);
    r *= c.su;
    if (G) {
        Mat rg = G->dmu2(x, c.gc, v, vp);
        rg *= c.sg;
        r += rg;
    }
    return r;
}

Dmu2Form ItoRandomField::dmu2_form(const FieldCache& c) const {
    Dmu2Form total = F.dmu2_form();
    if (!total.zero) {
        if (total.has_constant) total.constant *= c.su;
        for (auto& p : total.parts) p.coef *= c.su;
    }
    if (G) {
        Dmu2Form gf = G->dmu2_form();
        if (!gf.zero) {
            if (gf.has_constant) {
                gf.constant *= c.sg;
                if (total.has_constant)
                    total.constant += gf.constant;
                else {
                    total.constant = gf.constant;
                    total.has_constant = true;
                }
            }
            for (auto& p : gf.parts) {
                p.coef *= c.sg;
                total.parts.push_back(p);
            }
            total.zero = false;
        }
    }
    if (!total.zero && !total.has_constant && total.parts.empty()) total.zero = true;
    return total;
}

namespace {
inline void zero_mat(Mat& m) { std::fill(m.a.begin(), m.a.end(), 0.0); }
}  // namespace

void ItoRandomField::dmu_into(std::span<const double> x, const FieldCache& c,
                              std::span<const double> v, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    F.add_dmu(x, c.fc, v, c.su, out);
    if (G) G->add_dmu(x, c.gc, v, c.sg, out);
}

void ItoRandomField::dv_dmu_into(std::span<const double> x, const FieldCache& c,
                                 std::span<const double> v, Mat& out) const {
    zero_mat(out);
    F.add_dv_dmu(x, c.fc, v, c.su, out);
    if (G) G->add_dv_dmu(x, c.gc, v, c.sg, out);
}

void ItoRandomField::dx_dmu_into(std::span<const double> x, const FieldCache& c,
                                 std::span<const double> v, Mat& out) const {
    zero_mat(out);
    F.add_dx_dmu(x, c.fc, v, c.su, out);
    if (G) G->add_dx_dmu(x, c.gc, v, c.sg, out);
}

void ItoRandomField::dmu2_into(std::span<const double> x, const FieldCache& c,
                               std::span<const double> v, std::span<const double> vp,
                               Mat& out) const {
    zero_mat(out);
    F.add_dmu2(x, c.fc, v, vp, c.su, out);
    if (G) G->add_dmu2(x, c.gc, v, vp, c.sg, out);
}

void ItoRandomField::dmu_psi0_into(std::span<const double> x, const FieldCache& c,
                                   std::span<const double> v, Mat& out) const {
    zero_mat(out);
    if (kind != FieldKind::CommonNoiseProduct) return;
    Vec gd(dim, 0.0);
    G->add_dmu(x, c.gc, v, 1.0, gd);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) out(i, j) += e[i] * gd[j];
}

double ItoRandomField::phi(const FieldContext& ctx, std::span<const double> x,
                           const FieldCache& c) const {
    if (kind == FieldKind::DriftRamp) return ctx.t() * F.value(x, c.fc);
    return 0.0;
}

Vec ItoRandomField::psi(const FieldContext& ctx, std::span<const double> x,
                        const FieldCache& c) const {
    switch (kind) {
        case FieldKind::ExpMartingale:
            return (c.su * F.value(x, c.fc)) * lambda;
        case FieldKind::LinearNoise:
            return this->c;
        case FieldKind::NoiseProduct:
            return G->value(x, c.gc) * e;
        default:
            (void)ctx;
            return Vec(dim, 0.0);
    }
}

Mat ItoRandomField::dx_psi(const FieldContext&, std::span<const double> x,
                           const FieldCache& c) const {
    switch (kind) {
        case FieldKind::ExpMartingale: {
            Mat m = outer(lambda, F.dx(x, c.fc));
            m *= c.su;
            return m;
        }
        case FieldKind::NoiseProduct:
            return outer(e, G->dx(x, c.gc));
        default:
            return Mat::zero(dim);
    }
}

Vec ItoRandomField::psi0(const FieldContext&, std::span<const double> x,
                         const FieldCache& c) const {
    if (kind == FieldKind::CommonNoiseProduct) return G->value(x, c.gc) * e;
    return Vec(dim, 0.0);
}

Vec ItoRandomField::psi1(const FieldContext&, std::span<const double> x,
                         const FieldCache& c) const {
    if (kind == FieldKind::IdioNoiseProduct) return G->value(x, c.gc) * e;
    return Vec(dim, 0.0);
}

Mat ItoRandomField::dx_psi0(const FieldContext&, std::span<const double> x,
                            const FieldCache& c) const {
    if (kind == FieldKind::CommonNoiseProduct) return outer(e, G->dx(x, c.gc));
    return Mat::zero(dim);
}

Mat ItoRandomField::dx_psi1(const FieldContext&, std::span<const double> x,
                            const FieldCache& c) const {
    if (kind == FieldKind::IdioNoiseProduct) return outer(e, G->dx(x, c.gc));
    return Mat::zero(dim);
}

Mat ItoRandomField::dmu_psi0(const FieldContext&, std::span<const double> x, const FieldCache& c,
                             std::span<const double> v) const {
    if (kind == FieldKind::CommonNoiseProduct) return outer(e, G->dmu(x, c.gc, v));
    return Mat::zero(dim);
}

double field_value(const ItoRandomField& field, int step, std::span<const double> x,
                   const PointsView& mu, const BrownianPath* w, const BrownianPath* w0,
                   const BrownianPath* w1) {
    const TimeGrid* grid = nullptr;
    if (field.two_noise()) {
        if (w0 == nullptr || w1 == nullptr)
            throw std::invalid_argument("field_value: two-noise field needs both paths");
        grid = &w0->grid;
    } else {
        if (w == nullptr) throw std::invalid_argument("field_value: driving path missing");
        grid = &w->grid;
    }
    if (step < 0 || step > grid->steps)
        throw std::invalid_argument("field_value: node off grid");

    const double dt = grid->dt();
    FieldContext ctx0{grid, 0, w, w0, w1};
    FieldCache cache = field.prepare(ctx0, mu);
    double u = field.value(ctx0, x, cache);  // f(x, mu): su=1, sg=0, addu=0 at t=0

    for (int j = 0; j < step; ++j) {
        FieldContext ctx{grid, j, w, w0, w1};
        cache.su = field.factor_su(ctx);
        cache.sg = field.factor_sg(ctx);
        cache.addu = field.factor_addu(ctx);
        u += dt * field.phi(ctx, x, cache);
        if (field.two_noise()) {
            u += dot(field.psi0(ctx, x, cache), w0->increment(j));
            u += dot(field.psi1(ctx, x, cache), w1->increment(j));
        } else {
            u += dot(field.psi(ctx, x, cache), w->increment(j));
        }
    }
    return u;
}

}  // namespace lionflow
