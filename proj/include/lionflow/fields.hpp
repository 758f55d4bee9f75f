#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "lionflow/brownian.hpp"
#include "lionflow/functionals.hpp"
#include "lionflow/grid.hpp"

namespace lionflow {

// Realized driving noise of the field at a grid node. Single-noise fields
// read `w`; two-noise fields read `w0` (common) and `w1` (idiosyncratic).
struct FieldContext {
    const TimeGrid* grid = nullptr;
    int step = 0;
    const BrownianPath* w = nullptr;
    const BrownianPath* w0 = nullptr;
    const BrownianPath* w1 = nullptr;

    double t() const { return grid->node(step); }
};

enum class FieldKind {
    Static,              // u_t = F, phi = psi = 0
    DriftRamp,           // u_t = F (1 + t^2/2), phi_t = F t
    ExpMartingale,       // u_t = F E_t, E_t = exp(lambda.W_t - |lambda|^2 t / 2), psi_t = u_t lambda
    LinearNoise,         // u_t = F + c.W_t, psi = c
    NoiseProduct,        // u_t = F + G (e.W_t), psi_t = G e
    CommonNoiseProduct,  // u_t = F + G (e.W0_t), psi0_t = G e, psi1 = 0
    IdioNoiseProduct     // u_t = F + G (e.W1_t), psi1_t = G e, psi0 = 0
};

enum class FieldNoiseMode { Single, Two };

// Per-step evaluation cache: functional summaries for the current cloud plus
// the scalar noise/time factors of the field kind.
struct FieldCache {
    MeasureCache fc;
    MeasureCache gc;
    double su = 1.0;    // factor multiplying F inside u_t
    double sg = 0.0;    // factor multiplying G inside u_t
    double addu = 0.0;  // state-free additive part of u_t
};

// Ito random field u_t(x, mu) defined by its coefficients (f, phi, psi) in
// single-noise mode or (f, phi, psi^0, psi^1) in two-noise mode. Every kind
// has a closed-form field expression, and every derivative the chain-rule
// formulae need is derived from the catalogue functionals' closed forms.
class ItoRandomField {
public:
    FieldKind kind = FieldKind::Static;
    FieldNoiseMode mode = FieldNoiseMode::Single;
    int dim = 1;
    MeasureFunctional F;
    std::optional<MeasureFunctional> G;
    Vec lambda;  // exponential-martingale loading
    Vec c;       // linear-noise loading
    Vec e;       // noise-product direction
    std::string label;

    static ItoRandomField statik(MeasureFunctional F,
                                 FieldNoiseMode mode = FieldNoiseMode::Single);
    static ItoRandomField drift_ramp(MeasureFunctional F,
                                     FieldNoiseMode mode = FieldNoiseMode::Single);
    static ItoRandomField exp_martingale(MeasureFunctional F, Vec lambda);
    static ItoRandomField linear_noise(MeasureFunctional F, Vec c);
    static ItoRandomField noise_product(MeasureFunctional F, MeasureFunctional G, Vec e);
    static ItoRandomField common_noise_product(MeasureFunctional F, MeasureFunctional G, Vec e);
    static ItoRandomField idio_noise_product(MeasureFunctional F, MeasureFunctional G, Vec e);
    // u_t(mu) = (weight . mean(mu)) * (e . W0_t)
    static ItoRandomField mean_times_common_noise(int dim, Vec weight, Vec e);

    bool two_noise() const { return mode == FieldNoiseMode::Two; }
    bool deterministic() const {
        return kind == FieldKind::Static || kind == FieldKind::DriftRamp;
    }
    bool depends_on_x() const { return F.depends_on_x() || (G && G->depends_on_x()); }

    FieldCache prepare(const FieldContext& ctx, const PointsView& pts) const;

    // Field value and its space/measure derivatives at the frozen node.
    double value(const FieldContext& ctx, std::span<const double> x, const FieldCache& c) const;
    Vec dx(const FieldContext& ctx, std::span<const double> x, const FieldCache& c) const;
    Mat hess_x(const FieldContext& ctx, std::span<const double> x, const FieldCache& c) const;
    Vec dmu(const FieldContext& ctx, std::span<const double> x, const FieldCache& c,
            std::span<const double> v) const;
    Mat dv_dmu(const FieldContext& ctx, std::span<const double> x, const FieldCache& c,
               std::span<const double> v) const;
    Mat dx_dmu(const FieldContext& ctx, std::span<const double> x, const FieldCache& c,
               std::span<const double> v) const;
    Mat dmu2(const FieldContext& ctx, std::span<const double> x, const FieldCache& c,
             std::span<const double> v, std::span<const double> vp) const;
    // d2mu structure of u_t with the kind's scalar factors folded into the
    // coefficients; used by the pair-average (U-statistic) accumulators.
    Dmu2Form dmu2_form(const FieldCache& c) const;

    // Ito coefficients at the node (frozen-argument convention).
    double phi(const FieldContext& ctx, std::span<const double> x, const FieldCache& c) const;
    Vec psi(const FieldContext& ctx, std::span<const double> x, const FieldCache& c) const;
    Mat dx_psi(const FieldContext& ctx, std::span<const double> x, const FieldCache& c) const;
    Vec psi0(const FieldContext& ctx, std::span<const double> x, const FieldCache& c) const;
    Vec psi1(const FieldContext& ctx, std::span<const double> x, const FieldCache& c) const;
    Mat dx_psi0(const FieldContext& ctx, std::span<const double> x, const FieldCache& c) const;
    Mat dx_psi1(const FieldContext& ctx, std::span<const double> x, const FieldCache& c) const;
    // [dmu_psi0]_{ij} = d/dmu_j of psi0_i
    Mat dmu_psi0(const FieldContext& ctx, std::span<const double> x, const FieldCache& c,
                 std::span<const double> v) const;

    // Allocation-free variants for the per-particle loops; `out` is zeroed
    // and must be pre-sized to the field dimension.
    void dmu_into(std::span<const double> x, const FieldCache& c, std::span<const double> v,
                  std::span<double> out) const;
    void dv_dmu_into(std::span<const double> x, const FieldCache& c, std::span<const double> v,
                     Mat& out) const;
    void dx_dmu_into(std::span<const double> x, const FieldCache& c, std::span<const double> v,
                     Mat& out) const;
    void dmu2_into(std::span<const double> x, const FieldCache& c, std::span<const double> v,
                   std::span<const double> vp, Mat& out) const;
    void dmu_psi0_into(std::span<const double> x, const FieldCache& c, std::span<const double> v,
                       Mat& out) const;

    // Closed-form field expression (all catalogue kinds have one).
    double closed_value(const FieldContext& ctx, std::span<const double> x,
                        const FieldCache& c) const {
        return value(ctx, x, c);
    }

    double factor_su(const FieldContext& ctx) const;
    double factor_sg(const FieldContext& ctx) const;
    double factor_addu(const FieldContext& ctx) const;
};

// u_{t_step}(x, mu) reconstructed by left-point integration of the field's
// own dynamics with (x, mu) frozen:
//   f(x,mu) + sum_{j<step} phi_{t_j}(x,mu) dt + sum_{j<step} psi_{t_j}(x,mu).dW_j
// (two-noise mode uses psi^0.dW^0 + psi^1.dW^1).
double field_value(const ItoRandomField& field, int step, std::span<const double> x,
                   const PointsView& mu, const BrownianPath* w, const BrownianPath* w0 = nullptr,
                   const BrownianPath* w1 = nullptr);

inline double field_value(const ItoRandomField& field, int step, std::span<const double> x,
                          const EmpiricalMeasure& mu, const BrownianPath& w) {
    return field_value(field, step, x, mu.view(), &w);
}

}  // namespace lionflow
