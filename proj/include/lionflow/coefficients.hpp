#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "lionflow/brownian.hpp"
#include "lionflow/linalg.hpp"
#include "lionflow/rng.hpp"

namespace lionflow {

// Everything a coefficient may look at when evaluated at a grid node: the
// node time, the current state, and driving-noise values up to that node.
// Only information available at t_i is exposed, so adaptedness holds by
// construction.
struct CoeffContext {
    double t = 0.0;
    std::span<const double> state;       // current state of the process
    std::span<const double> own_noise;   // W(t_i) of the process's own driver
    std::span<const double> common_noise;  // W^0(t_i) in conditional mode (may be empty)
};

enum class CoeffShape { Drift, Diffusion };  // d-vector vs d x d matrix

enum class CoeffKind { Constant, TimePolynomial, LinearInState, PathNoise };

enum class NoiseSource { Own, Common };

// Closed vocabulary of coefficient processes. The scalar profile s(.) scales
// a fixed base tensor B:
//   constant:         value = B
//   time-polynomial:  value = (sum_k c_k t^k) B
//   linear-in-state:  value = (alpha + beta * (w . state)) B
//   path-noise:       value = (alpha + beta * (w . W(t)))  B
struct CoefficientSpec {
    CoeffKind kind = CoeffKind::Constant;
    CoeffShape shape = CoeffShape::Drift;
    int dim = 1;

    Vec base_vec;       // drift base (d)
    Mat base_mat;       // diffusion base (d x d)
    Vec poly;           // time polynomial coefficients c_0..c_k
    double alpha = 0.0;
    double beta = 0.0;
    Vec weight;         // w for state/noise projection
    NoiseSource source = NoiseSource::Own;

    static CoefficientSpec constant_drift(Vec b) {
        CoefficientSpec s;
        s.kind = CoeffKind::Constant;
        s.shape = CoeffShape::Drift;
        s.dim = static_cast<int>(b.size());
        s.base_vec = std::move(b);
        return s;
    }
    static CoefficientSpec constant_diffusion(Mat g) {
        CoefficientSpec s;
        s.kind = CoeffKind::Constant;
        s.shape = CoeffShape::Diffusion;
        s.dim = g.rows;
        s.base_mat = std::move(g);
        return s;
    }
    // 1-d conveniences
    static CoefficientSpec scalar_drift(double b) { return constant_drift(Vec{b}); }
    static CoefficientSpec scalar_diffusion(double g) {
        Mat m(1, 1);
        m(0, 0) = g;
        return constant_diffusion(m);
    }

    double profile(const CoeffContext& ctx) const {
        switch (kind) {
            case CoeffKind::Constant:
                return 1.0;
            case CoeffKind::TimePolynomial: {
                double v = 0.0;
                for (size_t k = poly.size(); k-- > 0;) v = v * ctx.t + poly[k];
                return v;
            }
            case CoeffKind::LinearInState:
                return alpha + beta * dot(weight, ctx.state);
            case CoeffKind::PathNoise: {
                auto w = (source == NoiseSource::Common) ? ctx.common_noise : ctx.own_noise;
                if (w.empty())
                    throw std::invalid_argument("CoefficientSpec: noise source not available");
                return alpha + beta * dot(weight, w);
            }
        }
        return 0.0;
    }

    Vec eval_drift(const CoeffContext& ctx) const {
        if (shape != CoeffShape::Drift)
            throw std::invalid_argument("CoefficientSpec: drift evaluation on diffusion spec");
        return profile(ctx) * base_vec;
    }

    Mat eval_diffusion(const CoeffContext& ctx) const {
        if (shape != CoeffShape::Diffusion)
            throw std::invalid_argument("CoefficientSpec: diffusion evaluation on drift spec");
        return profile(ctx) * base_mat;
    }

    // In-place variants for per-particle loops; `out` must be pre-sized.
    void eval_drift_into(const CoeffContext& ctx, std::span<double> out) const {
        const double s = profile(ctx);
        for (size_t i = 0; i < out.size(); ++i) out[i] = s * base_vec[i];
    }
    void eval_diffusion_into(const CoeffContext& ctx, Mat& out) const {
        const double s = profile(ctx);
        for (size_t i = 0; i < out.a.size(); ++i) out.a[i] = s * base_mat.a[i];
    }
};

enum class SamplerKind { PointMass, Gaussian, Uniform };

// Square-integrable initial-condition samplers, drawn from a role-tagged
// stream independent of all driving noise.
struct InitialSampler {
    SamplerKind kind = SamplerKind::PointMass;
    int dim = 1;
    Vec center;   // point value / mean / lower bound
    Vec spread;   // unused / per-coordinate stddev / upper bound

    static InitialSampler point(Vec v) {
        InitialSampler s;
        s.kind = SamplerKind::PointMass;
        s.dim = static_cast<int>(v.size());
        s.center = std::move(v);
        return s;
    }
    static InitialSampler gaussian(Vec mean, Vec stddev) {
        InitialSampler s;
        s.kind = SamplerKind::Gaussian;
        s.dim = static_cast<int>(mean.size());
        s.center = std::move(mean);
        s.spread = std::move(stddev);
        return s;
    }
    static InitialSampler uniform(Vec lo, Vec hi) {
        InitialSampler s;
        s.kind = SamplerKind::Uniform;
        s.dim = static_cast<int>(lo.size());
        s.center = std::move(lo);
        s.spread = std::move(hi);
        return s;
    }

    void draw(RngStream& stream, std::span<double> out) const {
        switch (kind) {
            case SamplerKind::PointMass:
                for (int c = 0; c < dim; ++c) out[c] = center[c];
                break;
            case SamplerKind::Gaussian:
                for (int c = 0; c < dim; ++c) out[c] = center[c] + spread[c] * stream.gaussian();
                break;
            case SamplerKind::Uniform:
                for (int c = 0; c < dim; ++c)
                    out[c] = center[c] + (spread[c] - center[c]) * stream.uniform();
                break;
        }
    }
};

}  // namespace lionflow
