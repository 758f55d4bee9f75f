#include "lionflow/sde.hpp"

#include <cmath>
#include <stdexcept>

namespace lionflow {

namespace {

void check_drift_shape(const CoefficientSpec& s, int dim, const char* what) {
    if (s.shape != CoeffShape::Drift || static_cast<int>(s.base_vec.size()) != dim)
        throw std::invalid_argument(std::string(what) + ": drift coefficient shape mismatch");
}

void check_diffusion_shape(const CoefficientSpec& s, int dim, const char* what) {
    if (s.shape != CoeffShape::Diffusion || s.base_mat.rows != dim || s.base_mat.cols != dim)
        throw std::invalid_argument(std::string(what) + ": diffusion coefficient shape mismatch");
}

}  // namespace

StatePath simulate_ito_process(const CoefficientSpec& beta, const CoefficientSpec& gamma,
                               const Vec& x0, const BrownianPath& w) {
    const int d = static_cast<int>(x0.size());
    check_drift_shape(beta, d, "simulate_ito_process");
    check_diffusion_shape(gamma, d, "simulate_ito_process");
    if (w.dim != d) throw std::invalid_argument("simulate_ito_process: driving path dimension");

    StatePath p;
    p.grid = w.grid;
    p.dim = d;
    p.mode = NoiseMode::Single;
    const int m = w.grid.steps;
    const double dt = w.grid.dt();
    p.values.reserve(m + 1);
    p.values.push_back(x0);
    p.beta.reserve(m);
    p.gamma.reserve(m);
    p.dw.reserve(m);
    for (int i = 0; i < m; ++i) {
        const Vec& x = p.values.back();
        CoeffContext ctx{w.grid.node(i), x, w.value(i), {}};
        Vec bv = beta.eval_drift(ctx);
        Mat gv = gamma.eval_diffusion(ctx);
        auto dw = w.increment(i);
        Vec next = x;
        axpy(dt, bv, next);
        Vec gdw = matvec(gv, dw);
        axpy(1.0, gdw, next);
        p.beta.push_back(std::move(bv));
        p.gamma.push_back(std::move(gv));
        p.dw.emplace_back(dw.begin(), dw.end());
        p.values.push_back(std::move(next));
    }
    return p;
}

StatePath simulate_conditional_ito_process(const CoefficientSpec& beta,
                                           const CoefficientSpec& gamma0,
                                           const CoefficientSpec& gamma1, const Vec& x0,
                                           const BrownianPath& w0, const BrownianPath& w1) {
    const int d = static_cast<int>(x0.size());
    check_drift_shape(beta, d, "simulate_conditional_ito_process");
    check_diffusion_shape(gamma0, d, "simulate_conditional_ito_process");
    check_diffusion_shape(gamma1, d, "simulate_conditional_ito_process");
    if (w0.dim != d || w1.dim != d || !(w0.grid == w1.grid))
        throw std::invalid_argument("simulate_conditional_ito_process: driving path mismatch");

    StatePath p;
    p.grid = w0.grid;
    p.dim = d;
    p.mode = NoiseMode::Conditional;
    const int m = p.grid.steps;
    const double dt = p.grid.dt();
    p.values.push_back(x0);
    for (int i = 0; i < m; ++i) {
        const Vec& x = p.values.back();
        CoeffContext ctx{p.grid.node(i), x, w1.value(i), w0.value(i)};
        Vec bv = beta.eval_drift(ctx);
        Mat g0 = gamma0.eval_diffusion(ctx);
        Mat g1 = gamma1.eval_diffusion(ctx);
        Vec next = x;
        axpy(dt, bv, next);
        Vec g0dw = matvec(g0, w0.increment(i));
        Vec g1dw = matvec(g1, w1.increment(i));
        axpy(1.0, g0dw, next);
        axpy(1.0, g1dw, next);
        p.beta.push_back(std::move(bv));
        p.gamma0.push_back(std::move(g0));
        p.gamma1.push_back(std::move(g1));
        p.dw0.emplace_back(w0.increment(i).begin(), w0.increment(i).end());
        p.dw1.emplace_back(w1.increment(i).begin(), w1.increment(i).end());
        p.values.push_back(std::move(next));
    }
    return p;
}

std::vector<Vec> replay_state_path(const StatePath& path) {
    std::vector<Vec> out;
    out.push_back(path.values.front());
    const double dt = path.grid.dt();
    for (int i = 0; i < path.grid.steps; ++i) {
        Vec next = out.back();
        axpy(dt, path.beta[i], next);
        if (path.mode == NoiseMode::Single) {
            Vec gdw = matvec(path.gamma[i], path.dw[i]);
            axpy(1.0, gdw, next);
        } else {
            Vec g0dw = matvec(path.gamma0[i], path.dw0[i]);
            Vec g1dw = matvec(path.gamma1[i], path.dw1[i]);
            axpy(1.0, g0dw, next);
            axpy(1.0, g1dw, next);
        }
        out.push_back(std::move(next));
    }
    return out;
}

void ParticleCloudPath::for_each_step(const std::function<void(const CloudStep&)>& step_fn,
                                      const std::function<void(const PointsView&)>& final_fn) const {
    const int n = count;
    const int d = dim;
    const int m = grid.steps;
    const double dt = grid.dt();

    std::vector<RngStream> streams;
    streams.reserve(n);
    std::vector<double> pts(static_cast<size_t>(n) * d);
    std::vector<double> own_noise(static_cast<size_t>(n) * d, 0.0);
    for (int l = 0; l < n; ++l) {
        RngStream init(seeds.policy.stream("init", seeds.rep, static_cast<std::uint64_t>(l)));
        y0.draw(init, {pts.data() + static_cast<size_t>(l) * d, static_cast<size_t>(d)});
        streams.emplace_back(
            seeds.policy.stream("particle", seeds.rep, static_cast<std::uint64_t>(l)));
    }

    std::vector<Vec> bv(n, Vec(d)), dwv(n, Vec(d));
    std::vector<Mat> sv, s0v, s1v;
    if (mode == NoiseMode::Single) {
        sv.assign(n, Mat(d, d));
    } else {
        s0v.assign(n, Mat(d, d));
        s1v.assign(n, Mat(d, d));
    }
    const double sdt = std::sqrt(dt);

    for (int i = 0; i < m; ++i) {
        const double t = grid.node(i);
        for (int l = 0; l < n; ++l) {
            std::span<const double> state{pts.data() + static_cast<size_t>(l) * d,
                                          static_cast<size_t>(d)};
            std::span<const double> own{own_noise.data() + static_cast<size_t>(l) * d,
                                        static_cast<size_t>(d)};
            std::span<const double> com =
                (mode == NoiseMode::Conditional) ? common.value(i) : std::span<const double>{};
            CoeffContext ctx{t, state, own, com};
            b.eval_drift_into(ctx, bv[l]);
            if (mode == NoiseMode::Single) {
                sigma.eval_diffusion_into(ctx, sv[l]);
            } else {
                sigma0.eval_diffusion_into(ctx, s0v[l]);
                sigma1.eval_diffusion_into(ctx, s1v[l]);
            }
            for (int c = 0; c < d; ++c) dwv[l][c] = sdt * streams[l].gaussian();
        }

        if (step_fn) {
            CloudStep s;
            s.index = i;
            s.t = t;
            s.dt = dt;
            s.points = PointsView{pts.data(), n, d};
            s.b = &bv;
            s.dw = &dwv;
            if (mode == NoiseMode::Single) {
                s.sigma = &sv;
            } else {
                s.sigma0 = &s0v;
                s.sigma1 = &s1v;
                s.dw0 = common.increment(i);
            }
            step_fn(s);
        }

        for (int l = 0; l < n; ++l) {
            std::span<double> state{pts.data() + static_cast<size_t>(l) * d,
                                    static_cast<size_t>(d)};
            axpy(dt, bv[l], state);
            if (mode == NoiseMode::Single) {
                const Mat& g = sv[l];
                for (int r = 0; r < d; ++r) {
                    double acc = 0.0;
                    for (int c = 0; c < d; ++c) acc += g(r, c) * dwv[l][c];
                    state[r] += acc;
                }
            } else {
                const Mat& g0 = s0v[l];
                const Mat& g1 = s1v[l];
                auto dw0 = common.increment(i);
                for (int r = 0; r < d; ++r) {
                    double acc = 0.0;
                    for (int c = 0; c < d; ++c) acc += g0(r, c) * dw0[c] + g1(r, c) * dwv[l][c];
                    state[r] += acc;
                }
            }
            std::span<double> own{own_noise.data() + static_cast<size_t>(l) * d,
                                  static_cast<size_t>(d)};
            axpy(1.0, dwv[l], own);
        }
    }
    if (final_fn) final_fn(PointsView{pts.data(), n, d});
}

EmpiricalMeasure ParticleCloudPath::measure_at(int node) const {
    if (node < 0 || node > grid.steps)
        throw std::invalid_argument("ParticleCloudPath::measure_at: node off grid");
    EmpiricalMeasure out(dim, count);
    bool captured = false;
    auto capture = [&](const PointsView& p) {
        for (int l = 0; l < p.n; ++l)
            for (int c = 0; c < dim; ++c) out.flat[static_cast<size_t>(l) * dim + c] = p.point(l)[c];
        captured = true;
    };
    for_each_step(
        [&](const CloudStep& s) {
            if (s.index == node) capture(s.points);
        },
        [&](const PointsView& p) {
            if (node == grid.steps) capture(p);
        });
    (void)captured;
    return out;
}

std::vector<std::vector<Vec>> ParticleCloudPath::materialize() const {
    std::vector<std::vector<Vec>> traj(count);
    auto push = [&](const PointsView& p) {
        for (int l = 0; l < p.n; ++l) traj[l].emplace_back(p.point(l).begin(), p.point(l).end());
    };
    for_each_step([&](const CloudStep& s) { push(s.points); },
                  [&](const PointsView& p) { push(p); });
    return traj;
}

ParticleCloudPath simulate_particle_system(const CoefficientSpec& b, const CoefficientSpec& sigma,
                                           int count, const InitialSampler& y0,
                                           const TimeGrid& grid, const CloudSeeds& seeds) {
    if (count < 1) throw std::invalid_argument("simulate_particle_system: count must be >= 1");
    check_drift_shape(b, y0.dim, "simulate_particle_system");
    check_diffusion_shape(sigma, y0.dim, "simulate_particle_system");
    ParticleCloudPath cloud;
    cloud.grid = grid;
    cloud.dim = y0.dim;
    cloud.count = count;
    cloud.mode = NoiseMode::Single;
    cloud.b = b;
    cloud.sigma = sigma;
    cloud.y0 = y0;
    cloud.seeds = seeds;
    return cloud;
}

ParticleCloudPath simulate_conditional_particle_system(const CoefficientSpec& b,
                                                       const CoefficientSpec& sigma0,
                                                       const CoefficientSpec& sigma1, int count,
                                                       const InitialSampler& y0,
                                                       const BrownianPath& common,
                                                       const CloudSeeds& seeds) {
    if (count < 1)
        throw std::invalid_argument("simulate_conditional_particle_system: count must be >= 1");
    if (common.dim != y0.dim)
        throw std::invalid_argument("simulate_conditional_particle_system: common path dimension");
    check_drift_shape(b, y0.dim, "simulate_conditional_particle_system");
    check_diffusion_shape(sigma0, y0.dim, "simulate_conditional_particle_system");
    check_diffusion_shape(sigma1, y0.dim, "simulate_conditional_particle_system");
    ParticleCloudPath cloud;
    cloud.grid = common.grid;
    cloud.dim = y0.dim;
    cloud.count = count;
    cloud.mode = NoiseMode::Conditional;
    cloud.b = b;
    cloud.sigma0 = sigma0;
    cloud.sigma1 = sigma1;
    cloud.y0 = y0;
    cloud.seeds = seeds;
    cloud.common = common;
    return cloud;
}

IntegrabilityReport coefficient_integrability_report(const CoefficientSpec& drift,
                                                     const CoefficientSpec& diffusion,
                                                     IntegrabilityMode mode,
                                                     const InitialSampler& init,
                                                     const TimeGrid& grid, const SeedPolicy& seeds,
                                                     int replications) {
    if (replications < 1)
        throw std::invalid_argument("coefficient_integrability_report: replications >= 1");
    const int d = init.dim;
    const double dt = grid.dt();
    const bool measure_mode = (mode == IntegrabilityMode::MeasureProcess);

    double sum1 = 0.0, sumsq1 = 0.0, sum2 = 0.0, sumsq2 = 0.0;
    int nonfinite = 0;

    for (int r = 0; r < replications; ++r) {
        RngStream init_stream(seeds.stream("init", r));
        RngStream noise(seeds.stream("particle", r));
        Vec state(d);
        init.draw(init_stream, state);
        BrownianPath w = sample_brownian(grid, d, noise);

        double i1 = 0.0, i2 = 0.0;
        Vec x = state;
        for (int i = 0; i < grid.steps; ++i) {
            CoeffContext ctx{grid.node(i), x, w.value(i), {}};
            Vec bv = drift.eval_drift(ctx);
            Mat gv = diffusion.eval_diffusion(ctx);
            double bnorm = norm2(bv);
            double gnorm = 0.0;
            for (double v : gv.a) gnorm += v * v;  // squared Frobenius norm
            if (measure_mode) {
                i1 += bnorm * bnorm * dt;      // int |b|^2 ds
                i2 += gnorm * gnorm * dt;      // int |sigma|^4 ds
            } else {
                i1 += bnorm * dt;              // int |beta| ds
                i2 += gnorm * dt;              // int |gamma|^2 ds
            }
            Vec next = x;
            axpy(dt, bv, next);
            Vec gdw = matvec(gv, w.increment(i));
            axpy(1.0, gdw, next);
            x = std::move(next);
        }
        if (!std::isfinite(i1) || !std::isfinite(i2)) {
            ++nonfinite;
            continue;
        }
        sum1 += i1;
        sumsq1 += i1 * i1;
        sum2 += i2;
        sumsq2 += i2 * i2;
    }

    const int good = replications - nonfinite;
    IntegrabilityReport rep;
    rep.samples = replications;
    rep.nonfinite = nonfinite;
    auto finish = [&](const std::string& name, double s, double ss) {
        IntegrabilityReport::Entry e;
        e.name = name;
        if (good > 0) {
            e.mean = s / good;
            double var = ss / good - e.mean * e.mean;
            e.se = (good > 1 && var > 0.0) ? std::sqrt(var / good) : 0.0;
        }
        rep.entries.push_back(e);
    };
    finish(measure_mode ? "int_b_sq" : "int_beta_abs", sum1, sumsq1);
    finish(measure_mode ? "int_sigma_4" : "int_gamma_sq", sum2, sumsq2);
    return rep;
}

}  // namespace lionflow
