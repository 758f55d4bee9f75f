#include "lionflow/expansion.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace lionflow {

const char* theorem_name(TheoremId id) {
    switch (id) {
        case TheoremId::IWClassic: return "iw-classic";
        case TheoremId::IWReduced: return "iw-reduced";
        case TheoremId::ILFull: return "il-full";
        case TheoremId::IWLFullMeasure: return "iwl-full-measure";
        case TheoremId::IWLFullJoint: return "iwl-full-joint";
        case TheoremId::ILConditional: return "il-conditional";
        case TheoremId::IWLConditionalMeasure: return "iwl-conditional-measure";
        case TheoremId::IWLConditionalJoint: return "iwl-conditional-joint";
    }
    return "?";
}

TheoremId theorem_from_name(std::string_view name) {
    for (TheoremId id :
         {TheoremId::IWClassic, TheoremId::IWReduced, TheoremId::ILFull,
          TheoremId::IWLFullMeasure, TheoremId::IWLFullJoint, TheoremId::ILConditional,
          TheoremId::IWLConditionalMeasure, TheoremId::IWLConditionalJoint}) {
        if (name == theorem_name(id)) return id;
    }
    throw std::invalid_argument("unknown theorem id: " + std::string(name));
}

double ExpansionReport::term(std::string_view name) const {
    for (const auto& [k, v] : terms)
        if (k == name) return v;
    throw std::invalid_argument("unknown term id: " + std::string(name));
}

bool ExpansionReport::has_term(std::string_view name) const {
    for (const auto& [k, v] : terms)
        if (k == name) return true;
    return false;
}

double ExpansionReport::term_sum() const {
    double s = 0.0;
    for (const auto& [k, v] : terms) s += v;
    return s;
}

double residual(const ExpansionReport& report) { return report.lhs - report.term_sum(); }

double term_ablation(const ExpansionReport& report, std::string_view term) {
    return residual(report) + report.term(term);
}

double pair_average_dmu2(const Dmu2Form& form, const PointsView& points,
                         const std::vector<Mat>& sigma, bool direct) {
    const int n = points.n;
    const int d = points.dim;
    if (form.zero || n < 2) return 0.0;

    if (direct) {
        Mat dmat(d, d);
        double acc = 0.0;
        for (int l = 0; l < n; ++l) {
            for (int lp = 0; lp < n; ++lp) {
                if (lp == l) continue;
                std::fill(dmat.a.begin(), dmat.a.end(), 0.0);
                if (form.has_constant) dmat += form.constant;
                for (const auto& part : form.parts) {
                    const Vec gv = part.g->grad(points.point(l));
                    const Vec hv = part.h->grad(points.point(lp));
                    for (int i = 0; i < d; ++i)
                        for (int j = 0; j < d; ++j) dmat(i, j) += part.coef * gv[i] * hv[j];
                }
                acc += trace_dbct(dmat, sigma[l], sigma[lp]);
            }
        }
        return acc / (static_cast<double>(n) * (n - 1));
    }

    // All-pairs sum via rank-1 accumulators, then subtract the diagonal.
    double all = 0.0;
    if (form.has_constant) {
        Mat s(d, d);
        for (int l = 0; l < n; ++l) s += sigma[l];
        all += trace_sandwich(form.constant, s);
    }
    Mat sg(d, d), th(d, d);
    for (const auto& part : form.parts) {
        std::fill(sg.a.begin(), sg.a.end(), 0.0);
        std::fill(th.a.begin(), th.a.end(), 0.0);
        for (int l = 0; l < n; ++l) {
            const auto v = points.point(l);
            const double gs = part.g->dp(part.g->arg(v));
            const double hs = part.h->dp(part.h->arg(v));
            for (size_t i = 0; i < sg.a.size(); ++i) {
                sg.a[i] += gs * sigma[l].a[i];
                th.a[i] += hs * sigma[l].a[i];
            }
        }
        // sum_{p,q,k} g_p Sg(q,k) h_q Th(p,k)
        double s = 0.0;
        for (int k = 0; k < d; ++k) {
            double left = 0.0, right = 0.0;
            for (int q = 0; q < d; ++q) left += part.h->dir[q] * sg(q, k);
            for (int p = 0; p < d; ++p) right += part.g->dir[p] * th(p, k);
            s += left * right;
        }
        all += part.coef * s;
    }

    double diag = 0.0;
    Mat dmat(d, d);
    for (int l = 0; l < n; ++l) {
        std::fill(dmat.a.begin(), dmat.a.end(), 0.0);
        if (form.has_constant) dmat += form.constant;
        const auto v = points.point(l);
        for (const auto& part : form.parts) {
            const double gs = part.g->dp(part.g->arg(v));
            const double hs = part.h->dp(part.h->arg(v));
            const double c = part.coef * gs * hs;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) dmat(i, j) += c * part.g->dir[i] * part.h->dir[j];
        }
        diag += trace_dbct(dmat, sigma[l], sigma[l]);
    }
    return (all - diag) / (static_cast<double>(n) * (n - 1));
}

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* msg) {
    if (!(a == b)) throw std::invalid_argument(msg);
}

void require_same_path(const BrownianPath& a, const BrownianPath& b, const char* msg) {
    if (!(a.grid == b.grid) || a.dim != b.dim || a.increments != b.increments)
        throw std::invalid_argument(msg);
}

EmpiricalMeasure capture(const PointsView& p) {
    EmpiricalMeasure m(p.dim, p.n);
    std::memcpy(m.flat.data(), p.data, sizeof(double) * m.flat.size());
    return m;
}

struct TermAcc {
    std::vector<std::pair<std::string, double>> terms;
    // Capacity fixed up front: callers hold references across insertions.
    TermAcc() { terms.reserve(16); }
    double& operator[](const char* name) {
        for (auto& [k, v] : terms)
            if (k == name) return v;
        terms.emplace_back(name, 0.0);
        return terms.back().second;
    }
};

ExpansionReport finish(TheoremId id, double lhs, std::optional<double> lhs_closed, TermAcc&& acc,
                       int steps, int particles, int dim) {
    ExpansionReport r;
    r.theorem = id;
    r.lhs = lhs;
    r.lhs_closed = lhs_closed;
    r.terms = std::move(acc.terms);
    r.residual_stored = lhs - r.term_sum();
    r.steps = steps;
    r.particles = particles;
    r.dim = dim;
    return r;
}

}  // namespace

ExpansionReport expand_ito_wentzell_classic(const ItoRandomField& field, const StatePath& x,
                                            const BrownianPath& w,
                                            const EmpiricalMeasure* frozen_mu, TheoremId id) {
    require(!field.two_noise(), "expand_ito_wentzell_classic: field must be single-noise");
    require(x.mode == NoiseMode::Single, "expand_ito_wentzell_classic: process mode");
    require_same_grid(x.grid, w.grid, "expand_ito_wentzell_classic: grid mismatch");
    require(x.dim == field.dim && w.dim == field.dim,
            "expand_ito_wentzell_classic: dimension mismatch");
    require(id == TheoremId::IWClassic || id == TheoremId::IWReduced,
            "expand_ito_wentzell_classic: report id");

    EmpiricalMeasure fallback(field.dim, 1);
    const EmpiricalMeasure& mu = frozen_mu ? *frozen_mu : fallback;
    const PointsView mv = mu.view();
    const TimeGrid& grid = x.grid;
    const double dt = grid.dt();

    TermAcc acc;
    double& phi_dt = acc["phi_dt"];
    double& psi_dw = acc["psi_dW"];
    double& dxu_beta = acc["dxu_beta_dt"];
    double& dxu_gamma = acc["dxu_gamma_dW"];
    double& hess = acc["hess_x_dt"];
    double& dxpsi = acc["dxpsi_gamma_dt"];

    for (int i = 0; i < grid.steps; ++i) {
        FieldContext ctx{&grid, i, &w, nullptr, nullptr};
        const Vec& xi = x.values[i];
        FieldCache cache = field.prepare(ctx, mv);
        auto dwi = w.increment(i);

        phi_dt += dt * field.phi(ctx, xi, cache);
        psi_dw += dot(field.psi(ctx, xi, cache), dwi);
        const Vec dxu = field.dx(ctx, xi, cache);
        dxu_beta += dt * dot(dxu, x.beta[i]);
        dxu_gamma += dot(dxu, matvec(x.gamma[i], x.dw[i]));
        hess += 0.5 * dt * trace_sandwich(field.hess_x(ctx, xi, cache), x.gamma[i]);
        dxpsi += dt * trace_abt(field.dx_psi(ctx, xi, cache), x.gamma[i]);
    }

    const int m = grid.steps;
    const double lhs = field_value(field, m, x.values[m], mv, &w) -
                       field_value(field, 0, x.values[0], mv, &w);
    FieldContext ctx_t{&grid, m, &w, nullptr, nullptr};
    FieldContext ctx_0{&grid, 0, &w, nullptr, nullptr};
    const double closed = field.closed_value(ctx_t, x.values[m], field.prepare(ctx_t, mv)) -
                          field.closed_value(ctx_0, x.values[0], field.prepare(ctx_0, mv));
    return finish(id, lhs, closed, std::move(acc), m, 0, field.dim);
}

ExpansionReport expand_ito_lions(const ItoRandomField& u, const StatePath& x,
                                 const ParticleCloudPath& cloud) {
    require(u.deterministic(), "expand_ito_lions: field must be deterministic");
    require(cloud.mode == NoiseMode::Single,
            "expand_ito_lions: conditional-mode cloud supplied; use conditional evaluators");
    require(x.mode == NoiseMode::Single, "expand_ito_lions: process mode");
    require_same_grid(x.grid, cloud.grid, "expand_ito_lions: grid mismatch");
    require(x.dim == u.dim && cloud.dim == u.dim, "expand_ito_lions: dimension mismatch");

    const TimeGrid& grid = cloud.grid;
    const double dt = grid.dt();
    const int d = u.dim;
    const int n = cloud.count;

    TermAcc acc;
    double& phi_dt = acc["phi_dt"];
    double& dxu_beta = acc["dxu_beta_dt"];
    double& dxu_gamma = acc["dxu_gamma_dW"];
    double& hess = acc["hess_x_dt"];
    double& dmu_b = acc["dmu_b_dt"];
    double& dv_dmu = acc["dv_dmu_sigma_dt"];

    EmpiricalMeasure mu0, mu_t;
    Vec dmu_buf(d);
    Mat dvdmu_buf(d, d);

    cloud.for_each_step(
        [&](const CloudStep& s) {
            const int i = s.index;
            if (i == 0) mu0 = capture(s.points);
            FieldContext ctx{&grid, i, nullptr, nullptr, nullptr};
            const Vec& xi = x.values[i];
            FieldCache cache = u.prepare(ctx, s.points);

            phi_dt += dt * u.phi(ctx, xi, cache);
            const Vec dxu = u.dx(ctx, xi, cache);
            dxu_beta += dt * dot(dxu, x.beta[i]);
            dxu_gamma += dot(dxu, matvec(x.gamma[i], x.dw[i]));
            hess += 0.5 * dt * trace_sandwich(u.hess_x(ctx, xi, cache), x.gamma[i]);

            double acc_b = 0.0, acc_tr = 0.0;
            for (int l = 0; l < n; ++l) {
                const auto v = s.points.point(l);
                u.dmu_into(xi, cache, v, dmu_buf);
                acc_b += dot(dmu_buf, (*s.b)[l]);
                u.dv_dmu_into(xi, cache, v, dvdmu_buf);
                acc_tr += trace_sandwich(dvdmu_buf, (*s.sigma)[l]);
            }
            dmu_b += dt * acc_b / n;
            dv_dmu += 0.5 * dt * acc_tr / n;
        },
        [&](const PointsView& p) { mu_t = capture(p); });

    const int m = grid.steps;
    FieldContext ctx_t{&grid, m, nullptr, nullptr, nullptr};
    FieldContext ctx_0{&grid, 0, nullptr, nullptr, nullptr};
    const double lhs = u.value(ctx_t, x.values[m], u.prepare(ctx_t, mu_t.view())) -
                       u.value(ctx_0, x.values[0], u.prepare(ctx_0, mu0.view()));
    return finish(TheoremId::ILFull, lhs, lhs, std::move(acc), m, n, d);
}

ExpansionReport expand_full_flow_measure(const ItoRandomField& field,
                                         const ParticleCloudPath& cloud, const BrownianPath& w) {
    require(!field.two_noise(), "expand_full_flow_measure: two-noise field supplied");
    require(!field.depends_on_x(), "expand_full_flow_measure: field must be x-free");
    require(cloud.mode == NoiseMode::Single, "expand_full_flow_measure: cloud mode");
    require_same_grid(cloud.grid, w.grid, "expand_full_flow_measure: grid mismatch");
    require(cloud.dim == field.dim && w.dim == field.dim,
            "expand_full_flow_measure: dimension mismatch");

    const TimeGrid& grid = cloud.grid;
    const double dt = grid.dt();
    const int d = field.dim;
    const int n = cloud.count;
    const Vec x0(d, 0.0);

    TermAcc acc;
    double& phi_dt = acc["phi_dt"];
    double& psi_dw = acc["psi_dW"];
    double& dmu_b = acc["dmu_b_dt"];
    double& dv_dmu = acc["dv_dmu_sigma_dt"];

    EmpiricalMeasure mu0, mu_t;
    Vec dmu_buf(d);
    Mat dvdmu_buf(d, d);

    cloud.for_each_step(
        [&](const CloudStep& s) {
            const int i = s.index;
            if (i == 0) mu0 = capture(s.points);
            FieldContext ctx{&grid, i, &w, nullptr, nullptr};
            FieldCache cache = field.prepare(ctx, s.points);

            phi_dt += dt * field.phi(ctx, x0, cache);
            psi_dw += dot(field.psi(ctx, x0, cache), w.increment(i));

            double acc_b = 0.0, acc_tr = 0.0;
            for (int l = 0; l < n; ++l) {
                const auto v = s.points.point(l);
                field.dmu_into(x0, cache, v, dmu_buf);
                acc_b += dot(dmu_buf, (*s.b)[l]);
                field.dv_dmu_into(x0, cache, v, dvdmu_buf);
                acc_tr += trace_sandwich(dvdmu_buf, (*s.sigma)[l]);
            }
            dmu_b += dt * acc_b / n;
            dv_dmu += 0.5 * dt * acc_tr / n;
        },
        [&](const PointsView& p) { mu_t = capture(p); });

    const int m = grid.steps;
    const double lhs =
        field_value(field, m, x0, mu_t.view(), &w) - field_value(field, 0, x0, mu0.view(), &w);
    FieldContext ctx_t{&grid, m, &w, nullptr, nullptr};
    FieldContext ctx_0{&grid, 0, &w, nullptr, nullptr};
    const double closed = field.closed_value(ctx_t, x0, field.prepare(ctx_t, mu_t.view())) -
                          field.closed_value(ctx_0, x0, field.prepare(ctx_0, mu0.view()));
    return finish(TheoremId::IWLFullMeasure, lhs, closed, std::move(acc), m, n, d);
}

ExpansionReport expand_full_flow_joint(const ItoRandomField& field, const StatePath& x,
                                       const ParticleCloudPath& cloud, const BrownianPath& w) {
    require(!field.two_noise(), "expand_full_flow_joint: two-noise field supplied");
    require(cloud.mode == NoiseMode::Single, "expand_full_flow_joint: cloud mode");
    require(x.mode == NoiseMode::Single, "expand_full_flow_joint: process mode");
    require_same_grid(cloud.grid, w.grid, "expand_full_flow_joint: grid mismatch");
    require_same_grid(x.grid, w.grid, "expand_full_flow_joint: grid mismatch");
    require(cloud.dim == field.dim && w.dim == field.dim && x.dim == field.dim,
            "expand_full_flow_joint: dimension mismatch");

    const TimeGrid& grid = cloud.grid;
    const double dt = grid.dt();
    const int d = field.dim;
    const int n = cloud.count;

    TermAcc acc;
    double& phi_dt = acc["phi_dt"];
    double& psi_dw = acc["psi_dW"];
    double& dxu_gamma = acc["dxu_gamma_dW"];
    double& dxpsi = acc["dxpsi_gamma_dt"];
    double& dxu_beta = acc["dxu_beta_dt"];
    double& hess = acc["hess_x_dt"];
    double& dmu_b = acc["dmu_b_dt"];
    double& dv_dmu = acc["dv_dmu_sigma_dt"];

    EmpiricalMeasure mu0, mu_t;
    Vec dmu_buf(d);
    Mat dvdmu_buf(d, d);

    cloud.for_each_step(
        [&](const CloudStep& s) {
            const int i = s.index;
            if (i == 0) mu0 = capture(s.points);
            FieldContext ctx{&grid, i, &w, nullptr, nullptr};
            const Vec& xi = x.values[i];
            FieldCache cache = field.prepare(ctx, s.points);

            phi_dt += dt * field.phi(ctx, xi, cache);
            psi_dw += dot(field.psi(ctx, xi, cache), w.increment(i));
            const Vec dxu = field.dx(ctx, xi, cache);
            dxu_gamma += dot(dxu, matvec(x.gamma[i], x.dw[i]));
            dxpsi += dt * trace_abt(field.dx_psi(ctx, xi, cache), x.gamma[i]);
            dxu_beta += dt * dot(dxu, x.beta[i]);
            hess += 0.5 * dt * trace_sandwich(field.hess_x(ctx, xi, cache), x.gamma[i]);

            double acc_b = 0.0, acc_tr = 0.0;
            for (int l = 0; l < n; ++l) {
                const auto v = s.points.point(l);
                field.dmu_into(xi, cache, v, dmu_buf);
                acc_b += dot(dmu_buf, (*s.b)[l]);
                field.dv_dmu_into(xi, cache, v, dvdmu_buf);
                acc_tr += trace_sandwich(dvdmu_buf, (*s.sigma)[l]);
            }
            dmu_b += dt * acc_b / n;
            dv_dmu += 0.5 * dt * acc_tr / n;
        },
        [&](const PointsView& p) { mu_t = capture(p); });

    const int m = grid.steps;
    const double lhs = field_value(field, m, x.values[m], mu_t.view(), &w) -
                       field_value(field, 0, x.values[0], mu0.view(), &w);
    FieldContext ctx_t{&grid, m, &w, nullptr, nullptr};
    FieldContext ctx_0{&grid, 0, &w, nullptr, nullptr};
    const double closed =
        field.closed_value(ctx_t, x.values[m], field.prepare(ctx_t, mu_t.view())) -
        field.closed_value(ctx_0, x.values[0], field.prepare(ctx_0, mu0.view()));
    return finish(TheoremId::IWLFullJoint, lhs, closed, std::move(acc), m, n, d);
}

ExpansionReport expand_conditional_measure(const ItoRandomField& field,
                                           const ParticleCloudPath& cloud, const BrownianPath& w0,
                                           const BrownianPath& w1) {
    require(field.two_noise(), "expand_conditional_measure: single-noise field supplied");
    require(!field.depends_on_x(), "expand_conditional_measure: field must be x-free");
    require(cloud.mode == NoiseMode::Conditional, "expand_conditional_measure: cloud mode");
    require_same_grid(cloud.grid, w0.grid, "expand_conditional_measure: grid mismatch");
    require_same_grid(w0.grid, w1.grid, "expand_conditional_measure: grid mismatch");
    require_same_path(cloud.common, w0,
                      "expand_conditional_measure: cloud must share the supplied W0 path");
    require(cloud.dim == field.dim && w0.dim == field.dim && w1.dim == field.dim,
            "expand_conditional_measure: dimension mismatch");

    const TimeGrid& grid = cloud.grid;
    const double dt = grid.dt();
    const int d = field.dim;
    const int n = cloud.count;
    const Vec x0(d, 0.0);

    TermAcc acc;
    double& phi_dt = acc["phi_dt"];
    double& psi0_dw0 = acc["psi0_dW0"];
    double& psi1_dw1 = acc["psi1_dW1"];
    double& dmu_b = acc["dmu_b_dt"];
    double& sig0_dmu = acc["sigma0_dmu_dW0"];
    double& dv_dmu = acc["dv_dmu_sigma_dt"];
    double& dmu2_t = acc["dmu2_sigma0_dt"];
    double& dmu_psi0 = acc["dmu_psi0_sigma0_dt"];

    EmpiricalMeasure mu0, mu_t;
    Vec dmu_buf(d), sig_dmu_acc(d);
    Mat dvdmu_buf(d, d), dmupsi0_buf(d, d);

    cloud.for_each_step(
        [&](const CloudStep& s) {
            const int i = s.index;
            if (i == 0) mu0 = capture(s.points);
            FieldContext ctx{&grid, i, nullptr, &w0, &w1};
            FieldCache cache = field.prepare(ctx, s.points);
            auto dw0 = w0.increment(i);

            phi_dt += dt * field.phi(ctx, x0, cache);
            psi0_dw0 += dot(field.psi0(ctx, x0, cache), dw0);
            psi1_dw1 += dot(field.psi1(ctx, x0, cache), w1.increment(i));

            double acc_b = 0.0, acc_tr = 0.0, acc_psi0 = 0.0;
            std::fill(sig_dmu_acc.begin(), sig_dmu_acc.end(), 0.0);
            for (int l = 0; l < n; ++l) {
                const auto v = s.points.point(l);
                const Mat& s0 = (*s.sigma0)[l];
                const Mat& s1 = (*s.sigma1)[l];
                field.dmu_into(x0, cache, v, dmu_buf);
                acc_b += dot(dmu_buf, (*s.b)[l]);
                for (int cc = 0; cc < d; ++cc) {
                    double t = 0.0;
                    for (int r = 0; r < d; ++r) t += s0(r, cc) * dmu_buf[r];
                    sig_dmu_acc[cc] += t;  // (sigma0)^T dmu u
                }
                field.dv_dmu_into(x0, cache, v, dvdmu_buf);
                acc_tr += trace_sandwich2(dvdmu_buf, s0, s1);
                field.dmu_psi0_into(x0, cache, v, dmupsi0_buf);
                acc_psi0 += trace_abt(dmupsi0_buf, s0);
            }
            dmu_b += dt * acc_b / n;
            sig0_dmu += dot(sig_dmu_acc, dw0) / n;
            dv_dmu += 0.5 * dt * acc_tr / n;
            dmu2_t += 0.5 * dt * pair_average_dmu2(field.dmu2_form(cache), s.points, *s.sigma0);
            dmu_psi0 += dt * acc_psi0 / n;
        },
        [&](const PointsView& p) { mu_t = capture(p); });

    const int m = grid.steps;
    const double lhs = field_value(field, m, x0, mu_t.view(), nullptr, &w0, &w1) -
                       field_value(field, 0, x0, mu0.view(), nullptr, &w0, &w1);
    FieldContext ctx_t{&grid, m, nullptr, &w0, &w1};
    FieldContext ctx_0{&grid, 0, nullptr, &w0, &w1};
    const double closed = field.closed_value(ctx_t, x0, field.prepare(ctx_t, mu_t.view())) -
                          field.closed_value(ctx_0, x0, field.prepare(ctx_0, mu0.view()));
    return finish(TheoremId::IWLConditionalMeasure, lhs, closed, std::move(acc), m, n, d);
}

ExpansionReport expand_conditional_joint(const ItoRandomField& field, const StatePath& x,
                                         const ParticleCloudPath& cloud, const BrownianPath& w0,
                                         const BrownianPath& w1) {
    require(field.two_noise(), "expand_conditional_joint: single-noise field supplied");
    require(cloud.mode == NoiseMode::Conditional, "expand_conditional_joint: cloud mode");
    require(x.mode == NoiseMode::Conditional,
            "expand_conditional_joint: process must be driven by (W0, W1)");
    require_same_grid(cloud.grid, w0.grid, "expand_conditional_joint: grid mismatch");
    require_same_grid(w0.grid, w1.grid, "expand_conditional_joint: grid mismatch");
    require_same_grid(x.grid, w0.grid, "expand_conditional_joint: grid mismatch");
    require_same_path(cloud.common, w0,
                      "expand_conditional_joint: cloud must share the supplied W0 path");
    require(cloud.dim == field.dim && w0.dim == field.dim && w1.dim == field.dim &&
                x.dim == field.dim,
            "expand_conditional_joint: dimension mismatch");

    const TimeGrid& grid = cloud.grid;
    const double dt = grid.dt();
    const int d = field.dim;
    const int n = cloud.count;

    TermAcc acc;
    double& phi_dt = acc["phi_dt"];
    double& psi0_dw0 = acc["psi0_dW0"];
    double& psi1_dw1 = acc["psi1_dW1"];
    double& dxu_beta = acc["dxu_beta_dt"];
    double& dxu_g0 = acc["dxu_gamma0_dW0"];
    double& dxu_g1 = acc["dxu_gamma1_dW1"];
    double& hess = acc["hess_x_dt"];
    double& dmu_b = acc["dmu_b_dt"];
    double& sig0_dmu = acc["sigma0_dmu_dW0"];
    double& dv_dmu = acc["dv_dmu_sigma_dt"];
    double& dmu2_t = acc["dmu2_sigma0_dt"];
    double& dx_dmu = acc["dx_dmu_gamma0_dt"];
    double& dxpsi0 = acc["dxpsi0_gamma0_dt"];
    double& dxpsi1 = acc["dxpsi1_gamma1_dt"];
    double& dmu_psi0 = acc["dmu_psi0_sigma0_dt"];

    EmpiricalMeasure mu0, mu_t;
    Vec dmu_buf(d), sig_dmu_acc(d);
    Mat dvdmu_buf(d, d), dxdmu_buf(d, d), dmupsi0_buf(d, d);

    cloud.for_each_step(
        [&](const CloudStep& s) {
            const int i = s.index;
            if (i == 0) mu0 = capture(s.points);
            FieldContext ctx{&grid, i, nullptr, &w0, &w1};
            const Vec& xi = x.values[i];
            FieldCache cache = field.prepare(ctx, s.points);
            auto dw0 = w0.increment(i);
            auto dw1 = w1.increment(i);

            phi_dt += dt * field.phi(ctx, xi, cache);
            psi0_dw0 += dot(field.psi0(ctx, xi, cache), dw0);
            psi1_dw1 += dot(field.psi1(ctx, xi, cache), dw1);
            const Vec dxu = field.dx(ctx, xi, cache);
            dxu_beta += dt * dot(dxu, x.beta[i]);
            dxu_g0 += dot(dxu, matvec(x.gamma0[i], x.dw0[i]));
            dxu_g1 += dot(dxu, matvec(x.gamma1[i], x.dw1[i]));
            hess += 0.5 * dt *
                    trace_sandwich2(field.hess_x(ctx, xi, cache), x.gamma0[i], x.gamma1[i]);
            dxpsi0 += dt * trace_abt(field.dx_psi0(ctx, xi, cache), x.gamma0[i]);
            dxpsi1 += dt * trace_abt(field.dx_psi1(ctx, xi, cache), x.gamma1[i]);

            double acc_b = 0.0, acc_tr = 0.0, acc_psi0 = 0.0, acc_xmu = 0.0;
            std::fill(sig_dmu_acc.begin(), sig_dmu_acc.end(), 0.0);
            for (int l = 0; l < n; ++l) {
                const auto v = s.points.point(l);
                const Mat& s0 = (*s.sigma0)[l];
                const Mat& s1 = (*s.sigma1)[l];
                field.dmu_into(xi, cache, v, dmu_buf);
                acc_b += dot(dmu_buf, (*s.b)[l]);
                for (int cc = 0; cc < d; ++cc) {
                    double t = 0.0;
                    for (int r = 0; r < d; ++r) t += s0(r, cc) * dmu_buf[r];
                    sig_dmu_acc[cc] += t;
                }
                field.dv_dmu_into(xi, cache, v, dvdmu_buf);
                acc_tr += trace_sandwich2(dvdmu_buf, s0, s1);
                field.dx_dmu_into(xi, cache, v, dxdmu_buf);
                acc_xmu += trace_dbct(dxdmu_buf, x.gamma0[i], s0);
                field.dmu_psi0_into(xi, cache, v, dmupsi0_buf);
                acc_psi0 += trace_abt(dmupsi0_buf, s0);
            }
            dmu_b += dt * acc_b / n;
            sig0_dmu += dot(sig_dmu_acc, dw0) / n;
            dv_dmu += 0.5 * dt * acc_tr / n;
            dmu2_t += 0.5 * dt * pair_average_dmu2(field.dmu2_form(cache), s.points, *s.sigma0);
            dx_dmu += dt * acc_xmu / n;
            dmu_psi0 += dt * acc_psi0 / n;
        },
        [&](const PointsView& p) { mu_t = capture(p); });

    const int m = grid.steps;
    const double lhs = field_value(field, m, x.values[m], mu_t.view(), nullptr, &w0, &w1) -
                       field_value(field, 0, x.values[0], mu0.view(), nullptr, &w0, &w1);
    FieldContext ctx_t{&grid, m, nullptr, &w0, &w1};
    FieldContext ctx_0{&grid, 0, nullptr, &w0, &w1};
    const double closed =
        field.closed_value(ctx_t, x.values[m], field.prepare(ctx_t, mu_t.view())) -
        field.closed_value(ctx_0, x.values[0], field.prepare(ctx_0, mu0.view()));
    return finish(TheoremId::IWLConditionalJoint, lhs, closed, std::move(acc), m, n, d);
}

}  // namespace lionflow
