#include "lionflow/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <sstream>
#include <thread>

#include "lionflow/lions.hpp"
#include "lionflow/mollifier.hpp"

namespace lionflow {

ExpansionReport run_single_replication(const ExperimentConfig& cfg, const LadderPoint& point,
                                       std::uint64_t rep) {
    const SeedPolicy policy = cfg.policy();
    const TimeGrid grid = make_time_grid(cfg.horizon, point.m);
    const int d = cfg.dim;

    auto draw_x0 = [&]() {
        Vec x0(d, 0.0);
        if (cfg.x_process) {
            RngStream s(policy.stream("x0", rep));
            cfg.x_process->x0.draw(s, x0);
        }
        return x0;
    };

    switch (cfg.theorem) {
        case TheoremId::IWClassic:
        case TheoremId::IWReduced: {
            RngStream ws(policy.stream("field", rep));
            BrownianPath w = sample_brownian(grid, d, ws, policy.stream("field", rep));
            StatePath x = simulate_ito_process(cfg.x_process->beta, cfg.x_process->gamma,
                                               draw_x0(), w);
            return expand_ito_wentzell_classic(cfg.field, x, w, nullptr, cfg.theorem);
        }
        case TheoremId::ILFull: {
            RngStream ws(policy.stream("driver", rep));
            BrownianPath w = sample_brownian(grid, d, ws, policy.stream("driver", rep));
            StatePath x = simulate_ito_process(cfg.x_process->beta, cfg.x_process->gamma,
                                               draw_x0(), w);
            ParticleCloudPath cloud =
                simulate_particle_system(cfg.cloud->b, cfg.cloud->sigma, point.n, cfg.cloud->y0,
                                         grid, CloudSeeds{policy, rep});
            return expand_ito_lions(cfg.field, x, cloud);
        }
        case TheoremId::IWLFullMeasure: {
            RngStream ws(policy.stream("field", rep));
            BrownianPath w = sample_brownian(grid, d, ws, policy.stream("field", rep));
            ParticleCloudPath cloud =
                simulate_particle_system(cfg.cloud->b, cfg.cloud->sigma, point.n, cfg.cloud->y0,
                                         grid, CloudSeeds{policy, rep});
            return expand_full_flow_measure(cfg.field, cloud, w);
        }
        case TheoremId::IWLFullJoint: {
            RngStream ws(policy.stream("field", rep));
            BrownianPath w = sample_brownian(grid, d, ws, policy.stream("field", rep));
            StatePath x = simulate_ito_process(cfg.x_process->beta, cfg.x_process->gamma,
                                               draw_x0(), w);
            ParticleCloudPath cloud =
                simulate_particle_system(cfg.cloud->b, cfg.cloud->sigma, point.n, cfg.cloud->y0,
                                         grid, CloudSeeds{policy, rep});
            return expand_full_flow_joint(cfg.field, x, cloud, w);
        }
        case TheoremId::IWLConditionalMeasure: {
            RngStream w0s(policy.stream("common", rep));
            RngStream w1s(policy.stream("field", rep));
            BrownianPath w0 = sample_brownian(grid, d, w0s, policy.stream("common", rep));
            BrownianPath w1 = sample_brownian(grid, d, w1s, policy.stream("field", rep));
            ParticleCloudPath cloud = simulate_conditional_particle_system(
                cfg.cloud->b, cfg.cloud->sigma0, cfg.cloud->sigma1, point.n, cfg.cloud->y0, w0,
                CloudSeeds{policy, rep});
            return expand_conditional_measure(cfg.field, cloud, w0, w1);
        }
        case TheoremId::ILConditional:
        case TheoremId::IWLConditionalJoint: {
            RngStream w0s(policy.stream("common", rep));
            RngStream w1s(policy.stream("field", rep));
            BrownianPath w0 = sample_brownian(grid, d, w0s, policy.stream("common", rep));
            BrownianPath w1 = sample_brownian(grid, d, w1s, policy.stream("field", rep));
            StatePath x = simulate_conditional_ito_process(
                cfg.x_process->beta, cfg.x_process->gamma0, cfg.x_process->gamma1, draw_x0(), w0,
                w1);
            ParticleCloudPath cloud = simulate_conditional_particle_system(
                cfg.cloud->b, cfg.cloud->sigma0, cfg.cloud->sigma1, point.n, cfg.cloud->y0, w0,
                CloudSeeds{policy, rep});
            ExpansionReport r = expand_conditional_joint(cfg.field, x, cloud, w0, w1);
            r.theorem = cfg.theorem;
            return r;
        }
    }
    throw std::logic_error("run_single_replication: unhandled theorem");
}

StatRow run_replications(const ExperimentConfig& cfg, const LadderPoint& point, int threads) {
    const int r_total = cfg.replications;
    std::vector<ExpansionReport> reports(r_total);
    std::vector<char> ok(r_total, 0);

    const int workers = std::max(1, std::min(threads, r_total));
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    auto work = [&] {
        for (;;) {
            const int rep = next.fetch_add(1);
            if (rep >= r_total) break;
            reports[rep] = run_single_replication(cfg, point, static_cast<std::uint64_t>(rep));
            ok[rep] = 1;
        }
    };
    if (workers == 1) {
        work();
    } else {
        pool.reserve(workers);
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    StatRow row;
    row.m = point.m;
    row.n = point.n;
    row.level = point.level;
    row.replications = r_total;

    RunningStat res_stat;
    std::vector<RunningStat> term_stats;
    // Aggregate in replication-index order: results do not depend on the
    // worker count.
    for (int rep = 0; rep < r_total; ++rep) {
        if (!ok[rep]) continue;
        const ExpansionReport& r = reports[rep];
        if (row.term_names.empty()) {
            for (const auto& [k, v] : r.terms) row.term_names.push_back(k);
            term_stats.resize(row.term_names.size());
        }
        const double res = residual(r);
        bool finite = std::isfinite(res) && std::isfinite(r.lhs);
        for (const auto& [k, v] : r.terms) finite = finite && std::isfinite(v);
        if (!finite) {
            ++row.nan_count;
            continue;
        }
        res_stat.add(res);
        row.lhs_values.push_back(r.lhs);
        row.residuals.push_back(res);
        std::vector<double> tv;
        tv.reserve(r.terms.size());
        for (size_t t = 0; t < r.terms.size(); ++t) {
            tv.push_back(r.terms[t].second);
            term_stats[t].add(r.terms[t].second);
        }
        row.term_values.push_back(std::move(tv));
    }
    row.effective = res_stat.count();
    row.mean = res_stat.mean();
    row.rms = res_stat.rms();
    row.se = res_stat.se();
    for (const auto& ts : term_stats) row.term_means.push_back(ts.mean());
    row.failed = (row.nan_count * 10 > r_total);  // > 10% non-finite
    return row;
}

ConvergenceTable convergence_study(const ExperimentConfig& cfg, int threads) {
    ConvergenceTable table;
    const int n_ref = cfg.n_ladder.empty() ? 1 : cfg.n_ladder.back();
    const int m_ref = cfg.m_ladder.back();

    for (int m : cfg.m_ladder) {
        table.rows.push_back(run_replications(cfg, LadderPoint{m, n_ref, 0}, threads));
        table.m_ladder_rows.push_back(table.rows.size() - 1);
    }
    for (int n : cfg.n_ladder) {
        if (n == n_ref) {
            table.n_ladder_rows.push_back(table.m_ladder_rows.back());
            continue;
        }
        table.rows.push_back(run_replications(cfg, LadderPoint{m_ref, n, 0}, threads));
        table.n_ladder_rows.push_back(table.rows.size() - 1);
    }

    auto fit_over = [&](const std::vector<size_t>& idx, bool vs_m) {
        std::vector<std::pair<double, double>> xy;
        for (size_t i : idx) {
            const StatRow& r = table.rows[i];
            xy.emplace_back(vs_m ? r.m : r.n, r.rms);
        }
        return fit_loglog_slope(xy);
    };
    table.slope_m = fit_over(table.m_ladder_rows, true);
    table.slope_n = fit_over(table.n_ladder_rows, false);
    if (!table.slope_m && cfg.m_ladder.size() >= 1)
        table.warnings.push_back("slope vs M omitted: fewer than 3 usable ladder points");
    if (!table.slope_n && cfg.n_ladder.size() > 1)
        table.warnings.push_back("slope vs N omitted: fewer than 3 usable ladder points");
    return table;
}

std::vector<CheckOutcome> apply_tolerances(const ExperimentConfig& cfg,
                                           const ConvergenceTable& table) {
    std::vector<CheckOutcome> out;
    const ToleranceBlock& tol = cfg.tolerances;
    if (table.rows.empty()) return out;
    const StatRow& corner = table.rows[table.m_ladder_rows.back()];

    std::ostringstream os;
    auto emit = [&](const std::string& name, bool pass, const std::string& detail) {
        out.push_back(CheckOutcome{name, pass, detail});
    };
    auto fmt = [](double v) { return format_double(v); };

    for (const auto& row : table.rows) {
        if (row.failed) {
            emit("nan-rate", false,
                 "more than 10% non-finite replications at M=" + std::to_string(row.m));
            return out;
        }
    }

    if (tol.rms_max)
        emit("rms_max", corner.rms <= *tol.rms_max,
             "rms=" + fmt(corner.rms) + " limit=" + fmt(*tol.rms_max));
    if (tol.mean_se_factor) {
        const double lim = *tol.mean_se_factor * corner.se;
        emit("mean_within_se", std::abs(corner.mean) <= lim,
             "|mean|=" + fmt(std::abs(corner.mean)) + " limit=" + fmt(lim));
    }
    if (tol.residual_max) {
        double worst = 0.0;
        for (double r : corner.residuals) worst = std::max(worst, std::abs(r));
        emit("residual_max", worst <= *tol.residual_max,
             "max|residual|=" + fmt(worst) + " limit=" + fmt(*tol.residual_max));
    }
    if (tol.slope_m_window) {
        if (table.slope_m) {
            const auto [lo, hi] = *tol.slope_m_window;
            emit("slope_m_window",
                 table.slope_m->slope >= lo && table.slope_m->slope <= hi,
                 "slope=" + fmt(table.slope_m->slope) + " window=[" + fmt(lo) + "," + fmt(hi) +
                     "]");
        } else {
            emit("slope_m_window", true, "skipped: fewer than 3 ladder points");
        }
    }
    if (tol.slope_n_window) {
        if (table.slope_n) {
            const auto [lo, hi] = *tol.slope_n_window;
            emit("slope_n_window",
                 table.slope_n->slope >= lo && table.slope_n->slope <= hi,
                 "slope=" + fmt(table.slope_n->slope) + " window=[" + fmt(lo) + "," + fmt(hi) +
                     "]");
        } else {
            emit("slope_n_window", true, "skipped: fewer than 3 ladder points");
        }
    }
    if (tol.monotone_n_se_factor) {
        bool pass = true;
        std::string detail = "rms along N:";
        for (size_t i = 0; i < table.n_ladder_rows.size(); ++i) {
            const StatRow& r = table.rows[table.n_ladder_rows[i]];
            detail += " " + fmt(r.rms);
            if (i > 0) {
                const StatRow& prev = table.rows[table.n_ladder_rows[i - 1]];
                const double slack =
                    *tol.monotone_n_se_factor * std::sqrt(r.se * r.se + prev.se * prev.se);
                if (r.rms > prev.rms + slack) pass = false;
            }
        }
        emit("monotone_n", pass, detail);
    }
    if (tol.ablate) {
        // Mean over replications of (residual + term) - mean residual equals
        // the term mean; check the induced shift against the expected value.
        double term_mean = 0.0;
        bool found = false;
        for (size_t t = 0; t < corner.term_names.size(); ++t) {
            if (corner.term_names[t] == tol.ablate->term) {
                term_mean = corner.term_means[t];
                found = true;
            }
        }
        if (!found) {
            emit("ablation", false, "unknown term '" + tol.ablate->term + "'");
        } else {
            const double err = std::abs(term_mean - tol.ablate->expected);
            const double lim = tol.ablate->rel_tol * std::abs(tol.ablate->expected);
            emit("ablation", err <= lim,
                 "shift=" + fmt(term_mean) + " expected=" + fmt(tol.ablate->expected) +
                     " tol=" + fmt(lim));
        }
    }
    return out;
}

MollificationTable mollification_study(const MeasureFunctional& functional, int dim, int cloud_n,
                                       const std::vector<int>& levels, int quadrature,
                                       const SeedPolicy& policy) {
    RngStream cs(policy.stream("mollcloud"));
    EmpiricalMeasure cloud(dim, cloud_n);
    for (int l = 0; l < cloud_n; ++l)
        for (int c = 0; c < dim; ++c) cloud.point(l)[c] = cs.gaussian();

    // Brute-force Lipschitz estimate: the largest |dmu u| over a grid on the
    // cloud's bounding box inflated by the maximal shift.
    const double inflate = levels.empty() ? 1.0 : 1.0 / levels.front();
    Vec lo(dim, 0.0), hi(dim, 0.0);
    for (int c = 0; c < dim; ++c) {
        lo[c] = hi[c] = cloud.point(0)[c];
        for (int l = 1; l < cloud_n; ++l) {
            lo[c] = std::min(lo[c], cloud.point(l)[c]);
            hi[c] = std::max(hi[c], cloud.point(l)[c]);
        }
        lo[c] -= inflate;
        hi[c] += inflate;
    }
    double lip = 0.0;
    const int grid_pts = (dim == 1) ? 4001 : 201;
    std::vector<int> idx(dim, 0);
    Vec v(dim, 0.0);
    const auto cache = functional.prepare(cloud.view());
    Vec x0(dim, 0.0);
    for (;;) {
        for (int c = 0; c < dim; ++c)
            v[c] = lo[c] + (hi[c] - lo[c]) * idx[c] / (grid_pts - 1);
        lip = std::max(lip, norm2(functional.dmu(x0, cache, v)));
        int c = 0;
        for (; c < dim; ++c) {
            if (++idx[c] < grid_pts) break;
            idx[c] = 0;
        }
        if (c == dim) break;
    }

    MollificationTable table;
    for (int n : levels) {
        MollifierKernel kernel(dim, n, quadrature);
        RngStream stream(policy.stream("mollifier", 0, static_cast<std::uint64_t>(n)));
        MollifiedResult r = mollified_projection_detail(functional, cloud, kernel, stream);
        MollificationRow row;
        row.level = n;
        row.quadrature = quadrature;
        row.error = std::abs(r.value - r.projection);
        row.lip_bound = lip * kernel.support_radius() / n;
        row.max_w2sq = r.max_w2sq;
        const double sr = kernel.support_radius() / n;
        row.w2_bound = sr * sr;
        table.rows.push_back(row);
    }
    return table;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string terms_csv(const std::vector<StatRow>& rows) {
    std::ostringstream os;
    os << "M,N,n,rep,lhs,residual";
    if (!rows.empty())
        for (const auto& name : rows.front().term_names) os << "," << name;
    os << "\n";
    for (const auto& row : rows) {
        for (size_t rep = 0; rep < row.residuals.size(); ++rep) {
            os << row.m << "," << row.n << "," << row.level << "," << rep << ","
               << format_double(row.lhs_values[rep]) << "," << format_double(row.residuals[rep]);
            for (double tv : row.term_values[rep]) os << "," << format_double(tv);
            os << "\n";
        }
    }
    return os.str();
}

std::string convergence_csv(const ConvergenceTable& table) {
    std::ostringstream os;
    os << "M,N,n,R,mean_residual,rms_residual,se,slope_M,slope_N\n";
    const std::string sm = table.slope_m ? format_double(table.slope_m->slope) : "";
    const std::string sn = table.slope_n ? format_double(table.slope_n->slope) : "";
    for (const auto& row : table.rows) {
        os << row.m << "," << row.n << "," << row.level << "," << row.effective << ","
           << format_double(row.mean) << "," << format_double(row.rms) << ","
           << format_double(row.se) << "," << sm << "," << sn << "\n";
    }
    return os.str();
}

}  // namespace lionflow
