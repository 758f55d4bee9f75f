#include <doctest.h>

#include <cmath>

#include "lionflow/harness.hpp"
#include "lionflow/oracles.hpp"

using namespace lionflow;

namespace {

ExperimentConfig frozen_config() {
    ExperimentConfig cfg;
    cfg.theorem = TheoremId::IWLFullMeasure;
    cfg.dim = 1;
    cfg.horizon = 1.0;
    cfg.field = ItoRandomField::statik(MeasureFunctional::variance(1));
    CloudSpec cs;
    cs.mode = NoiseMode::Single;
    cs.b = CoefficientSpec::scalar_drift(0.0);
    cs.sigma = CoefficientSpec::scalar_diffusion(0.0);
    cs.y0 = InitialSampler::gaussian({0.0}, {1.0});
    cfg.cloud = cs;
    cfg.m_ladder = {16, 32, 64};
    cfg.n_ladder = {8};
    cfg.replications = 8;
    cfg.seed = 11;
    return cfg;
}

ExperimentConfig classic_qv_config(int m, int reps) {
    ExperimentConfig cfg;
    cfg.theorem = TheoremId::IWClassic;
    cfg.dim = 1;
    cfg.horizon = 1.0;
    cfg.field = ItoRandomField::noise_product(
        MeasureFunctional::linear(1, InnerFunction::constant(1, 0.0)),
        MeasureFunctional::product(1, InnerFunction::linear({1.0}),
                                   InnerFunction::constant(1, 1.0)),
        {1.0});
    XProcessSpec xs;
    xs.mode = NoiseMode::Single;
    xs.beta = CoefficientSpec::scalar_drift(0.0);
    xs.gamma = CoefficientSpec::scalar_diffusion(1.0);
    xs.x0 = InitialSampler::point({0.0});
    cfg.x_process = xs;
    cfg.m_ladder = {m};
    cfg.n_ladder = {1};
    cfg.replications = reps;
    cfg.seed = 4242;
    return cfg;
}

}  // namespace

TEST_CASE("run_replications: frozen dynamics give an all-zero row") {
    const auto cfg = frozen_config();
    const StatRow row = run_replications(cfg, LadderPoint{16, 8, 0});
    CHECK(row.mean == 0.0);
    CHECK(row.rms == 0.0);
    CHECK(row.se == 0.0);
    CHECK(row.nan_count == 0);
    CHECK(row.effective == 8);
}

TEST_CASE("run_replications: classic quadratic-variation statistics") {
    const int m = 1 << 12;
    const auto cfg = classic_qv_config(m, 64);
    const StatRow row = run_replications(cfg, LadderPoint{m, 1, 0}, 2);
    const double expected = std::sqrt(2.0 / m);
    CHECK(row.rms >= 0.5 * expected);
    CHECK(row.rms <= 2.0 * expected);
}

TEST_CASE("run_replications: deterministic across repeat runs and thread counts") {
    const auto cfg = classic_qv_config(256, 16);
    const StatRow a = run_replications(cfg, LadderPoint{256, 1, 0}, 1);
    const StatRow b = run_replications(cfg, LadderPoint{256, 1, 0}, 2);
    CHECK(a.residuals == b.residuals);
    CHECK(a.term_means == b.term_means);
    CHECK(terms_csv({a}) == terms_csv({b}));
}

TEST_CASE("run_replications: extending R preserves the leading replications") {
    auto cfg = classic_qv_config(128, 8);
    const StatRow small = run_replications(cfg, LadderPoint{128, 1, 0});
    cfg.replications = 16;
    const StatRow big = run_replications(cfg, LadderPoint{128, 1, 0});
    REQUIRE(big.residuals.size() == 16);
    for (size_t i = 0; i < 8; ++i) CHECK(small.residuals[i] == big.residuals[i]);
}

TEST_CASE("statistics identity: rms^2 = mean^2 + variance") {
    const auto cfg = classic_qv_config(512, 32);
    const StatRow row = run_replications(cfg, LadderPoint{512, 1, 0});
    RunningStat s;
    for (double r : row.residuals) s.add(r);
    CHECK(std::abs(row.rms * row.rms - (row.mean * row.mean + s.variance())) <= 1e-12);
}

TEST_CASE("slope estimator: exact on synthetic half-order data") {
    std::vector<std::pair<double, double>> xy;
    for (int m : {256, 1024, 4096}) xy.emplace_back(m, 3.0 / std::sqrt(double(m)));
    const auto fit = fit_loglog_slope(xy);
    REQUIRE(fit.has_value());
    CHECK(std::abs(fit->slope - 0.5) <= 1e-6);
    CHECK(fit->half_width <= 1e-6);
    CHECK(!fit_loglog_slope({{256.0, 1.0}, {1024.0, 0.5}}).has_value());
}

TEST_CASE("convergence_study: frozen ladder emits zero rows and omits slopes") {
    const auto cfg = frozen_config();
    const ConvergenceTable t = convergence_study(cfg);
    for (const auto& row : t.rows) CHECK(row.rms == 0.0);
    CHECK(!t.slope_m.has_value());  // log of zero rms is unusable
    CHECK(!t.warnings.empty());
}

TEST_CASE("convergence_study: classic oracle ladder has slope one half") {
    auto cfg = classic_qv_config(0, 48);
    cfg.m_ladder = {256, 1024, 4096};
    const ConvergenceTable t = convergence_study(cfg, 2);
    REQUIRE(t.slope_m.has_value());
    CHECK(t.slope_m->slope >= 0.35);
    CHECK(t.slope_m->slope <= 0.65);
}

TEST_CASE("nan policy: blow-up coefficients are excluded and flagged") {
    ExperimentConfig cfg = frozen_config();
    // A diffusion that multiplies the state by a huge factor each step
    // overflows to infinity within a few steps.
    CoefficientSpec blow;
    blow.kind = CoeffKind::LinearInState;
    blow.shape = CoeffShape::Diffusion;
    blow.dim = 1;
    blow.base_mat = Mat::identity(1);
    blow.alpha = 1e308;
    blow.beta = 1e308;
    blow.weight = {1.0};
    cfg.cloud->sigma = blow;
    cfg.cloud->y0 = InitialSampler::point({1.0});
    cfg.field = ItoRandomField::statik(MeasureFunctional::scaled_second_moment(1, 1.0));
    const StatRow row = run_replications(cfg, LadderPoint{16, 4, 0});
    CHECK(row.nan_count == cfg.replications);
    CHECK(row.failed);
}

TEST_CASE("tolerance checks: frozen config passes residual_max") {
    auto cfg = frozen_config();
    cfg.tolerances.residual_max = 1e-12;
    const ConvergenceTable t = convergence_study(cfg);
    const auto checks = apply_tolerances(cfg, t);
    REQUIRE(!checks.empty());
    for (const auto& c : checks) CHECK(c.pass);
}

TEST_CASE("tolerance checks: ablation shift measured against expectation") {
    ExperimentConfig cfg;
    cfg.theorem = TheoremId::IWLConditionalMeasure;
    cfg.dim = 1;
    cfg.horizon = 1.0;
    cfg.field = ItoRandomField::statik(
        MeasureFunctional::quadratic_mean(1, InnerFunction::linear({1.0})), FieldNoiseMode::Two);
    CloudSpec cs;
    cs.mode = NoiseMode::Conditional;
    cs.b = CoefficientSpec::scalar_drift(0.0);
    cs.sigma0 = CoefficientSpec::scalar_diffusion(1.0);
    cs.sigma1 = CoefficientSpec::scalar_diffusion(1.0);
    cs.y0 = InitialSampler::point({0.0});
    cfg.cloud = cs;
    cfg.m_ladder = {128};
    cfg.n_ladder = {128};
    cfg.replications = 8;
    cfg.seed = 99;
    cfg.tolerances.ablate = ToleranceBlock::Ablation{"dmu2_sigma0_dt", 1.0, 0.1};
    const ConvergenceTable t = convergence_study(cfg);
    const auto checks = apply_tolerances(cfg, t);
    REQUIRE(checks.size() == 1);
    CHECK(checks[0].pass);
}

TEST_CASE("mollification study: bounds and refinement") {
    SeedPolicy policy{314159};
    const auto table = mollification_study(MeasureFunctional::variance(1), 1, 64, {4, 16, 64},
                                           2000, policy);
    REQUIRE(table.rows.size() == 3);
    double prev = 1e9;
    for (const auto& row : table.rows) {
        CHECK(row.error <= row.lip_bound);
        CHECK(row.max_w2sq <= row.w2_bound);
        CHECK(row.error < prev);
        prev = row.error;
    }
}

TEST_CASE("csv output: shortest round-trip formatting") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(1.25) == "1.25");
    const double v = 0.1 + 0.2;
    CHECK(std::stod(format_double(v)) == v);
}
