#include <doctest.h>

#include <cmath>

#include "lionflow/fields.hpp"
#include "lionflow/functionals.hpp"
#include "lionflow/stats.hpp"

using namespace lionflow;

namespace {

const SeedPolicy kPolicy{4711};

EmpiricalMeasure random_cloud(int dim, int n, std::uint64_t tag) {
    RngStream s(kPolicy.stream("cloud", tag));
    EmpiricalMeasure mu(dim, n);
    for (int l = 0; l < n; ++l)
        for (int c = 0; c < dim; ++c) mu.point(l)[c] = s.gaussian();
    return mu;
}

std::vector<MeasureFunctional> catalogue(int dim) {
    Vec dir = (dim == 1) ? Vec{1.0} : Vec{0.6, -0.8};
    Vec dir2 = (dim == 1) ? Vec{0.9} : Vec{0.5, 0.5};
    Vec dirx = (dim == 1) ? Vec{1.0} : Vec{0.7, 0.3};
    auto fp = InnerFunction::poly(dir, {0.3, 1.0, 0.4, 0.0, 0.05});
    auto fc = InnerFunction::cosine(dir2, 0.8, 1.3, 0.4);
    auto ax = InnerFunction::poly(dirx, {0.1, 1.0, 0.5});
    return {MeasureFunctional::linear(dim, fc),
            MeasureFunctional::quadratic_mean(dim, fp),
            MeasureFunctional::double_integral(dim, fp, fc),
            MeasureFunctional::variance(dim),
            MeasureFunctional::product(dim, ax, fp),
            MeasureFunctional::scaled_second_moment(dim, 0.7)};
}

}  // namespace

TEST_CASE("eval_functional: closed values on a three-point cloud") {
    const auto mu = EmpiricalMeasure::from_scalars({1.0, 2.0, 3.0});
    const auto mean = MeasureFunctional::linear(1, InnerFunction::linear({1.0}));
    CHECK(eval_functional(mean, mu) == doctest::Approx(2.0));

    const auto mean_sq = MeasureFunctional::quadratic_mean(1, InnerFunction::linear({1.0}));
    CHECK(eval_functional(mean_sq, mu) == doctest::Approx(4.0));

    const auto var = MeasureFunctional::variance(1);
    CHECK(eval_functional(var, mu) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("closed-form Lions derivatives on reference cases") {
    const auto mu = EmpiricalMeasure::from_scalars({1.0, 2.0, 3.0});

    // u = int v^2 dmu at v = 3
    const auto second = MeasureFunctional::scaled_second_moment(1, 1.0);
    const Vec v{3.0};
    CHECK(lions_derivative(second, mu, v)[0] == doctest::Approx(6.0));
    CHECK(lions_hessian_v(second, mu, v)(0, 0) == doctest::Approx(2.0));
    CHECK(lions_second(second, mu, v, v)(0, 0) == doctest::Approx(0.0));

    // u = (int v dmu)^2, mean 2
    const auto mean_sq = MeasureFunctional::quadratic_mean(1, InnerFunction::linear({1.0}));
    CHECK(lions_derivative(mean_sq, mu, v)[0] == doctest::Approx(4.0));
    CHECK(lions_hessian_v(mean_sq, mu, v)(0, 0) == doctest::Approx(0.0));
    CHECK(lions_second(mean_sq, mu, v, v)(0, 0) == doctest::Approx(2.0));

    // variance: dmu = 2(v - m), dv dmu = 2, dmu2 = -2
    const auto var = MeasureFunctional::variance(1);
    CHECK(lions_derivative(var, mu, v)[0] == doctest::Approx(2.0));
    CHECK(lions_hessian_v(var, mu, v)(0, 0) == doctest::Approx(2.0));
    CHECK(lions_second(var, mu, v, v)(0, 0) == doctest::Approx(-2.0));
}

TEST_CASE("space derivatives match central differences in x") {
    for (int dim : {1, 2}) {
        const auto mu = random_cloud(dim, 16, 10 + dim);
        const auto funcs = catalogue(dim);
        const Vec x0 = (dim == 1) ? Vec{0.4} : Vec{0.4, -0.3};
        const double h = 1e-5;
        for (const auto& u : funcs) {
            const auto cache = u.prepare(mu.view());
            const Vec dx = u.dx(x0, cache);
            const Mat hx = u.hess_x(x0, cache);
            for (int c = 0; c < dim; ++c) {
                Vec xp = x0, xm = x0;
                xp[c] += h;
                xm[c] -= h;
                const double fd = (u.value(xp, cache) - u.value(xm, cache)) / (2.0 * h);
                CHECK(std::abs(dx[c] - fd) <= 1e-6);
                const double fd2 = (u.value(xp, cache) - 2.0 * u.value(x0, cache) +
                                    u.value(xm, cache)) /
                                   (h * h);
                CHECK(std::abs(hx(c, c) - fd2) <= 1e-4);
            }
        }
    }
}

TEST_CASE("dmu2 transpose symmetry holds exactly for the catalogue") {
    for (int dim : {1, 2}) {
        const auto mu = random_cloud(dim, 8, 20 + dim);
        const auto cacheless = catalogue(dim);
        const Vec x = Vec(dim, 0.2);
        for (const auto& u : cacheless) {
            const auto cache = u.prepare(mu.view());
            const auto v = mu.point(1);
            const auto vp = mu.point(5);
            const Mat a = u.dmu2(x, cache, v, vp);
            const Mat b = u.dmu2(x, cache, vp, v);
            const Mat bt = b.transposed();
            for (size_t i = 0; i < a.a.size(); ++i) CHECK(a.a[i] == bt.a[i]);
        }
    }
}

TEST_CASE("dmu2 structural form agrees with the direct evaluation") {
    for (int dim : {1, 2}) {
        const auto mu = random_cloud(dim, 8, 30 + dim);
        const Vec x = Vec(dim, 0.0);
        for (const auto& u : catalogue(dim)) {
            const auto cache = u.prepare(mu.view());
            const auto form = u.dmu2_form();
            const auto v = mu.point(2);
            const auto vp = mu.point(6);
            Mat direct = u.dmu2(x, cache, v, vp);
            Mat from_form(dim, dim);
            if (form.has_constant) from_form += form.constant;
            for (const auto& part : form.parts) {
                const Vec g = part.g->grad(v);
                const Vec h = part.h->grad(vp);
                for (int i = 0; i < dim; ++i)
                    for (int j = 0; j < dim; ++j) from_form(i, j) += part.coef * g[i] * h[j];
            }
            for (size_t i = 0; i < direct.a.size(); ++i)
                CHECK(direct.a[i] == doctest::Approx(from_form.a[i]).epsilon(1e-14));
        }
    }
}

TEST_CASE("make field: static and linear-noise values") {
    const TimeGrid g = make_time_grid(1.0, 32);
    RngStream s(kPolicy.stream("field"));
    const BrownianPath w = sample_brownian(g, 1, s);
    const auto mu = EmpiricalMeasure::from_scalars({1.0, 2.0, 3.0});
    const Vec x{0.0};

    const auto second = MeasureFunctional::scaled_second_moment(1, 1.0);
    const auto stat = ItoRandomField::statik(second);
    for (int i : {0, 7, 32}) {
        CHECK(field_value(stat, i, x, mu, w) == doctest::Approx(14.0 / 3.0));
    }

    const auto lin = ItoRandomField::linear_noise(
        MeasureFunctional::linear(1, InnerFunction::constant(1, 0.0)), {2.0});
    for (int i : {1, 16, 32}) {
        CHECK(field_value(lin, i, x, mu, w) == doctest::Approx(2.0 * w.value(i)[0]).epsilon(1e-12));
    }
}

TEST_CASE("drift-ramp field value converges to closed form at first order") {
    const auto F = MeasureFunctional::scaled_second_moment(1, 1.0);
    const auto mu = EmpiricalMeasure::from_scalars({1.0, 2.0});
    const Vec x{0.0};
    double prev_err = 0.0;
    for (int m : {64, 256, 1024}) {
        const TimeGrid g = make_time_grid(1.0, m);
        RngStream s(kPolicy.stream("ramp"));
        const BrownianPath w = sample_brownian(g, 1, s);
        const auto field = ItoRandomField::drift_ramp(F);
        const double numeric = field_value(field, m, x, mu, w);
        const double closed = eval_functional(F, mu) * 1.5;
        const double err = std::abs(numeric - closed);
        if (prev_err > 0.0) CHECK(err < prev_err);
        prev_err = err;
    }
}

TEST_CASE("exponential-martingale field value converges at order one half") {
    const auto F = MeasureFunctional::linear(1, InnerFunction::constant(1, 1.0));
    const auto field = ItoRandomField::exp_martingale(F, {1.0});
    const auto mu = EmpiricalMeasure::from_scalars({0.0});
    const Vec x{0.0};

    std::vector<std::pair<double, double>> ladder;
    for (int m : {256, 1024, 4096}) {
        const TimeGrid g = make_time_grid(1.0, m);
        RunningStat err;
        for (std::uint64_t rep = 0; rep < 64; ++rep) {
            RngStream s(kPolicy.stream("expm", rep));
            const BrownianPath w = sample_brownian(g, 1, s);
            double worst = 0.0;
            for (int i : {m / 4, m / 2, m}) {
                const double numeric = field_value(field, i, x, mu, w);
                const double closed =
                    std::exp(w.value(i)[0] - 0.5 * g.node(i));
                worst = std::max(worst, std::abs(numeric - closed));
            }
            err.add(worst);
        }
        ladder.emplace_back(m, err.rms());
    }
    const auto fit = fit_loglog_slope(ladder);
    REQUIRE(fit.has_value());
    CHECK(fit->slope >= 0.35);
    CHECK(fit->slope <= 0.65);
}

TEST_CASE("unknown field construction errors") {
    CHECK_THROWS_AS(ItoRandomField::exp_martingale(
                        MeasureFunctional::variance(2), {1.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(ItoRandomField::linear_noise(MeasureFunctional::variance(1), {1.0, 2.0}),
                    std::invalid_argument);
}

TEST_CASE("field_value rejects off-grid nodes and missing paths") {
    const TimeGrid g = make_time_grid(1.0, 8);
    RngStream s(kPolicy.stream("offgrid"));
    const BrownianPath w = sample_brownian(g, 1, s);
    const auto mu = EmpiricalMeasure::from_scalars({1.0});
    const auto field = ItoRandomField::statik(MeasureFunctional::variance(1));
    const Vec x{0.0};
    CHECK_THROWS_AS(field_value(field, 9, x, mu, w), std::invalid_argument);
    CHECK_THROWS_AS(field_value(field, -1, x, mu, w), std::invalid_argument);
    const auto two = ItoRandomField::mean_times_common_noise(1, {1.0}, {1.0});
    CHECK_THROWS_AS(field_value(two, 4, x, mu.view(), &w, nullptr, nullptr),
                    std::invalid_argument);
}

TEST_CASE("two-noise field: coefficients and measure derivative of psi0") {
    const TimeGrid g = make_time_grid(1.0, 16);
    RngStream s0(kPolicy.stream("w0")), s1(kPolicy.stream("w1"));
    const BrownianPath w0 = sample_brownian(g, 1, s0);
    const BrownianPath w1 = sample_brownian(g, 1, s1);
    const auto mu = EmpiricalMeasure::from_scalars({1.0, 3.0});
    const Vec x{0.0};

    const auto field = ItoRandomField::mean_times_common_noise(1, {1.0}, {1.0});
    FieldContext ctx{&g, 5, nullptr, &w0, &w1};
    const auto cache = field.prepare(ctx, mu.view());
    CHECK(field.psi0(ctx, x, cache)[0] == doctest::Approx(2.0));  // mean of {1,3}
    CHECK(field.psi1(ctx, x, cache)[0] == 0.0);
    CHECK(field.dmu_psi0(ctx, x, cache, mu.point(0))(0, 0) == doctest::Approx(1.0));
    // u_t(mu) = mean * W0_t
    CHECK(field.value(ctx, x, cache) == doctest::Approx(2.0 * w0.value(5)[0]));
    // field_value telescopes exactly for a frozen measure argument
    CHECK(field_value(field, 16, x, mu.view(), nullptr, &w0, &w1) ==
          doctest::Approx(2.0 * w0.value(16)[0]).epsilon(1e-12));
}
