#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "lionflow/brownian.hpp"
#include "lionflow/functionals.hpp"
#include "lionflow/grid.hpp"
#include "lionflow/measure.hpp"
#include "lionflow/rng.hpp"

using namespace lionflow;

TEST_CASE("time grid: uniform nodes") {
    const TimeGrid g = make_time_grid(1.0, 4);
    CHECK(g.nodes() == 5);
    CHECK(g.node(0) == 0.0);
    CHECK(g.node(1) == doctest::Approx(0.25));
    CHECK(g.node(2) == doctest::Approx(0.5));
    CHECK(g.node(3) == doctest::Approx(0.75));
    CHECK(g.node(4) == 1.0);

    const TimeGrid single = make_time_grid(2.0, 1);
    CHECK(single.node(0) == 0.0);
    CHECK(single.node(1) == 2.0);
}

TEST_CASE("time grid: degenerate inputs rejected") {
    CHECK_THROWS_AS(make_time_grid(1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_time_grid(0.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(make_time_grid(-1.0, 4), std::invalid_argument);
}

TEST_CASE("seed policy: distinct roles and indices give distinct streams") {
    SeedPolicy p{42};
    std::set<std::uint64_t> seen;
    for (const char* role : {"field", "common", "particle", "init"})
        for (std::uint64_t rep = 0; rep < 8; ++rep)
            for (std::uint64_t l = 0; l < 8; ++l) seen.insert(p.stream(role, rep, l));
    CHECK(seen.size() == 4 * 8 * 8);
    CHECK(p.stream("field", 1, 2) == p.stream("field", 1, 2));
}

TEST_CASE("brownian path: determinism and structure") {
    const TimeGrid g = make_time_grid(1.0, 16);
    SeedPolicy p{7};
    RngStream s1(p.stream("field", 0));
    RngStream s2(p.stream("field", 0));
    const BrownianPath a = sample_brownian(g, 2, s1);
    const BrownianPath b = sample_brownian(g, 2, s2);
    CHECK(a.increments == b.increments);
    CHECK(a.values == b.values);

    // W(0) = 0 and values are prefix sums of the increments.
    CHECK(a.value(0)[0] == 0.0);
    double acc = 0.0;
    for (int i = 0; i < g.steps; ++i) acc += a.increment(i)[0];
    CHECK(a.value(g.steps)[0] == doctest::Approx(acc));
}

TEST_CASE("brownian path: terminal statistics over many paths") {
    const TimeGrid g = make_time_grid(1.0, 8);
    SeedPolicy p{99};
    const int reps = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int r = 0; r < reps; ++r) {
        RngStream s(p.stream("mc", r));
        const BrownianPath w = sample_brownian(g, 1, s);
        const double wt = w.value(g.steps)[0];
        sum += wt;
        sumsq += wt * wt;
    }
    const double mean = sum / reps;
    const double var = sumsq / reps - mean * mean;
    CHECK(std::abs(mean) <= 3.0 * std::sqrt(1.0 / reps));
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("brownian path: single-step variance matches the horizon") {
    const TimeGrid g = make_time_grid(0.7, 1);
    SeedPolicy p{123};
    const int reps = 100000;
    double sumsq = 0.0;
    for (int r = 0; r < reps; ++r) {
        RngStream s(p.stream("mc", r));
        sumsq += std::pow(sample_brownian(g, 1, s).increment(0)[0], 2);
    }
    CHECK(sumsq / reps == doctest::Approx(0.7).epsilon(0.05));
}

TEST_CASE("brownian path: increments uncorrelated across steps") {
    const TimeGrid g = make_time_grid(1.0, 16);
    SeedPolicy p{5150};
    const int reps = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int r = 0; r < reps; ++r) {
        RngStream s(p.stream("mc", r));
        const BrownianPath w = sample_brownian(g, 1, s);
        double lag = 0.0;
        for (int i = 0; i + 1 < g.steps; ++i) lag += w.increment(i)[0] * w.increment(i + 1)[0];
        sum += lag;
        sumsq += lag * lag;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sumsq / reps - mean * mean) / reps);
    CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("measure moments") {
    const auto mu = EmpiricalMeasure::from_scalars({1.0, 2.0, 3.0});
    CHECK(measure_moments(mu, 1).mean[0] == doctest::Approx(2.0));
    CHECK(measure_moments(mu, 2).second(0, 0) == doctest::Approx(14.0 / 3.0));

    const auto mu2 = EmpiricalMeasure::from_points({{0.0, 0.0}, {2.0, 0.0}});
    const auto m = measure_moments(mu2, 1).mean;
    CHECK(m[0] == doctest::Approx(1.0));
    CHECK(m[1] == doctest::Approx(0.0));

    CHECK_THROWS_AS(measure_moments(mu, 3), std::invalid_argument);
}

TEST_CASE("functional evaluations are permutation invariant") {
    SeedPolicy p{31337};
    RngStream s(p.stream("perm"));
    EmpiricalMeasure mu(1, 17);
    for (int l = 0; l < 17; ++l) mu.point(l)[0] = s.gaussian();

    EmpiricalMeasure permuted = mu;
    std::reverse(permuted.flat.begin(), permuted.flat.end());

    const auto u = MeasureFunctional::variance(1);
    const Vec x{0.0};
    const double a = u.value(x, mu.view());
    const double b = u.value(x, permuted.view());
    CHECK(std::abs(a - b) <= 1e-13);

    // Exact equality once both clouds are reduced to sorted order.
    EmpiricalMeasure sa = mu, sb = permuted;
    std::sort(sa.flat.begin(), sa.flat.end());
    std::sort(sb.flat.begin(), sb.flat.end());
    CHECK(u.value(x, sa.view()) == u.value(x, sb.view()));
}
