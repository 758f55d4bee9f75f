#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "lionflow/brownian.hpp"
#include "lionflow/coefficients.hpp"
#include "lionflow/grid.hpp"
#include "lionflow/measure.hpp"
#include "lionflow/rng.hpp"

namespace lionflow {

enum class NoiseMode { Single, Conditional };

// Fully materialized Euler-Maruyama path of the driving process X, with the
// per-step coefficient values and driving increments recorded so every
// downstream integral term reuses exactly the simulated quantities.
struct StatePath {
    TimeGrid grid;
    int dim = 0;
    NoiseMode mode = NoiseMode::Single;

    std::vector<Vec> values;   // X(t_i), i = 0..M
    std::vector<Vec> beta;     // beta(t_i), i = 0..M-1
    std::vector<Mat> gamma;    // gamma(t_i) (single mode)
    std::vector<Mat> gamma0;   // conditional mode
    std::vector<Mat> gamma1;
    std::vector<Vec> dw;       // recorded driving increments (single mode)
    std::vector<Vec> dw0;      // conditional mode
    std::vector<Vec> dw1;
};

StatePath simulate_ito_process(const CoefficientSpec& beta, const CoefficientSpec& gamma,
                               const Vec& x0, const BrownianPath& w);

StatePath simulate_conditional_ito_process(const CoefficientSpec& beta,
                                           const CoefficientSpec& gamma0,
                                           const CoefficientSpec& gamma1, const Vec& x0,
                                           const BrownianPath& w0, const BrownianPath& w1);

// Replays a recorded path from its stored increments and coefficient values.
// Returns the replayed values; bit-identical to path.values by construction.
std::vector<Vec> replay_state_path(const StatePath& path);

// Stream identities for one replication of an N-particle cloud. Particle l
// draws its initial condition from ("init", rep, l) and its idiosyncratic
// Brownian driver from ("particle", rep, l); the derivation is shared by
// full-flow and conditional mode so a conditional cloud with sigma^0 = 0
// reproduces the full-flow cloud path for path.
struct CloudSeeds {
    SeedPolicy policy;
    std::uint64_t rep = 0;
};

// Per-step view of the cloud handed to streaming consumers. Spans point at
// internal buffers and are valid only during the callback.
struct CloudStep {
    int index = 0;
    double t = 0.0;
    double dt = 0.0;
    PointsView points;                    // Y^l(t_i) before the step
    const std::vector<Vec>* b = nullptr;  // b^l(t_i)
    const std::vector<Mat>* sigma = nullptr;   // full mode
    const std::vector<Mat>* sigma0 = nullptr;  // conditional mode
    const std::vector<Mat>* sigma1 = nullptr;
    const std::vector<Vec>* dw = nullptr;      // idiosyncratic increments
    std::span<const double> dw0;               // common increment (conditional)
};

// N-particle cloud. Trajectories and coefficient records are regenerated on
// demand by replaying the per-particle streams; a replay is a pure function
// of (spec, seeds), so repeated traversals see identical values while memory
// stays O(N d) per step even for large N x M runs.
class ParticleCloudPath {
public:
    TimeGrid grid;
    int dim = 0;
    int count = 0;
    NoiseMode mode = NoiseMode::Single;

    CoefficientSpec b;
    CoefficientSpec sigma;    // full mode
    CoefficientSpec sigma0;   // conditional mode
    CoefficientSpec sigma1;
    InitialSampler y0;
    CloudSeeds seeds;
    BrownianPath common;      // shared W^0 path (conditional mode)

    // Streams every step through `step_fn`, then hands the terminal points to
    // `final_fn`. Either callback may be empty.
    void for_each_step(const std::function<void(const CloudStep&)>& step_fn,
                       const std::function<void(const PointsView&)>& final_fn = {}) const;

    EmpiricalMeasure measure_at(int node) const;
    EmpiricalMeasure initial_measure() const { return measure_at(0); }
    EmpiricalMeasure final_measure() const { return measure_at(grid.steps); }

    // Full trajectories for small clouds (tests and diagnostics).
    std::vector<std::vector<Vec>> materialize() const;
};

ParticleCloudPath simulate_particle_system(const CoefficientSpec& b, const CoefficientSpec& sigma,
                                           int count, const InitialSampler& y0,
                                           const TimeGrid& grid, const CloudSeeds& seeds);

ParticleCloudPath simulate_conditional_particle_system(const CoefficientSpec& b,
                                                       const CoefficientSpec& sigma0,
                                                       const CoefficientSpec& sigma1, int count,
                                                       const InitialSampler& y0,
                                                       const BrownianPath& common,
                                                       const CloudSeeds& seeds);

// Monte Carlo estimates of the pathwise coefficient integrals entering the
// standing integrability assumptions, with standard errors over R sample
// paths. Y-mode reports (int |b|^2 ds, int |sigma|^4 ds); X-mode reports
// (int |beta| ds, int |gamma|^2 ds). Non-finite samples are flagged, not
// raised.
enum class IntegrabilityMode { MeasureProcess, DrivingProcess };

struct IntegrabilityReport {
    struct Entry {
        std::string name;
        double mean = 0.0;
        double se = 0.0;
    };
    std::vector<Entry> entries;
    int samples = 0;
    int nonfinite = 0;
};

IntegrabilityReport coefficient_integrability_report(const CoefficientSpec& drift,
                                                     const CoefficientSpec& diffusion,
                                                     IntegrabilityMode mode,
                                                     const InitialSampler& init,
                                                     const TimeGrid& grid, const SeedPolicy& seeds,
                                                     int replications);

}  // namespace lionflow
