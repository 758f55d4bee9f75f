#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lionflow/brownian.hpp"
#include "lionflow/fields.hpp"
#include "lionflow/sde.hpp"

namespace lionflow {

enum class TheoremId {
    IWClassic,
    IWReduced,
    ILFull,
    IWLFullMeasure,
    IWLFullJoint,
    ILConditional,
    IWLConditionalMeasure,
    IWLConditionalJoint
};

const char* theorem_name(TheoremId id);
TheoremId theorem_from_name(std::string_view name);

// Twin-space expectation estimators: single expectations are full ensemble
// averages, double expectations are U-statistics over ordered pairs with the
// diagonal excluded.
enum class EnsembleMode { FullAverage, UStatisticPairs };

// Mean over ordered pairs (l, l') with l != l' of
//   Trace{ D(v_l, v_{l'}) sigma_l sigma_{l'}^T },
// where D is the structural d2mu form. The default path reduces the double
// sum to O(N d^3) accumulators; `direct` forces the O(N^2) pair loop (used to
// cross-check the accumulators).
double pair_average_dmu2(const Dmu2Form& form, const PointsView& points,
                         const std::vector<Mat>& sigma, bool direct = false);

// Term-by-term discretized evaluation of one chain-rule identity: the
// pathwise left side, each named right-side term as a left-point sum on the
// shared grid, and the residual.
struct ExpansionReport {
    TheoremId theorem = TheoremId::IWClassic;
    double lhs = 0.0;
    // Closed-form left side where the field kind admits one (diagnostic; the
    // contractual lhs above is the grid reconstruction).
    std::optional<double> lhs_closed;
    std::vector<std::pair<std::string, double>> terms;  // fixed schema order
    double residual_stored = 0.0;

    int steps = 0;
    int particles = 0;
    int dim = 0;

    double term(std::string_view name) const;
    bool has_term(std::string_view name) const;
    double term_sum() const;
};

// residual = lhs - sum of terms (recomputed from the stored fields).
double residual(const ExpansionReport& report);
// Residual if the named term were omitted: residual + term value.
double term_ablation(const ExpansionReport& report, std::string_view term);

// --- Evaluators -----------------------------------------------------------
// Every stochastic integral is a left-point sum on the shared grid and the
// left side is reconstructed on the same grid (frozen-argument convention),
// so residuals measure only quadratic-variation and propagation-of-chaos
// error, never scheme mismatch.

// V_t(x) composed with an Ito process sharing the field's driving noise.
// `frozen_mu` supplies the (inactive) measure slot for fields whose
// functionals carry one; defaults to a point mass at the origin.
ExpansionReport expand_ito_wentzell_classic(const ItoRandomField& field, const StatePath& x,
                                            const BrownianPath& w,
                                            const EmpiricalMeasure* frozen_mu = nullptr,
                                            TheoremId id = TheoremId::IWClassic);

// Deterministic u(t, x, mu) along X and the full measure flow.
ExpansionReport expand_ito_lions(const ItoRandomField& u, const StatePath& x,
                                 const ParticleCloudPath& cloud);

// Single-noise x-free field along the full measure flow.
ExpansionReport expand_full_flow_measure(const ItoRandomField& field,
                                         const ParticleCloudPath& cloud, const BrownianPath& w);

// Single-noise field along X (sharing the field noise) and the full flow.
ExpansionReport expand_full_flow_joint(const ItoRandomField& field, const StatePath& x,
                                       const ParticleCloudPath& cloud, const BrownianPath& w);

// Two-noise x-free field along the conditional flow driven by the shared W^0.
ExpansionReport expand_conditional_measure(const ItoRandomField& field,
                                           const ParticleCloudPath& cloud, const BrownianPath& w0,
                                           const BrownianPath& w1);

// Two-noise field along X on (W^0, W^1) and the conditional flow.
ExpansionReport expand_conditional_joint(const ItoRandomField& field, const StatePath& x,
                                         const ParticleCloudPath& cloud, const BrownianPath& w0,
                                         const BrownianPath& w1);

}  // namespace lionflow
