#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lionflow/coefficients.hpp"
#include "lionflow/expansion.hpp"
#include "lionflow/fields.hpp"

namespace lionflow {

// Raised on malformed configuration; the message names the offending key.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ToleranceBlock {
    std::optional<double> rms_max;
    std::optional<double> mean_se_factor;
    std::optional<std::pair<double, double>> slope_m_window;
    std::optional<std::pair<double, double>> slope_n_window;
    std::optional<double> monotone_n_se_factor;
    std::optional<double> residual_max;  // max |residual| over replications
    struct Ablation {
        std::string term;
        double expected = 0.0;
        double rel_tol = 0.1;
    };
    std::optional<Ablation> ablate;
};

struct XProcessSpec {
    CoefficientSpec beta;
    CoefficientSpec gamma;   // single mode
    CoefficientSpec gamma0;  // conditional mode
    CoefficientSpec gamma1;
    InitialSampler x0;
    NoiseMode mode = NoiseMode::Single;
};

struct CloudSpec {
    CoefficientSpec b;
    CoefficientSpec sigma;   // single mode
    CoefficientSpec sigma0;  // conditional mode
    CoefficientSpec sigma1;
    InitialSampler y0;
    NoiseMode mode = NoiseMode::Single;
};

struct ExperimentConfig {
    int schema_version = 1;
    TheoremId theorem = TheoremId::IWLFullMeasure;
    int dim = 1;
    double horizon = 1.0;
    ItoRandomField field;
    std::optional<XProcessSpec> x_process;
    std::optional<CloudSpec> cloud;
    Vec x_point;  // frozen x argument where the evaluator needs one
    std::vector<int> m_ladder;
    std::vector<int> n_ladder;
    std::vector<int> level_ladder;  // mollifier levels (mollification studies)
    int replications = 1;
    std::uint64_t seed = 0;
    ToleranceBlock tolerances;
    nlohmann::json raw;  // normalized echo for manifests

    SeedPolicy policy() const { return SeedPolicy{seed}; }
};

// Parsers. All throw ConfigError with the offending key in the message.
InnerFunction parse_inner_function(const nlohmann::json& j, int dim, const std::string& where);
MeasureFunctional parse_functional(const nlohmann::json& j, int dim, const std::string& where);
ItoRandomField parse_field(const nlohmann::json& j, int dim, const std::string& where);
CoefficientSpec parse_coefficient(const nlohmann::json& j, int dim, CoeffShape shape,
                                  const std::string& where);
InitialSampler parse_sampler(const nlohmann::json& j, int dim, const std::string& where);
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

}  // namespace lionflow
