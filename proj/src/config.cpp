#include "lionflow/config.hpp"

#include <fstream>

namespace lionflow {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
    throw ConfigError(where + ": " + msg);
}

const json& need(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) fail(where + "." + key, "missing required key");
    return *it;
}

double need_number(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_number()) fail(where + "." + key, "expected a number");
    return v.get<double>();
}

std::string need_string(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_string()) fail(where + "." + key, "expected a string");
    return v.get<std::string>();
}

Vec parse_vec(const json& j, int dim, const std::string& where) {
    if (j.is_number()) return Vec(static_cast<size_t>(dim), j.get<double>());
    if (!j.is_array()) fail(where, "expected a number or an array");
    Vec v;
    for (const auto& e : j) {
        if (!e.is_number()) fail(where, "expected numeric entries");
        v.push_back(e.get<double>());
    }
    if (static_cast<int>(v.size()) != dim) fail(where, "expected " + std::to_string(dim) + " entries");
    return v;
}

Mat parse_mat(const json& j, int dim, const std::string& where) {
    if (j.is_number()) {
        Mat m = Mat::identity(dim);
        m *= j.get<double>();
        return m;
    }
    if (!j.is_array() || j.empty() || !j[0].is_array())
        fail(where, "expected a number or a nested array");
    Mat m(dim, dim);
    if (static_cast<int>(j.size()) != dim) fail(where, "expected " + std::to_string(dim) + " rows");
    for (int i = 0; i < dim; ++i) {
        const auto& row = j[i];
        if (static_cast<int>(row.size()) != dim) fail(where, "ragged matrix row");
        for (int c = 0; c < dim; ++c) {
            if (!row[c].is_number()) fail(where, "expected numeric entries");
            m(i, c) = row[c].get<double>();
        }
    }
    return m;
}

}  // namespace

InnerFunction parse_inner_function(const json& j, int dim, const std::string& where) {
    if (!j.is_object()) fail(where, "expected an object");
    const std::string type = need_string(j, "type", where);
    Vec dir = parse_vec(need(j, "dir", where), dim, where + ".dir");
    const double shift = j.value("shift", 0.0);
    if (type == "poly") {
        Vec coeffs;
        for (const auto& e : need(j, "coeffs", where)) coeffs.push_back(e.get<double>());
        if (coeffs.size() > 5) fail(where + ".coeffs", "polynomial degree capped at 4");
        return InnerFunction::poly(std::move(dir), std::move(coeffs), shift);
    }
    if (type == "cos") {
        return InnerFunction::cosine(std::move(dir), j.value("amp", 1.0), j.value("freq", 1.0),
                                     shift);
    }
    fail(where + ".type", "unknown inner function type '" + type + "'");
}

MeasureFunctional parse_functional(const json& j, int dim, const std::string& where) {
    if (!j.is_object()) fail(where, "expected an object");
    const std::string kind = need_string(j, "kind", where);
    if (kind == "linear")
        return MeasureFunctional::linear(dim, parse_inner_function(need(j, "f", where), dim,
                                                                   where + ".f"));
    if (kind == "quadratic-mean")
        return MeasureFunctional::quadratic_mean(
            dim, parse_inner_function(need(j, "f", where), dim, where + ".f"));
    if (kind == "double-integral")
        return MeasureFunctional::double_integral(
            dim, parse_inner_function(need(j, "f", where), dim, where + ".f"),
            parse_inner_function(need(j, "g", where), dim, where + ".g"));
    if (kind == "variance") return MeasureFunctional::variance(dim);
    if (kind == "product")
        return MeasureFunctional::product(
            dim, parse_inner_function(need(j, "a", where), dim, where + ".a"),
            parse_inner_function(need(j, "f", where), dim, where + ".f"));
    if (kind == "scaled-second-moment")
        return MeasureFunctional::scaled_second_moment(dim, need_number(j, "scale", where));
    fail(where + ".kind", "unknown functional kind '" + kind + "'");
}

ItoRandomField parse_field(const json& j, int dim, const std::string& where) {
    if (!j.is_object()) fail(where, "expected an object");
    const std::string kind = need_string(j, "kind", where);
    const auto noise_mode = [&]() {
        return j.value("noises", 1) == 2 ? FieldNoiseMode::Two : FieldNoiseMode::Single;
    };
    auto functional = [&](const char* key) {
        return parse_functional(need(j, key, where), dim, where + "." + key);
    };
    auto functional_or_zero = [&](const char* key) {
        if (j.contains(key)) return functional(key);
        return MeasureFunctional::linear(dim, InnerFunction::constant(dim, 0.0));
    };
    auto vec = [&](const char* key) {
        return parse_vec(need(j, key, where), dim, where + "." + std::string(key));
    };

    if (kind == "static") return ItoRandomField::statik(functional("F"), noise_mode());
    if (kind == "drift-ramp") return ItoRandomField::drift_ramp(functional("F"), noise_mode());
    if (kind == "exponential-martingale")
        return ItoRandomField::exp_martingale(functional("F"), vec("lambda"));
    if (kind == "linear-noise") return ItoRandomField::linear_noise(functional("F"), vec("c"));
    if (kind == "noise-product")
        return ItoRandomField::noise_product(functional_or_zero("F"), functional("G"), vec("e"));
    if (kind == "common-noise-product")
        return ItoRandomField::common_noise_product(functional_or_zero("F"), functional("G"),
                                                    vec("e"));
    if (kind == "idio-noise-product")
        return ItoRandomField::idio_noise_product(functional_or_zero("F"), functional("G"),
                                                  vec("e"));
    if (kind == "mean-times-common-noise") {
        Vec weight = j.contains("weight") ? parse_vec(j["weight"], dim, where + ".weight")
                                          : Vec(dim, 1.0);
        Vec e = j.contains("e") ? parse_vec(j["e"], dim, where + ".e") : Vec(dim, 1.0);
        return ItoRandomField::mean_times_common_noise(dim, std::move(weight), std::move(e));
    }
    fail(where + ".kind", "unknown field kind '" + kind + "'");
}

CoefficientSpec parse_coefficient(const json& j, int dim, CoeffShape shape,
                                  const std::string& where) {
    CoefficientSpec spec;
    spec.shape = shape;
    spec.dim = dim;
    auto parse_base = [&](const json& b) {
        if (shape == CoeffShape::Drift)
            spec.base_vec = parse_vec(b, dim, where + ".base");
        else
            spec.base_mat = parse_mat(b, dim, where + ".base");
    };
    if (j.is_number()) {
        // shorthand: constant coefficient
        spec.kind = CoeffKind::Constant;
        parse_base(j);
        return spec;
    }
    if (!j.is_object()) fail(where, "expected a number or an object");
    const std::string kind = need_string(j, "kind", where);
    if (kind == "constant") {
        spec.kind = CoeffKind::Constant;
        parse_base(need(j, "value", where));
        return spec;
    }
    if (kind == "time-poly") {
        spec.kind = CoeffKind::TimePolynomial;
        for (const auto& e : need(j, "coeffs", where)) spec.poly.push_back(e.get<double>());
        parse_base(need(j, "base", where));
        return spec;
    }
    if (kind == "linear-state" || kind == "path-noise") {
        spec.kind = (kind == "linear-state") ? CoeffKind::LinearInState : CoeffKind::PathNoise;
        spec.alpha = need_number(j, "alpha", where);
        spec.beta = need_number(j, "beta", where);
        spec.weight = parse_vec(need(j, "weight", where), dim, where + ".weight");
        parse_base(need(j, "base", where));
        if (spec.kind == CoeffKind::PathNoise) {
            const std::string src = j.value("source", "own");
            if (src == "own")
                spec.source = NoiseSource::Own;
            else if (src == "common")
                spec.source = NoiseSource::Common;
            else
                fail(where + ".source", "expected 'own' or 'common'");
        }
        return spec;
    }
    fail(where + ".kind", "unknown coefficient kind '" + kind + "'");
}

InitialSampler parse_sampler(const json& j, int dim, const std::string& where) {
    if (j.is_number() || j.is_array())
        return InitialSampler::point(parse_vec(j, dim, where));
    if (!j.is_object()) fail(where, "expected a number, array, or object");
    const std::string kind = need_string(j, "kind", where);
    if (kind == "point") return InitialSampler::point(parse_vec(need(j, "value", where), dim, where + ".value"));
    if (kind == "gaussian")
        return InitialSampler::gaussian(parse_vec(need(j, "mean", where), dim, where + ".mean"),
                                        parse_vec(need(j, "stddev", where), dim, where + ".stddev"));
    if (kind == "uniform")
        return InitialSampler::uniform(parse_vec(need(j, "lo", where), dim, where + ".lo"),
                                       parse_vec(need(j, "hi", where), dim, where + ".hi"));
    fail(where + ".kind", "unknown sampler kind '" + kind + "'");
}

namespace {

std::vector<int> parse_ladder(const json& j, const std::string& where, bool required) {
    std::vector<int> out;
    if (j.is_null()) {
        if (required) fail(where, "missing ladder");
        return out;
    }
    if (!j.is_array()) fail(where, "expected an array");
    for (const auto& e : j) {
        if (!e.is_number_integer() || e.get<int>() < 1) fail(where, "entries must be positive integers");
        out.push_back(e.get<int>());
    }
    for (size_t i = 1; i < out.size(); ++i)
        if (out[i] <= out[i - 1]) fail(where, "ladder must be strictly increasing");
    return out;
}

ToleranceBlock parse_tolerances(const json& j, const std::string& where) {
    ToleranceBlock t;
    if (j.is_null()) return t;
    if (!j.is_object()) fail(where, "expected an object");
    if (j.contains("rms_max")) t.rms_max = j["rms_max"].get<double>();
    if (j.contains("mean_se_factor")) t.mean_se_factor = j["mean_se_factor"].get<double>();
    if (j.contains("residual_max")) t.residual_max = j["residual_max"].get<double>();
    if (j.contains("monotone_n_se_factor"))
        t.monotone_n_se_factor = j["monotone_n_se_factor"].get<double>();
    auto window = [&](const char* key) -> std::optional<std::pair<double, double>> {
        if (!j.contains(key)) return std::nullopt;
        const auto& w = j[key];
        if (!w.is_array() || w.size() != 2) fail(where + "." + key, "expected [lo, hi]");
        return std::make_pair(w[0].get<double>(), w[1].get<double>());
    };
    t.slope_m_window = window("slope_m_window");
    t.slope_n_window = window("slope_n_window");
    if (j.contains("ablate")) {
        const auto& a = j["ablate"];
        ToleranceBlock::Ablation ab;
        ab.term = need_string(a, "term", where + ".ablate");
        ab.expected = need_number(a, "expected", where + ".ablate");
        ab.rel_tol = a.value("rel_tol", 0.1);
        t.ablate = ab;
    }
    return t;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.schema_version = j.value("schema_version", 1);
    if (cfg.schema_version != 1)
        fail("schema_version", "unsupported schema version " + std::to_string(cfg.schema_version));
    cfg.theorem = [&] {
        const std::string name = need_string(j, "theorem", "config");
        try {
            return theorem_from_name(name);
        } catch (const std::invalid_argument&) {
            fail("config.theorem", "unknown theorem id '" + name + "'");
        }
    }();
    cfg.dim = j.value("dim", 1);
    if (cfg.dim < 1) fail("config.dim", "must be >= 1");
    cfg.horizon = need_number(j, "horizon", "config");
    if (!(cfg.horizon > 0.0)) fail("config.horizon", "must be > 0");

    cfg.field = parse_field(need(j, "field", "config"), cfg.dim, "config.field");

    const bool conditional = cfg.theorem == TheoremId::ILConditional ||
                             cfg.theorem == TheoremId::IWLConditionalMeasure ||
                             cfg.theorem == TheoremId::IWLConditionalJoint;
    const bool needs_x = cfg.theorem == TheoremId::IWClassic ||
                         cfg.theorem == TheoremId::IWReduced || cfg.theorem == TheoremId::ILFull ||
                         cfg.theorem == TheoremId::IWLFullJoint ||
                         cfg.theorem == TheoremId::ILConditional ||
                         cfg.theorem == TheoremId::IWLConditionalJoint;
    const bool needs_cloud = cfg.theorem != TheoremId::IWClassic &&
                             cfg.theorem != TheoremId::IWReduced;

    if (j.contains("x_process")) {
        const auto& xj = j["x_process"];
        XProcessSpec xs;
        xs.mode = conditional ? NoiseMode::Conditional : NoiseMode::Single;
        xs.beta = parse_coefficient(need(xj, "beta", "config.x_process"), cfg.dim,
                                    CoeffShape::Drift, "config.x_process.beta");
        if (xs.mode == NoiseMode::Single) {
            xs.gamma = parse_coefficient(need(xj, "gamma", "config.x_process"), cfg.dim,
                                         CoeffShape::Diffusion, "config.x_process.gamma");
        } else {
            xs.gamma0 = parse_coefficient(need(xj, "gamma0", "config.x_process"), cfg.dim,
                                          CoeffShape::Diffusion, "config.x_process.gamma0");
            xs.gamma1 = parse_coefficient(need(xj, "gamma1", "config.x_process"), cfg.dim,
                                          CoeffShape::Diffusion, "config.x_process.gamma1");
        }
        xs.x0 = parse_sampler(need(xj, "x0", "config.x_process"), cfg.dim, "config.x_process.x0");
        cfg.x_process = std::move(xs);
    } else if (needs_x) {
        fail("config.x_process", std::string("required for theorem ") + theorem_name(cfg.theorem));
    }

    if (j.contains("cloud")) {
        const auto& cj = j["cloud"];
        CloudSpec cs;
        cs.mode = conditional ? NoiseMode::Conditional : NoiseMode::Single;
        cs.b = parse_coefficient(need(cj, "b", "config.cloud"), cfg.dim, CoeffShape::Drift,
                                 "config.cloud.b");
        if (cs.mode == NoiseMode::Single) {
            cs.sigma = parse_coefficient(need(cj, "sigma", "config.cloud"), cfg.dim,
                                         CoeffShape::Diffusion, "config.cloud.sigma");
        } else {
            cs.sigma0 = parse_coefficient(need(cj, "sigma0", "config.cloud"), cfg.dim,
                                          CoeffShape::Diffusion, "config.cloud.sigma0");
            cs.sigma1 = parse_coefficient(need(cj, "sigma1", "config.cloud"), cfg.dim,
                                          CoeffShape::Diffusion, "config.cloud.sigma1");
        }
        cs.y0 = parse_sampler(need(cj, "y0", "config.cloud"), cfg.dim, "config.cloud.y0");
        cfg.cloud = std::move(cs);
    } else if (needs_cloud) {
        fail("config.cloud", std::string("required for theorem ") + theorem_name(cfg.theorem));
    }

    cfg.x_point = j.contains("x_point") ? parse_vec(j["x_point"], cfg.dim, "config.x_point")
                                        : Vec(cfg.dim, 0.0);

    const json ladders = j.value("ladders", json::object());
    cfg.m_ladder = parse_ladder(ladders.value("M", json()), "config.ladders.M", true);
    cfg.n_ladder = parse_ladder(ladders.value("N", json()), "config.ladders.N", needs_cloud);
    cfg.level_ladder = parse_ladder(ladders.value("n", json()), "config.ladders.n", false);
    if (!needs_cloud && cfg.n_ladder.empty()) cfg.n_ladder = {1};

    cfg.replications = j.value("replications", 1);
    if (cfg.replications < 1) fail("config.replications", "must be >= 1");
    if (!j.contains("seed")) fail("config.seed", "missing required key");
    cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.tolerances = parse_tolerances(j.value("tolerances", json()), "config.tolerances");

    // Mode cross-checks between field and theorem.
    if (conditional && !cfg.field.two_noise())
        fail("config.field", "theorem requires a two-noise field");
    if (!conditional && cfg.field.two_noise())
        fail("config.field", "theorem requires a single-noise field");
    if ((cfg.theorem == TheoremId::ILFull || cfg.theorem == TheoremId::ILConditional) &&
        !cfg.field.deterministic())
        fail("config.field", "Ito-Lions theorems require a deterministic field");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_config(j);
}

}  // namespace lionflow
