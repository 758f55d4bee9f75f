#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "lionflow/harness.hpp"
#include "lionflow/lions.hpp"
#include "lionflow/oracles.hpp"
#include "lionflow/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lionflow;

namespace {

// Exit-code contract: 0 pass, 1 tolerance failure, 2 config error, 3 runtime
// error.
enum ExitCode { kPass = 0, kToleranceFailure = 1, kConfigError = 2, kRuntimeError = 3 };

std::string timestamp_now() {
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto t = system_clock::to_time_t(now);
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%04d%02d%02dT%02d%02d%02d.%03dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                  static_cast<int>(ms));
    return buf;
}

// Reruns never overwrite: each run gets a fresh timestamped subdirectory.
fs::path make_run_dir(const std::string& out) {
    fs::path base(out);
    fs::create_directories(base);
    for (int k = 0;; ++k) {
        fs::path dir = base / ("run-" + timestamp_now() + (k ? "-" + std::to_string(k) : ""));
        if (!fs::exists(dir)) {
            fs::create_directories(dir);
            return dir;
        }
    }
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

json row_to_json(const StatRow& row) {
    json terms = json::object();
    for (size_t t = 0; t < row.term_names.size(); ++t) terms[row.term_names[t]] = row.term_means[t];
    return json{{"M", row.m},
                {"N", row.n},
                {"n", row.level},
                {"replications", row.replications},
                {"effective", row.effective},
                {"nan_count", row.nan_count},
                {"failed", row.failed},
                {"mean_residual", row.mean},
                {"rms_residual", row.rms},
                {"se", row.se},
                {"term_means", terms}};
}

json table_to_json(const ConvergenceTable& table) {
    json rows = json::array();
    for (const auto& r : table.rows) rows.push_back(row_to_json(r));
    json j{{"rows", rows}, {"warnings", table.warnings}};
    if (table.slope_m)
        j["slope_m"] = {{"slope", table.slope_m->slope},
                        {"half_width", table.slope_m->half_width},
                        {"points", table.slope_m->points}};
    if (table.slope_n)
        j["slope_n"] = {{"slope", table.slope_n->slope},
                        {"half_width", table.slope_n->half_width},
                        {"points", table.slope_n->points}};
    return j;
}

json checks_to_json(const std::vector<CheckOutcome>& checks) {
    json arr = json::array();
    for (const auto& c : checks) arr.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    return arr;
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    int threads = 0;

    int effective_threads() const {
        if (threads > 0) return threads;
        const unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }
};

ExperimentConfig load_with_override(const CommonOpts& opts) {
    ExperimentConfig cfg = load_config(opts.config_path);
    if (opts.seed) {
        cfg.seed = *opts.seed;
        cfg.raw["seed"] = *opts.seed;
    }
    return cfg;
}

int run_study(const CommonOpts& opts, bool converge_mode) {
    const std::string started = timestamp_now();
    ExperimentConfig cfg;
    try {
        cfg = load_with_override(opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    }

    fs::path dir;
    try {
        dir = make_run_dir(opts.out_dir);
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kRuntimeError;
    }

    try {
        ConvergenceTable table = convergence_study(cfg, opts.effective_threads());
        const auto checks = apply_tolerances(cfg, table);
        bool all_pass = true;
        for (const auto& c : checks) all_pass = all_pass && c.pass;
        for (const auto& row : table.rows)
            if (row.failed) all_pass = false;

        json report = table_to_json(table);
        report["theorem"] = theorem_name(cfg.theorem);
        report["checks"] = checks_to_json(checks);
        write_file(dir / "report.json", report.dump(2) + "\n");
        write_file(dir / "terms.csv", terms_csv(table.rows));
        if (converge_mode) write_file(dir / "convergence.csv", convergence_csv(table));

        json manifest{{"tool", "lionflow"},
                      {"version", LIONFLOW_VERSION},
                      {"config", cfg.raw},
                      {"started", started},
                      {"finished", timestamp_now()},
                      {"checks", checks_to_json(checks)},
                      {"warnings", table.warnings},
                      {"pass", all_pass}};
        json outputs = json::array();
        outputs.push_back((dir / "report.json").string());
        outputs.push_back((dir / "terms.csv").string());
        if (converge_mode) outputs.push_back((dir / "convergence.csv").string());
        manifest["outputs"] = outputs;
        write_file(dir / "manifest.json", manifest.dump(2) + "\n");

        for (const auto& c : checks)
            std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << "\n";
        std::cout << "outputs: " << dir.string() << "\n";
        return all_pass ? kPass : kToleranceFailure;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kRuntimeError;
    }
}

int run_oracle(const std::string& suite, const CommonOpts& opts, double qv_distortion) {
    try {
        const OracleSuiteResult res =
            run_oracle_suite(suite, opts.effective_threads(), qv_distortion);
        for (const auto& c : res.checks)
            std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << "\n";
        return res.all_pass() ? kPass : kToleranceFailure;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kRuntimeError;
    }
}

int run_project_deriv(const CommonOpts& opts, int j_index) {
    json j;
    try {
        std::ifstream in(opts.config_path);
        if (!in) throw ConfigError("cannot open config file: " + opts.config_path);
        j = json::parse(in);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    }

    try {
        const int dim = j.value("dim", 1);
        const MeasureFunctional u = parse_functional(j.at("functional"), dim, "functional");
        EmpiricalMeasure cloud;
        if (j.contains("points")) {
            std::vector<Vec> pts;
            for (const auto& p : j["points"]) {
                if (p.is_number())
                    pts.push_back(Vec{p.get<double>()});
                else
                    pts.push_back(p.get<Vec>());
            }
            cloud = EmpiricalMeasure::from_points(pts);
        } else {
            const int n = j.at("N").get<int>();
            const std::uint64_t seed = opts.seed ? *opts.seed : j.value("seed", 0ULL);
            const auto sampler = parse_sampler(j.at("sampler"), dim, "sampler");
            SeedPolicy policy{seed};
            cloud = EmpiricalMeasure(dim, n);
            for (int l = 0; l < n; ++l) {
                RngStream s(policy.stream("projcloud", 0, static_cast<std::uint64_t>(l)));
                sampler.draw(s, cloud.point(l));
            }
        }
        FiniteDifferenceScheme scheme;
        scheme.h_base = j.value("h", 1e-4);
        Vec x(dim, 0.0);
        if (j.contains("x")) x = j["x"].get<Vec>();
        const Vec d = numeric_lions_derivative(u, cloud, j_index, scheme, x);
        for (size_t c = 0; c < d.size(); ++c) std::cout << (c ? " " : "") << format_double(d[c]);
        std::cout << "\n";
        return kPass;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kRuntimeError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lionflow: numerical verification of Ito-Wentzell-Lions chain rules"};
    app.require_subcommand(1);
    app.set_version_flag("--version", LIONFLOW_VERSION);

    CommonOpts opts;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* c = cmd->add_option("--config", opts.config_path, "experiment config (JSON)");
        if (needs_config) c->required();
        cmd->add_option("--out", opts.out_dir, "output directory");
        cmd->add_option("--seed", opts.seed, "override the config master seed");
        cmd->add_option("--threads", opts.threads,
                        "worker threads (default: machine parallelism)");
    };

    auto* verify = app.add_subcommand("verify", "run a configured theorem verification");
    add_common(verify, true);

    auto* converge = app.add_subcommand("converge", "run a configured convergence study");
    add_common(converge, true);

    auto* oracle = app.add_subcommand("oracle", "run a built-in oracle suite");
    std::string suite;
    double qv_distortion = 1.0;
    oracle->add_option("suite", suite, "one of: projection, classic, full, conditional, ablation")
        ->required();
    oracle->add_option("--threads", opts.threads, "worker threads");
    oracle->add_option("--distort-qv", qv_distortion,
                       "test hook: scale the classic suite's measured RMS")
        ->group("");  // hidden

    auto* pd = app.add_subcommand("project-deriv",
                                  "numeric Lions derivative of a configured functional");
    add_common(pd, true);
    int j_index = 0;
    pd->add_option("--j", j_index, "support point index to differentiate");

    CLI11_PARSE(app, argc, argv);

    if (verify->parsed()) return run_study(opts, false);
    if (converge->parsed()) return run_study(opts, true);
    if (oracle->parsed()) return run_oracle(suite, opts, qv_distortion);
    if (pd->parsed()) return run_project_deriv(opts, j_index);
    return kConfigError;
}
