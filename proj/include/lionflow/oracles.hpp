#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lionflow {

struct OracleCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Built-in verification oracles with pinned seeds and tolerances. Each
// criterion function returns one (or a few) named checks.
std::vector<OracleCheck> criterion_projection_identity();                 // 1
std::vector<OracleCheck> criterion_classic_qv(int threads = 1,
                                              double qv_distortion = 1.0);  // 2
std::vector<OracleCheck> criterion_full_flow_moment(int threads = 1);     // 3
std::vector<OracleCheck> criterion_convergence_slopes(int threads = 1);   // 4
std::vector<OracleCheck> criterion_conditional_pathwise(int threads = 1);  // 5
std::vector<OracleCheck> criterion_dmu_psi0_necessity(int threads = 1);   // 6
std::vector<OracleCheck> criterion_dx_dmu_necessity(int threads = 1);     // 7
std::vector<OracleCheck> criterion_reduction_lattice();                   // 8
std::vector<OracleCheck> criterion_mollified_bound();                     // 9
std::vector<OracleCheck> criterion_determinism(int threads = 1);          // 10

struct OracleSuiteResult {
    std::string suite;
    std::vector<OracleCheck> checks;
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

// Suites: projection, classic, full, conditional, ablation.
// `qv_distortion` scales the classic suite's measured RMS (negative-control
// hook); 1.0 leaves it untouched.
OracleSuiteResult run_oracle_suite(std::string_view name, int threads = 1,
                                   double qv_distortion = 1.0);
std::vector<std::string> oracle_suite_names();

}  // namespace lionflow
