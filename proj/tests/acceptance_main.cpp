// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criteria anchor the verification contract of the library:
//  1  projection-identity suite across the functional catalogue
//  2  classical Ito-Wentzell quadratic-variation oracle
//  3  full-flow Gaussian second-moment oracle
//  4  convergence slopes and N-monotonicity
//  5  conditional squared-mean pathwise oracle
//  6  dmu-psi0 term necessity
//  7  dx-dmu cross term necessity
//  8  reduction lattice under shared seeds
//  9  mollified-projection bounds
// 10  byte determinism

#include <chrono>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "lionflow/oracles.hpp"

using namespace lionflow;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& title, const std::vector<OracleCheck>& checks) {
    bool pass = true;
    for (const auto& c : checks) pass = pass && c.pass;
    if (!pass) ++g_failures;
    std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, title.c_str());
    for (const auto& c : checks)
        std::printf("        %s %s: %s\n", c.pass ? "ok  " : "FAIL", c.name.c_str(),
                    c.detail.c_str());
    std::fflush(stdout);
}

}  // namespace

int main() {
    const unsigned hw = std::thread::hardware_concurrency();
    const int threads = hw > 0 ? static_cast<int>(hw) : 1;
    const auto t0 = std::chrono::steady_clock::now();

    report(1, "projection identities across the catalogue", criterion_projection_identity());
    report(2, "classical Ito-Wentzell quadratic-variation band", criterion_classic_qv(threads));
    report(3, "full-flow Gaussian second-moment oracle", criterion_full_flow_moment(threads));
    report(4, "convergence slopes and N-monotonicity", criterion_convergence_slopes(threads));
    report(5, "conditional squared-mean pathwise oracle",
           criterion_conditional_pathwise(threads));
    report(6, "dmu-psi0 term necessity", criterion_dmu_psi0_necessity(threads));
    report(7, "dx-dmu cross term necessity", criterion_dx_dmu_necessity(threads));
    report(8, "reduction lattice under shared seeds", criterion_reduction_lattice());
    report(9, "mollified-projection bounds", criterion_mollified_bound());
    report(10, "byte determinism of terms.csv", criterion_determinism(threads));

    const auto dt = std::chrono::duration_cast<std::chrono::seconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    std::printf("%d of 10 criteria passed (%llds)\n", 10 - g_failures,
                static_cast<long long>(dt));
    return g_failures == 0 ? 0 : 1;
}
