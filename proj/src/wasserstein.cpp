#include "lionflow/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lionflow/errors.hpp"

namespace lionflow {

namespace {

double w2sq_sorted_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    std::vector<double> a = mu.flat;
    std::vector<double> b = nu.flat;
    std::stable_sort(a.begin(), a.end());
    std::stable_sort(b.begin(), b.end());
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    // Integrate |F^{-1}(q) - G^{-1}(q)|^2 over the merged quantile grid.
    double total = 0.0;
    int i = 0, j = 0;
    double q = 0.0;
    while (i < n && j < m) {
        const double qi = static_cast<double>(i + 1) / n;
        const double qj = static_cast<double>(j + 1) / m;
        const double nq = std::min(qi, qj);
        const double diff = a[i] - b[j];
        total += diff * diff * (nq - q);
        q = nq;
        if (qi <= qj) ++i;
        if (qj <= qi) ++j;
    }
    return total;
}

// Exact assignment cost via the Hungarian algorithm with potentials
// (shortest augmenting paths), O(N^3).
double assignment_cost(const std::vector<std::vector<double>>& a) {
    const int n = static_cast<int>(a.size());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    double cost = 0.0;
    for (int j = 1; j <= n; ++j) cost += a[p[j] - 1][j - 1];
    return cost;
}

}  // namespace

double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dim != nu.dim) throw std::invalid_argument("wasserstein2: dimension mismatch");
    if (mu.size() < 1 || nu.size() < 1)
        throw std::invalid_argument("wasserstein2: empty measure");

    if (mu.dim == 1) return std::sqrt(std::max(0.0, w2sq_sorted_1d(mu, nu)));

    const int n = mu.size();
    if (n != nu.size())
        throw unsupported_operation("wasserstein2: unequal sizes in dimension >= 2");
    if (n > 512) throw unsupported_operation("wasserstein2: exact assignment capped at N = 512");

    // Canonical argument order: both orientations then run the identical
    // computation, so symmetry holds exactly.
    const EmpiricalMeasure* first = &mu;
    const EmpiricalMeasure* second = &nu;
    if (std::lexicographical_compare(nu.flat.begin(), nu.flat.end(), mu.flat.begin(),
                                     mu.flat.end()))
        std::swap(first, second);
    const EmpiricalMeasure& a_m = *first;
    const EmpiricalMeasure& b_m = *second;

    std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
        auto xi = a_m.point(i);
        for (int j = 0; j < n; ++j) {
            auto yj = b_m.point(j);
            double s = 0.0;
            for (int c = 0; c < mu.dim; ++c) {
                const double d = xi[c] - yj[c];
                s += d * d;
            }
            cost[i][j] = s;
        }
    }
    return std::sqrt(std::max(0.0, assignment_cost(cost) / n));
}

}  // namespace lionflow
