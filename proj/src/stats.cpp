#include "lionflow/stats.hpp"

namespace lionflow {

std::optional<SlopeFit> fit_loglog_slope(const std::vector<std::pair<double, double>>& xy) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& [x, y] : xy)
        if (x > 0.0 && y > 0.0) pts.emplace_back(std::log2(x), std::log2(y));
    const int n = static_cast<int>(pts.size());
    if (n < 3) return std::nullopt;

    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (sxx <= 0.0) return std::nullopt;
    const double b = sxy / sxx;

    double ssr = 0.0;
    for (const auto& [x, y] : pts) {
        const double e = y - my - b * (x - mx);
        ssr += e * e;
    }
    SlopeFit fit;
    fit.slope = -b;  // decay order
    fit.points = n;
    fit.half_width = (n > 2) ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
    return fit;
}

}  // namespace lionflow
