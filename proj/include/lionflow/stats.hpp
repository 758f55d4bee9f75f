#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

namespace lionflow {

// Accumulates mean / RMS / standard error in a fixed summation order.
class RunningStat {
public:
    void add(double x) {
        ++n_;
        sum_ += x;
        sumsq_ += x * x;
    }
    int count() const { return n_; }
    double mean() const { return n_ ? sum_ / n_ : 0.0; }
    double rms() const { return n_ ? std::sqrt(sumsq_ / n_) : 0.0; }
    double variance() const {
        if (n_ < 1) return 0.0;
        const double m = mean();
        return std::max(0.0, sumsq_ / n_ - m * m);
    }
    double se() const { return n_ > 0 ? std::sqrt(variance() / n_) : 0.0; }

private:
    int n_ = 0;
    double sum_ = 0.0;
    double sumsq_ = 0.0;
};

// Ordinary least squares fit of log2(y) against log2(x); `slope` is the decay
// order (positive when y decreases in x) and `half_width` the one-sigma
// uncertainty from the fit's residual variance. Requires >= 3 points with
// positive y.
struct SlopeFit {
    double slope = 0.0;
    double half_width = 0.0;
    int points = 0;
};

std::optional<SlopeFit> fit_loglog_slope(const std::vector<std::pair<double, double>>& xy);

}  // namespace lionflow
