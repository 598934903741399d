#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace qprbm {

// Two-sample Kolmogorov-Smirnov statistic: sup_x |F_a(x) - F_b(x)|.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

// Asymptotic two-sample critical value at significance alpha:
//   c(alpha) sqrt((m+n)/(m n)),  c(alpha) = sqrt(-ln(alpha/2)/2).
double ks_two_sample_critical(std::size_t m, std::size_t n, double alpha);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_se = 0.0;  // from the per-point standard errors, if given
    std::vector<std::pair<double, double>> points;  // (log x, log y)
};

// Least-squares fit of log y against log x. Requires >= 3 strictly positive
// pairs. Optional per-point standard errors of y propagate into slope_se.
SlopeFit loglog_slope(std::span<const double> x, std::span<const double> y,
                      std::span<const double> y_se = {});

struct MeanCI {
    double mean = 0.0;
    double half_width = 0.0;
    std::size_t n = 0;
    double level = 0.95;
};

// Normal-approximation confidence interval for the mean.
MeanCI mean_ci(std::span<const double> samples, double level = 0.95);

// Percentile bootstrap for the mean (for heavy-tailed duration data).
MeanCI bootstrap_mean_ci(std::span<const double> samples, double level = 0.95,
                         std::size_t resamples = 1000, std::uint64_t seed = 0x5eed);

}  // namespace qprbm
