#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "qprbm/ctmc.hpp"
#include "qprbm/geometry.hpp"

namespace qprbm {

struct ClockFactor {
    Clock clock;
    std::uint64_t count = 0;   // total firings N(S), gated-off included
    double rate_ratio = 1.0;   // target rate / symmetric rate
    double log_factor = 0.0;   // log of the per-clock density factor
};

// Realized likelihood ratio L^n_S = dP / dPtilde on the driving clocks,
// evaluated on one symmetric-law trajectory, together with the analytic
// second-moment bound exp{C^2 sum_i (lambda_i + 2 mu_i + nu_i) S}.
struct LikelihoodCertificate {
    double log_l = 0.0;
    double l = 1.0;
    std::array<ClockFactor, 6> factors{};
    double analytic_second_moment_bound = 1.0;
};

// rec must come from the marked-clocks construction under the symmetric
// level rates of `target`'s base (hat terms realized as zero); S must equal
// the record horizon and n must match the record.
LikelihoodCertificate likelihood_ratio(const PathRecord& rec, const RateFamily& target,
                                       double S);

// C = max over the six clocks of sqrt(n) |rate ratio - 1|, which is exactly
// |hat_r|/r for the affine family; bound = exp{C^2 sum_i (l_i + 2 m_i + n_i) S}.
double second_moment_bound(const RateFamily& target, double S);

struct BoundReport {
    std::size_t n = 0;
    double mean_l = 0.0, se_l = 0.0;
    double mean_l2 = 0.0;
    double bound = 1.0;
    bool mean_within_3se = false;
    bool second_moment_ok = false;
};
BoundReport verify_bound(std::span<const double> l_samples, const RateFamily& target, double S);

struct Estimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

// Importance-sampling estimate Etilde[L f] with a normal-approximation CI.
// Throws when all weights vanish.
Estimate reweighted_expectation(std::span<const double> weights,
                                std::span<const double> values);

Estimate sample_mean(std::span<const double> values);

}  // namespace qprbm
