#include "qprbm/girsanov.hpp"

#include <cmath>
#include <stdexcept>

namespace qprbm {

namespace {

// Per-clock base and perturbation of the affine family, in clock order
// A1, A2, D1, D2, B1, B2.
void clock_rates(const RateFamily& p, double base[6], double hat[6]) {
    base[0] = p.lambda.x1;
    base[1] = p.lambda.x2;
    base[2] = p.mu.x1;
    base[3] = p.mu.x2;
    base[4] = p.mu.x1 + p.nu.x1;
    base[5] = p.mu.x2 + p.nu.x2;
    hat[0] = p.hat_lambda.x1;
    hat[1] = p.hat_lambda.x2;
    hat[2] = p.hat_mu.x1;
    hat[3] = p.hat_mu.x2;
    hat[4] = p.hat_mu.x1 + p.hat_nu.x1;
    hat[5] = p.hat_mu.x2 + p.hat_nu.x2;
}

}  // namespace

LikelihoodCertificate likelihood_ratio(const PathRecord& rec, const RateFamily& target,
                                       double S) {
    if (rec.construction != Construction::MarkedClocks)
        throw std::invalid_argument(
            "likelihood_ratio: clock counts require the marked-clocks construction");
    if (S != rec.horizon)
        throw std::invalid_argument("likelihood_ratio: S must equal the record horizon");
    const double nd = static_cast<double>(rec.n);
    const double rn = std::sqrt(nd);
    double base[6], hat[6];
    clock_rates(target, base, hat);
    // The record must have run under the symmetric law n * base.
    for (int c = 0; c < 6; ++c) {
        const double sym = nd * base[c];
        const double rec_rate = c < 2   ? (c == 0 ? rec.rates.lambda.x1 : rec.rates.lambda.x2)
                                : c < 4 ? (c == 2 ? rec.rates.mu.x1 : rec.rates.mu.x2)
                                        : (c == 4 ? rec.rates.mu.x1 + rec.rates.nu.x1
                                                  : rec.rates.mu.x2 + rec.rates.nu.x2);
        if (std::abs(rec_rate - sym) > 1e-9 * sym)
            throw std::invalid_argument(
                "likelihood_ratio: record was not simulated under the symmetric law of the "
                "target base rates");
    }

    LikelihoodCertificate cert;
    double log_l = 0.0;
    for (int c = 0; c < 6; ++c) {
        const double sym = nd * base[c];
        const double tgt = sym + rn * hat[c];
        if (!(tgt > 0.0))
            throw std::invalid_argument("likelihood_ratio: target level rate nonpositive");
        const double ratio = tgt / sym;
        const double count = static_cast<double>(rec.clock_counts[c]);
        const double lf = std::log(ratio) * count + sym * S * (1.0 - ratio);
        cert.factors[c] = {static_cast<Clock>(c), rec.clock_counts[c], ratio, lf};
        log_l += lf;
    }
    cert.log_l = log_l;
    cert.l = std::exp(log_l);
    cert.analytic_second_moment_bound = second_moment_bound(target, S);
    return cert;
}

double second_moment_bound(const RateFamily& target, double S) {
    double base[6], hat[6];
    clock_rates(target, base, hat);
    double c_max = 0.0;
    for (int c = 0; c < 6; ++c) {
        if (!(base[c] > 0.0))
            throw std::invalid_argument("second_moment_bound: base rates must be positive");
        c_max = std::max(c_max, std::abs(hat[c]) / base[c]);
    }
    const double sum = (target.lambda.x1 + 2.0 * target.mu.x1 + target.nu.x1) +
                       (target.lambda.x2 + 2.0 * target.mu.x2 + target.nu.x2);
    return std::exp(c_max * c_max * sum * S);
}

BoundReport verify_bound(std::span<const double> l_samples, const RateFamily& target,
                         double S) {
    if (l_samples.empty()) throw std::invalid_argument("verify_bound: empty input");
    BoundReport rep;
    rep.n = l_samples.size();
    double s = 0.0, s2 = 0.0;
    for (double l : l_samples) {
        s += l;
        s2 += l * l;
    }
    const double n = static_cast<double>(rep.n);
    rep.mean_l = s / n;
    rep.mean_l2 = s2 / n;
    double ss = 0.0;
    for (double l : l_samples) ss += (l - rep.mean_l) * (l - rep.mean_l);
    rep.se_l = rep.n > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    rep.bound = second_moment_bound(target, S);
    rep.mean_within_3se = std::abs(rep.mean_l - 1.0) <= 3.0 * rep.se_l;
    rep.second_moment_ok = rep.mean_l2 <= rep.bound;
    return rep;
}

Estimate reweighted_expectation(std::span<const double> weights,
                                std::span<const double> values) {
    if (weights.size() != values.size() || weights.empty())
        throw std::invalid_argument("reweighted_expectation: mismatched or empty inputs");
    bool any = false;
    for (double w : weights) {
        if (w != 0.0) {
            any = true;
            break;
        }
    }
    if (!any) throw std::invalid_argument("reweighted_expectation: degenerate weights");
    const std::size_t n = weights.size();
    std::vector<double> prod(n);
    for (std::size_t i = 0; i < n; ++i) prod[i] = weights[i] * values[i];
    return sample_mean(prod);
}

Estimate sample_mean(std::span<const double> values) {
    Estimate e;
    e.n = values.size();
    if (e.n == 0) return e;
    double s = 0.0;
    for (double v : values) s += v;
    e.value = s / static_cast<double>(e.n);
    if (e.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - e.value) * (v - e.value);
        e.se = std::sqrt(ss / static_cast<double>(e.n - 1) / static_cast<double>(e.n));
    }
    return e;
}

}  // namespace qprbm
