#include "qprbm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qprbm/rng.hpp"

namespace qprbm {

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < sa.size() && j < sb.size()) {
        const double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] <= x) ++i;
        while (j < sb.size() && sb[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_two_sample_critical(std::size_t m, std::size_t n, double alpha) {
    if (m == 0 || n == 0) throw std::invalid_argument("ks_two_sample_critical: empty sample");
    const double c = std::sqrt(-std::log(alpha / 2.0) / 2.0);
    const double md = static_cast<double>(m), nd = static_cast<double>(n);
    return c * std::sqrt((md + nd) / (md * nd));
}

SlopeFit loglog_slope(std::span<const double> x, std::span<const double> y,
                      std::span<const double> y_se) {
    if (x.size() != y.size() || x.size() < 3)
        throw std::invalid_argument("loglog_slope: need >= 3 pairs");
    SlopeFit fit;
    fit.points.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw std::invalid_argument("loglog_slope: values must be strictly positive");
        fit.points.emplace_back(std::log(x[i]), std::log(y[i]));
    }
    const double n = static_cast<double>(fit.points.size());
    double mx = 0.0, my = 0.0;
    for (auto [lx, ly] : fit.points) {
        mx += lx;
        my += ly;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (auto [lx, ly] : fit.points) {
        sxx += (lx - mx) * (lx - mx);
        sxy += (lx - mx) * (ly - my);
        syy += (ly - my) * (ly - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("loglog_slope: degenerate abscissae");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    if (!y_se.empty()) {
        if (y_se.size() != y.size())
            throw std::invalid_argument("loglog_slope: mismatched standard errors");
        // delta method: se(log y) = se(y)/y; slope is a linear combination
        // with weights (lx - mx)/sxx.
        double v = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double w = (fit.points[i].first - mx) / sxx;
            const double se_log = y_se[i] / y[i];
            v += w * w * se_log * se_log;
        }
        fit.slope_se = std::sqrt(v);
    }
    return fit;
}

namespace {
double z_for_level(double level) {
    if (level >= 0.99) return 2.5758293035489004;
    if (level >= 0.95) return 1.959963984540054;
    return 1.6448536269514722;
}
}  // namespace

MeanCI mean_ci(std::span<const double> samples, double level) {
    if (samples.empty()) throw std::invalid_argument("mean_ci: empty sample");
    MeanCI out;
    out.n = samples.size();
    out.level = level;
    double s = 0.0;
    for (double v : samples) s += v;
    out.mean = s / static_cast<double>(out.n);
    if (out.n > 1) {
        double ss = 0.0;
        for (double v : samples) ss += (v - out.mean) * (v - out.mean);
        const double var = ss / static_cast<double>(out.n - 1);
        out.half_width = z_for_level(level) * std::sqrt(var / static_cast<double>(out.n));
    }
    return out;
}

MeanCI bootstrap_mean_ci(std::span<const double> samples, double level, std::size_t resamples,
                         std::uint64_t seed) {
    if (samples.empty()) throw std::invalid_argument("bootstrap_mean_ci: empty sample");
    const std::size_t n = samples.size();
    std::vector<double> means(resamples);
    Rng rng(seed, 0, 0xb007);
    for (std::size_t r = 0; r < resamples; ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = static_cast<std::size_t>(rng.next_u64() % n);
            s += samples[j];
        }
        means[r] = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const double tail = (1.0 - level) / 2.0;
    const auto pick = [&](double q) {
        const double pos = q * static_cast<double>(resamples - 1);
        return means[static_cast<std::size_t>(pos)];
    };
    MeanCI out;
    out.n = n;
    out.level = level;
    double s = 0.0;
    for (double v : samples) s += v;
    out.mean = s / static_cast<double>(n);
    out.half_width = (pick(1.0 - tail) - pick(tail)) / 2.0;
    return out;
}

}  // namespace qprbm
