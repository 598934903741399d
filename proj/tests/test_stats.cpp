#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <vector>

#include "qprbm/rng.hpp"
#include "qprbm/stats.hpp"

using namespace qprbm;

TEST_CASE("two-sample KS reference values") {
    const std::vector<double> a{0.0, 1.0};
    CHECK(ks_two_sample(a, a) == 0.0);
    const std::vector<double> b{0.5, 1.5};
    CHECK(ks_two_sample(a, b) == doctest::Approx(0.5));
    const std::vector<double> lo{0.0}, hi{1.0};
    CHECK(ks_two_sample(lo, hi) == doctest::Approx(1.0));
    CHECK_THROWS_AS(ks_two_sample({}, a), std::invalid_argument);
}

TEST_CASE("KS symmetry and monotone-transform invariance") {
    Rng rng(5, 0, 0);
    std::vector<double> a(200), b(300);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal() + 0.3;
    CHECK(ks_two_sample(a, b) == doctest::Approx(ks_two_sample(b, a)).epsilon(1e-15));
    auto f = [](double x) { return std::exp(x) + x; };  // strictly increasing
    std::vector<double> fa(a.size()), fb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) fa[i] = f(a[i]);
    for (std::size_t i = 0; i < b.size(); ++i) fb[i] = f(b[i]);
    CHECK(ks_two_sample(fa, fb) == doctest::Approx(ks_two_sample(a, b)).epsilon(1e-15));
}

TEST_CASE("KS critical value") {
    // c(0.01) = sqrt(-ln(0.005)/2) ~ 1.6276
    const double crit = ks_two_sample_critical(2000, 2000, 0.01);
    CHECK(crit == doctest::Approx(1.6276 * std::sqrt(2.0 / 2000.0)).epsilon(1e-4));
}

TEST_CASE("log-log slope exact on power laws") {
    const std::vector<double> eps{0.1, 0.2, 0.4};
    std::vector<double> y2(eps.size()), y43(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        y2[i] = 5.0 * eps[i] * eps[i];
        y43[i] = std::pow(eps[i], 4.0 / 3.0);
    }
    const SlopeFit f2 = loglog_slope(eps, y2);
    CHECK(f2.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f2.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f2.intercept == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    const SlopeFit f43 = loglog_slope(eps, y43);
    CHECK(f43.slope == doctest::Approx(4.0 / 3.0).epsilon(1e-12));

    std::vector<double> bad{0.1, -0.2, 0.4};
    CHECK_THROWS_AS(loglog_slope(eps, bad), std::invalid_argument);
    CHECK_THROWS_AS(loglog_slope(std::vector<double>{0.1, 0.2}, std::vector<double>{1.0, 2.0}),
                    std::invalid_argument);
}

TEST_CASE("mean CI basics") {
    const std::vector<double> constant(10, 3.5);
    const MeanCI ci = mean_ci(constant);
    CHECK(ci.mean == 3.5);
    CHECK(ci.half_width == 0.0);

    Rng rng(6, 0, 0);
    std::vector<double> xs(4000);
    for (auto& v : xs) v = 2.0 + rng.normal();
    const MeanCI c2 = mean_ci(xs);
    CHECK(std::abs(c2.mean - 2.0) < 3.0 * c2.half_width);
    CHECK(c2.half_width == doctest::Approx(1.96 / std::sqrt(4000.0)).epsilon(0.1));
}

TEST_CASE("bootstrap CI is comparable to the normal CI on well-behaved data") {
    Rng rng(7, 0, 0);
    std::vector<double> xs(2000);
    for (auto& v : xs) v = rng.exponential(1.0);
    const MeanCI normal = mean_ci(xs);
    const MeanCI boot = bootstrap_mean_ci(xs);
    CHECK(boot.mean == normal.mean);
    CHECK(boot.half_width == doctest::Approx(normal.half_width).epsilon(0.25));
}
