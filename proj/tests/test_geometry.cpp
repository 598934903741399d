#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <string>

#include "qprbm/geometry.hpp"
#include "qprbm/rng.hpp"

using namespace qprbm;

namespace {
const double kPi = 3.14159265358979323846;
const double kR3 = std::sqrt(3.0);

RateFamily symmetric_43() {
    RateFamily f;
    f.lambda = f.mu = {1.0, 1.0};
    f.nu = {kR3, kR3};
    return f;
}

bool mentions(const std::vector<std::string>& v, const char* what) {
    for (const auto& s : v)
        if (s.find(what) != std::string::npos) return true;
    return false;
}
}  // namespace

TEST_CASE("validate: admissible family has an empty report") {
    CHECK(validate(symmetric_43()).empty());
}

TEST_CASE("validate: boundary and heavy-traffic violations") {
    RateFamily f;
    f.lambda = f.mu = {1.0, 1.0};
    f.nu = {1.0, 1.0};
    auto v = validate(f);
    REQUIRE(v.size() == 1);
    CHECK(mentions(v, "boundary case"));

    RateFamily g;
    g.lambda = {1.0, 1.0};
    g.mu = {2.0, 1.0};
    g.nu = {3.0, 3.0};
    CHECK(mentions(validate(g), "heavy traffic lambda_1 = mu_1"));
}

TEST_CASE("limit data for the symmetric alpha* = 4/3 family") {
    const LimitData d = limit_data(symmetric_43());
    CHECK(d.b.x1 == 0.0);
    CHECK(d.b.x2 == 0.0);
    CHECK(d.sigma.x1 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(d.d1.x1 == 1.0);
    CHECK(d.d1.x2 == doctest::Approx(-kR3).epsilon(1e-15));
    CHECK(d.d2.x2 == 1.0);
    CHECK(d.theta_star.x1 == doctest::Approx(kPi / 3.0).epsilon(1e-14));
    CHECK(d.theta_star.x2 == doctest::Approx(kPi / 3.0).epsilon(1e-14));
    CHECK(d.alpha_star == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    CHECK(d.beta.x1 == doctest::Approx(1.0 / (1.0 + kR3)).epsilon(1e-15));
    CHECK(d.h.x1 == doctest::Approx(1.0 / (1.0 + kR3)).epsilon(1e-15));
}

TEST_CASE("limit data for the asymmetric mu=(1,4), nu=(3,2) family") {
    RateFamily f;
    f.lambda = f.mu = {1.0, 4.0};
    f.nu = {3.0, 2.0};
    const LimitData d = limit_data(f);
    CHECK(d.theta_star.x1 == doctest::Approx(kPi / 4.0).epsilon(1e-14));
    CHECK(d.theta_star.x2 == doctest::Approx(std::atan(1.5)).epsilon(1e-14));
    const double expect = (kPi / 4.0 + std::atan(1.5)) / (kPi / 2.0);
    CHECK(d.alpha_star == doctest::Approx(expect).epsilon(1e-14));
    CHECK(d.alpha_star == doctest::Approx(1.12567).epsilon(1e-4));
}

TEST_CASE("symmetric nu = mu gives alpha* = 1 exactly") {
    RateFamily f;
    f.lambda = f.mu = {1.0, 1.0};
    f.nu = {1.0, 1.0};
    CHECK(limit_data(f).alpha_star == 1.0);
}

TEST_CASE("regime classification") {
    CHECK(regime_of(4.0 / 3.0) == Regime::NonSemimartingale);
    CHECK(regime_of(0.5) == Regime::Srbm);
    CHECK(regime_of(1.0) == Regime::ExtendedSkorohod);
    CHECK(regime_of(1.0 + 5e-13) == Regime::ExtendedSkorohod);
    CHECK_THROWS_AS(regime_of(2.0), std::invalid_argument);
    CHECK_THROWS_AS(regime_of(-2.5), std::invalid_argument);
}

TEST_CASE("level rates: affine family") {
    RateFamily f = symmetric_43();
    f.hat_lambda = {0.5, 0.0};
    const LevelRates lr = level_rates(f, 100);
    CHECK(lr.lambda.x1 == 105.0);
    CHECK(lr.lambda.x2 == 100.0);

    const LevelRates sym = level_rates(symmetric_43(), 64);
    CHECK(sym.lambda.x1 == 64.0);
    CHECK(sym.nu.x1 == doctest::Approx(64.0 * kR3).epsilon(1e-15));

    RateFamily bad = symmetric_43();
    bad.hat_lambda = {-11.0, 0.0};
    CHECK_THROWS_AS(level_rates(bad, 100), std::invalid_argument);
}

TEST_CASE("rescaled deviations are n-independent") {
    RateFamily f;
    f.lambda = f.mu = {0.5, 2.0};
    f.nu = {2.0, 1.0};
    f.hat_lambda = {0.25, -0.5};
    f.hat_mu = {0.125, 0.25};
    for (std::int64_t n : {4, 16, 64, 144, 400, 1024, 6400}) {
        const LevelRates lr = level_rates(f, n);
        const double rn = std::sqrt(static_cast<double>(n));
        CHECK((lr.lambda.x1 - n * f.lambda.x1) / rn == f.hat_lambda.x1);
        CHECK((lr.lambda.x2 - n * f.lambda.x2) / rn == f.hat_lambda.x2);
        CHECK((lr.mu.x1 - n * f.mu.x1) / rn == f.hat_mu.x1);
    }
}

TEST_CASE("gps-ps mapping") {
    const RateFamily f = gps_ps_to_base({0.4, 0.4}, {1.0, 1.0}, {});
    CHECK(f.mu.x1 == doctest::Approx(0.4));
    CHECK(f.nu.x1 == doctest::Approx(0.6));
    CHECK(f.nu.x1 * f.nu.x2 > f.mu.x1 * f.mu.x2);
    CHECK(validate(f).empty());

    CHECK_THROWS_AS(gps_ps_to_base({0.5, 0.5}, {1.0, 1.0}, {}), std::invalid_argument);

    const RateFamily g = gps_ps_to_base({0.3, 0.5}, {2.0, 1.0}, {});
    const LimitData d = limit_data(g);
    CHECK(d.d1.x1 == 1.0);
    CHECK(d.d1.x2 == doctest::Approx(-5.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("coupled processor mapping is the identity") {
    const RateFamily f = coupled_to_base({1.0, 1.0}, {1.0, 1.0}, {2.0, 2.0});
    CHECK(f.mu.x1 == 1.0);
    CHECK(f.nu.x1 == 2.0);
    CHECK(validate(f).empty());

    RateFamily g = coupled_to_base({1.0, 4.0}, {1.0, 4.0}, {3.0, 2.0});
    CHECK(limit_data(g).alpha_star == doctest::Approx(1.12567).epsilon(1e-4));

    const RateFamily h = coupled_to_base({1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0});
    CHECK_FALSE(validate(h).empty());
}

TEST_CASE("alpha* agrees with the closed form on random families") {
    Rng rng(321, 0, 0);
    for (int k = 0; k < 1000; ++k) {
        RateFamily f;
        f.mu = {0.1 + 4.0 * rng.uniform(), 0.1 + 4.0 * rng.uniform()};
        f.lambda = f.mu;
        f.nu = {0.1 + 4.0 * rng.uniform(), 0.1 + 4.0 * rng.uniform()};
        const LimitData d = limit_data(f);
        // sigma_i = sqrt(2 mu_i) makes theta*_i = arctan(nu_{i#}/sqrt(mu1 mu2)).
        const double root = std::sqrt(f.mu.x1 * f.mu.x2);
        const double t1 = std::atan(f.nu.x2 / root);
        const double t2 = std::atan(f.nu.x1 / root);
        CHECK(std::abs(d.alpha_star - (t1 + t2) / (kPi / 2.0)) < 1e-12);
        // Sign equivalence with the regime condition.
        const double lhs = f.nu.x1 * f.nu.x2;
        const double rhs = f.mu.x1 * f.mu.x2;
        if (lhs > rhs) CHECK(d.alpha_star > 1.0);
        if (lhs < rhs) CHECK(d.alpha_star < 1.0);
    }
}

TEST_CASE("gps-ps slowdown is equivalent to alpha* > 1") {
    Rng rng(654, 0, 0);
    for (int k = 0; k < 500; ++k) {
        const double p1 = 0.05 + 0.9 * rng.uniform();
        const double p2 = 0.05 + 0.9 * rng.uniform();
        if (p1 + p2 >= 0.999) continue;
        const RateFamily f =
            gps_ps_to_base({p1, p2}, {0.2 + 3.0 * rng.uniform(), 0.2 + 3.0 * rng.uniform()}, {});
        CHECK(limit_data(f).alpha_star > 1.0);
    }
}
